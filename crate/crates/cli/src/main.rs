//! Command-line front end: simulation runs, Jacobi fields, curvature samples
//! and file exports.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use axizeit_core::algebra::{metric_ext, normalized_sectional_curvature, ricci, BracketParams, ExtElement};
use axizeit_core::io::{
    field_grid, init_threads_from_env, make_initial_random, make_initial_sim1, read_snapshot, run, write_grid,
    write_snapshot, GridField, SimConfig, Snapshot, RANDOM_LMAX,
};
use axizeit_core::jacobi::{detect_conjugate_with, Branch, Detection};
use axizeit_core::rng::SplitMix64;
use axizeit_core::{Context, Error};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "axizeit", version, about = "Zeitlin model of axisymmetric Euler flow on S³")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Continue a run from one of its snapshots.
    Resume {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Conjugate times along the steady geodesic: predicted vs detected, as CSV.
    Jacobi {
        #[arg(long)]
        l: usize,
        #[arg(long, allow_negative_numbers = true)]
        m: i64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Sectional (and optionally Ricci) curvature of random planes, as CSV.
    Curvature {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Scale::Physical)]
        scale: Scale,
        /// Also print Ric(u,u)/|u|² for the first vector of each plane.
        #[arg(long)]
        ricci: bool,
    },
    /// Sample one field of a snapshot on a latitude-longitude grid.
    ExportGrid {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        nlat: usize,
        #[arg(long)]
        nlon: usize,
        #[arg(long, value_parser = ["vorticity", "swirl", "stream"])]
        field: String,
        /// Defaults to <snapshot>_<field>.azg next to the snapshot.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the initial state of a preset as a t = 0 snapshot.
    MakeInitial {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = RANDOM_LMAX)]
        lmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    /// The 1/ħ bracket of the dynamics.
    Physical,
    /// The plain commutator.
    Unit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Sim1,
    Random,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidArgument(_) => "invalid_argument",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::Truncation { .. } => "truncation",
        Error::NonzeroTrace { .. } => "nonzero_trace",
        Error::SingularOperator(_) => "singular_operator",
        Error::Unsupported(_) => "unsupported",
        Error::DegeneratePlane { .. } => "degenerate_plane",
        Error::StepFailure { .. } => "step_failure",
        Error::StructureDrift { .. } => "structure_drift",
        Error::ImaginaryResidue { .. } => "imaginary_residue",
        Error::Format { .. } => "format",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.kind().as_str().unwrap_or("invalid usage"));
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match init_threads_from_env().and_then(|_| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(error_kind(&e), &e.to_string());
            // Configuration problems are usage errors.
            ExitCode::from(if matches!(e, Error::Config(_) | Error::InvalidArgument(_)) { 2 } else { 1 })
        }
    }
}

fn dispatch(cmd: Command) -> axizeit_core::Result<()> {
    match cmd {
        Command::Run { config } => run_cmd(&config, None),
        Command::Resume { snapshot, config } => run_cmd(&config, Some(&snapshot)),
        Command::Jacobi { l, m, n, tmax, dt } => jacobi_cmd(l, m, n, tmax, dt),
        Command::Curvature { n, samples, seed, scale, ricci } => curvature_cmd(n, samples, seed, scale, ricci),
        Command::ExportGrid { snapshot, nlat, nlon, field, out } => export_cmd(&snapshot, nlat, nlon, &field, out),
        Command::MakeInitial { preset, n, lmax, seed, out } => make_initial_cmd(preset, n, lmax, seed, &out),
    }
}

fn run_cmd(config: &Path, snapshot: Option<&Path>) -> axizeit_core::Result<()> {
    let cfg = SimConfig::load(config)?;
    let resume = snapshot.map(read_snapshot).transpose()?;
    let summary = run(&cfg, resume)?;
    let line = serde_json::json!({
        "t": summary.final_state.t,
        "steps": summary.steps,
        "snapshots": summary.snapshots.len(),
        "last_snapshot": summary.snapshots.last(),
        "diagnostics": summary.diagnostics,
    });
    println!("{line}");
    Ok(())
}

/// One row per predicted time 4πkℓ/m (zeros of the Z4 block) and
/// 4πk(ℓ+1)/m (Z3 block), matched to the nearest detection of that block.
fn jacobi_cmd(l: usize, m: i64, n: usize, tmax: f64, dt: f64) -> axizeit_core::Result<()> {
    if !(tmax > 0.0 && tmax.is_finite()) {
        return Err(Error::InvalidArgument(format!("tmax must be positive, got {tmax}")));
    }
    if l == 0 || m == 0 {
        return Err(Error::InvalidArgument("conjugate times need l >= 1 and m != 0".into()));
    }
    let ctx = Context::new(n)?;
    let found = detect_conjugate_with(l, m, &ctx, dt, tmax)?;
    let mf = m.unsigned_abs() as f64;
    let mut rows = Vec::new();
    for (factor, branch) in [(l, Branch::Z4), (l + 1, Branch::Z3)] {
        for k in 1.. {
            let t = 4.0 * PI * (k * factor) as f64 / mf;
            if t > tmax {
                break;
            }
            let near = found
                .iter()
                .filter(|d| d.branch == branch)
                .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()));
            rows.push((k, t, near.copied()));
        }
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out = std::io::stdout().lock();
    writeln!(out, "l,m,k,predicted_time,detected_time,gap")?;
    for (k, t, near) in &rows {
        match near {
            Some(d) => writeln!(out, "{l},{m},{k},{t:.10},{:.10},{:.3e}", d.t, d.t - t)?,
            None => writeln!(out, "{l},{m},{k},{t:.10},,")?,
        }
    }
    let extra: Vec<&Detection> =
        found.iter().filter(|d| !rows.iter().any(|(_, t, _)| (d.t - t).abs() <= 2.0 * dt)).collect();
    if !extra.is_empty() {
        let list: Vec<String> = extra.iter().map(|d| format!("{:.6}({:?})", d.t, d.branch)).collect();
        eprintln!("additional zeros of the Jacobi field: {}", list.join(" "));
    }
    Ok(())
}

fn curvature_cmd(n: usize, samples: usize, seed: u64, scale: Scale, with_ricci: bool) -> axizeit_core::Result<()> {
    let ctx = Context::new(n)?;
    let params = match scale {
        Scale::Physical => BracketParams::physical(&ctx),
        Scale::Unit => BracketParams::with_scale(&ctx, 1.0)?,
    };
    let mut rng = SplitMix64::new(seed);
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", if with_ricci { "sample,sectional,ricci" } else { "sample,sectional" })?;
    for i in 0..samples {
        let u = ExtElement::random(n, &mut rng);
        let v = ExtElement::random(n, &mut rng);
        let k = normalized_sectional_curvature(&u, &v, &params)?;
        if with_ricci {
            let r = ricci(&u, &params)? / metric_ext(&u, &u, &ctx)?;
            writeln!(out, "{i},{k:.16e},{r:.16e}")?;
        } else {
            writeln!(out, "{i},{k:.16e}")?;
        }
    }
    Ok(())
}

fn export_cmd(snapshot: &Path, nlat: usize, nlon: usize, field: &str, out: Option<PathBuf>) -> axizeit_core::Result<()> {
    let field: GridField = field.parse()?;
    let snap = read_snapshot(snapshot)?;
    let ctx = Context::new(snap.n())?;
    let grid = field_grid(&snap.x, snap.t, field, &ctx, nlat, nlon)?;
    let out = out.unwrap_or_else(|| {
        let stem = snapshot.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let name = format!("{stem}_{}.azg", format!("{field:?}").to_lowercase());
        snapshot.with_file_name(name)
    });
    write_grid(&out, &grid)?;
    println!("{}", serde_json::json!({ "grid": out, "nlat": nlat, "nlon": nlon, "t": snap.t }));
    Ok(())
}

fn make_initial_cmd(preset: Preset, n: usize, lmax: usize, seed: u64, out: &Path) -> axizeit_core::Result<()> {
    let ctx = Context::new(n)?;
    let x = match preset {
        Preset::Sim1 => make_initial_sim1(&ctx)?,
        Preset::Random => make_initial_random(&ctx, lmax, seed)?,
    };
    write_snapshot(out, &Snapshot { t: 0.0, hbar: ctx.hbar(), x })?;
    println!("{}", serde_json::json!({ "snapshot": out, "n": n }));
    Ok(())
}
