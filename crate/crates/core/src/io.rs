//! Run configuration, initial-data presets, the run driver and the on-disk
//! formats.
//!
//! Snapshot (`AZSNAP01`): u32 n, f64 t, f64 ħ, then P and B as n·n complex
//! numbers each, interleaved (re, im), row-major. Grid (`AZGRID01`): u32
//! nlat, u32 nlon, f64 t, then nlat·nlon values, row-major with latitudes
//! θ_i = (i+½)π/nlat and longitudes φ_j = 2πj/nlon. Every number is little
//! endian.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::ExtElement;
use crate::diagnostics::{collect, DiagnosticsRecord};
use crate::dynamics::{run_simulation, IntegratorConfig, Method, SimState};
use crate::error::{Error, Result};
use crate::mat::{CMat, C64};
use crate::quantization::{dequantize_function, grid_eval, quantize_function, single_mode, HarmonicCoeffs};
use crate::rng::SplitMix64;
use crate::Context;

/// Band limit of the random initial data.
pub const RANDOM_LMAX: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    #[serde(alias = "preset_sim1")]
    Sim1,
    RandomGauss {
        #[serde(default = "random_lmax")]
        lmax: usize,
        /// Falls back to the top-level seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Text files of `l m value` lines for the stream function ψ and the
    /// swirl σ.
    CoeffFile { path_psi: PathBuf, path_sigma: PathBuf },
}

fn random_lmax() -> usize {
    RANDOM_LMAX
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_iters")]
    pub max_fixed_point_iters: usize,
    #[serde(default)]
    pub seed: u64,
    pub initial: InitialData,
    #[serde(default = "one")]
    pub snapshot_every: u64,
    #[serde(default = "one")]
    pub diagnostics_every: u64,
    pub output_dir: PathBuf,
}

fn default_method() -> Method {
    Method::StructurePreserving
}

fn default_tol() -> f64 {
    IntegratorConfig::new(1.0, Method::StructurePreserving).fixed_point_tol
}

fn default_iters() -> usize {
    IntegratorConfig::new(1.0, Method::StructurePreserving).max_fixed_point_iters
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end must be finite and non-negative, got {}", self.t_end)));
        }
        if self.snapshot_every == 0 || self.diagnostics_every == 0 {
            return Err(Error::Config("cadences must be at least 1".into()));
        }
        self.integrator().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            method: self.method,
            fixed_point_tol: self.fixed_point_tol,
            max_fixed_point_iters: self.max_fixed_point_iters,
        }
    }

    pub fn initial_state(&self, ctx: &Context) -> Result<ExtElement> {
        match &self.initial {
            InitialData::Sim1 => make_initial_sim1(ctx),
            InitialData::RandomGauss { lmax, seed } => make_initial_random(ctx, *lmax, seed.unwrap_or(self.seed)),
            InitialData::CoeffFile { path_psi, path_sigma } => {
                let psi = read_coeff_file(path_psi)?;
                let sigma = read_coeff_file(path_sigma)?;
                let mut p = quantize_function(&psi, &ctx.basis)?;
                crate::mat::remove_trace(&mut p);
                Ok(ExtElement { p, b: quantize_function(&sigma, &ctx.basis)? })
            }
        }
    }
}

/// Vorticity Δψ = Y_{2,1} and swirl σ = Y_{1,0}.
pub fn make_initial_sim1(ctx: &Context) -> Result<ExtElement> {
    if ctx.n() < 5 {
        return Err(Error::InvalidArgument(format!("the sim1 preset needs n >= 5, got {}", ctx.n())));
    }
    let w = quantize_function(&single_mode(2, 2, 1, 1.0), &ctx.basis)?;
    let b = quantize_function(&single_mode(1, 1, 0, 1.0), &ctx.basis)?;
    Ok(ExtElement { p: ctx.lap.solve(&w)?, b })
}

/// Standard normal coefficients up to `lmax` for the vorticity and the swirl,
/// drawn from SplitMix64(seed): first every vorticity coefficient in order of
/// increasing (l, m), then every swirl coefficient. The vorticity mean
/// a_{0,0} is drawn and then discarded.
pub fn make_initial_random(ctx: &Context, lmax: usize, seed: u64) -> Result<ExtElement> {
    let (a, b) = random_coefficients(lmax, seed);
    if lmax > ctx.n() - 1 {
        return Err(Error::Truncation { lmax, n: ctx.n() });
    }
    let w = quantize_function(&a, &ctx.basis)?;
    Ok(ExtElement { p: ctx.lap.solve(&w)?, b: quantize_function(&b, &ctx.basis)? })
}

/// The (vorticity, swirl) coefficients used by [`make_initial_random`].
pub fn random_coefficients(lmax: usize, seed: u64) -> (HarmonicCoeffs, HarmonicCoeffs) {
    let mut rng = SplitMix64::new(seed);
    let mut draw = || {
        let mut c = HarmonicCoeffs::zeros(lmax);
        for l in 0..=lmax {
            for m in -(l as i64)..=l as i64 {
                c.set(l, m, rng.normal());
            }
        }
        c
    };
    let mut a = draw();
    let b = draw();
    a.set(0, 0, 0.0);
    (a, b)
}

/// Parses `l m value` lines; blank lines and `#` comments are skipped.
pub fn parse_coeffs(text: &str) -> Result<HarmonicCoeffs> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("coefficient line {}: expected `l m value`", lineno + 1));
        let mut it = line.split_whitespace();
        let l: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let m: i64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() || m.unsigned_abs() as usize > l {
            return Err(bad());
        }
        entries.push((l, m, v));
    }
    let lmax = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let mut c = HarmonicCoeffs::zeros(lmax);
    for (l, m, v) in entries {
        c.set(l, m, v);
    }
    Ok(c)
}

pub fn read_coeff_file(path: &Path) -> Result<HarmonicCoeffs> {
    parse_coeffs(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- snapshots

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"AZSNAP01";
pub const GRID_MAGIC: &[u8; 8] = b"AZGRID01";
const SNAPSHOT_HEADER: usize = 8 + 4 + 8 + 8;
const GRID_HEADER: usize = 8 + 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub hbar: f64,
    pub x: ExtElement,
}

impl Snapshot {
    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn state(&self) -> SimState {
        SimState { t: self.t, x: self.x.clone() }
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &CMat) {
    for z in m.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

pub fn encode_snapshot(s: &Snapshot) -> Vec<u8> {
    let n = s.n();
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER + 32 * n * n);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&s.t.to_le_bytes());
    out.extend_from_slice(&s.hbar.to_le_bytes());
    put_matrix(&mut out, &s.x.p);
    put_matrix(&mut out, &s.x.b);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < k {
            return Err(Error::Format { offset: self.pos as u64, msg: format!("truncated while reading {what}") });
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn magic(&mut self, want: &[u8; 8]) -> Result<()> {
        let got = self.take(8, "magic")?;
        if got != want {
            return Err(Error::Format { offset: 0, msg: format!("bad magic {:?}", String::from_utf8_lossy(got)) });
        }
        Ok(())
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format { offset: self.pos as u64, msg: "trailing bytes".into() });
        }
        Ok(())
    }
}

fn fmt_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, msg: msg.into() }
}

pub fn decode_snapshot(buf: &[u8]) -> Result<Snapshot> {
    let mut c = Cursor { buf, pos: 0 };
    c.magic(SNAPSHOT_MAGIC)?;
    let n_pos = c.pos;
    let n = c.u32("n")? as usize;
    if n < 2 {
        return Err(fmt_err(n_pos, format!("n must be at least 2, got {n}")));
    }
    let t = c.f64("time")?;
    let hbar_pos = c.pos;
    let hbar = c.f64("hbar")?;
    let want_hbar = 2.0 / ((n * n - 1) as f64).sqrt();
    if !((hbar - want_hbar).abs() <= 1e-12 * want_hbar) {
        return Err(fmt_err(hbar_pos, format!("hbar {hbar} inconsistent with n={n}")));
    }
    let body = n
        .checked_mul(n)
        .and_then(|k| k.checked_mul(32))
        .ok_or_else(|| fmt_err(n_pos, "n too large"))?;
    if buf.len() - c.pos != body {
        let offset = if buf.len() - c.pos < body { buf.len() } else { c.pos + body };
        return Err(fmt_err(offset, format!("expected {body} payload bytes for n={n}, found {}", buf.len() - c.pos)));
    }
    let read = |c: &mut Cursor| -> Result<CMat> {
        let mut v = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let re = c.f64("matrix entry")?;
            let im = c.f64("matrix entry")?;
            v.push(C64::new(re, im));
        }
        Ok(CMat::from_shape_vec((n, n), v).expect("n*n entries"))
    };
    let p = read(&mut c)?;
    let b = read(&mut c)?;
    c.expect_end()?;
    Ok(Snapshot { t, hbar, x: ExtElement { p, b } })
}

pub fn write_snapshot(path: &Path, s: &Snapshot) -> Result<()> {
    write_atomic(path, &encode_snapshot(s))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    decode_snapshot(&fs::read(path)?)
}

/// Writes through a temporary sibling so a crash never leaves a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// -------------------------------------------------------------------- grids

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub nlat: usize,
    pub nlon: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

pub fn encode_grid(g: &Grid) -> Result<Vec<u8>> {
    if g.values.len() != g.nlat * g.nlon {
        return Err(Error::DimensionMismatch { expected: g.nlat * g.nlon, got: g.values.len() });
    }
    let mut out = Vec::with_capacity(GRID_HEADER + 8 * g.values.len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(g.nlat as u32).to_le_bytes());
    out.extend_from_slice(&(g.nlon as u32).to_le_bytes());
    out.extend_from_slice(&g.t.to_le_bytes());
    for v in &g.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_grid(buf: &[u8]) -> Result<Grid> {
    let mut c = Cursor { buf, pos: 0 };
    c.magic(GRID_MAGIC)?;
    let dims_pos = c.pos;
    let nlat = c.u32("nlat")? as usize;
    let nlon = c.u32("nlon")? as usize;
    if nlat == 0 || nlon == 0 {
        return Err(fmt_err(dims_pos, "empty grid"));
    }
    let t = c.f64("time")?;
    let count = nlat.checked_mul(nlon).ok_or_else(|| fmt_err(dims_pos, "grid too large"))?;
    let body = count.checked_mul(8).ok_or_else(|| fmt_err(dims_pos, "grid too large"))?;
    if buf.len() - c.pos < body {
        return Err(fmt_err(buf.len(), format!("expected {body} payload bytes, found {}", buf.len() - c.pos)));
    }
    let values = (0..count).map(|_| c.f64("value")).collect::<Result<Vec<_>>>()?;
    c.expect_end()?;
    Ok(Grid { nlat, nlon, t, values })
}

pub fn write_grid(path: &Path, g: &Grid) -> Result<()> {
    write_atomic(path, &encode_grid(g)?)
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    decode_grid(&fs::read(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridField {
    /// ΔP + B, the quantized Δψ + σ.
    Vorticity,
    /// B.
    Swirl,
    /// P.
    Stream,
}

impl std::str::FromStr for GridField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vorticity" => Ok(Self::Vorticity),
            "swirl" => Ok(Self::Swirl),
            "stream" => Ok(Self::Stream),
            other => Err(Error::InvalidArgument(format!("unknown field {other:?}"))),
        }
    }
}

/// Samples one field of the state as a function on the sphere.
pub fn field_grid(x: &ExtElement, t: f64, field: GridField, ctx: &Context, nlat: usize, nlon: usize) -> Result<Grid> {
    if nlat == 0 || nlon == 0 {
        return Err(Error::InvalidArgument("grid dimensions must be positive".into()));
    }
    let m = match field {
        GridField::Vorticity => &ctx.lap.apply(&x.p)? + &x.b,
        GridField::Swirl => x.b.clone(),
        GridField::Stream => x.p.clone(),
    };
    let coeffs = dequantize_function(&m, &ctx.basis)?;
    Ok(Grid { nlat, nlon, t, values: grid_eval(&coeffs, nlat, nlon) })
}

// -------------------------------------------------------------- diagnostics

pub const CSV_HEADER: &str = "t,energy,supnorm,c2,c3,c4,i1,i2,b_eig_min,b_eig_max";

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_record(r: &DiagnosticsRecord) -> String {
    r.values().iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(",")
}

pub struct DiagnosticsWriter {
    out: BufWriter<File>,
}

impl DiagnosticsWriter {
    /// Creates the file with its header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    /// Appends to an existing file after checking its header; creates it
    /// otherwise.
    pub fn append(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Self::create(path);
        }
        let mut first = String::new();
        BufReader::new(File::open(path)?).read_line(&mut first)?;
        if first.trim_end() != CSV_HEADER {
            return Err(Error::Format { offset: 0, msg: "diagnostics header mismatch".into() });
        }
        Ok(Self { out: BufWriter::new(OpenOptions::new().append(true).open(path)?) })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", format_record(r))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn append_diagnostics(path: &Path, r: &DiagnosticsRecord) -> Result<()> {
    let mut w = DiagnosticsWriter::append(path)?;
    w.write(r)?;
    w.flush()
}

pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(CSV_HEADER) {
        return Err(Error::Format { offset: 0, msg: "diagnostics header mismatch".into() });
    }
    let mut offset = CSV_HEADER.len() + 1;
    let mut out = Vec::new();
    for line in lines {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| fmt_err(offset, e.to_string()))?;
        if vals.len() != 10 {
            return Err(fmt_err(offset, format!("expected 10 columns, found {}", vals.len())));
        }
        out.push(DiagnosticsRecord {
            t: vals[0],
            energy: vals[1],
            supnorm: vals[2],
            c2: vals[3],
            c3: vals[4],
            c4: vals[5],
            i1: vals[6],
            i2: vals[7],
            b_eig_min: vals[8],
            b_eig_max: vals[9],
        });
        offset += line.len() + 1;
    }
    Ok(out)
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    parse_diagnostics(&fs::read_to_string(path)?)
}

// --------------------------------------------------------------- run driver

pub const LOCK_FILE: &str = "axizeit.lock";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const LOG_FILE: &str = "run.log";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is locked by another run ({})",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn snapshot_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("snapshot_{step:08}.azs"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub final_state: SimState,
    pub steps: u64,
    pub snapshots: Vec<PathBuf>,
    pub diagnostics: PathBuf,
}

/// Runs `cfg` from its initial data, or from `resume` when given, writing
/// snapshots, diagnostics and a log into the output directory.
///
/// Step indices count from t = 0 in units of dt, so a resumed run continues
/// the numbering and cadence of the original. Wall-clock information goes to
/// the log only; the CSV depends on the configuration alone.
pub fn run(cfg: &SimConfig, resume: Option<Snapshot>) -> Result<RunSummary> {
    cfg.validate()?;
    let ctx = Context::new(cfg.n)?;
    let dir = &cfg.output_dir;
    let _lock = OutputLock::acquire(dir)?;
    let started = std::time::Instant::now();

    let (initial, csv) = match resume {
        Some(s) => {
            if s.n() != cfg.n {
                return Err(Error::DimensionMismatch { expected: cfg.n, got: s.n() });
            }
            (s.state(), DiagnosticsWriter::append(&dir.join(DIAGNOSTICS_FILE))?)
        }
        None => (
            SimState { t: 0.0, x: cfg.initial_state(&ctx)? },
            DiagnosticsWriter::create(&dir.join(DIAGNOSTICS_FILE))?,
        ),
    };
    let mut csv = csv;
    let base = (initial.t / cfg.dt).round() as u64;
    let resumed = initial.t > 0.0;
    let hbar = ctx.hbar();
    let mut snapshots = Vec::new();
    let mut last_written = None;
    let mut log = BufWriter::new(OpenOptions::new().create(true).append(true).open(dir.join(LOG_FILE))?);
    writeln!(log, "start n={} t0={} t_end={} dt={} method={:?}", cfg.n, initial.t, cfg.t_end, cfg.dt, cfg.method)?;

    let result = run_simulation(initial, &cfg.integrator(), cfg.t_end, &ctx, |state, k, info| {
        let step = base + k;
        // A resumed run has already logged its first state.
        let first_of_resume = resumed && k == 0;
        if step % cfg.diagnostics_every == 0 && !first_of_resume {
            csv.write(&collect(&state.x, state.t, &ctx)?)?;
        }
        if step % cfg.snapshot_every == 0 && !first_of_resume {
            let path = snapshot_path(dir, step);
            write_snapshot(&path, &Snapshot { t: state.t, hbar, x: state.x.clone() })?;
            snapshots.push(path);
            last_written = Some(step);
        }
        if info.iterations > 0 && k % 1000 == 0 {
            writeln!(log, "step {step} t={} iters={} residual={:e}", state.t, info.iterations, info.residual)?;
        }
        Ok(())
    });

    match result {
        Ok(state) => {
            let steps = if state.t > 0.0 { (state.t / cfg.dt - 1e-9).ceil() as u64 } else { 0 };
            if last_written != Some(steps) {
                let path = snapshot_path(dir, steps);
                write_snapshot(&path, &Snapshot { t: state.t, hbar, x: state.x.clone() })?;
                snapshots.push(path);
            }
            csv.flush()?;
            writeln!(log, "done t={} steps={} wall={:.3}s", state.t, steps, started.elapsed().as_secs_f64())?;
            Ok(RunSummary { final_state: state, steps: steps - base.min(steps), snapshots, diagnostics: dir.join(DIAGNOSTICS_FILE) })
        }
        Err(aborted) => {
            csv.flush()?;
            let s = &aborted.last_good;
            let path = dir.join("aborted.azs");
            write_snapshot(&path, &Snapshot { t: s.t, hbar, x: s.x.clone() })?;
            writeln!(log, "aborted: {aborted}; last good state in {}", path.display())?;
            Err(aborted.source)
        }
    }
}

/// Caps the global thread pool at AXIZEIT_THREADS when set.
#[cfg(feature = "parallel")]
pub fn init_threads_from_env() -> Result<Option<usize>> {
    let Ok(v) = std::env::var("AXIZEIT_THREADS") else {
        return Ok(None);
    };
    let k: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|k| *k > 0)
        .ok_or_else(|| Error::Config(format!("AXIZEIT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(Some(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let ok = r#"{"n": 8, "dt": 0.1, "t_end": 1, "initial": {"preset": "sim1"}, "output_dir": "o"}"#;
        assert!(SimConfig::from_json(ok).is_ok());
        let extra = r#"{"n": 8, "dt": 0.1, "t_end": 1, "initial": {"preset": "sim1"}, "output_dir": "o", "x": 1}"#;
        assert!(matches!(SimConfig::from_json(extra), Err(Error::Config(_))));
        let inner = r#"{"n": 8, "dt": 0.1, "t_end": 1, "initial": {"preset": "random_gauss", "lmx": 3}, "output_dir": "o"}"#;
        assert!(SimConfig::from_json(inner).is_err());
    }

    #[test]
    fn config_invariants() {
        let base = |n: usize, dt: f64, every: u64| SimConfig {
            n,
            dt,
            t_end: 1.0,
            method: Method::StructurePreserving,
            fixed_point_tol: 1e-12,
            max_fixed_point_iters: 50,
            seed: 0,
            initial: InitialData::Sim1,
            snapshot_every: every,
            diagnostics_every: 1,
            output_dir: "o".into(),
        };
        assert!(base(8, 0.1, 1).validate().is_ok());
        assert!(base(1, 0.1, 1).validate().is_err());
        assert!(base(8, 0.0, 1).validate().is_err());
        assert!(base(8, 0.1, 0).validate().is_err());
    }

    #[test]
    fn coefficient_lines() {
        let c = parse_coeffs("# psi\n2 1 0.5\n\n1 -1 -2\n").unwrap();
        assert_eq!(c.lmax(), 2);
        assert_eq!(c.get(2, 1), 0.5);
        assert_eq!(c.get(1, -1), -2.0);
        assert!(parse_coeffs("1 2 1.0").is_err());
        assert!(parse_coeffs("1 0").is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, -1.5, std::f64::consts::PI, 1e-300, f64::MAX, 0.1 + 0.2] {
            assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = b"AZSNAP02".to_vec();
        bytes.extend_from_slice(&[0; 20]);
        assert!(matches!(decode_snapshot(&bytes), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(decode_grid(b"AZGR"), Err(Error::Format { .. })));
    }
}
