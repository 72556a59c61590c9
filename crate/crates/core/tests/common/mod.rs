#![allow(dead_code)]

use axizeit_core::algebra::ExtElement;
use axizeit_core::mat::{make_skew, remove_trace, CMat, C64};
use axizeit_core::rng::SplitMix64;
use ndarray::Array2;

pub fn random_skew(n: usize, rng: &mut SplitMix64) -> CMat {
    let mut m = Array2::from_shape_fn((n, n), |_| C64::new(rng.normal(), rng.normal()));
    make_skew(&mut m);
    m
}

pub fn random_traceless(n: usize, rng: &mut SplitMix64) -> CMat {
    let mut m = random_skew(n, rng);
    remove_trace(&mut m);
    m
}

pub fn random_ext(n: usize, rng: &mut SplitMix64) -> ExtElement {
    ExtElement { p: random_traceless(n, rng), b: random_skew(n, rng) }
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn dist(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

pub fn ext_dist(a: &ExtElement, b: &ExtElement) -> f64 {
    dist(&a.p, &b.p).max(dist(&a.b, &b.b))
}

/// Adaptive Dormand–Prince 5(4) on flat real vectors.
pub fn dopri45(f: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t_end: f64, rtol: f64, atol: f64) -> Vec<f64> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let _ = C;
    let d = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h = (t_end / 100.0).min(0.01);
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                for i in 0..d {
                    ys[i] += h * A[s][j] * kj[i];
                }
            }
            k.push(f(&ys));
        }
        let mut y5 = y.clone();
        let mut err = 0.0f64;
        for i in 0..d {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += B5[s] * k[s][i];
                s4 += B4[s] * k[s][i];
            }
            y5[i] += h * s5;
            let sc = atol + rtol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (s5 - s4)).abs() / sc);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

pub fn flatten(x: &ExtElement) -> Vec<f64> {
    x.p.iter().chain(x.b.iter()).flat_map(|z| [z.re, z.im]).collect()
}

pub fn unflatten(n: usize, v: &[f64]) -> ExtElement {
    let mat = |off: usize| {
        Array2::from_shape_fn((n, n), |(i, j)| {
            let k = off + 2 * (i * n + j);
            C64::new(v[k], v[k + 1])
        })
    };
    ExtElement { p: mat(0), b: mat(2 * n * n) }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
