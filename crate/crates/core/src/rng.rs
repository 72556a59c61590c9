//! SplitMix64 with Box–Muller normals.
//!
//! The stream is fully specified here so other languages can reproduce it:
//! the state advances by 0x9E3779B97F4A7C15 per draw and is finalized with
//! the standard SplitMix64 mixer. A uniform in (0,1) is
//! `((x >> 11) as f64 + 0.5) * 2^-53`. Normals come in pairs from two
//! uniforms u1, u2 as `r cos(2πu2)` then `r sin(2πu2)` with
//! `r = sqrt(-2 ln u1)`.

use std::f64::consts::TAU;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
    spare: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}
