//! Zeitlin's matrix model of axisymmetric ideal flow on S³.
//!
//! The state is a pair (P, B) in su(n) × u(n): P quantizes the stream
//! function and B the swirl. The crate provides the spin-matrix
//! quantization, the Hoppe–Yau Laplacian, the extended Lie algebra with its
//! curvature, a Casimir-preserving integrator, diagnostics, Jacobi fields
//! along the steady geodesic, and the file formats used by the CLI.

pub mod algebra;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod jacobi;
pub mod laplacian;
pub mod mat;
pub mod quantization;
pub mod rng;

use std::sync::Arc;

pub use algebra::ExtElement;
pub use error::{Error, Result};
pub use laplacian::Laplacian;
pub use mat::{CMat, C64};
pub use quantization::{HarmonicBasis, HarmonicCoeffs, SpinBasis};

/// Everything that depends only on n, built once and shared.
#[derive(Clone, Debug)]
pub struct Context {
    pub spin: SpinBasis,
    pub basis: HarmonicBasis,
    pub lap: Laplacian,
}

impl Context {
    /// Builds the spin matrices, the full harmonic basis and the Laplacian.
    pub fn new(n: usize) -> Result<Arc<Self>> {
        Self::with_lmax(n, n.saturating_sub(1))
    }

    /// Like [`Context::new`] but stores basis vectors only up to `lmax`.
    /// Spectral functions of Δ need the full basis.
    pub fn with_lmax(n: usize, lmax: usize) -> Result<Arc<Self>> {
        let spin = SpinBasis::new(n)?;
        let basis = HarmonicBasis::with_lmax(&spin, lmax);
        let lap = Laplacian::new(&spin)?;
        Ok(Arc::new(Self { spin, basis, lap }))
    }

    pub fn n(&self) -> usize {
        self.spin.n()
    }

    pub fn hbar(&self) -> f64 {
        self.spin.hbar()
    }
}
