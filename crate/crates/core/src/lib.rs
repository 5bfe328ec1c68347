//! Quantum tunneling and noise-activated escape from a cubic metastable well.
//!
//! The crate is organised bottom-up:
//!
//! - [`wkb`]: the potential, WKB action integrals, the false-vacuum resonance
//!   and the closed-system persistence probability;
//! - [`elliptic`]: the parametric elliptic-integral form of the well action and
//!   the rate/escape-temperature report built on it;
//! - [`spectral`]: momentum grids, coefficient matrices in the energy
//!   representation and the discretized position/momentum kernels;
//! - [`master`]: transport superoperators, the local (P, p) evolution with
//!   decoherence, diagnostics and time scales;
//! - [`kramers`]: the strong-decoherence activation limit and the anomalous
//!   diffusion correction.
//!
//! All functions are pure; natural units with explicit `M`, `Ω0`, `ħ`.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod kramers;
pub mod master;
pub mod numerics;
pub mod spectral;
pub mod wkb;

pub use elliptic::{EllipticPoint, RateReport};
pub use error::{Result, TunnelError};
pub use kramers::{KramersProblem, KramersSolution};
pub use master::{BathParams, LocalState, Timescales};
pub use spectral::{MomentumGrid, OperatorMatrices, WignerCoeffGrid};
pub use wkb::{PotentialParams, ResonanceData};

pub use num_complex::Complex64;
