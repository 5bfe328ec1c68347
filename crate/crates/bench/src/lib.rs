//! Shared fixtures for the benchmarks.

use tunnel_core::{PotentialParams, ResonanceData};

/// Barrier-to-zero-point ratio of the reference device, `ε_s/ε0`.
pub const REFERENCE_RATIO: f64 = 589.74 / 171.55;

pub fn reference_potential() -> PotentialParams {
    PotentialParams::from_barrier_ratio(1.0, 1.0, REFERENCE_RATIO, 1.0, 1.0).expect("reference parameters are valid")
}

pub fn reference_resonance() -> (PotentialParams, ResonanceData) {
    let p = reference_potential();
    let r = p.resonance_data().expect("reference well has a ground state");
    (p, r)
}
