//! Parametric form of the cubic-well action through complete elliptic
//! integrals.
//!
//! With energy `E = 2ε_s ζ(k)`, the well action and the small-oscillation
//! frequency at that energy are
//!
//! ```text
//! S(x_R, x_L; E) = (ε_s/Ω0)·F(k)        Ω(E) = Ω0·f(k)
//! ```
//!
//! where `k ∈ [0, 1]` runs from the well bottom (`k = 0`) to the barrier top
//! (`k = 1`). The functions are assembled from `Q(k) = (1 + 14k² + k⁴)/4` and
//! the complete integrals `K[k²]`, `E[k²]`.
//!
//! **Argument convention.** [`complete_elliptic`] takes the parameter
//! `m = k²`, not the modulus `k`. Every call site in this module squares `k`
//! explicitly.

use std::f64::consts::PI;

use crate::error::{Result, TunnelError};
use crate::numerics::find_root;

const MAX_ITER: usize = 64;

/// `F(1)`, the well action at the barrier top in units of `ε_s/Ω0`.
pub const F_AT_BARRIER_TOP: f64 = 18.0 / 5.0;

/// Complete elliptic integrals of the first and second kind, `(K(m), E(m))`,
/// by the arithmetic–geometric mean.
///
/// `m = 1` is accepted and returns `K = +∞`, `E = 1`; callers needing only
/// `E` use [`complete_elliptic_e`].
pub fn complete_elliptic(m: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&m) {
        return Err(TunnelError::DomainError(format!("K(m) needs 0 <= m < 1, got m = {m}")));
    }
    Ok(agm_pair(m))
}

/// Complete elliptic integral of the second kind on `0 ≤ m ≤ 1`.
pub fn complete_elliptic_e(m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m) {
        return Err(TunnelError::DomainError(format!("E(m) needs 0 <= m <= 1, got m = {m}")));
    }
    if m == 1.0 {
        return Ok(1.0);
    }
    Ok(agm_pair(m).1)
}

fn agm_pair(m: f64) -> (f64, f64) {
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow2 = 0.5;
    for _ in 0..MAX_ITER {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        pow2 *= 2.0;
        sum += pow2 * c * c;
        a = an;
        b = bn;
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - sum))
}

/// One point of the parametric curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticPoint {
    pub k: f64,
    /// Energy in units of `2ε_s`.
    pub zeta: f64,
    /// Orbit frequency in units of `Ω0`.
    pub ffreq: f64,
    /// Well action in units of `ε_s/Ω0`.
    pub faction: f64,
}

fn q_of(k2: f64) -> f64 {
    0.25 * (1.0 + 14.0 * k2 + k2 * k2)
}

/// `u = (1 + k²)/√Q` together with `u − 1` and `2 − u`, the last two computed
/// from the exact identities `s² − Q = ¾(1 − k²)²` and `4Q − s² = 12k²` so
/// that neither loses digits near the ends of `[0, 1]`.
fn u_parts(k: f64) -> (f64, f64, f64) {
    let k2 = k * k;
    let q = q_of(k2);
    let rq = q.sqrt();
    let s = 1.0 + k2;
    let one_m = 1.0 - k2;
    let u_minus_1 = 0.75 * one_m * one_m / (rq * (s + rq));
    let two_minus_u = 12.0 * k2 / (rq * (2.0 * rq + s));
    (s / rq, u_minus_1, two_minus_u)
}

/// `ζ(k)`: energy `E/(2ε_s)` on the parametric curve,
/// `ζ = (2 + 3u − u³)/8 = (1 + u)²(2 − u)/8`.
pub fn zeta(k: f64) -> f64 {
    let (u, _, two_minus_u) = u_parts(k);
    (1.0 + u) * (1.0 + u) * two_minus_u / 8.0
}

/// `½ − ζ(k) = (u − 1)²(u + 2)/8`, accurate near the barrier top.
pub fn zeta_complement(k: f64) -> f64 {
    let (u, u_minus_1, _) = u_parts(k);
    u_minus_1 * u_minus_1 * (u + 2.0) / 8.0
}

/// `f(k) = Ω(E)/Ω0`; zero at the barrier top.
pub fn ffreq(k: f64) -> f64 {
    if k >= 1.0 {
        return 0.0;
    }
    let k2 = k * k;
    let (kk, _) = agm_pair(k2);
    1.0 / (2.0 / PI * (4.0 * q_of(k2)).powf(0.25) * kk)
}

/// `F(k)`: well action in units of `ε_s/Ω0`. The `k = 1` end uses the limit
/// `(1 − k²)K → 0`, `E → 1`, which gives `18/5`.
pub fn faction(k: f64) -> f64 {
    let k2 = k * k;
    let q = q_of(k2);
    let one_m = 1.0 - k2;
    let two_m = 2.0 - k2;
    let a = 16.0 / 15.0 * two_m * two_m - 0.2 * one_m * (21.0 - 5.0 * k2);
    let b = 8.0 / 15.0 * two_m - one_m;
    let bracket = if k >= 1.0 {
        a
    } else {
        let (kk, ee) = agm_pair(k2);
        a * ee - one_m * b * kk
    };
    27.0 / 8.0 * (4.0 / q).powf(1.25) * bracket
}

/// Evaluates `ζ`, `f` and `F` at `k ∈ [0, 1]`.
pub fn parametric_point(k: f64) -> Result<EllipticPoint> {
    if !(0.0..=1.0).contains(&k) {
        return Err(TunnelError::DomainError(format!("k must lie in [0, 1], got {k}")));
    }
    Ok(EllipticPoint { k, zeta: zeta(k), ffreq: ffreq(k), faction: faction(k) })
}

/// Solves `F(k) = target` for `k` on `(0, 1)`.
fn invert_monotone(g: impl Fn(f64) -> f64, target: f64, upper: f64, what: &str) -> Result<f64> {
    if !(target > 0.0 && target < upper) {
        return Err(TunnelError::NoRoot(format!("{what} target {target} outside (0, {upper})")));
    }
    find_root(|k| g(k) - target, 0.0, 1.0, 1e-15)
}

/// Parameter of the ground state: `F(k_GS) = π·ε0/ε_s`.
pub fn solve_ground_k(eps0_over_epss: f64) -> Result<f64> {
    invert_monotone(faction, PI * eps0_over_epss, F_AT_BARRIER_TOP, "F")
}

/// Reflected parameter with `ζ(k_ref) = 1/2 − ζ(k)`, i.e. the energy mirrored
/// about half the barrier height.
pub fn reflect_k(k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(TunnelError::DomainError(format!("k must lie in [0, 1], got {k}")));
    }
    // Solve on whichever side keeps full relative precision: near k_ref = 1
    // the complement is the small, well-conditioned quantity.
    let z = zeta(k);
    if z <= 0.0 {
        return Ok(1.0);
    }
    let zc = zeta_complement(k);
    if zc <= 0.0 {
        return Ok(0.0);
    }
    if z < 0.25 {
        find_root(|kr| zeta_complement(kr) - z, 0.0, 1.0, 1e-16)
    } else {
        find_root(|kr| zeta(kr) - zc, 0.0, 1.0, 1e-16)
    }
}

/// Rates and escape temperatures for a pair of measured energy scales.
///
/// Temperatures are in the same unit as the inputs (the inputs are energies
/// divided by `k_B`). Rates are in units of `Ω0` (multiply by `Ω0` in 1/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    /// Bounce exponent at `E = 0`, `Λ0 = 18ε_s/(5ε0)`.
    pub lambda0: f64,
    /// Instanton prefactor `a_q = √(120πΛ0)`.
    pub a_q: f64,
    /// WKB exponent at the ground-state energy, `Λ = (ε_s/ε0)F(k_ref)`.
    pub lambda: f64,
    pub k_gs: f64,
    pub zeta_gs: f64,
    pub f_gs: f64,
    pub k_ref: f64,
    pub f_action_ref: f64,
    /// `(a_q/2π)·exp(−Λ0)` in units of `Ω0`.
    pub gamma_inst: f64,
    /// `(f(k_GS)/2π)·exp(−Λ)` in units of `Ω0`.
    pub gamma_wkb: f64,
    pub t_esc_inst: f64,
    pub t_esc_wkb: f64,
    /// `2S0/ħ` from the quadrature route, when resonance data was supplied.
    pub lambda_quadrature: Option<f64>,
}

/// Builds the [`RateReport`] from `ε_s/k_B` and `ε0/k_B` (any common unit).
pub fn rate_report(
    eps_s_over_kb: f64,
    eps0_over_kb: f64,
    res: Option<&crate::wkb::ResonanceData>,
) -> Result<RateReport> {
    if !(eps_s_over_kb > 0.0 && eps0_over_kb > 0.0) {
        return Err(TunnelError::DomainError(format!(
            "temperatures must be positive, got {eps_s_over_kb} and {eps0_over_kb}"
        )));
    }
    let ratio = eps0_over_kb / eps_s_over_kb;
    let lambda0 = F_AT_BARRIER_TOP / ratio;
    let a_q = (120.0 * PI * lambda0).sqrt();
    let k_gs = solve_ground_k(ratio)?;
    let gs = parametric_point(k_gs)?;
    let k_ref = reflect_k(k_gs)?;
    let f_action_ref = faction(k_ref);
    let lambda = f_action_ref / ratio;
    let denom_inst = F_AT_BARRIER_TOP - ratio * a_q.ln();
    let denom_wkb = f_action_ref - ratio * gs.ffreq.ln();
    if !(denom_inst > 0.0 && denom_wkb > 0.0) {
        return Err(TunnelError::DomainError(format!(
            "escape-temperature denominators not positive ({denom_inst}, {denom_wkb})"
        )));
    }
    Ok(RateReport {
        lambda0,
        a_q,
        lambda,
        k_gs,
        zeta_gs: gs.zeta,
        f_gs: gs.ffreq,
        k_ref,
        f_action_ref,
        gamma_inst: a_q / (2.0 * PI) * (-lambda0).exp(),
        gamma_wkb: gs.ffreq / (2.0 * PI) * (-lambda).exp(),
        t_esc_inst: eps0_over_kb / denom_inst,
        t_esc_wkb: eps0_over_kb / denom_wkb,
        lambda_quadrature: res.map(|r| 2.0 * r.s0 / r.hbar),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Power-series oracle for K and E, independent of the AGM.
    fn series(m: f64) -> (f64, f64) {
        let (mut k, mut e) = (0.0, 0.0);
        let mut coef = 1.0f64; // ((2n)! / (2^{2n} n!²))
        for n in 0..2000 {
            let c2 = coef * coef;
            let mn = m.powi(n);
            k += c2 * mn;
            e += c2 * mn / (1.0 - 2.0 * n as f64);
            coef *= (2.0 * n as f64 + 1.0) / (2.0 * n as f64 + 2.0);
        }
        (0.5 * PI * k, 0.5 * PI * e)
    }

    #[test]
    fn elliptic_special_values() {
        let (k, e) = complete_elliptic(0.0).unwrap();
        assert_eq!(k, 0.5 * PI);
        assert_eq!(e, 0.5 * PI);
        assert_eq!(complete_elliptic_e(1.0).unwrap(), 1.0);
        let (k, e) = complete_elliptic(0.5).unwrap();
        assert_relative_eq!(k, 1.854_074_677_301_372, max_relative = 1e-14);
        assert_relative_eq!(e, 1.350_643_881_047_675, max_relative = 1e-14);
        assert!(complete_elliptic(1.0).is_err());
        assert!(complete_elliptic(-0.1).is_err());
        assert!(complete_elliptic_e(1.1).is_err());
    }

    #[test]
    fn agm_matches_series() {
        for m in [0.05, 0.2, 0.5, 0.7] {
            let (k, e) = complete_elliptic(m).unwrap();
            let (ks, es) = series(m);
            assert_relative_eq!(k, ks, max_relative = 1e-12);
            assert_relative_eq!(e, es, max_relative = 1e-12);
        }
    }

    #[test]
    fn parametric_endpoints() {
        let p0 = parametric_point(0.0).unwrap();
        assert!(p0.zeta.abs() < 1e-16);
        assert_relative_eq!(p0.ffreq, 1.0, max_relative = 1e-15);
        assert!(p0.faction.abs() < 1e-13);
        let p1 = parametric_point(1.0).unwrap();
        assert_relative_eq!(p1.zeta, 0.5, max_relative = 1e-15);
        assert_eq!(p1.ffreq, 0.0);
        assert_relative_eq!(p1.faction, 3.6, max_relative = 1e-15);
        assert_relative_eq!(faction(1.0 - 1e-9), 3.6, max_relative = 1e-6);
    }

    #[test]
    fn monotone_on_fine_grid() {
        let mut prev = parametric_point(0.0).unwrap();
        for i in 1..=1000 {
            let cur = parametric_point(i as f64 / 1000.0).unwrap();
            assert!(cur.zeta > prev.zeta);
            assert!(cur.faction > prev.faction);
            assert!(cur.ffreq < prev.ffreq);
            prev = cur;
        }
    }

    #[test]
    fn ground_k_round_trip() {
        let target = faction(0.5);
        let k = solve_ground_k(target / PI).unwrap();
        assert_relative_eq!(k, 0.5, max_relative = 1e-10);
        assert!(solve_ground_k(1e-9).unwrap() < 1e-3);
        assert!(solve_ground_k(3.6 / PI).is_err());
    }

    #[test]
    fn reflection_fixed_points() {
        assert_eq!(reflect_k(0.0).unwrap(), 1.0);
        assert_eq!(reflect_k(1.0).unwrap(), 0.0);
        let k_quarter = find_root(|k| zeta(k) - 0.25, 0.0, 1.0, 1e-15).unwrap();
        assert_relative_eq!(reflect_k(k_quarter).unwrap(), k_quarter, max_relative = 1e-10);
        for i in 1..100 {
            let k = 0.01 * i as f64;
            let r = reflect_k(k).unwrap();
            assert!((zeta(r) + zeta(k) - 0.5).abs() < 1e-10);
            assert_relative_eq!(zeta(k) + zeta_complement(k), 0.5, max_relative = 1e-15);
            assert!((reflect_k(r).unwrap() - k).abs() < 1e-9);
        }
    }

    #[test]
    fn thinner_barrier_exponent_below_bounce() {
        for i in 0..=20 {
            let ratio = 0.1 + 0.01 * i as f64;
            let r = rate_report(1.0, ratio, None).unwrap();
            assert!(r.lambda < r.lambda0, "ratio {ratio}: {} !< {}", r.lambda, r.lambda0);
        }
    }
}
