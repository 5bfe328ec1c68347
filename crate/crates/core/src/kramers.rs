//! Strong-decoherence limit: once the coefficients are diagonal the
//! distribution over the average momentum obeys a Kramers equation
//!
//! ```text
//! ∂f/∂t = γ ∂_P (P + Mσ² ∂_P) f,   flux(0) = 0,   f(P_s) = 0,
//! ```
//!
//! with `P_s = √(2Mε_s)`. Its smallest decay eigenvalue is the escape rate.
//! The asymptotic-depth offset is irrelevant here and taken as zero.

use std::f64::consts::PI;

use crate::error::{require_positive, Result, TunnelError};
use crate::master::BathParams;
use crate::numerics::{integrate, solve_tridiagonal, QuadTol};

/// Barrier-to-noise ratio below which the asymptotic rate formula is not
/// trusted.
pub const ASYMPTOTIC_RATIO: f64 = 3.0;

/// Smallest grid accepted by [`escape_rate_numeric`].
pub const MIN_GRID: usize = 200;

const MAX_POWER_ITER: usize = 200;
const POWER_TOL: f64 = 1e-13;

/// Parameters of the activation problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KramersProblem {
    pub mass: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub eps_s: f64,
    /// Half period of the well orbit, used to turn a rate into an escape
    /// temperature.
    pub tau: f64,
}

impl KramersProblem {
    pub fn new(mass: f64, sigma2: f64, gamma: f64, eps_s: f64, tau: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("sigma2", sigma2)?;
        require_positive("gamma", gamma)?;
        require_positive("eps_s", eps_s)?;
        require_positive("tau", tau)?;
        Ok(Self { mass, sigma2, gamma, eps_s, tau })
    }

    /// Barrier momentum `P_s = √(2Mε_s)`.
    pub fn p_s(&self) -> f64 {
        (2.0 * self.mass * self.eps_s).sqrt()
    }

    /// `ε_s/σ²`.
    pub fn ratio(&self) -> f64 {
        self.eps_s / self.sigma2
    }

    fn thermal_momentum2(&self) -> f64 {
        self.mass * self.sigma2
    }

    /// Equilibrium profile `f0(P) = exp(−P²/2Mσ²)`.
    pub fn f0(&self, p: f64) -> f64 {
        (-p * p / (2.0 * self.thermal_momentum2())).exp()
    }

    /// `∫_a^b dQ / f0(Q)`.
    fn inverse_f0_integral(&self, a: f64, b: f64) -> Result<f64> {
        let s = 2.0 * self.thermal_momentum2();
        Ok(integrate(|q| (q * q / s).exp(), a, b, QuadTol { rel: 1e-14, abs: 0.0 })?.value)
    }

    /// Zero-eigenvalue solution `F0(P) = f0(P) ∫_P^{P_s} dQ/f0(Q)`. It carries
    /// a constant outward flux `γMσ²` and vanishes at `P_s`, but its slope at
    /// `P = 0` is `−1`, so it violates the reflecting condition there.
    pub fn stationary_flux_solution(&self, p: f64) -> Result<f64> {
        let s = 2.0 * self.thermal_momentum2();
        let ps = self.p_s();
        if !(0.0..=ps).contains(&p) {
            return Err(TunnelError::OutOfRange(format!("P = {p} outside [0, {ps}]")));
        }
        // Fold f0(P) into the integrand to keep it O(1).
        Ok(integrate(|q| ((q * q - p * p) / s).exp(), p, ps, QuadTol { rel: 1e-14, abs: 0.0 })?.value)
    }
}

/// `f0` and `F0` sampled on a uniform grid over `[0, P_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfiles {
    pub momenta: Vec<f64>,
    pub f0: Vec<f64>,
    pub big_f0: Vec<f64>,
}

pub fn stationary_solutions(prob: &KramersProblem, n: usize) -> Result<StationaryProfiles> {
    if n < 2 {
        return Err(TunnelError::BadWindow(format!("need at least 2 intervals, got {n}")));
    }
    let h = prob.p_s() / n as f64;
    let momenta: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let f0 = momenta.iter().map(|&p| prob.f0(p)).collect();
    let mut big_f0 = momenta.iter().map(|&p| prob.stationary_flux_solution(p)).collect::<Result<Vec<f64>>>()?;
    big_f0[n] = 0.0;
    Ok(StationaryProfiles { momenta, f0, big_f0 })
}

/// Closed-form rate with a flag for ratios below [`ASYMPTOTIC_RATIO`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRate {
    pub rate: f64,
    pub out_of_regime: bool,
}

/// `r = (γ/√π)·√(ε_s/σ²)·exp(−ε_s/σ²)`.
pub fn escape_rate_analytic(prob: &KramersProblem) -> AnalyticRate {
    let x = prob.ratio();
    AnalyticRate { rate: prob.gamma / PI.sqrt() * x.sqrt() * (-x).exp(), out_of_regime: x < ASYMPTOTIC_RATIO }
}

/// Lowest decay mode of the discretized Kramers operator.
#[derive(Debug, Clone, PartialEq)]
pub struct KramersSolution {
    pub r: f64,
    pub momenta: Vec<f64>,
    /// Mode shape, nonnegative, maximum 1, zero at `P_s`.
    pub f_profile: Vec<f64>,
    /// Escape temperature (energy units) from inverting `r = e^{−ε_s/T}/2τ`;
    /// `None` when `2τr ≥ 1`.
    pub t_esc: Option<f64>,
    pub iterations: usize,
}

/// Smallest eigenvalue of the Kramers operator on `n` intervals of `[0, P_s]`.
///
/// Writing `f = f0·g` turns the operator into `γMσ² ∂_P(f0 ∂_P g)`, which is
/// discretized in flux form with the face weights `h/∫dQ/f0` over each cell.
/// That weight makes `F0` an exact discrete solution and gives a symmetric
/// positive definite pencil `A g = r B g` with `B = diag(V f0)` (half cell at
/// the reflecting end). The lowest mode is found by shifted inverse
/// iteration with Rayleigh-quotient estimates; the shift stays at half the
/// current estimate so the shifted matrix remains positive definite.
pub fn escape_rate_numeric(prob: &KramersProblem, n: usize) -> Result<KramersSolution> {
    if n < MIN_GRID {
        return Err(TunnelError::BadWindow(format!("need n >= {MIN_GRID}, got {n}")));
    }
    let h = prob.p_s() / n as f64;
    let k = prob.gamma * prob.thermal_momentum2();
    let momenta: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    // Unknowns g_0 .. g_{n-1}; g_n = 0.
    let w: Vec<f64> =
        (0..n).map(|i| prob.inverse_f0_integral(momenta[i], momenta[i + 1]).map(|v| k / v)).collect::<Result<_>>()?;
    let b: Vec<f64> = (0..n)
        .map(|i| {
            let vol = if i == 0 { 0.5 * h } else { h };
            vol * prob.f0(momenta[i])
        })
        .collect();
    let a_diag: Vec<f64> = (0..n).map(|i| w[i] + if i > 0 { w[i - 1] } else { 0.0 }).collect();
    let a_off: Vec<f64> = (0..n - 1).map(|i| -w[i]).collect();

    // Energy form of x·Ax: a sum of squares, free of the cancellation that
    // makes the expanded product useless once r is far below the face
    // weights.
    let rayleigh = |x: &[f64]| -> f64 {
        let num: f64 = (0..n)
            .map(|i| {
                let next = if i + 1 < n { x[i + 1] } else { 0.0 };
                w[i] * (next - x[i]).powi(2)
            })
            .sum();
        let den: f64 = x.iter().zip(&b).map(|(a, bb)| a * a * bb).sum();
        num / den
    };

    let mut x = vec![1.0; n];
    let mut r = rayleigh(&x);
    let mut shift = 0.0;
    for it in 1..=MAX_POWER_ITER {
        let diag: Vec<f64> = a_diag.iter().zip(&b).map(|(a, bb)| a - shift * bb).collect();
        let mut y: Vec<f64> = x.iter().zip(&b).map(|(xi, bi)| xi * bi).collect();
        solve_tridiagonal(&a_off, &diag, &a_off, &mut y);
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(TunnelError::NoConvergence(format!("inverse iteration broke down at step {it}")));
        }
        y.iter_mut().for_each(|v| *v /= scale);
        let r_new = rayleigh(&y);
        x = y;
        let done = (r_new - r).abs() <= POWER_TOL * r_new.abs();
        r = r_new;
        shift = 0.5 * r;
        if done {
            if !(r > 0.0) {
                return Err(TunnelError::NoConvergence(format!("lowest eigenvalue {r:e} is not positive")));
            }
            let mut f: Vec<f64> = (0..n).map(|i| x[i] * prob.f0(momenta[i])).collect();
            f.push(0.0);
            let sign = if f.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            let peak = f.iter().fold(0.0f64, |m, v| m.max(sign * v));
            f.iter_mut().for_each(|v| *v = (sign * *v / peak).max(0.0));
            return Ok(KramersSolution {
                r,
                momenta,
                f_profile: f,
                t_esc: escape_temperature(prob.eps_s, r, prob.tau).ok(),
                iterations: it,
            });
        }
    }
    Err(TunnelError::NoConvergence(format!(
        "inverse iteration did not settle in {MAX_POWER_ITER} steps (last estimate {r:e})"
    )))
}

/// Temperature (energy units) reproducing rate `r` through
/// `r = (1/2τ)·exp(−ε_s/T)`.
pub fn escape_temperature(eps_s: f64, r: f64, tau: f64) -> Result<f64> {
    let arg = 2.0 * tau * r;
    if !(arg > 0.0 && arg < 1.0) {
        return Err(TunnelError::DomainError(format!("need 0 < 2τr < 1, got {arg}")));
    }
    Ok(eps_s / (1.0 / arg).ln())
}

/// Escape temperature for the closed-form rate with `τ = π/Ω0`:
/// `T = σ² / [1 − (σ²/ε_s) ln((2γ/Ω0)·√(πε_s/σ²))]`.
pub fn escape_temperature_analytic(prob: &KramersProblem, omega0: f64) -> Result<f64> {
    require_positive("omega0", omega0)?;
    let x = prob.ratio();
    let bracket = 1.0 - ((2.0 * prob.gamma / omega0) * (PI * x).sqrt()).ln() / x;
    if !(bracket > 0.0) {
        return Err(TunnelError::DomainError(format!("bracket {bracket} is not positive")));
    }
    Ok(prob.sigma2 / bracket)
}

/// Effective normal diffusion `σ²_eff = (1 − 4τ_DΔ²/γ)·σ²` left after the
/// anomalous term is absorbed over the decoherence time `τ_D`.
pub fn sigma_eff(bath: &BathParams, tau_d: f64) -> Result<f64> {
    if !(tau_d >= 0.0) {
        return Err(TunnelError::InvalidParameter { name: "tau_d", reason: format!("must be >= 0, got {tau_d}") });
    }
    let correction = if bath.delta == 0.0 || tau_d == 0.0 {
        0.0
    } else if bath.gamma > 0.0 {
        4.0 * tau_d * bath.delta * bath.delta / bath.gamma
    } else {
        f64::INFINITY
    };
    if !(correction < 1.0) {
        return Err(TunnelError::Unphysical(format!(
            "anomalous correction 4τ_DΔ²/γ = {correction} removes all normal diffusion"
        )));
    }
    Ok((1.0 - correction) * bath.sigma2)
}
