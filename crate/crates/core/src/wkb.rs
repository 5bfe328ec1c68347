//! Cubic metastable well and its WKB spectral data.
//!
//! The potential is `U(x) = ½MΩ0²x² − (λ/6)x³`, flattened to the constant
//! `−U∞` once the cubic branch falls below it. The well at the origin is
//! separated from the outside region by a barrier of height `ε_s` at `x_s`,
//! and the potential crosses zero again at `x_exit = 3x_s/2`.
//!
//! Everything else in this module is built on the action integral
//! `S(x, y; E) = ∫_y^x √(2M|U − E|) dx'`:
//!
//! * the Bohr–Sommerfeld condition `S(x_R, x_L; E0) = πħ/2` fixes the
//!   false-vacuum energy,
//! * the barrier action `S0 = S(x_out, x_R; E0)` and the half period `τ` give
//!   the resonance half width `ε = (ħ/4τ)·exp(−2S0/ħ)`,
//! * the Lorentzian weights, phase shifts and the closed-system persistence
//!   probability follow from `E0` and `ε` alone.
//!
//! Turning-point singularities are removed by the substitutions `x = a + t²`
//! and `x = b − t²` before adaptive Gauss–Kronrod quadrature, so the results
//! are accurate to near machine precision.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{require_nonnegative, require_positive, Result, TunnelError};
use crate::numerics::{find_root, integrate_best_effort, integrate_sqrt_endpoints, QuadTol};

/// Relative quadrature tolerance used for every action-type integral.
const ACTION_REL_TOL: f64 = 1e-12;

/// Residual bound `|U(x_i) − E| ≤ RESIDUAL_TOL·ε_s` promised for turning points.
const RESIDUAL_TOL: f64 = 1e-12;

/// Physical parameters of the cubic well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    pub mass: f64,
    pub omega0: f64,
    pub lambda: f64,
    pub u_infinity: f64,
    pub hbar: f64,
}

impl PotentialParams {
    pub fn new(mass: f64, omega0: f64, lambda: f64, u_infinity: f64, hbar: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("omega0", omega0)?;
        require_positive("lambda", lambda)?;
        require_nonnegative("u_infinity", u_infinity)?;
        require_positive("hbar", hbar)?;
        Ok(Self { mass, omega0, lambda, u_infinity, hbar })
    }

    /// Parameters whose barrier height is `ratio` times the harmonic
    /// zero-point energy `ħΩ0/2`. Used to dial in a given `ε_s/ε0`.
    pub fn from_barrier_ratio(mass: f64, omega0: f64, ratio: f64, u_infinity: f64, hbar: f64) -> Result<Self> {
        require_positive("ratio", ratio)?;
        require_positive("mass", mass)?;
        require_positive("omega0", omega0)?;
        require_positive("hbar", hbar)?;
        let eps_s = ratio * 0.5 * hbar * omega0;
        let lambda = (2.0 * mass.powi(3) * omega0.powi(6) / (3.0 * eps_s)).sqrt();
        Self::new(mass, omega0, lambda, u_infinity, hbar)
    }

    /// Barrier position `x_s = 2MΩ0²/λ`.
    pub fn x_s(&self) -> f64 {
        2.0 * self.mass * self.omega0 * self.omega0 / self.lambda
    }

    /// Barrier height `ε_s = 2M³Ω0⁶/(3λ²)`.
    pub fn eps_s(&self) -> f64 {
        2.0 * self.mass.powi(3) * self.omega0.powi(6) / (3.0 * self.lambda * self.lambda)
    }

    /// Outer zero of the cubic, `x_exit = 3x_s/2`.
    pub fn x_exit(&self) -> f64 {
        1.5 * self.x_s()
    }

    /// Harmonic zero-point energy `ħΩ0/2`.
    pub fn eps0(&self) -> f64 {
        0.5 * self.hbar * self.omega0
    }

    fn cubic(&self, x: f64) -> f64 {
        x * x * (0.5 * self.mass * self.omega0 * self.omega0 - self.lambda * x / 6.0)
    }

    /// Point beyond `x_exit` where the cubic branch reaches `−U∞` and the
    /// potential becomes flat.
    pub fn x_clamp(&self) -> f64 {
        let x_exit = self.x_exit();
        if self.u_infinity == 0.0 {
            return x_exit;
        }
        let target = -self.u_infinity;
        let mut hi = 2.0 * x_exit;
        while self.cubic(hi) > target {
            hi *= 2.0;
        }
        find_root(|x| self.cubic(x) - target, x_exit, hi, 1e-15 * hi).unwrap_or(hi)
    }

    /// Potential energy at `x`.
    pub fn potential(&self, x: f64) -> f64 {
        let u = self.cubic(x);
        if x > self.x_exit() {
            u.max(-self.u_infinity)
        } else {
            u
        }
    }

    /// Local WKB momentum `p(x) = √(2M|U(x) − E|)`.
    pub fn local_momentum(&self, x: f64, e: f64) -> f64 {
        (2.0 * self.mass * (self.potential(x) - e).abs()).sqrt()
    }

    /// Asymptotic momentum `p∞(E) = √(2M(E + U∞))`.
    pub fn p_infinity(&self, e: f64) -> f64 {
        (2.0 * self.mass * (e + self.u_infinity)).max(0.0).sqrt()
    }

    /// Energy of asymptotic momentum `p`: `E = p²/2M − U∞`.
    pub fn energy_of_momentum(&self, p: f64) -> f64 {
        p * p / (2.0 * self.mass) - self.u_infinity
    }

    fn root_in(&self, e: f64, a: f64, b: f64) -> Result<f64> {
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        find_root(|x| self.potential(x) - e, a, b, 4.0 * f64::EPSILON * scale)
    }

    /// All real solutions of `U(x) = E`, sorted.
    ///
    /// For `0 < E < ε_s` this is `[x_L, x_R, x_out]`; for `E ≥ ε_s` only the
    /// left root remains; for `−U∞ < E ≤ 0` the roots sit at the origin and
    /// beyond `x_exit`.
    pub fn classical_roots(&self, e: f64) -> Result<Vec<f64>> {
        let eps_s = self.eps_s();
        let x_s = self.x_s();
        let mut roots = Vec::with_capacity(3);
        if e > 0.0 {
            let left = -(2.0 * e / (self.mass * self.omega0 * self.omega0)).sqrt();
            roots.push(self.root_in(e, left, 0.0)?);
        }
        if e > 0.0 && e < eps_s {
            roots.push(self.root_in(e, 0.0, x_s)?);
            roots.push(self.root_in(e, x_s, self.x_exit())?);
        } else if e == eps_s {
            roots.push(x_s);
        } else if e == 0.0 {
            roots.push(0.0);
            roots.push(self.x_exit());
        } else if e < 0.0 && e > -self.u_infinity {
            roots.push(self.root_in(e, self.x_exit(), self.x_clamp())?);
        }
        Ok(roots)
    }

    /// The three classical turning points `x_L < x_R < x_out` for an energy
    /// inside the well.
    pub fn turning_points(&self, e: f64) -> Result<(f64, f64, f64)> {
        let eps_s = self.eps_s();
        if !(e > 0.0 && e < eps_s) {
            return Err(TunnelError::OutOfRange(format!("E = {e:e} must lie strictly inside (0, ε_s = {eps_s:e})")));
        }
        let r = self.classical_roots(e)?;
        let (xl, xr, xo) = (r[0], r[1], r[2]);
        let resolution = 64.0 * f64::EPSILON * self.x_s();
        if xr - xl <= resolution || xo - xr <= resolution {
            return Err(TunnelError::Degenerate(format!("roots ({xl:e}, {xr:e}, {xo:e}) closer than {resolution:e}")));
        }
        for x in [xl, xr, xo] {
            let res = (self.potential(x) - e).abs();
            if res > RESIDUAL_TOL * eps_s {
                return Err(TunnelError::Degenerate(format!("turning point {x:e} has residual {res:e}")));
            }
        }
        Ok((xl, xr, xo))
    }

    /// WKB action `S(x, y; E) = ∫_y^x √(2M|U − E|) dx'`.
    ///
    /// Note the order of the limits: `action(x, y, E) = −action(y, x, E)`.
    /// The interval must not contain a turning point in its interior.
    pub fn action(&self, x: f64, y: f64, e: f64) -> Result<f64> {
        if x == y {
            return Ok(0.0);
        }
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let slack = 1e-10 * (hi - lo).max(self.x_s());
        if let Some(r) = self.classical_roots(e)?.into_iter().find(|&r| r > lo + slack && r < hi - slack) {
            return Err(TunnelError::RegionCrossing(format!(
                "turning point {r:e} lies inside [{lo:e}, {hi:e}] at E = {e:e}"
            )));
        }
        let p_scale = (2.0 * self.mass * e.abs().max(self.eps_s())).sqrt();
        let tol = QuadTol { rel: ACTION_REL_TOL, abs: 1e-15 * p_scale * (hi - lo) };
        let integrand = |s: f64| self.local_momentum(s, e);
        let xc = self.x_clamp();
        let value = if xc > lo && xc < hi {
            integrate_sqrt_endpoints(integrand, lo, xc, tol)? + integrate_sqrt_endpoints(integrand, xc, hi, tol)?
        } else {
            integrate_sqrt_endpoints(integrand, lo, hi, tol)?
        };
        Ok(if x > y { value } else { -value })
    }

    /// Half period of the classical orbit in the well, `τ(E) = dS(x_R, x_L)/dE
    /// = ∫ M/p dx` over `[x_L, x_R]`. Tends to `π/Ω0` in the harmonic limit.
    pub fn half_period(&self, e: f64) -> Result<f64> {
        let (xl, xr, _) = self.turning_points(e)?;
        let m = self.mass;
        let tol = QuadTol { rel: ACTION_REL_TOL, abs: 0.0 };
        integrate_sqrt_endpoints(
            |s| {
                let p = self.local_momentum(s, e);
                if p > 0.0 {
                    m / p
                } else {
                    0.0
                }
            },
            xl,
            xr,
            tol,
        )
    }

    /// Bohr–Sommerfeld ground state: solves `S(x_R, x_L; E0) = πħ/2`.
    pub fn bohr_sommerfeld_ground(&self) -> Result<f64> {
        let eps_s = self.eps_s();
        let target = 0.5 * PI * self.hbar;
        // The well action at the barrier top is (ε_s/Ω0)·18/5; past that no
        // quasi-bound level fits under the barrier.
        let s_top = 3.6 * eps_s / self.omega0;
        if target >= s_top {
            return Err(TunnelError::NoRoot(format!("πħ/2 = {target:e} exceeds the largest well action {s_top:e}")));
        }
        let g = |e: f64| -> f64 {
            match self.turning_points(e) {
                Ok((xl, xr, _)) => self.action(xr, xl, e).map(|s| s - target).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            }
        };
        let e_lo = 1e-6 * self.eps0().min(eps_s);
        let e_hi = eps_s * (1.0 - 1e-9);
        let (g_lo, g_hi) = (g(e_lo), g(e_hi));
        if !(g_lo < 0.0 && g_hi > 0.0) {
            return Err(TunnelError::NoRoot(format!(
                "S − πħ/2 does not change sign on [{e_lo:e}, {e_hi:e}] ({g_lo:e}, {g_hi:e})"
            )));
        }
        let xtol = 1e-15 * self.eps0().min(eps_s);
        find_root(g, e_lo, e_hi, xtol)
    }

    /// Asymptotic phase offset `f(E)` defined by `S(x, x_out) = p∞x + f(E)`
    /// for `x` far outside the barrier. With the flattened tail the integrand
    /// vanishes beyond the clamp point, so the integral is finite.
    pub fn asymptotic_phase_offset(&self, e: f64) -> Result<f64> {
        let (_, _, xo) = self.turning_points(e)?;
        let p_inf = self.p_infinity(e);
        let xc = self.x_clamp();
        let tail = if xc > xo {
            // The integrand is a difference of nearly equal momenta, noisy at
            // the level of the cubic's rounding; the offset only enters as a
            // constant phase, so a best-effort estimate is enough.
            let tol = QuadTol { rel: 1e-10, abs: 0.0 };
            let mid = 0.5 * (xo + xc);
            let g = |s: f64| self.local_momentum(s, e) - p_inf;
            integrate_best_effort(|t| 2.0 * t * g(xo + t * t), 0.0, (mid - xo).sqrt(), tol)?.value
                + integrate_best_effort(g, mid, xc, tol)?.value
        } else {
            0.0
        };
        Ok(tail - p_inf * xo)
    }

    /// Spectral data of the false vacuum.
    pub fn resonance_data(&self) -> Result<ResonanceData> {
        let e0 = self.bohr_sommerfeld_ground()?;
        let (x_l, x_r, x_out) = self.turning_points(e0)?;
        let tau = self.half_period(e0)?;
        let s0 = self.action(x_out, x_r, e0)?;
        let ln_epsilon = (self.hbar / (4.0 * tau)).ln() - 2.0 * s0 / self.hbar;
        let epsilon = ln_epsilon.exp();
        let f0 = self.asymptotic_phase_offset(e0)? + 0.25 * PI;
        Ok(ResonanceData { e0, tau, s0, epsilon, ln_epsilon, f0, x_l, x_r, x_out, hbar: self.hbar })
    }
}

/// False-vacuum resonance: quasi-bound energy, width and the quantities they
/// are built from.
///
/// `epsilon` underflows to zero for very opaque barriers; `ln_epsilon` is
/// always finite and should be preferred for rate exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceData {
    pub e0: f64,
    /// Half period of the classical orbit at `E0`.
    pub tau: f64,
    /// Barrier action `S(x_out, x_R; E0)`.
    pub s0: f64,
    pub epsilon: f64,
    pub ln_epsilon: f64,
    /// Phase offset `f(E0) + π/4` of the outgoing wave.
    pub f0: f64,
    pub x_l: f64,
    pub x_r: f64,
    pub x_out: f64,
    pub hbar: f64,
}

/// Phase shift and squared normalization of the continuum eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShift {
    pub delta: f64,
    pub k2: f64,
}

impl ResonanceData {
    /// Upper pole `E+ = E0 + iε`.
    pub fn e_plus(&self) -> Complex64 {
        Complex64::new(self.e0, self.epsilon)
    }

    /// Lower pole `E− = E0 − iε`.
    pub fn e_minus(&self) -> Complex64 {
        Complex64::new(self.e0, -self.epsilon)
    }

    /// Closed-system decay rate `Γ = 2ε/ħ`.
    pub fn closed_rate(&self) -> f64 {
        2.0 * self.epsilon / self.hbar
    }

    /// Phase shift `δ_E` (continuous branch) and `K_E²` near the resonance.
    ///
    /// `δ_E = f0/ħ + atan2(ε, E − E0)`, which unwraps the square root of
    /// `(E − E−)/(E − E+)`: it falls by π as `E` sweeps upward through `E0`.
    pub fn phase_shift(&self, mass: f64, e: f64) -> PhaseShift {
        let z = e - self.e0;
        let eps = self.epsilon;
        PhaseShift {
            delta: self.f0 / self.hbar + eps.atan2(z),
            k2: mass / (PI * self.hbar * self.tau) * eps / (z * z + eps * eps),
        }
    }

    /// `∂δ_E/∂E = −ε/((E − E0)² + ε²)`.
    pub fn phase_derivative_energy(&self, e: f64) -> f64 {
        let z = e - self.e0;
        -self.epsilon / (z * z + self.epsilon * self.epsilon)
    }

    /// `∂δ/∂p` at asymptotic momentum `p`, using `dE = p dp / M`.
    pub fn phase_derivative_momentum(&self, params: &PotentialParams, p: f64) -> f64 {
        p / params.mass * self.phase_derivative_energy(params.energy_of_momentum(p))
    }

    /// Lorentzian false-vacuum weight `C_E² = (ε/π)/((E − E0)² + ε²)`.
    pub fn false_vacuum_weight(&self, e: f64) -> f64 {
        let z = e - self.e0;
        self.epsilon / PI / (z * z + self.epsilon * self.epsilon)
    }

    /// Analytic persistence probability `ρ²(t) = exp(−2εt/ħ)`.
    pub fn persistence_analytic(&self, t: f64) -> f64 {
        (-2.0 * self.epsilon * t / self.hbar).exp()
    }
}

/// Energy grid used to evaluate the persistence probability by direct
/// summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceGrid {
    /// Half width of the window in units of `ε`.
    pub window_in_epsilons: f64,
    pub n: usize,
}

/// Largest acceptable predicted relative error of the grid route.
pub const PERSISTENCE_TOL: f64 = 1e-2;

/// Analytic and grid values of the persistence probability at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePoint {
    pub t: f64,
    pub analytic: f64,
    pub numeric: f64,
}

/// Closed-system persistence `ρ²(t)`, analytically and as
/// `|Σ_i w_i e^{−iE_i t/ħ}|²` on a uniform energy grid.
///
/// The grid weights are the Lorentzian restricted to the window and
/// renormalized to unit sum, so `ρ²(0) = 1` on the grid as well. The error of
/// the grid route is dominated by the truncated tail mass `m`; empirically it
/// stays below about `3m` on `t ≤ 3ħ/ε` when the spacing resolves `ε`. A
/// window whose `3m` exceeds [`PERSISTENCE_TOL`], or whose spacing exceeds
/// `ε`, is rejected.
pub fn persistence_closed(res: &ResonanceData, t: f64, grid: PersistenceGrid) -> Result<PersistencePoint> {
    let pts = persistence_curve(res, &[t], grid)?;
    Ok(pts[0])
}

/// Vectorized form of [`persistence_closed`].
pub fn persistence_curve(res: &ResonanceData, times: &[f64], grid: PersistenceGrid) -> Result<Vec<PersistencePoint>> {
    if let Some(&t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(TunnelError::OutOfRange(format!("time must be >= 0, got {t}")));
    }
    let w = grid.window_in_epsilons;
    if !(w > 0.0) || grid.n < 16 {
        return Err(TunnelError::BadWindow(format!("window {w} ε with n = {}", grid.n)));
    }
    let tail = 1.0 - 2.0 / PI * w.atan();
    let de_over_eps = 2.0 * w / (grid.n - 1) as f64;
    if 3.0 * tail > PERSISTENCE_TOL || de_over_eps > 1.0 {
        return Err(TunnelError::GridTooNarrow(format!(
            "window ±{w}ε with n = {} leaves tail mass {tail:.3e} and spacing {de_over_eps:.3}ε",
            grid.n
        )));
    }
    let eps = res.epsilon;
    let offsets: Vec<f64> = (0..grid.n).map(|i| (-w + de_over_eps * i as f64) * eps).collect();
    let raw: Vec<f64> = offsets.iter().map(|z| res.false_vacuum_weight(res.e0 + z)).collect();
    let total: f64 = raw.iter().sum();
    Ok(times
        .iter()
        .map(|&t| {
            // Phases are taken relative to E0; the global factor e^{−iE0t/ħ}
            // drops out of the modulus.
            let (mut re, mut im) = (0.0, 0.0);
            for (z, wi) in offsets.iter().zip(&raw) {
                let (s, c) = (z * t / res.hbar).sin_cos();
                re += wi * c;
                im -= wi * s;
            }
            let amp2 = (re * re + im * im) / (total * total);
            PersistencePoint { t, analytic: res.persistence_analytic(t), numeric: amp2 }
        })
        .collect())
}
