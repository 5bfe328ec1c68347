//! Scalar numerical kernels: adaptive Gauss–Kronrod quadrature, the
//! square-root endpoint substitution, bracketed root finding and a tridiagonal
//! solver. Everything here is deterministic: no randomness, fixed iteration
//! order, fixed caps.

use crate::error::{Result, TunnelError};

// Kronrod abscissae on [0, 1]; index 7 is the centre. Odd indices are shared
// with the 7-point Gauss rule. Digits beyond f64 are kept as published.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Hard cap on the number of subintervals held by the adaptive integrator.
const MAX_SUBINTERVALS: usize = 4000;

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub rel: f64,
    pub abs: f64,
}

impl Default for QuadTol {
    fn default() -> Self {
        Self { rel: 1e-12, abs: 1e-300 }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive G7–K15 integration of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate meets `max(tol.abs, tol.rel·|I|)`. Returns `NoConvergence` when the
/// subinterval cap is hit before that.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<Quadrature> {
    integrate_impl(f, a, b, tol, true)
}

/// Like [`integrate`] but returns the best estimate, with its error, when the
/// subinterval cap is reached. For integrands whose evaluation noise sits
/// above the requested tolerance.
pub fn integrate_best_effort<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<Quadrature> {
    integrate_impl(f, a, b, tol, false)
}

fn integrate_impl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol, strict: bool) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, intervals: 0 });
    }
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(&f, a, b);
    parts.push((a, b, v, e));
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(TunnelError::NoConvergence(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(Quadrature { value: total, error: err, intervals: parts.len() });
        }
        if parts.len() >= MAX_SUBINTERVALS {
            if !strict {
                return Ok(Quadrature { value: total, error: err, intervals: parts.len() });
            }
            return Err(TunnelError::NoConvergence(format!(
                "quadrature on [{a}, {b}] stalled at error {err:e} (value {total:e})"
            )));
        }
        let worst = parts.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).map(|(i, _)| i).unwrap_or(0);
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval exhausted at machine resolution; accept what we have.
            let total: f64 = parts.iter().map(|p| p.2).sum::<f64>() + gk15(&f, lo, hi).0;
            return Ok(Quadrature { value: total, error: err, intervals: parts.len() + 1 });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Integrates `f` over `[a, b]` when `f` may behave like `|x − a|^{±1/2}` or
/// `|x − b|^{±1/2}` at the ends.
///
/// The interval is split at its midpoint; the left half uses `x = a + t²`
/// and the right half `x = b − t²`, which turns square-root zeros and
/// inverse-square-root poles into smooth integrands in `t`.
pub fn integrate_sqrt_endpoints<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mid = 0.5 * (lo + hi);
    let half = (mid - lo).sqrt();
    let left = integrate(|t| 2.0 * t * f(lo + t * t), 0.0, half, tol)?;
    let right = integrate(|t| 2.0 * t * f(hi - t * t), 0.0, (hi - mid).sqrt(), tol)?;
    Ok(sign * (left.value + right.value))
}

/// Maximum iterations of the bracketed root finder. Each iteration at least
/// halves the bracket every second step, so this is far beyond what f64
/// resolution needs.
const MAX_ROOT_ITER: usize = 400;

/// Finds a root of `f` in `[a, b]` given a sign change.
///
/// Secant (regula falsi, Illinois-weighted) steps are taken while they shrink
/// the bracket fast enough; otherwise the step falls back to bisection. The
/// loop stops when the bracket is below `xtol` or `f` is exactly zero.
pub fn find_root<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(TunnelError::NoRoot(format!("f({a}) = {fa:e} and f({b}) = {fb:e} do not bracket a root")));
    }
    let mut side = 0i8;
    let mut last_width = (b - a).abs();
    for it in 0..MAX_ROOT_ITER {
        let width = (b - a).abs();
        if width <= xtol {
            break;
        }
        let secant = (a * fb - b * fa) / (fb - fa);
        let bisect = 0.5 * (a + b);
        // Force a bisection every other step when the bracket did not at least
        // halve, which bounds the iteration count by twice that of bisection.
        let use_secant =
            secant.is_finite() && secant > a.min(b) && secant < a.max(b) && !(it % 2 == 1 && width > 0.5 * last_width);
        last_width = width;
        let x = if use_secant { secant } else { bisect };
        if x == a || x == b {
            break;
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` couples row `i+1` to column `i`, `upper[i]` couples row `i` to
/// column `i+1`. Works for any scalar supporting field arithmetic; intended for
/// diagonally dominant systems, so no pivoting.
pub fn solve_tridiagonal<T>(lower: &[T], diag: &[T], upper: &[T], rhs: &mut [T])
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<Output = T> + std::ops::Div<Output = T>,
{
    let n = diag.len();
    debug_assert_eq!(rhs.len(), n);
    if n == 0 {
        return;
    }
    let mut denom = diag[0];
    rhs[0] = rhs[0] / denom;
    if n == 1 {
        return;
    }
    let mut c_prime = Vec::with_capacity(n - 1);
    c_prime.push(upper[0] / denom);
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c_prime[i - 1];
        if i + 1 < n {
            c_prime.push(upper[i] / denom);
        }
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - c_prime[i] * rhs[i + 1];
    }
}
