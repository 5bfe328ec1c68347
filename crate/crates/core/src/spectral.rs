//! Energy representation on a uniform grid of asymptotic momenta.
//!
//! Continuum eigenfunctions are labelled by their asymptotic momentum `p`,
//! with `E = p²/2M − U∞` and `dE = (p/M) dp`. Matrix elements and coefficient
//! matrices carry a common factor `M/√(p1 p2)`; stripping it gives *reduced*
//! kernels that compose with the plain momentum measure:
//!
//! ```text
//! ∫dE A_{E1 E} B_{E E2}  =  (M/√(p1 p2)) · Σ_k a_{1k} b_{k2} dp
//! δ(E1 − E2)             =  (M/√(p1 p2)) · δ_{12}/dp
//! C_{E1E2}               =  (M/√(p1 p2)) · c_{12}
//! ```
//!
//! Everything stored in [`OperatorMatrices`] and [`WignerCoeffGrid`] is in this
//! reduced form. Energy-measure sums then become plain `dp` sums, e.g. the
//! norm `∫dE C_EE = Σ_i c_ii dp` and the purity `Σ|c_ij|² dp²`.
//!
//! Distributions are discretized as
//!
//! * `δ(p1 − p2) → δ_ij / dp`,
//! * `PV 1/(p1 − p2) → 1/(p_i − p_j)` off the diagonal and `0` on it,
//! * `∂_{p1} PV 1/(p1 − p2) → −1/(p_i − p_j)²` off the diagonal and
//!   `π²/(3dp²)` on it (this diagonal makes the kernel annihilate constants,
//!   as its continuum counterpart does),
//! * `∂_{p1} δ(p1 − p2)` and `∂²_{p1p2} δ(p1 − p2)` by centered differences on
//!   the neighbouring index.
//!
//! Only the singular parts of the matrix elements are kept. The composite
//! identities between them hold in the weak sense, i.e. when applied to smooth
//! test functions away from the window edges; [`identity_residuals`] and
//! [`refinement_study`] measure how fast they converge.

use std::f64::consts::PI;
use std::io::{self, Write};

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Result, TunnelError};
use crate::wkb::{PotentialParams, ResonanceData};

/// Largest acceptable truncated Lorentzian mass for a false-vacuum grid.
pub const MAX_TRUNCATION_DEFICIT: f64 = 1e-2;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Uniform grid of asymptotic momenta with its energy map.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    p: Vec<f64>,
    dp: f64,
    mass: f64,
    u_infinity: f64,
}

impl MomentumGrid {
    /// Uniform grid of `n` points on `[p_min, p_max]`.
    pub fn new(p_min: f64, p_max: f64, n: usize, mass: f64, u_infinity: f64) -> Result<Self> {
        if !(p_min > 0.0 && p_max > p_min && p_max.is_finite()) || n < 16 {
            return Err(TunnelError::BadWindow(format!(
                "need 0 < p_min < p_max and n >= 16, got [{p_min}, {p_max}] with n = {n}"
            )));
        }
        if !(mass > 0.0) || !(u_infinity >= 0.0) {
            return Err(TunnelError::BadWindow(format!(
                "mass {mass} and u_infinity {u_infinity} must be positive / nonnegative"
            )));
        }
        let dp = (p_max - p_min) / (n - 1) as f64;
        let p = (0..n).map(|i| p_min + dp * i as f64).collect();
        Ok(Self { p, dp, mass, u_infinity })
    }

    /// Grid whose energy window is `E0 ± window_in_epsilons·ε`.
    pub fn around_resonance(
        params: &PotentialParams,
        res: &ResonanceData,
        window_in_epsilons: f64,
        n: usize,
    ) -> Result<Self> {
        let half = window_in_epsilons * res.epsilon;
        let (e_lo, e_hi) = (res.e0 - half, res.e0 + half);
        if !(window_in_epsilons > 0.0) || !(e_lo + params.u_infinity > 0.0) {
            return Err(TunnelError::BadWindow(format!(
                "window ±{window_in_epsilons}ε reaches below the asymptotic threshold"
            )));
        }
        let grid = Self::new(params.p_infinity(e_lo), params.p_infinity(e_hi), n, params.mass, params.u_infinity)?;
        let (lo, hi) = grid.energy_range();
        let slack = 1e-9 * half;
        if lo > e_lo + slack || hi < e_hi - slack {
            return Err(TunnelError::BadWindow(format!("energy range [{lo}, {hi}] does not cover [{e_lo}, {e_hi}]")));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn momenta(&self) -> &[f64] {
        &self.p
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.p[i] * self.p[i] / (2.0 * self.mass) - self.u_infinity
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.energy(i)).collect()
    }

    /// `E_i − E_j` computed from momenta, free of the cancellation in
    /// subtracting two nearly equal energies.
    pub fn energy_difference(&self, i: usize, j: usize) -> f64 {
        (self.p[i] - self.p[j]) * (self.p[i] + self.p[j]) / (2.0 * self.mass)
    }

    pub fn energy_range(&self) -> (f64, f64) {
        (self.energy(0), self.energy(self.len() - 1))
    }

    /// Storage needed by one dense complex `n × n` matrix on this grid.
    pub fn matrix_bytes(&self) -> usize {
        self.len() * self.len() * std::mem::size_of::<Complex64>()
    }

    /// Index range of the interior rows used by weak identity checks (the
    /// middle half of the grid).
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.len() / 4..(3 * self.len()) / 4
    }

    pub(crate) fn ensure_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(TunnelError::GridMismatch(format!(
                "grids differ: n = {} vs {}, dp = {} vs {}",
                self.len(),
                other.len(),
                self.dp,
                other.dp
            )))
        }
    }
}

/// Principal-value kernel `1/(p_i − p_j)` with zero diagonal.
pub fn pv_kernel(grid: &MomentumGrid) -> Array2<f64> {
    let p = grid.momenta();
    Array2::from_shape_fn((p.len(), p.len()), |(i, j)| if i == j { 0.0 } else { 1.0 / (p[i] - p[j]) })
}

/// Discrete delta kernel `δ_ij/dp`.
pub fn delta_kernel(grid: &MomentumGrid) -> Array2<f64> {
    Array2::eye(grid.len()) / grid.dp()
}

/// Kernel of `∂_{p1} PV 1/(p1 − p2)`.
pub fn pv_derivative_kernel(grid: &MomentumGrid) -> Array2<f64> {
    let p = grid.momenta();
    let diag = PI * PI / (3.0 * grid.dp() * grid.dp());
    Array2::from_shape_fn((p.len(), p.len()), |(i, j)| {
        if i == j {
            diag
        } else {
            let d = p[i] - p[j];
            -1.0 / (d * d)
        }
    })
}

/// Reduced position, momentum, position-squared and position-times-momentum
/// kernels.
#[derive(Debug, Clone)]
pub struct OperatorMatrices {
    pub grid: MomentumGrid,
    pub hbar: f64,
    pub x: Array2<Complex64>,
    pub p: Array2<Complex64>,
    pub x2: Array2<Complex64>,
    pub xp: Array2<Complex64>,
}

/// Builds the four reduced kernels. `phase_derivs[i]` is `∂δ/∂p` at node `i`.
pub fn operator_matrices(grid: &MomentumGrid, phase_derivs: &[f64], hbar: f64) -> Result<OperatorMatrices> {
    let n = grid.len();
    if phase_derivs.len() != n {
        return Err(TunnelError::GridMismatch(format!("{} phase derivatives for {n} grid points", phase_derivs.len())));
    }
    let p = grid.momenta();
    let dp = grid.dp();
    let pv = pv_kernel(grid);
    let dpv = pv_derivative_kernel(grid);
    let dd = phase_derivs;

    let x = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut v = dpv[[i, j]] / PI;
        if i == j {
            v -= dd[i] / dp;
        }
        Complex64::new(hbar * v, 0.0)
    });
    let pm = Array2::from_shape_fn((n, n), |(i, j)| Complex64::new(0.0, -(p[i] + p[j]) * pv[[i, j]] / (2.0 * PI)));
    let x2 = Array2::from_shape_fn((n, n), |(i, j)| {
        // −∂²δ as a second difference, in units of 1/dp³.
        let second = if i == j {
            2.0
        } else if i.abs_diff(j) == 1 {
            -1.0
        } else {
            0.0
        } / (dp * dp * dp);
        let mut v = second - (dd[i] + dd[j]) * dpv[[i, j]] / PI;
        if i == j {
            v += dd[i] * dd[i] / dp;
        }
        Complex64::new(hbar * hbar * v, 0.0)
    });
    let xp = Array2::from_shape_fn((n, n), |(i, j)| {
        let ddelta = if j == i + 1 {
            1.0
        } else if i == j + 1 {
            -1.0
        } else {
            0.0
        } / (2.0 * dp * dp);
        let v = 2.0 * p[j] * ddelta + dd[i] * (p[i] + p[j]) * pv[[i, j]] / PI;
        I * (0.5 * hbar * v)
    });
    Ok(OperatorMatrices { grid: grid.clone(), hbar, x, p: pm, x2, xp })
}

/// Per-node `∂δ/∂p` of the false-vacuum resonance on `grid`.
pub fn resonance_phase_derivs(grid: &MomentumGrid, params: &PotentialParams, res: &ResonanceData) -> Vec<f64> {
    grid.momenta().iter().map(|&p| res.phase_derivative_momentum(params, p)).collect()
}

/// Reduced coefficient matrix `c_{p1p2}` of a (generally mixed) state.
#[derive(Debug, Clone)]
pub struct WignerCoeffGrid {
    pub grid: MomentumGrid,
    pub c: Array2<Complex64>,
}

/// Rank-one false-vacuum coefficients and the Lorentzian mass the window kept.
#[derive(Debug, Clone)]
pub struct FalseVacuum {
    pub coeffs: WignerCoeffGrid,
    /// `Σ C_E² dE` over the grid before renormalization.
    pub raw_mass: f64,
}

impl FalseVacuum {
    pub fn truncation_deficit(&self) -> f64 {
        1.0 - self.raw_mass
    }
}

/// False-vacuum state `c = φφᵀ` with `φ_i = √((p_i/M)·C_E²(E_i))`, normalized
/// so that `Σ φ² dp = 1`.
///
/// The amplitudes are taken real and positive: all observables used here
/// depend only on `|C_E|²`.
pub fn false_vacuum_coeffs(grid: &MomentumGrid, res: &ResonanceData) -> Result<FalseVacuum> {
    let m = grid.mass();
    let dp = grid.dp();
    let mut phi: Vec<f64> = grid
        .momenta()
        .iter()
        .enumerate()
        .map(|(i, &p)| (p / m * res.false_vacuum_weight(grid.energy(i))).sqrt())
        .collect();
    let raw_mass: f64 = phi.iter().map(|f| f * f).sum::<f64>() * dp;
    let deficit = 1.0 - raw_mass;
    if deficit > MAX_TRUNCATION_DEFICIT {
        return Err(TunnelError::GridTooNarrow(format!("window keeps only {raw_mass:.5} of the Lorentzian mass")));
    }
    let scale = raw_mass.sqrt().recip();
    phi.iter_mut().for_each(|f| *f *= scale);
    let n = phi.len();
    let c = Array2::from_shape_fn((n, n), |(i, j)| Complex64::new(phi[i] * phi[j], 0.0));
    Ok(FalseVacuum { coeffs: WignerCoeffGrid { grid: grid.clone(), c }, raw_mass })
}

/// Norm, mean energy and purity of a coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub norm: f64,
    pub mean_energy: f64,
    pub purity: f64,
    /// `Σ_{i≠j} |c_ij|² dp²`.
    pub offdiag_mass: f64,
}

impl WignerCoeffGrid {
    pub fn new(grid: MomentumGrid, c: Array2<Complex64>) -> Result<Self> {
        if c.dim() != (grid.len(), grid.len()) {
            return Err(TunnelError::GridMismatch(format!("matrix {:?} on a grid of {} points", c.dim(), grid.len())));
        }
        Ok(Self { grid, c })
    }

    /// Largest `|c_ij − conj(c_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.c[[i, j]] - self.c[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Exact closed evolution `c_ij → c_ij·exp(−i(E_i − E_j)t/ħ)`.
    pub fn evolve_closed(&self, t: f64, hbar: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(TunnelError::OutOfRange(format!("time must be >= 0, got {t}")));
        }
        let g = &self.grid;
        let mut out = self.c.clone();
        for ((i, j), v) in out.indexed_iter_mut() {
            if i != j {
                *v *= Complex64::from_polar(1.0, -g.energy_difference(i, j) * t / hbar);
            }
        }
        Ok(Self { grid: g.clone(), c: out })
    }

    /// `Re Σ conj(a_ij) b_ij dp²`, the energy-measure overlap of two states.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let dp = self.grid.dp();
        let s: f64 = self.c.iter().zip(other.c.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        Ok(s * dp * dp)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let dp = self.grid.dp();
        let mut norm = 0.0;
        let mut mean = 0.0;
        for i in 0..self.grid.len() {
            let d = self.c[[i, i]].re;
            norm += d;
            mean += self.grid.energy(i) * d;
        }
        let total: f64 = self.c.iter().map(|v| v.norm_sqr()).sum();
        let diag: f64 = self.c.diag().iter().map(|v| v.norm_sqr()).sum();
        Diagnostics {
            norm: norm * dp,
            mean_energy: if norm != 0.0 { mean / norm } else { 0.0 },
            purity: total * dp * dp,
            offdiag_mass: (total - diag) * dp * dp,
        }
    }

    /// Parts even and odd under exchange of the two labels.
    pub fn parity_split(&self) -> (Array2<Complex64>, Array2<Complex64>) {
        let t = self.c.t();
        let even = (&self.c + &t).mapv(|v| v * 0.5);
        let odd = (&self.c - &t).mapv(|v| v * 0.5);
        (even, odd)
    }

    /// Writes the matrix as CSV rows `i,j,re,im` (row-major).
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_matrix_csv(&self.c, out)
    }
}

/// Row-major CSV dump of a complex matrix with header `i,j,re,im`.
pub fn write_matrix_csv<W: Write>(m: &Array2<Complex64>, mut out: W) -> io::Result<()> {
    writeln!(out, "i,j,re,im")?;
    for ((i, j), v) in m.indexed_iter() {
        writeln!(out, "{i},{j},{:.16e},{:.16e}", v.re, v.im)?;
    }
    Ok(())
}

/// Persistence `|Σ_i φ_i² e^{−iE_i t/ħ} dp|²` of a rank-one state, computed
/// directly from its diagonal.
pub fn grid_persistence(state: &WignerCoeffGrid, t: f64, hbar: f64) -> f64 {
    let g = &state.grid;
    let e_ref = g.energy(g.len() / 2);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..g.len() {
        acc += state.c[[i, i]].re * Complex64::from_polar(1.0, -(g.energy(i) - e_ref) * t / hbar);
    }
    acc.norm_sqr() * g.dp() * g.dp()
}

/// Gaussian probe `exp(−(p − centre)²/(2 width²))` used to test kernel
/// identities in the weak sense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub centre: f64,
    pub width: f64,
}

impl Probe {
    pub fn sample(&self, grid: &MomentumGrid) -> Array1<Complex64> {
        grid.momenta()
            .iter()
            .map(|&p| {
                let z = (p - self.centre) / self.width;
                Complex64::new((-0.5 * z * z).exp(), 0.0)
            })
            .collect()
    }

    /// Interior rows within four widths of the centre. Residuals are read
    /// here: further out the probe is negligible and the truncated tails of
    /// the singular kernels pick up window-edge logarithms that say nothing
    /// about the identity being tested.
    pub fn rows(&self, grid: &MomentumGrid) -> std::ops::Range<usize> {
        let inner = grid.interior();
        let p = grid.momenta();
        let reach = 4.0 * self.width;
        let lo = (inner.start..inner.end).find(|&i| p[i] >= self.centre - reach).unwrap_or(inner.end);
        let hi = (lo..inner.end).find(|&i| p[i] > self.centre + reach).unwrap_or(inner.end);
        if lo < hi {
            lo..hi
        } else {
            inner
        }
    }
}

fn compose_apply(k: &Array2<Complex64>, v: &Array1<Complex64>, dp: f64) -> Array1<Complex64> {
    k.dot(v).mapv(|z| z * dp)
}

fn interior_max(v: &Array1<Complex64>, range: std::ops::Range<usize>) -> f64 {
    v.slice(ndarray::s![range]).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Weak residuals of the kernel identities on one grid, each relative to the
/// size of the exact right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    pub n: usize,
    pub dp: f64,
    /// `PV⋆PV` against `−π²δ`.
    pub pv_pv: f64,
    /// `P⋆X − X⋆P` against `−iħδ`.
    pub commutator: f64,
    /// Largest relative off-diagonal residual of `(E_i − E_j)X_ij = −(iħ/M)P_ij`
    /// (pointwise, not weak).
    pub prop2: f64,
    /// `X⋆X` against `X²`.
    pub prop3: f64,
    /// `XP` against `(iM/2ħ)(E_i − E_j)X²_ij + (iħ/2)δ`.
    pub prop4: f64,
    /// `XP + XPᵀ` against `iħδ`.
    pub xp_trace: f64,
    /// `XP` against the composition `X⋆P`.
    pub xp_product: f64,
    /// Infinite-temperature stationarity: `(1/ħ²)[X,[X,H]]` against `−(1/M)δ`.
    pub thermal: f64,
}

/// Evaluates every identity on `grid` with the given phase derivatives.
pub fn identity_residuals(
    grid: &MomentumGrid,
    phase_derivs: &[f64],
    hbar: f64,
    probe: Probe,
) -> Result<IdentityResiduals> {
    let ops = operator_matrices(grid, phase_derivs, hbar)?;
    let dp = grid.dp();
    let g = probe.sample(grid);
    let range = probe.rows(grid);
    let g_max = interior_max(&g, range.clone()).max(f64::MIN_POSITIVE);
    let rel = |v: &Array1<Complex64>, scale: f64| interior_max(v, range.clone()) / (scale * g_max);

    let pv = pv_kernel(grid).mapv(|v| Complex64::new(v, 0.0));
    let pvpv = compose_apply(&pv, &compose_apply(&pv, &g, dp), dp);
    let pv_pv = rel(&(&pvpv + &g.mapv(|z| z * PI * PI)), PI * PI);

    let xg = compose_apply(&ops.x, &g, dp);
    let pg = compose_apply(&ops.p, &g, dp);
    let pxg = compose_apply(&ops.p, &xg, dp);
    let xpg = compose_apply(&ops.x, &pg, dp);
    let comm = &pxg - &xpg;
    let commutator = rel(&(&comm + &g.mapv(|z| z * I * hbar)), hbar);

    let mut prop2 = 0.0f64;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            if i == j {
                continue;
            }
            let lhs = ops.x[[i, j]] * grid.energy_difference(i, j);
            let rhs = -I * hbar / grid.mass() * ops.p[[i, j]];
            prop2 = prop2.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE));
        }
    }

    let xxg = compose_apply(&ops.x, &xg, dp);
    let x2g = compose_apply(&ops.x2, &g, dp);
    // X² carries ħ² per unit of δ'' acting on g; compare against its own size.
    let x2_scale = interior_max(&x2g, range.clone()).max(f64::MIN_POSITIVE) / g_max;
    let prop3 = rel(&(&xxg - &x2g), x2_scale);

    let m = grid.mass();
    let n = grid.len();
    let prop4_kernel = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut v = ops.xp[[i, j]] - I * (m / (2.0 * hbar)) * grid.energy_difference(i, j) * ops.x2[[i, j]];
        if i == j {
            v -= I * (0.5 * hbar / dp);
        }
        v
    });
    let prop4 = rel(&compose_apply(&prop4_kernel, &g, dp), hbar);

    let trace_kernel = &ops.xp + &ops.xp.t();
    let tg = compose_apply(&trace_kernel, &g, dp);
    let xp_trace = rel(&(&tg - &g.mapv(|z| z * I * hbar)), hbar);

    let xp_direct = compose_apply(&ops.xp, &g, dp);
    let xp_scale = interior_max(&xp_direct, range.clone()).max(f64::MIN_POSITIVE) / g_max;
    let xp_product = rel(&(&xp_direct - &xpg), xp_scale);

    let thermal = thermal_parts(&ops, &g, range.clone()).1;
    Ok(IdentityResiduals { n, dp, pv_pv, commutator, prop2, prop3, prop4, xp_trace, xp_product, thermal })
}

/// Result of the infinite-temperature stationarity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCheck {
    /// Weak interior norm of `(i/Mħ)[X,P] − (1/ħ²)[X,[X,H]]`; vanishes up to
    /// rounding because `[X,H] = (iħ/M)P` holds entrywise on the grid.
    pub stationarity: f64,
    /// Weak interior norm of `(1/ħ²)[X,[X,H]] + (1/M)δ`, relative to `1/M`.
    /// This is the part that converges under refinement.
    pub commutator_defect: f64,
}

fn thermal_parts(ops: &OperatorMatrices, g: &Array1<Complex64>, range: std::ops::Range<usize>) -> (f64, f64) {
    let grid = &ops.grid;
    let dp = grid.dp();
    let hbar = ops.hbar;
    let m = grid.mass();
    let g_max = interior_max(g, range.clone()).max(f64::MIN_POSITIVE);
    let e: Array1<Complex64> = grid.energies().into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    // H is diagonal: H⋆v = E·v under the dp composition.
    let h = |v: &Array1<Complex64>| v * &e;
    let x = |v: &Array1<Complex64>| compose_apply(&ops.x, v, dp);
    let p = |v: &Array1<Complex64>| compose_apply(&ops.p, v, dp);
    let comm_xh = |v: &Array1<Complex64>| &x(&h(v)) - &h(&x(v));
    let double = &x(&comm_xh(g)) - &comm_xh(&x(g));
    let xp_comm = &x(&p(g)) - &p(&x(g));
    let stat = &xp_comm.mapv(|z| z * I / (m * hbar)) - &double.mapv(|z| z / (hbar * hbar));
    let defect = &double.mapv(|z| z / (hbar * hbar)) + &g.mapv(|z| z / m);
    let scale = g_max / m;
    (interior_max(&stat, range.clone()) / scale, interior_max(&defect, range) / scale)
}

/// Infinite-temperature stationarity check with the given probe.
pub fn thermal_stationarity_check(ops: &OperatorMatrices, probe: Probe) -> ThermalCheck {
    let g = probe.sample(&ops.grid);
    let (stationarity, commutator_defect) = thermal_parts(ops, &g, probe.rows(&ops.grid));
    ThermalCheck { stationarity, commutator_defect }
}

/// Family of grids used for refinement: the window `[c − L, c + L]` grows as
/// `L = L0·(n/n0)^growth` while the probe stays fixed, so both the spacing
/// and the truncation error shrink as `n` increases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementFamily {
    pub probe: Probe,
    pub half_window0: f64,
    pub n0: usize,
    pub growth: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl Default for RefinementFamily {
    fn default() -> Self {
        Self {
            probe: Probe { centre: 10.0, width: 0.3 },
            half_window0: 2.0,
            n0: 128,
            growth: 0.5,
            mass: 1.0,
            hbar: 1.0,
        }
    }
}

impl RefinementFamily {
    pub fn grid(&self, n: usize) -> Result<MomentumGrid> {
        let half = self.half_window0 * (n as f64 / self.n0 as f64).powf(self.growth);
        MomentumGrid::new(self.probe.centre - half, self.probe.centre + half, n, self.mass, 0.0)
    }
}

/// Identity residuals along a refinement sequence, with zero phase
/// derivatives (the harmonic-limit kernels).
pub fn refinement_study(family: &RefinementFamily, ns: &[usize]) -> Result<Vec<IdentityResiduals>> {
    ns.iter()
        .map(|&n| {
            let grid = family.grid(n)?;
            let zeros = vec![0.0; n];
            identity_residuals(&grid, &zeros, family.hbar, family.probe)
        })
        .collect()
}
