//! Open-system transport.
//!
//! Two levels are provided. [`apply_q`] applies the full dissipation, normal
//! diffusion and anomalous diffusion superoperators to an energy-grid
//! coefficient matrix by composing the reduced kernels; it costs `O(n³)` per
//! call and is meant for small grids. [`LocalState`] carries the coefficients
//! in average/difference momentum variables `(P, p)` and is advanced by the
//! local transport equation, which decouples into independent one-dimensional
//! problems in `P`, one per difference momentum `p`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{require_nonnegative, require_positive, Result, TunnelError};
use crate::numerics::solve_tridiagonal;
use crate::spectral::{OperatorMatrices, WignerCoeffGrid};
use crate::wkb::{PotentialParams, ResonanceData};

/// `D` above which decoherence is considered strong (`τ_D ≪ τ_tunn`).
pub const STRONG_DECOHERENCE: f64 = 10.0;

/// Relative growth of the norm per step that flags an unstable run.
const GROWTH_TOL: f64 = 1e-6;

/// Tolerance on `C(P,−p) = conj C(P,p)` accepted by [`LocalState::new`].
const REALITY_TOL: f64 = 1e-10;

/// Environment coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    /// Dissipation rate `γ`.
    pub gamma: f64,
    /// Normal diffusion energy `σ²`.
    pub sigma2: f64,
    /// Anomalous diffusion rate `Δ`, any sign.
    pub delta: f64,
}

impl BathParams {
    pub fn new(gamma: f64, sigma2: f64, delta: f64) -> Result<Self> {
        require_nonnegative("gamma", gamma)?;
        require_positive("sigma2", sigma2)?;
        if !delta.is_finite() {
            return Err(TunnelError::InvalidParameter {
                name: "delta",
                reason: format!("must be finite, got {delta}"),
            });
        }
        Ok(Self { gamma, sigma2, delta })
    }

    /// Zero-temperature Ohmic bath with frequency cutoff `omega_cut`:
    /// `σ² = ħΩ0/2` and `Δ = −2γ ln(Ω_cut/Ω0)`.
    pub fn zero_temperature(params: &PotentialParams, gamma: f64, omega_cut: f64) -> Result<Self> {
        require_positive("omega_cut", omega_cut)?;
        Self::new(gamma, params.eps0(), -2.0 * gamma * (omega_cut / params.omega0).ln())
    }
}

/// Which transport superoperator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Dissipation,
    NormalDiffusion,
    AnomalousDiffusion,
}

/// Applies one transport superoperator to `c`.
///
/// Left action of a kernel `K` is `K·c·dp`, right action is `c·Kᵀ·dp`, so
/// that with `X`, `P`, `X²`, `XP` the reduced kernels:
///
/// ```text
/// Q_D c = (−iγ/2ħ) [XP c − P c Xᵀ − X c Pᵀ + c XPᵀ]
/// Q_N c = (γMσ²/ħ²) [2 X c Xᵀ − X² c − c X²ᵀ]
/// Q_A c = (Δ/ħ) [XP c − P c Xᵀ + X c Pᵀ − c XPᵀ]
/// ```
///
/// `Q_D` and `Q_N` commute with transposition of `c`; `Q_A` anticommutes
/// with it, so it exchanges the parts of `c` that are even and odd under
/// swapping the two energy labels.
pub fn apply_q(
    kind: Transport,
    ops: &OperatorMatrices,
    bath: &BathParams,
    c: &WignerCoeffGrid,
) -> Result<WignerCoeffGrid> {
    ops.grid.ensure_same(&c.grid)?;
    let dp = ops.grid.dp();
    let hbar = ops.hbar;
    let m = ops.grid.mass();
    let cm = &c.c;
    let left = |k: &Array2<Complex64>, v: &Array2<Complex64>| k.dot(v).mapv(|z| z * dp);
    let right = |v: &Array2<Complex64>, k: &Array2<Complex64>| v.dot(&k.t()).mapv(|z| z * dp);
    let out = match kind {
        Transport::Dissipation => {
            let s = Complex64::new(0.0, -bath.gamma / (2.0 * hbar));
            let sum = &left(&ops.xp, cm) - &right(&left(&ops.p, cm), &ops.x) - &right(&left(&ops.x, cm), &ops.p)
                + &right(cm, &ops.xp);
            sum.mapv(|z| z * s)
        }
        Transport::NormalDiffusion => {
            let s = bath.gamma * m * bath.sigma2 / (hbar * hbar);
            let sum = &right(&left(&ops.x, cm), &ops.x).mapv(|z| z * 2.0) - &left(&ops.x2, cm) - &right(cm, &ops.x2);
            sum.mapv(|z| z * s)
        }
        Transport::AnomalousDiffusion => {
            let s = bath.delta / hbar;
            let sum = &left(&ops.xp, cm) - &right(&left(&ops.p, cm), &ops.x) + &right(&left(&ops.x, cm), &ops.p)
                - &right(cm, &ops.xp);
            sum.mapv(|z| z * s)
        }
    };
    WignerCoeffGrid::new(c.grid.clone(), out)
}

/// Single-node decoherence multiplier `exp[−γMσ²(δ1′ − δ2′)² dt]`, where
/// `δi′ = ∂δ/∂p` at the two momenta. Exactly 1 when the derivatives agree.
pub fn decoherence_multiplier(d1: f64, d2: f64, bath: &BathParams, mass: f64, dt: f64) -> f64 {
    let diff = d1 - d2;
    (-bath.gamma * mass * bath.sigma2 * diff * diff * dt).exp()
}

/// Treatment of the two ends of the average-momentum axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// No flux through the low edge, coefficients pinned to zero at the high
    /// edge (probability leaving the window is lost).
    #[default]
    ZeroFluxLowAbsorbingHigh,
    /// No flux through either edge; the norm is conserved to rounding.
    ZeroFluxBoth,
}

/// Switches for the individual terms of the local equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalTerms {
    /// `−iPp/(Mħ)`.
    pub phase: bool,
    /// `γ ∂_P P`.
    pub dissipation: bool,
    /// `γMσ² ∂²_P`.
    pub diffusion: bool,
    /// `iΔp ∂_P`.
    pub anomalous: bool,
    /// `−γMσ²(δ1′ − δ2′)²`.
    pub decoherence: bool,
}

impl LocalTerms {
    pub const ALL: Self = Self { phase: true, dissipation: true, diffusion: true, anomalous: true, decoherence: true };
    pub const NONE: Self =
        Self { phase: false, dissipation: false, diffusion: false, anomalous: false, decoherence: false };

    fn any_transport(&self) -> bool {
        self.dissipation || self.diffusion || self.anomalous
    }
}

impl Default for LocalTerms {
    fn default() -> Self {
        Self::ALL
    }
}

/// Shape of the `(P, p)` grid around the resonance momentum, in units of
/// the resonance momentum width `δp = Mε/p0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAxes {
    pub n_average: usize,
    pub half_width_average: f64,
    /// Must be odd so that `p = 0` is a node.
    pub n_difference: usize,
    pub half_width_difference: f64,
}

impl Default for LocalAxes {
    fn default() -> Self {
        Self { n_average: 256, half_width_average: 32.0, n_difference: 129, half_width_difference: 16.0 }
    }
}

/// Norm, mean energy, purity and off-diagonal mass of a local state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDiagnostics {
    pub norm: f64,
    pub mean_energy: f64,
    pub purity: f64,
    /// `Σ_{p≠0} |C|² dP dp`.
    pub offdiag_mass: f64,
    /// Part of the off-diagonal mass even under `p1 ↔ p2` (`Re C`).
    pub offdiag_even: f64,
    /// Part odd under `p1 ↔ p2` (`Im C`).
    pub offdiag_odd: f64,
}

/// Coefficients `C(P, p)` on a uniform average × difference momentum grid.
///
/// Rows index `P`, columns index `p`. The difference axis is symmetric about
/// its middle node `p = 0`, and `C(P, −p) = conj C(P, p)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    average: Vec<f64>,
    difference: Vec<f64>,
    c: Array2<Complex64>,
    t: f64,
    mass: f64,
    hbar: f64,
    u_infinity: f64,
    boundary: BoundaryMode,
}

fn uniform_step(axis: &[f64], name: &'static str) -> Result<f64> {
    if axis.len() < 3 {
        return Err(TunnelError::BadWindow(format!("{name} axis needs at least 3 nodes")));
    }
    let step = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    let uniform = step > 0.0 && axis.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step);
    if uniform {
        Ok(step)
    } else {
        Err(TunnelError::BadWindow(format!("{name} axis must be uniform and increasing")))
    }
}

fn symmetric_axis(half: f64, n: usize) -> Vec<f64> {
    let mid = (n / 2) as isize;
    let step = half / mid as f64;
    (0..n as isize).map(|j| (j - mid) as f64 * step).collect()
}

impl LocalState {
    /// Validates axes and the reality constraint, then stores `c` with the
    /// negative-`p` half rewritten as the exact conjugate of the positive half.
    pub fn new(
        average: Vec<f64>,
        difference: Vec<f64>,
        c: Array2<Complex64>,
        mass: f64,
        hbar: f64,
        u_infinity: f64,
        boundary: BoundaryMode,
    ) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("hbar", hbar)?;
        require_nonnegative("u_infinity", u_infinity)?;
        uniform_step(&average, "average")?;
        uniform_step(&difference, "difference")?;
        let nd = difference.len();
        let mid = nd / 2;
        if nd.is_multiple_of(2) || difference[mid] != 0.0 {
            return Err(TunnelError::BadWindow("difference axis must be odd-length with p = 0 in the middle".into()));
        }
        if difference.iter().zip(difference.iter().rev()).any(|(a, b)| a != &-b) {
            return Err(TunnelError::BadWindow("difference axis must be symmetric about 0".into()));
        }
        if c.dim() != (average.len(), nd) {
            return Err(TunnelError::GridMismatch(format!(
                "matrix {:?} on a {} x {} grid",
                c.dim(),
                average.len(),
                nd
            )));
        }
        let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..average.len() {
            for j in 0..=mid {
                if (c[[k, j]] - c[[k, nd - 1 - j]].conj()).norm() > REALITY_TOL * scale {
                    return Err(TunnelError::InvalidParameter {
                        name: "c",
                        reason: format!("C(P,-p) != conj C(P,p) at row {k}, column {j}"),
                    });
                }
            }
        }
        let mut state = Self { average, difference, c, t: 0.0, mass, hbar, u_infinity, boundary };
        for k in 0..state.average.len() {
            state.c[[k, mid]].im = 0.0;
            for j in mid + 1..nd {
                state.c[[k, nd - 1 - j]] = state.c[[k, j]].conj();
            }
        }
        Ok(state)
    }

    /// False-vacuum state `C(P, p) = φ(P + p/2) φ(P − p/2)` with
    /// `φ(q) = √((q/M)·C_E²)`, normalized to unit norm on the grid.
    pub fn false_vacuum(
        params: &PotentialParams,
        res: &ResonanceData,
        axes: LocalAxes,
        boundary: BoundaryMode,
    ) -> Result<Self> {
        require_positive("half_width_average", axes.half_width_average)?;
        require_positive("half_width_difference", axes.half_width_difference)?;
        let p0 = params.p_infinity(res.e0);
        let dp_res = params.mass * res.epsilon / p0;
        if !(dp_res > 0.0) {
            return Err(TunnelError::Unphysical(format!("resonance width {} does not resolve", res.epsilon)));
        }
        let lo = p0 - axes.half_width_average * dp_res;
        if !(lo > 0.0) {
            return Err(TunnelError::BadWindow(format!("average window reaches P = {lo} <= 0")));
        }
        if axes.n_average < 3 || axes.n_difference < 3 || axes.n_difference.is_multiple_of(2) {
            return Err(TunnelError::BadWindow("need n_average >= 3 and odd n_difference >= 3".into()));
        }
        let step = 2.0 * axes.half_width_average * dp_res / (axes.n_average - 1) as f64;
        let average: Vec<f64> = (0..axes.n_average).map(|k| lo + step * k as f64).collect();
        let difference = symmetric_axis(axes.half_width_difference * dp_res, axes.n_difference);
        let phi = |q: f64| {
            if q > 0.0 {
                (q / params.mass * res.false_vacuum_weight(params.energy_of_momentum(q))).sqrt()
            } else {
                0.0
            }
        };
        let mut c = Array2::from_shape_fn((average.len(), difference.len()), |(k, j)| {
            let (pp, q) = (average[k], difference[j]);
            Complex64::new(phi(pp + 0.5 * q) * phi(pp - 0.5 * q), 0.0)
        });
        let mut state =
            Self::new(average, difference, c.clone(), params.mass, params.hbar, params.u_infinity, boundary)?;
        let norm = state.diagnostics().norm;
        c.mapv_inplace(|z| z / norm);
        state.c = c;
        Ok(state)
    }

    pub fn average_axis(&self) -> &[f64] {
        &self.average
    }

    pub fn difference_axis(&self) -> &[f64] {
        &self.difference
    }

    pub fn coefficients(&self) -> &Array2<Complex64> {
        &self.c
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary
    }

    fn d_average(&self) -> f64 {
        (self.average[self.average.len() - 1] - self.average[0]) / (self.average.len() - 1) as f64
    }

    fn d_difference(&self) -> f64 {
        (self.difference[self.difference.len() - 1] - self.difference[0]) / (self.difference.len() - 1) as f64
    }

    fn mid(&self) -> usize {
        self.difference.len() / 2
    }

    /// Cell volumes along `P`: half cells at zero-flux edges.
    fn volumes(&self) -> Vec<f64> {
        let d = self.d_average();
        let m = self.average.len();
        let mut v = vec![d; m];
        v[0] = 0.5 * d;
        if self.boundary == BoundaryMode::ZeroFluxBoth {
            v[m - 1] = 0.5 * d;
        }
        v
    }

    /// Largest time step for which the diffusion number `γMσ² dt/dP²` stays
    /// at or below one. Infinite without diffusion.
    pub fn stability_bound(&self, bath: &BathParams) -> f64 {
        let k = bath.gamma * self.mass * bath.sigma2;
        if k > 0.0 {
            self.d_average().powi(2) / k
        } else {
            f64::INFINITY
        }
    }

    /// Per-node decoherence multipliers for a step `dt`; shape matches the
    /// coefficient matrix. Column `p = 0` is exactly 1.
    pub fn decoherence_factor<F: Fn(f64) -> f64>(&self, phase_deriv: F, bath: &BathParams, dt: f64) -> Array2<f64> {
        Array2::from_shape_fn(self.c.dim(), |(k, j)| {
            let (pp, q) = (self.average[k], self.difference[j]);
            if q == 0.0 {
                1.0
            } else {
                decoherence_multiplier(phase_deriv(pp + 0.5 * q), phase_deriv(pp - 0.5 * q), bath, self.mass, dt)
            }
        })
    }

    pub fn diagnostics(&self) -> LocalDiagnostics {
        let vol = self.volumes();
        let mid = self.mid();
        let dq = self.d_difference();
        let mut norm = 0.0;
        let mut energy = 0.0;
        let mut diag = 0.0;
        let mut even = 0.0;
        let mut odd = 0.0;
        for (k, &v) in vol.iter().enumerate() {
            let d = self.c[[k, mid]].re;
            norm += v * d;
            energy += v * d * (self.average[k].powi(2) / (2.0 * self.mass) - self.u_infinity);
            diag += v * self.c[[k, mid]].norm_sqr();
            for j in (0..self.difference.len()).filter(|&j| j != mid) {
                let z = self.c[[k, j]];
                even += v * z.re * z.re;
                odd += v * z.im * z.im;
            }
        }
        LocalDiagnostics {
            norm,
            mean_energy: if norm != 0.0 { energy / norm } else { 0.0 },
            purity: (diag + even + odd) * dq,
            offdiag_mass: (even + odd) * dq,
            offdiag_even: even * dq,
            offdiag_odd: odd * dq,
        }
    }

    /// Tridiagonal generator of the transport terms for difference momentum
    /// `q`, in conservation form over the active nodes.
    fn generator(
        &self,
        bath: &BathParams,
        terms: LocalTerms,
        q: f64,
        active: usize,
    ) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let d = self.d_average();
        let vol = self.volumes();
        let b = if terms.diffusion { bath.gamma * self.mass * bath.sigma2 / d } else { 0.0 };
        let adv = if terms.anomalous { Complex64::new(0.0, bath.delta * q) } else { Complex64::new(0.0, 0.0) };
        let mut lower = vec![Complex64::new(0.0, 0.0); active - 1];
        let mut diag = vec![Complex64::new(0.0, 0.0); active];
        let mut upper = vec![Complex64::new(0.0, 0.0); active - 1];
        // Faces between node k and k + 1. With an absorbing top the face into
        // the pinned node still carries flux out of the window.
        let faces = if active < self.average.len() { active } else { active - 1 };
        for f in 0..faces {
            let p_face = 0.5 * (self.average[f] + self.average[f + 1]);
            let drift = if terms.dissipation { bath.gamma * p_face } else { 0.0 };
            let a = adv + drift;
            // Row f (flux leaving through its upper face).
            diag[f] += (0.5 * a - b) / vol[f];
            if f + 1 < active {
                upper[f] += (0.5 * a + b) / vol[f];
                // Row f + 1 (flux entering through its lower face).
                diag[f + 1] += (-0.5 * a - b) / vol[f + 1];
                lower[f] += (-0.5 * a + b) / vol[f + 1];
            }
        }
        (lower, diag, upper)
    }

    /// Advances the state by `n_steps` Strang steps of size `dt`.
    ///
    /// Each column `p` evolves on its own: half a step of the pointwise phase
    /// and decoherence multipliers, a Crank–Nicolson step of the drift,
    /// diffusion and anomalous terms along `P`, and another half multiplier
    /// step. Only `p ≥ 0` is computed; the rest is filled by conjugation.
    pub fn evolve_local<F: Fn(f64) -> f64>(
        &self,
        bath: &BathParams,
        terms: LocalTerms,
        phase_deriv: F,
        dt: f64,
        n_steps: usize,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TunnelError::InvalidParameter {
                name: "dt",
                reason: format!("must be finite and > 0, got {dt}"),
            });
        }
        let bound = self.stability_bound(bath);
        if terms.diffusion && dt > bound {
            return Err(TunnelError::InvalidParameter {
                name: "dt",
                reason: format!("{dt} exceeds the stability bound {bound}"),
            });
        }
        let m = self.average.len();
        let nd = self.difference.len();
        let mid = self.mid();
        let absorbing = self.boundary == BoundaryMode::ZeroFluxLowAbsorbingHigh;
        let active = if absorbing { m - 1 } else { m };
        let vol = self.volumes();
        let decoh = if terms.decoherence { Some(self.decoherence_factor(&phase_deriv, bath, 0.5 * dt)) } else { None };
        let transport = terms.any_transport();
        let mut out = self.clone();
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for j in mid..nd {
            let q = self.difference[j];
            let half: Vec<Complex64> = (0..m)
                .map(|k| {
                    let mut z = Complex64::new(1.0, 0.0);
                    if terms.phase && q != 0.0 {
                        z = Complex64::from_polar(1.0, -self.average[k] * q * 0.5 * dt / (self.mass * self.hbar));
                    }
                    if let Some(dm) = &decoh {
                        z *= dm[[k, j]];
                    }
                    z
                })
                .collect();
            let identity = half.iter().all(|z| *z == Complex64::new(1.0, 0.0));
            let (lower, diag, upper) = self.generator(bath, terms, q, active);
            let h = Complex64::new(0.5 * dt, 0.0);
            let one = Complex64::new(1.0, 0.0);
            let lhs_lower: Vec<Complex64> = lower.iter().map(|&a| -h * a).collect();
            let lhs_diag: Vec<Complex64> = diag.iter().map(|&a| one - h * a).collect();
            let lhs_upper: Vec<Complex64> = upper.iter().map(|&a| -h * a).collect();
            for (k, z) in col.iter_mut().enumerate() {
                *z = self.c[[k, j]];
            }
            if absorbing && transport {
                col[m - 1] = Complex64::new(0.0, 0.0);
            }
            let mut prev_norm = if j == mid { column_norm(&col, &vol) } else { 0.0 };
            let mut rhs = vec![Complex64::new(0.0, 0.0); active];
            for _ in 0..n_steps {
                if !identity {
                    col.iter_mut().zip(&half).for_each(|(z, f)| *z *= f);
                }
                if transport {
                    for k in 0..active {
                        let mut v = col[k] + h * diag[k] * col[k];
                        if k > 0 {
                            v += h * lower[k - 1] * col[k - 1];
                        }
                        if k + 1 < active {
                            v += h * upper[k] * col[k + 1];
                        }
                        rhs[k] = v;
                    }
                    solve_tridiagonal(&lhs_lower, &lhs_diag, &lhs_upper, &mut rhs);
                    col[..active].copy_from_slice(&rhs);
                }
                if !identity {
                    col.iter_mut().zip(&half).for_each(|(z, f)| *z *= f);
                }
                if j == mid {
                    col.iter_mut().for_each(|z| z.im = 0.0);
                    let norm = column_norm(&col, &vol);
                    if bath.gamma > 0.0 && transport && norm > prev_norm * (1.0 + GROWTH_TOL) + f64::MIN_POSITIVE {
                        return Err(TunnelError::Unstable(format!(
                            "norm grew from {prev_norm:e} to {norm:e} in one step of {dt:e}"
                        )));
                    }
                    prev_norm = norm;
                }
            }
            for (k, z) in col.iter().enumerate() {
                out.c[[k, j]] = *z;
                if j != mid {
                    out.c[[k, nd - 1 - j]] = z.conj();
                }
            }
        }
        out.t = self.t + dt * n_steps as f64;
        Ok(out)
    }
}

fn column_norm(col: &[Complex64], vol: &[f64]) -> f64 {
    col.iter().zip(vol).map(|(z, v)| z.re * v).sum()
}

/// One sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub diagnostics: LocalDiagnostics,
}

/// Evolves `state` for `n_steps` steps, sampling diagnostics every `stride`
/// steps (and at the start).
pub fn trajectory<F: Fn(f64) -> f64>(
    state: &LocalState,
    bath: &BathParams,
    terms: LocalTerms,
    phase_deriv: F,
    dt: f64,
    n_steps: usize,
    stride: usize,
) -> Result<Vec<TrajectoryPoint>> {
    if stride == 0 {
        return Err(TunnelError::InvalidParameter { name: "stride", reason: "must be >= 1".into() });
    }
    let mut cur = state.clone();
    let mut out = vec![TrajectoryPoint { t: cur.time(), diagnostics: cur.diagnostics() }];
    let mut done = 0;
    while done < n_steps {
        let k = stride.min(n_steps - done);
        cur = cur.evolve_local(bath, terms, &phase_deriv, dt, k)?;
        done += k;
        out.push(TrajectoryPoint { t: cur.time(), diagnostics: cur.diagnostics() });
    }
    Ok(out)
}

/// Least-squares e-folding time of `y(t) ∝ exp(−t/T)` from samples.
pub fn efolding_time(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 || samples.iter().any(|&(_, y)| !(y > 0.0)) {
        return Err(TunnelError::DomainError("need at least two positive samples".into()));
    }
    let n = samples.len() as f64;
    let mt = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mt) * (s.1.ln() - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mt).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(TunnelError::DomainError(format!("samples do not decay (slope {slope:e})")));
    }
    Ok(-1.0 / slope)
}

/// Relaxation, decoherence and tunneling times with the parameter `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timescales {
    /// `1/γ`, infinite for `γ = 0`.
    pub tau_r: f64,
    /// `τ_tunn/D`, the decoherence time at `α = 1`.
    pub tau_d: f64,
    /// `ħ/ε`.
    pub tau_tunn: f64,
    /// `γħσ²(E0 + U∞)/ε³`.
    pub d: f64,
}

impl Timescales {
    pub fn new(res: &ResonanceData, bath: &BathParams, params: &PotentialParams) -> Self {
        let tau_tunn = params.hbar / res.epsilon;
        // ε³ underflows long before ln ε does; build D in log space.
        let ln_d = (bath.gamma * params.hbar * bath.sigma2 * (res.e0 + params.u_infinity)).ln() - 3.0 * res.ln_epsilon;
        let d = if bath.gamma > 0.0 { ln_d.exp() } else { 0.0 };
        let tau_r = if bath.gamma > 0.0 { bath.gamma.recip() } else { f64::INFINITY };
        let mut ts = Self { tau_r, tau_d: f64::INFINITY, tau_tunn, d };
        ts.tau_d = ts.tau_d_alpha(1.0);
        ts
    }

    /// `τ_tunn/(α⁴D)`.
    pub fn tau_d_alpha(&self, alpha: f64) -> f64 {
        if self.d > 0.0 {
            self.tau_tunn / (alpha.powi(4) * self.d)
        } else {
            f64::INFINITY
        }
    }

    pub fn strong_decoherence(&self) -> bool {
        self.d > STRONG_DECOHERENCE
    }
}

/// Decoherence time in its wavelength form `τ_R(λ_B/l_D)²` with
/// `λ_B = ħ/(2σ√M)` and `l_D = α²ħ√(E0 + U∞)/(ε√M)`.
///
/// This equals `τ_tunn/(4α⁴D)`: both are order-of-magnitude estimates and
/// differ by that constant.
pub fn tau_d_wavelength(res: &ResonanceData, bath: &BathParams, params: &PotentialParams, alpha: f64) -> f64 {
    let hbar = params.hbar;
    let m = params.mass;
    let lambda_b = hbar / (2.0 * bath.sigma2.sqrt() * m.sqrt());
    let l_d = alpha * alpha * hbar * (res.e0 + params.u_infinity).sqrt() / (res.epsilon * m.sqrt());
    (lambda_b / l_d).powi(2) / bath.gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{operator_matrices, resonance_phase_derivs, MomentumGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> (PotentialParams, ResonanceData) {
        let p = PotentialParams::from_barrier_ratio(1.0, 1.0, 589.74 / 171.55, 1.0, 1.0).unwrap();
        let r = p.resonance_data().unwrap();
        (p, r)
    }

    fn small_ops(n: usize) -> (OperatorMatrices, WignerCoeffGrid) {
        let (p, r) = reference();
        let g = MomentumGrid::around_resonance(&p, &r, 8.0, n).unwrap();
        let dd = resonance_phase_derivs(&g, &p, &r);
        let ops = operator_matrices(&g, &dd, p.hbar).unwrap();
        let raw = pseudo_random(n, 3);
        let c = WignerCoeffGrid::new(g, (&raw + &raw.t().mapv(|z| z.conj())).mapv(|z| z * 0.5)).unwrap();
        (ops, c)
    }

    fn pseudo_random(n: usize, seed: u64) -> Array2<Complex64> {
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        Array2::from_shape_fn((n, n), |_| Complex64::new(next(), next()))
    }

    fn max_abs(a: &Array2<Complex64>) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn bath_validation_and_zero_temperature_defaults() {
        let (p, _) = reference();
        assert!(BathParams::new(-1.0, 1.0, 0.0).is_err());
        assert!(BathParams::new(1.0, 0.0, 0.0).is_err());
        assert!(BathParams::new(1.0, 1.0, f64::NAN).is_err());
        let b = BathParams::zero_temperature(&p, 0.01, std::f64::consts::E).unwrap();
        assert_eq!(b.sigma2, 0.5);
        assert_relative_eq!(b.delta, -0.02, max_relative = 1e-15);
    }

    #[test]
    fn transport_vanishes_with_its_coefficient() {
        let (ops, c) = small_ops(64);
        let off = BathParams::new(0.0, 0.5, 0.0).unwrap();
        for kind in [Transport::Dissipation, Transport::NormalDiffusion, Transport::AnomalousDiffusion] {
            let q = apply_q(kind, &ops, &off, &c).unwrap();
            assert!(q.c.iter().all(|z| *z == Complex64::new(0.0, 0.0)), "{kind:?}");
        }
        let on = BathParams::new(0.01, 0.5, 0.02).unwrap();
        for kind in [Transport::Dissipation, Transport::NormalDiffusion, Transport::AnomalousDiffusion] {
            assert!(max_abs(&apply_q(kind, &ops, &on, &c).unwrap().c) > 0.0);
        }
    }

    #[test]
    fn transport_parity_contract() {
        let (ops, _) = small_ops(48);
        let bath = BathParams::new(0.01, 0.5, 0.03).unwrap();
        let raw = pseudo_random(48, 7);
        let sym = WignerCoeffGrid::new(ops.grid.clone(), (&raw + &raw.t()).mapv(|z| z * 0.5)).unwrap();
        let anti = WignerCoeffGrid::new(ops.grid.clone(), (&raw - &raw.t()).mapv(|z| z * 0.5)).unwrap();
        for (kind, keeps) in
            [(Transport::Dissipation, true), (Transport::NormalDiffusion, true), (Transport::AnomalousDiffusion, false)]
        {
            for (input, even) in [(&sym, true), (&anti, false)] {
                let (e, o) = apply_q(kind, &ops, &bath, input).unwrap().parity_split();
                let (want, other) = if keeps == even { (e, o) } else { (o, e) };
                assert!(max_abs(&other) <= 1e-8 * max_abs(&want), "{kind:?} even={even}");
            }
        }
    }

    #[test]
    fn transport_rejects_other_grid() {
        let (ops, _) = small_ops(32);
        let g = MomentumGrid::new(1.0, 2.0, 32, 1.0, 0.0).unwrap();
        let c = WignerCoeffGrid::new(g, Array2::zeros((32, 32))).unwrap();
        let bath = BathParams::new(0.01, 0.5, 0.0).unwrap();
        assert!(matches!(apply_q(Transport::Dissipation, &ops, &bath, &c), Err(TunnelError::GridMismatch(_))));
    }

    fn small_local(boundary: BoundaryMode) -> (PotentialParams, ResonanceData, LocalState) {
        let (p, r) = reference();
        let axes = LocalAxes { n_average: 96, half_width_average: 24.0, n_difference: 33, half_width_difference: 8.0 };
        let s = LocalState::false_vacuum(&p, &r, axes, boundary).unwrap();
        (p, r, s)
    }

    #[test]
    fn false_vacuum_local_state() {
        let (_, r, s) = small_local(BoundaryMode::default());
        let d = s.diagnostics();
        assert_relative_eq!(d.norm, 1.0, max_relative = 1e-14);
        assert!((d.mean_energy - r.e0).abs() < 10.0 * r.epsilon);
        assert!(d.purity > 0.8 && d.purity <= 1.0 + 1e-12);
        assert_eq!(d.offdiag_odd, 0.0);
        assert!(s.coefficients().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn local_state_validation() {
        let avg = vec![1.0, 1.1, 1.2];
        let diff = vec![-0.1, 0.0, 0.1];
        let mut c = Array2::from_elem((3, 3), Complex64::new(1.0, 0.0));
        assert!(
            LocalState::new(avg.clone(), diff.clone(), c.clone(), 1.0, 1.0, 0.0, BoundaryMode::ZeroFluxBoth).is_ok()
        );
        c[[0, 0]] = Complex64::new(1.0, 0.5);
        assert!(LocalState::new(avg.clone(), diff.clone(), c, 1.0, 1.0, 0.0, BoundaryMode::ZeroFluxBoth).is_err());
        let even = vec![-0.1, 0.0, 0.1, 0.2];
        let c4 = Array2::zeros((3, 4));
        assert!(LocalState::new(avg, even, c4, 1.0, 1.0, 0.0, BoundaryMode::ZeroFluxBoth).is_err());
    }

    #[test]
    fn pure_phase_evolution_is_exact() {
        let (p, r, s) = small_local(BoundaryMode::default());
        let bath = BathParams::new(0.0, 0.5, 0.0).unwrap();
        let terms = LocalTerms { phase: true, ..LocalTerms::NONE };
        let dt = 0.05 * p.hbar / r.epsilon;
        let out = s.evolve_local(&bath, terms, |_| 0.0, dt, 20).unwrap();
        let t = out.time();
        for ((k, j), z) in out.coefficients().indexed_iter() {
            let expect = s.coefficients()[[k, j]]
                * Complex64::from_polar(1.0, -s.average_axis()[k] * s.difference_axis()[j] * t / (p.mass * p.hbar));
            assert!((z - expect).norm() <= 1e-12 * s.coefficients()[[k, j]].norm().max(1e-300));
        }
        assert_relative_eq!(out.diagnostics().purity, s.diagnostics().purity, max_relative = 1e-12);
    }

    #[test]
    fn decoherence_spares_the_diagonal() {
        let (p, r, s) = small_local(BoundaryMode::default());
        let bath = BathParams::new(0.01, 0.5, 0.0).unwrap();
        let dd = |q: f64| r.phase_derivative_momentum(&p, q);
        let f = s.decoherence_factor(dd, &bath, 1.0);
        let mid = s.difference_axis().len() / 2;
        assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(f.column(mid).iter().all(|&v| v == 1.0));
        let zero = BathParams::new(0.0, 0.5, 0.0).unwrap();
        assert!(s.decoherence_factor(dd, &zero, 1.0).iter().all(|&v| v == 1.0));
        let terms = LocalTerms { decoherence: true, ..LocalTerms::NONE };
        let ts = Timescales::new(&r, &bath, &p);
        let out = s.evolve_local(&bath, terms, dd, 0.1 * ts.tau_d, 10).unwrap();
        assert_eq!(out.coefficients().column(mid), s.coefficients().column(mid));
        assert!(out.diagnostics().offdiag_mass < s.diagnostics().offdiag_mass);
    }

    #[test]
    fn strongest_suppression_next_to_resonance() {
        let (p, r) = reference();
        let bath = BathParams::new(0.01, 0.5, 0.0).unwrap();
        let p0 = p.p_infinity(r.e0);
        let dd = |q: f64| r.phase_derivative_momentum(&p, q);
        let at_res = decoherence_multiplier(dd(p0), dd(p0 + 40.0 * p.mass * r.epsilon / p0), &bath, p.mass, 1e-6);
        let away = decoherence_multiplier(
            dd(p0 + 20.0 * p.mass * r.epsilon / p0),
            dd(p0 + 60.0 * p.mass * r.epsilon / p0),
            &bath,
            p.mass,
            1e-6,
        );
        assert!(at_res < away);
    }

    #[test]
    fn zero_flux_conserves_norm() {
        let (p, r, s) = small_local(BoundaryMode::ZeroFluxBoth);
        let bath = BathParams::new(0.01, 0.5, 0.02).unwrap();
        let dt = 0.5 * s.stability_bound(&bath);
        let dd = |q: f64| r.phase_derivative_momentum(&p, q);
        let mut cur = s.clone();
        for _ in 0..20 {
            let next = cur.evolve_local(&bath, LocalTerms::ALL, dd, dt, 1).unwrap();
            let (a, b) = (cur.diagnostics().norm, next.diagnostics().norm);
            assert!((a - b).abs() <= 1e-8 * a, "{a} -> {b}");
            cur = next;
        }
    }

    #[test]
    fn time_step_above_bound_is_rejected() {
        let (_, _, s) = small_local(BoundaryMode::default());
        let bath = BathParams::new(0.01, 0.5, 0.0).unwrap();
        let dt = 2.0 * s.stability_bound(&bath);
        assert!(s.evolve_local(&bath, LocalTerms::ALL, |_| 0.0, dt, 1).is_err());
        assert!(s.evolve_local(&bath, LocalTerms::ALL, |_| 0.0, -1.0, 1).is_err());
    }

    #[test]
    fn dissipation_raises_purity_at_rate_gamma() {
        // Compression toward P = 0 by γ∂_P(P·) shrinks the phase-space volume:
        // d/dt ∫|C|² = +γ ∫|C|² away from the edges.
        let (p, r, s) = small_local(BoundaryMode::ZeroFluxBoth);
        let bath = BathParams::new(0.01, 0.5, 0.0).unwrap();
        let terms = LocalTerms { dissipation: true, ..LocalTerms::NONE };
        let p_top = *s.average_axis().last().unwrap();
        let dt = 1e-3 * (s.average_axis()[1] - s.average_axis()[0]) / (bath.gamma * p_top);
        let out = s.evolve_local(&bath, terms, |q| r.phase_derivative_momentum(&p, q), dt, 1).unwrap();
        let p0 = s.diagnostics().purity;
        let slope = (out.diagnostics().purity - p0) / dt;
        assert_relative_eq!(slope / (bath.gamma * p0), 1.0, max_relative = 0.05);
    }

    #[test]
    fn efolding_fit_recovers_exponential() {
        let samples: Vec<(f64, f64)> =
            (0..10).map(|i| (i as f64 * 0.3, 2.0 * (-(i as f64) * 0.3 / 1.7).exp())).collect();
        assert_relative_eq!(efolding_time(&samples).unwrap(), 1.7, max_relative = 1e-12);
        assert!(efolding_time(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(efolding_time(&[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn timescale_relations() {
        let (p, r) = reference();
        let b1 = BathParams::new(0.01, 0.5, 0.0).unwrap();
        let b2 = BathParams::new(0.02, 0.5, 0.0).unwrap();
        let t1 = Timescales::new(&r, &b1, &p);
        let t2 = Timescales::new(&r, &b2, &p);
        assert_relative_eq!(t2.d / t1.d, 2.0, max_relative = 1e-12);
        assert_relative_eq!(t1.tau_r, 100.0, max_relative = 1e-15);
        assert_relative_eq!(t1.tau_d / t1.tau_tunn, 1.0 / t1.d, max_relative = 1e-12);
        assert_relative_eq!(t1.tau_d_alpha(2.0), t1.tau_d / 16.0, max_relative = 1e-12);
        assert_relative_eq!(tau_d_wavelength(&r, &b1, &p, 1.0), t1.tau_d / 4.0, max_relative = 1e-10);
        let direct = b1.gamma * p.hbar * b1.sigma2 * (r.e0 + p.u_infinity) / r.epsilon.powi(3);
        assert_relative_eq!(t1.d, direct, max_relative = 1e-10);
        assert!(t1.strong_decoherence() == (t1.d > 10.0));
        let off = Timescales::new(&r, &BathParams::new(0.0, 0.5, 0.0).unwrap(), &p);
        assert!(off.tau_r.is_infinite() && off.tau_d.is_infinite() && off.d == 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn steps_preserve_reality_and_bounds(gamma in 0.001f64..0.05, delta in -0.05f64..0.05, frac in 0.1f64..1.0) {
            let (p, r, s) = small_local(BoundaryMode::default());
            let bath = BathParams::new(gamma, 0.5, delta).unwrap();
            let dt = frac * s.stability_bound(&bath);
            let out = s.evolve_local(&bath, LocalTerms::ALL, |q| r.phase_derivative_momentum(&p, q), dt, 3).unwrap();
            let c = out.coefficients();
            let nd = out.difference_axis().len();
            for k in 0..out.average_axis().len() {
                for j in 0..nd {
                    prop_assert_eq!(c[[k, j]], c[[k, nd - 1 - j]].conj());
                }
            }
            let f = s.decoherence_factor(|q| r.phase_derivative_momentum(&p, q), &bath, dt);
            prop_assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn normal_diffusion_never_raises_purity(gamma in 0.001f64..0.05, frac in 0.1f64..1.0) {
            let (_, _, s) = small_local(BoundaryMode::default());
            let bath = BathParams::new(gamma, 0.5, 0.0).unwrap();
            let terms = LocalTerms { diffusion: true, ..LocalTerms::NONE };
            let dt = frac * s.stability_bound(&bath);
            let mut cur = s;
            let mut last = cur.diagnostics().purity;
            for _ in 0..5 {
                cur = cur.evolve_local(&bath, terms, |_| 0.0, dt, 2).unwrap();
                let now = cur.diagnostics().purity;
                prop_assert!(now <= last * (1.0 + 1e-14));
                last = now;
            }
        }
    }
}
