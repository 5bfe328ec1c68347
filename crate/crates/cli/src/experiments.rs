use rayon::prelude::*;

use tunnel_core::elliptic::rate_report;
use tunnel_core::kramers::{escape_rate_analytic, escape_rate_numeric, sigma_eff};
use tunnel_core::master::{tau_d_wavelength, trajectory};
use tunnel_core::spectral::refinement_study;
use tunnel_core::spectral::RefinementFamily;
use tunnel_core::wkb::{persistence_curve, PersistenceGrid};
use tunnel_core::{BathParams, KramersProblem, LocalState, ResonanceData, Timescales};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, Csv, JsonObject, TOOL};

/// Boltzmann constant in J/K.
const K_B: f64 = 1.380649e-23;
/// Reduced Planck constant in J·s.
const HBAR_SI: f64 = 1.054571817e-34;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    AppendixD,
    ClosedDecay,
    SpectralChecks,
    EvolveOpen,
    KramersSweep,
    Timescales,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::AppendixD => "appendix-d",
            Self::ClosedDecay => "closed-decay",
            Self::SpectralChecks => "spectral-checks",
            Self::EvolveOpen => "evolve-open",
            Self::KramersSweep => "kramers-sweep",
            Self::Timescales => "timescales",
        }
    }

    pub fn default_output(self) -> String {
        let ext = if self == Self::Timescales { "json" } else { "csv" };
        format!("{}.{ext}", self.name())
    }
}

/// Result of one experiment: the artifact text and an optional summary for
/// standard output.
pub struct Artifact {
    pub contents: String,
    pub summary: Option<String>,
}

pub fn run(exp: Experiment, cfg: &RunConfig) -> Result<Artifact, CliError> {
    match exp {
        Experiment::AppendixD => appendix_d(cfg),
        Experiment::ClosedDecay => closed_decay(cfg),
        Experiment::SpectralChecks => spectral_checks(cfg),
        Experiment::EvolveOpen => evolve_open(cfg),
        Experiment::KramersSweep => kramers_sweep(cfg),
        Experiment::Timescales => timescales(cfg),
    }
}

fn resonance(cfg: &RunConfig) -> Result<ResonanceData, CliError> {
    Ok(cfg.potential.params.resonance_data()?)
}

fn appendix_d(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let a = cfg.appendix;
    let res = resonance(cfg)?;
    let rep = rate_report(a.eps_s_mk, a.eps0_mk, Some(&res))?;
    // Ω0 from the zero-point energy ε0 = ħΩ0/2, with ε0 given in mK.
    let omega0_si = 2.0 * K_B * a.eps0_mk * 1e-3 / HBAR_SI;
    let rows: Vec<(&str, f64, &str)> = vec![
        ("lambda0", rep.lambda0, "1"),
        ("a_q", rep.a_q, "1"),
        ("k_gs", rep.k_gs, "1"),
        ("zeta_gs", rep.zeta_gs, "1"),
        ("f_gs", rep.f_gs, "1"),
        ("k_ref", rep.k_ref, "1"),
        ("f_action_ref", rep.f_action_ref, "1"),
        ("lambda", rep.lambda, "1"),
        ("lambda0_minus_ln_a_q", rep.lambda0 - rep.a_q.ln(), "1"),
        ("t_esc_inst", rep.t_esc_inst, "mK"),
        ("t_esc_wkb", rep.t_esc_wkb, "mK"),
        ("gamma_inst", rep.gamma_inst * omega0_si, "1/s"),
        ("gamma_wkb", rep.gamma_wkb * omega0_si, "1/s"),
        ("lambda_quadrature", rep.lambda_quadrature.unwrap_or(f64::NAN), "1"),
    ];
    let mut csv = Csv::new("appendix-d", cfg, &[("omega0_si", omega0_si)], &["quantity", "value", "unit"]);
    let mut summary = format!("{:<22} {:>14}  unit\n", "quantity", "value");
    for (name, v, unit) in &rows {
        csv.row(&[name.to_string(), num(*v), unit.to_string()]);
        summary.push_str(&format!("{name:<22} {v:>14.4}  {unit}\n"));
    }
    Ok(Artifact { contents: csv.into_string(), summary: Some(summary) })
}

fn closed_decay(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let res = resonance(cfg)?;
    let unit = res.hbar / res.epsilon;
    let last = (cfg.run.samples - 1) as f64;
    let times: Vec<f64> = (0..cfg.run.samples).map(|k| cfg.run.t_max * unit * k as f64 / last).collect();
    let grid = PersistenceGrid { window_in_epsilons: cfg.grid.window_in_epsilons, n: cfg.grid.n };
    let pts = persistence_curve(&res, &times, grid)?;
    let derived = [("epsilon", res.epsilon), ("e0", res.e0), ("time_unit", unit)];
    let mut csv = Csv::new("closed-decay", cfg, &derived, &["t", "analytic", "numeric"]);
    for p in &pts {
        csv.row(&[num(p.t), num(p.analytic), num(p.numeric)]);
    }
    Ok(Artifact { contents: csv.into_string(), summary: None })
}

fn spectral_checks(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let family =
        RefinementFamily { hbar: cfg.potential.params.hbar, mass: cfg.potential.params.mass, ..Default::default() };
    let rows = refinement_study(&family, &cfg.grid.refinement)?;
    let derived = [("probe_centre", family.probe.centre), ("probe_width", family.probe.width)];
    let header = ["n", "dp", "pv_pv", "commutator", "prop2", "prop3", "prop4", "xp_trace", "xp_product", "thermal"];
    let mut csv = Csv::new("spectral-checks", cfg, &derived, &header);
    for r in &rows {
        csv.row(&[
            r.n.to_string(),
            num(r.dp),
            num(r.pv_pv),
            num(r.commutator),
            num(r.prop2),
            num(r.prop3),
            num(r.prop4),
            num(r.xp_trace),
            num(r.xp_product),
            num(r.thermal),
        ]);
    }
    Ok(Artifact { contents: csv.into_string(), summary: None })
}

fn evolve_open(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let params = cfg.potential.params;
    let res = resonance(cfg)?;
    let bath = cfg.bath.bath;
    let tau_d = Timescales::new(&res, &bath, &params).tau_d_alpha(cfg.bath.alpha);
    if !tau_d.is_finite() {
        return Err(CliError::Validation {
            key: "bath.gamma".into(),
            message: "evolve-open needs gamma > 0 to set its time unit".into(),
        });
    }
    let state = LocalState::false_vacuum(&params, &res, cfg.local.axes, cfg.local.boundary)?;
    let dt = cfg.run.dt * tau_d;
    let n_steps = (cfg.run.t_max / cfg.run.dt).round() as usize;
    let traj = trajectory(
        &state,
        &bath,
        cfg.local.terms,
        |p| res.phase_derivative_momentum(&params, p),
        dt,
        n_steps,
        cfg.run.stride,
    )?;
    let derived =
        [("epsilon", res.epsilon), ("tau_d", tau_d), ("dt", dt), ("stability_bound", state.stability_bound(&bath))];
    let mut csv = Csv::new("evolve-open", cfg, &derived, &["t", "N", "mean_E", "purity", "offdiag_mass"]);
    for pt in &traj {
        let d = pt.diagnostics;
        csv.row(&[num(pt.t), num(d.norm), num(d.mean_energy), num(d.purity), num(d.offdiag_mass)]);
    }
    Ok(Artifact { contents: csv.into_string(), summary: None })
}

fn kramers_sweep(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let params = cfg.potential.params;
    let res = resonance(cfg)?;
    let eps_s = params.eps_s();
    let base = cfg.bath.bath;
    let rows: Vec<Result<[f64; 5], CliError>> = cfg
        .kramers
        .ratios
        .par_iter()
        .map(|&ratio| {
            let sigma2 = eps_s / ratio;
            let prob = KramersProblem::new(params.mass, sigma2, base.gamma, eps_s, res.tau)?;
            let analytic = escape_rate_analytic(&prob);
            let numeric = escape_rate_numeric(&prob, cfg.kramers.n)?;
            let bath = BathParams::new(base.gamma, sigma2, base.delta)?;
            let tau_d = match cfg.kramers.tau_d {
                Some(t) => t,
                None => Timescales::new(&res, &bath, &params).tau_d_alpha(cfg.bath.alpha),
            };
            let ratio_eff = sigma_eff(&bath, tau_d)? / sigma2;
            Ok([ratio, analytic.rate, numeric.r, numeric.t_esc.unwrap_or(f64::NAN), ratio_eff])
        })
        .collect();
    let derived = [("eps_s", eps_s), ("tau", res.tau)];
    let header = ["eps_s_over_sigma2", "r_analytic", "r_numeric", "t_esc", "sigma_eff_ratio"];
    let mut csv = Csv::new("kramers-sweep", cfg, &derived, &header);
    for row in rows {
        csv.row(&row?.map(num));
    }
    Ok(Artifact { contents: csv.into_string(), summary: None })
}

fn timescales(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let params = cfg.potential.params;
    let res = resonance(cfg)?;
    let bath = cfg.bath.bath;
    let ts = Timescales::new(&res, &bath, &params);
    let alpha = cfg.bath.alpha;
    let mut config = JsonObject::default();
    for (k, v) in cfg.resolved() {
        config.string(k, v);
    }
    let mut o = JsonObject::default();
    o.string("tool", TOOL)
        .string("experiment", "timescales")
        .object("config", config)
        .number("epsilon", res.epsilon)
        .number("e0", res.e0)
        .number("tau_r", ts.tau_r)
        .number("tau_tunn", ts.tau_tunn)
        .number("d", ts.d)
        .number("tau_d", ts.tau_d)
        .number("alpha", alpha)
        .number("tau_d_alpha", ts.tau_d_alpha(alpha))
        .number("tau_d_wavelength", tau_d_wavelength(&res, &bath, &params, alpha))
        .boolean("strong_decoherence", ts.strong_decoherence());
    let mut contents = o.render(0);
    contents.push('\n');
    Ok(Artifact { contents, summary: None })
}
