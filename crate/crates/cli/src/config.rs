//! Run configuration: a flat `key = value` file with dotted keys, optional
//! `[section]` headers and `#` comments, overlaid by command-line pairs.
//!
//! Every accepted key is listed in [`KEYS`]. Unknown keys are rejected so a
//! typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use tunnel_core::master::{BoundaryMode, LocalAxes, LocalTerms};
use tunnel_core::{BathParams, PotentialParams};

use crate::error::CliError;

/// Accepted keys with their default (`None` means "derived" or "unset").
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("appendix.eps0_mk", Some("171.55")),
    ("appendix.eps_s_mk", Some("589.74")),
    ("bath.alpha", Some("1")),
    ("bath.delta", None),
    ("bath.gamma", Some("0.01")),
    ("bath.omega_cut", None),
    ("bath.sigma2", None),
    ("grid.n", Some("1024")),
    ("grid.refinement", Some("128,256,512,1024")),
    ("grid.window_in_epsilons", Some("256")),
    ("kramers.n", Some("800")),
    ("kramers.ratios", Some("6,8,10,12,14")),
    ("kramers.tau_d", None),
    ("local.boundary", Some("absorbing")),
    ("local.half_width_average", Some("32")),
    ("local.half_width_difference", Some("16")),
    ("local.n_average", Some("256")),
    ("local.n_difference", Some("129")),
    ("local.terms", Some("all")),
    ("potential.hbar", Some("1")),
    ("potential.lambda", None),
    ("potential.mass", Some("1")),
    ("potential.omega0", Some("1")),
    ("potential.u_infinity", Some("1")),
    ("run.deterministic", Some("true")),
    ("run.dt", Some("0.01")),
    ("run.output", None),
    ("run.samples", Some("61")),
    ("run.stride", Some("5")),
    ("run.t_max", Some("3")),
];

/// Raw key/value pairs after merging file and command line, before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = Self::default();
        let mut section = String::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| CliError::Parse {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Parse { line: line_no, message: "empty key".into() });
            }
            let full =
                if section.is_empty() || key.contains('.') { key.to_string() } else { format!("{section}.{key}") };
            raw.set(&full, value.trim()).map_err(|e| match e {
                CliError::Validation { key, message } => {
                    CliError::Parse { line: line_no, message: format!("{key}: {message}") }
                }
                other => other,
            })?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Self::parse(&text)
    }

    /// Sets one key, rejecting names outside [`KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::Validation { key: key.to_string(), message: "unknown key".into() });
        }
        self.values.insert(key.to_string(), strip_quotes(value).to_string());
        Ok(())
    }

    /// Applies `--key value` / `--key=value` pairs; later pairs win.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let body = arg
                .strip_prefix("--")
                .ok_or_else(|| CliError::Usage(format!("expected `--key value`, got `{arg}`")))?;
            match body.split_once('=') {
                Some((k, v)) => self.set(k, v)?,
                None => {
                    let v = it.next().ok_or_else(|| CliError::Usage(format!("missing value for `--{body}`")))?;
                    self.set(body, v)?;
                }
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).or_else(|| default_of(key))
    }

    fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn f64(&self, key: &'static str) -> Result<f64, CliError> {
        let v = self.get(key).ok_or_else(|| invalid(key, "missing value"))?;
        v.parse::<f64>().map_err(|_| invalid(key, format!("`{v}` is not a number")))
    }

    fn opt_f64(&self, key: &'static str) -> Result<Option<f64>, CliError> {
        if self.get(key).is_some() {
            self.f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn usize(&self, key: &'static str) -> Result<usize, CliError> {
        let v = self.get(key).ok_or_else(|| invalid(key, "missing value"))?;
        v.parse::<usize>().map_err(|_| invalid(key, format!("`{v}` is not a non-negative integer")))
    }

    fn list<T: std::str::FromStr>(&self, key: &'static str) -> Result<Vec<T>, CliError> {
        let v = self.get(key).ok_or_else(|| invalid(key, "missing value"))?;
        v.split(',').map(|s| s.trim().parse::<T>().map_err(|_| invalid(key, format!("bad list entry `{s}`")))).collect()
    }
}

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d)
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head)
}

fn strip_quotes(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { key: key.to_string(), message: message.into() }
}

fn positive(key: &'static str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be > 0, got {v}")))
    }
}

fn nonnegative(key: &'static str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be >= 0, got {v}")))
    }
}

/// Potential block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialBlock {
    pub params: PotentialParams,
}

/// Bath block with the coupling constants already resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathBlock {
    pub bath: BathParams,
    pub alpha: f64,
    pub omega_cut: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub n: usize,
    pub window_in_epsilons: f64,
    pub refinement: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBlock {
    pub axes: LocalAxes,
    pub boundary: BoundaryMode,
    pub terms: LocalTerms,
}

/// Run block. Times are dimensionless: `ħ/ε` units for `closed-decay`,
/// `τ_D` units for `evolve-open`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunBlock {
    pub t_max: f64,
    pub dt: f64,
    pub samples: usize,
    pub stride: usize,
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixBlock {
    pub eps_s_mk: f64,
    pub eps0_mk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KramersBlock {
    pub ratios: Vec<f64>,
    pub n: usize,
    pub tau_d: Option<f64>,
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialBlock,
    pub bath: BathBlock,
    pub grid: GridBlock,
    pub local: LocalBlock,
    pub run: RunBlock,
    pub appendix: AppendixBlock,
    pub kramers: KramersBlock,
    resolved: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let appendix = AppendixBlock {
            eps_s_mk: positive("appendix.eps_s_mk", raw.f64("appendix.eps_s_mk")?)?,
            eps0_mk: positive("appendix.eps0_mk", raw.f64("appendix.eps0_mk")?)?,
        };

        let mass = positive("potential.mass", raw.f64("potential.mass")?)?;
        let omega0 = positive("potential.omega0", raw.f64("potential.omega0")?)?;
        let u_infinity = nonnegative("potential.u_infinity", raw.f64("potential.u_infinity")?)?;
        let hbar = positive("potential.hbar", raw.f64("potential.hbar")?)?;
        let params = match raw.opt_f64("potential.lambda")? {
            Some(l) => PotentialParams::new(mass, omega0, positive("potential.lambda", l)?, u_infinity, hbar),
            // The default well has the barrier-to-zero-point ratio of the
            // appendix inputs.
            None => PotentialParams::from_barrier_ratio(
                mass,
                omega0,
                appendix.eps_s_mk / appendix.eps0_mk,
                u_infinity,
                hbar,
            ),
        }
        .map_err(|e| invalid("potential", e.to_string()))?;

        let gamma = nonnegative("bath.gamma", raw.f64("bath.gamma")?)?;
        let alpha = positive("bath.alpha", raw.f64("bath.alpha")?)?;
        let omega_cut = raw.opt_f64("bath.omega_cut")?.map(|w| positive("bath.omega_cut", w)).transpose()?;
        let bath = match omega_cut {
            Some(w) => {
                if raw.is_set("bath.sigma2") {
                    return Err(invalid("bath.omega_cut", "give either bath.sigma2 or bath.omega_cut, not both"));
                }
                let mut b = BathParams::zero_temperature(&params, gamma, w)
                    .map_err(|e| invalid("bath.omega_cut", e.to_string()))?;
                if let Some(d) = raw.opt_f64("bath.delta")? {
                    b.delta = d;
                }
                b
            }
            None => {
                let sigma2 = match raw.opt_f64("bath.sigma2")? {
                    Some(s) => positive("bath.sigma2", s)?,
                    None => 0.5 * hbar * omega0,
                };
                let delta = raw.opt_f64("bath.delta")?.unwrap_or(0.0);
                BathParams::new(gamma, sigma2, delta).map_err(|e| invalid("bath", e.to_string()))?
            }
        };
        if !bath.delta.is_finite() {
            return Err(invalid("bath.delta", "must be finite"));
        }

        let grid = GridBlock {
            n: raw.usize("grid.n")?,
            window_in_epsilons: positive("grid.window_in_epsilons", raw.f64("grid.window_in_epsilons")?)?,
            refinement: raw.list("grid.refinement")?,
        };
        if grid.n < 16 {
            return Err(invalid("grid.n", "must be >= 16"));
        }
        if grid.refinement.is_empty() || grid.refinement.iter().any(|&n| n < 16) {
            return Err(invalid("grid.refinement", "entries must be >= 16"));
        }

        let axes = LocalAxes {
            n_average: raw.usize("local.n_average")?,
            half_width_average: positive("local.half_width_average", raw.f64("local.half_width_average")?)?,
            n_difference: raw.usize("local.n_difference")?,
            half_width_difference: positive("local.half_width_difference", raw.f64("local.half_width_difference")?)?,
        };
        if axes.n_average < 4 {
            return Err(invalid("local.n_average", "must be >= 4"));
        }
        if axes.n_difference < 3 || axes.n_difference.is_multiple_of(2) {
            return Err(invalid("local.n_difference", "must be odd and >= 3"));
        }
        let boundary = match raw.get("local.boundary").unwrap_or_default() {
            "absorbing" => BoundaryMode::ZeroFluxLowAbsorbingHigh,
            "reflecting" => BoundaryMode::ZeroFluxBoth,
            other => {
                return Err(invalid("local.boundary", format!("expected `absorbing` or `reflecting`, got `{other}`")))
            }
        };
        let terms = parse_terms(raw.get("local.terms").unwrap_or_default())?;

        let run = RunBlock {
            t_max: positive("run.t_max", raw.f64("run.t_max")?)?,
            dt: positive("run.dt", raw.f64("run.dt")?)?,
            samples: raw.usize("run.samples")?,
            stride: raw.usize("run.stride")?,
            output: raw.get("run.output").map(str::to_string),
        };
        if run.samples < 2 {
            return Err(invalid("run.samples", "must be >= 2"));
        }
        if run.stride == 0 {
            return Err(invalid("run.stride", "must be >= 1"));
        }
        if let Some(name) = &run.output {
            if name.is_empty() || Path::new(name).is_absolute() || name.split(['/', '\\']).any(|c| c == "..") {
                return Err(invalid("run.output", "must be a relative path inside the output directory"));
            }
        }
        match raw.get("run.deterministic").unwrap_or_default() {
            "true" => {}
            other => return Err(invalid("run.deterministic", format!("only `true` is supported, got `{other}`"))),
        }

        let kramers = KramersBlock {
            ratios: raw.list("kramers.ratios")?,
            n: raw.usize("kramers.n")?,
            tau_d: raw.opt_f64("kramers.tau_d")?.map(|t| nonnegative("kramers.tau_d", t)).transpose()?,
        };
        if kramers.ratios.is_empty() || kramers.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(invalid("kramers.ratios", "entries must be > 0"));
        }

        let mut resolved = BTreeMap::new();
        for (key, _) in KEYS {
            let shown = match raw.get(key) {
                Some(v) => v.to_string(),
                None => match *key {
                    "potential.lambda" => fmt_f64(params.lambda),
                    "bath.sigma2" => fmt_f64(bath.sigma2),
                    "bath.delta" => fmt_f64(bath.delta),
                    _ => "none".to_string(),
                },
            };
            resolved.insert(key.to_string(), shown);
        }

        Ok(Self {
            potential: PotentialBlock { params },
            bath: BathBlock { bath, alpha, omega_cut },
            grid,
            local: LocalBlock { axes, boundary, terms },
            run,
            appendix,
            kramers,
            resolved,
        })
    }

    /// Every key with the value actually used, sorted by key.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// `all`, `none`, or a comma list of term names.
fn parse_terms(v: &str) -> Result<LocalTerms, CliError> {
    match v {
        "all" => return Ok(LocalTerms::ALL),
        "none" => return Ok(LocalTerms::NONE),
        _ => {}
    }
    let mut t = LocalTerms::NONE;
    for name in v.split(',').map(str::trim) {
        match name {
            "phase" => t.phase = true,
            "dissipation" => t.dissipation = true,
            "diffusion" => t.diffusion = true,
            "anomalous" => t.anomalous = true,
            "decoherence" => t.decoherence = true,
            other => return Err(invalid("local.terms", format!("unknown term `{other}`"))),
        }
    }
    Ok(t)
}

/// Shortest round-trip float formatting used when echoing derived values.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.resolved {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
