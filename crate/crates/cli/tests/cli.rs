use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tunnel(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tunnel"))
        .args(args)
        .env("TUNNEL_OUTPUT_DIR", root)
        .output()
        .expect("tunnel binary should start")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn meta(text: &str, key: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .map(str::to_string)
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn flag_overrides_file_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[bath]\ngamma = 0.01\n");
    let out = tunnel(tmp.path(), &["timescales", "--config", cfg.to_str().unwrap(), "--bath.gamma", "0.02"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("timescales.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["bath.gamma"], "0.02");
    assert_eq!(json["tau_r"].as_f64().unwrap(), 50.0);
}

#[test]
fn config_may_follow_overrides() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bath.gamma = 0.04\n");
    let out = tunnel(tmp.path(), &["timescales", "--run.output", "t.json", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("t.json")).unwrap();
    assert!(text.contains("\"bath.gamma\": \"0.04\""));
}

#[test]
fn negative_gamma_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bath.gamma = -1\n");
    let out = tunnel(tmp.path(), &["timescales", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`bath.gamma`"), "{err}");
    assert!(!tmp.path().join("timescales.json").exists());
}

#[test]
fn parse_errors_report_the_line_and_exit_1() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "# header\ngrid.n = 64\ngrid.window_in_epsilons 12\n");
    let out = tunnel(tmp.path(), &["closed-decay", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = tunnel(tmp.path(), &["timescales", "--bath.gama", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bath.gama"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out = tunnel(tmp.path(), &["timescales", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_subcommand_exits_1_and_help_exits_0() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(tunnel(tmp.path(), &["no-such-experiment"]).status.code(), Some(1));
    assert_eq!(tunnel(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn physics_domain_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    // ±40ε leaves too much of the Lorentzian outside the window.
    let out = tunnel(tmp.path(), &["closed-decay", "--grid.window_in_epsilons", "40"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid too narrow"));
}

#[test]
fn closed_decay_slope_matches_width() {
    let tmp = TempDir::new().unwrap();
    let out = tunnel(tmp.path(), &["closed-decay"]);
    assert!(out.status.success());
    let text = fs::read_to_string(tmp.path().join("closed-decay.csv")).unwrap();
    let eps: f64 = meta(&text, "derived.epsilon").unwrap().parse().unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 61);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[2].ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let expected = -2.0 * eps;
    assert!((slope / expected - 1.0).abs() < 0.01, "slope {slope:e} vs {expected:e}");
}

#[test]
fn timescales_flags_strong_decoherence() {
    let tmp = TempDir::new().unwrap();
    let strong = tunnel(tmp.path(), &["timescales", "--run.output", "strong.json"]);
    assert!(strong.status.success());
    let weak = tunnel(tmp.path(), &["timescales", "--bath.gamma", "1e-15", "--run.output", "weak.json"]);
    assert!(weak.status.success());
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(tmp.path().join(name)).unwrap()).unwrap()
    };
    let (s, w) = (read("strong.json"), read("weak.json"));
    assert!(s["d"].as_f64().unwrap() > 10.0);
    assert_eq!(s["strong_decoherence"], true);
    assert!(w["d"].as_f64().unwrap() < 10.0);
    assert_eq!(w["strong_decoherence"], false);
}

#[test]
fn json_key_order_is_fixed() {
    let tmp = TempDir::new().unwrap();
    assert!(tunnel(tmp.path(), &["timescales"]).status.success());
    let text = fs::read_to_string(tmp.path().join("timescales.json")).unwrap();
    let keys: Vec<&str> =
        text.lines().filter(|l| l.starts_with("  \"")).map(|l| l.trim().split('"').nth(1).unwrap()).collect();
    assert_eq!(
        keys,
        [
            "tool",
            "experiment",
            "config",
            "epsilon",
            "e0",
            "tau_r",
            "tau_tunn",
            "d",
            "tau_d",
            "alpha",
            "tau_d_alpha",
            "tau_d_wavelength",
            "strong_decoherence"
        ]
    );
    // 17 significant digits for every float.
    let eps = text.lines().find(|l| l.contains("\"epsilon\"")).unwrap();
    let mantissa = eps.split(": ").nth(1).unwrap().split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn csv_dialect_and_meta_block() {
    let tmp = TempDir::new().unwrap();
    assert!(tunnel(tmp.path(), &["kramers-sweep", "--kramers.ratios", "6,10"]).status.success());
    let text = fs::read_to_string(tmp.path().join("kramers-sweep.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    assert_eq!(meta(&text, "tool").unwrap(), concat!("tunnel ", env!("CARGO_PKG_VERSION")));
    assert_eq!(meta(&text, "experiment").unwrap(), "kramers-sweep");
    assert_eq!(meta(&text, "config.kramers.ratios").unwrap(), "6,10");
    // Defaults are echoed too.
    assert_eq!(meta(&text, "config.grid.n").unwrap(), "1024");
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "eps_s_over_sigma2,r_analytic,r_numeric,t_esc,sigma_eff_ratio");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2);
    assert!(rows[1][2] < rows[0][2]);
}

#[test]
fn appendix_table_on_stdout() {
    let tmp = TempDir::new().unwrap();
    let out = tunnel(tmp.path(), &["appendix-d"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for needle in ["12.3758", "68.3049", "72.3448", "70.8688"] {
        assert!(stdout.contains(needle), "{needle} missing from\n{stdout}");
    }
}

#[test]
fn evolve_open_trajectory_shape() {
    let tmp = TempDir::new().unwrap();
    let out = tunnel(tmp.path(), &["evolve-open", "--run.t_max", "0.5", "--run.stride", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("evolve-open.csv")).unwrap();
    assert!(text.contains("\nt,N,mean_E,purity,offdiag_mass\n"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[1][4] < w[0][4]));
}

#[test]
fn evolve_open_rejects_unstable_step() {
    let tmp = TempDir::new().unwrap();
    let out = tunnel(tmp.path(), &["evolve-open", "--run.dt", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectral_checks_rows_follow_refinement() {
    let tmp = TempDir::new().unwrap();
    assert!(tunnel(tmp.path(), &["spectral-checks", "--grid.refinement", "128,256"]).status.success());
    let rows = data_rows(&fs::read_to_string(tmp.path().join("spectral-checks.csv")).unwrap());
    assert_eq!(rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(), [128, 256]);
    assert!(rows[1][2] < rows[0][2]);
}

#[test]
fn output_lands_under_the_root() {
    let tmp = TempDir::new().unwrap();
    assert!(tunnel(tmp.path(), &["timescales", "--run.output", "nested/dir/ts.json"]).status.success());
    assert!(tmp.path().join("nested/dir/ts.json").is_file());
}
