//! Artifact writers.
//!
//! CSV files start with a `#` meta block (tool version, experiment, every
//! resolved config key, derived quantities), then a mandatory header row.
//! Floats use `{:.16e}` so that every bit survives a round trip; JSON uses
//! the same formatting with a fixed key order. Nothing depends on wall-clock
//! time or hash ordering, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL: &str = concat!("tunnel ", env!("CARGO_PKG_VERSION"));

/// Environment variable naming the artifact root (default: current dir).
pub const OUTPUT_DIR_ENV: &str = "TUNNEL_OUTPUT_DIR";

/// 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// A CSV table buffered in memory.
pub struct Csv {
    buf: String,
    width: usize,
}

impl Csv {
    pub fn new(experiment: &str, cfg: &RunConfig, derived: &[(&str, f64)], header: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# tool = {TOOL}");
        let _ = writeln!(buf, "# experiment = {experiment}");
        for (k, v) in cfg.resolved() {
            let _ = writeln!(buf, "# config.{k} = {v}");
        }
        for (k, v) in derived {
            let _ = writeln!(buf, "# derived.{k} = {}", num(*v));
        }
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self { buf, width: header.len() }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.width);
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// Ordered JSON object writer. Values are pre-rendered JSON fragments.
#[derive(Default)]
pub struct JsonObject {
    entries: Vec<(String, String)>,
}

impl JsonObject {
    pub fn number(&mut self, key: &str, v: f64) -> &mut Self {
        let s = if v.is_finite() { num(v) } else { "null".into() };
        self.entries.push((key.into(), s));
        self
    }

    pub fn boolean(&mut self, key: &str, v: bool) -> &mut Self {
        self.entries.push((key.into(), v.to_string()));
        self
    }

    pub fn string(&mut self, key: &str, v: &str) -> &mut Self {
        self.entries.push((key.into(), quote(v)));
        self
    }

    pub fn object(&mut self, key: &str, v: JsonObject) -> &mut Self {
        self.entries.push((key.into(), v.render(1)));
        self
    }

    pub fn render(&self, depth: usize) -> String {
        let pad = "  ".repeat(depth + 1);
        let mut out = String::from("{\n");
        for (i, (k, v)) in self.entries.iter().enumerate() {
            let comma = if i + 1 < self.entries.len() { "," } else { "" };
            let _ = writeln!(out, "{pad}{}: {v}{comma}", quote(k));
        }
        out.push_str(&"  ".repeat(depth));
        out.push('}');
        out
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Writes `contents` under the artifact root, creating parent directories.
pub fn write_artifact(root: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = root.join(name);
    let io_err = |e| CliError::Io { path: path.display().to_string(), source: e };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    std::fs::write(&path, contents).map_err(io_err)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn json_keeps_insertion_order_and_escapes() {
        let mut inner = JsonObject::default();
        inner.string("b", "x\"y");
        let mut o = JsonObject::default();
        o.number("z", 1.0).number("a", f64::INFINITY).boolean("flag", true).object("inner", inner);
        let s = o.render(0);
        assert_eq!(
            s,
            "{\n  \"z\": 1.0000000000000000e0,\n  \"a\": null,\n  \"flag\": true,\n  \"inner\": {\n    \"b\": \"x\\\"y\"\n  }\n}"
        );
    }
}
