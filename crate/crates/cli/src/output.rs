//! CSV/JSON writers with fixed numeric precision.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// 15 significant digits, scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.14e}")
}

/// `x` rounded to 15 significant digits, for JSON output.
pub fn round15(x: f64) -> f64 {
    if x.is_finite() {
        num(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

/// Applies [`round15`] to every number in a JSON tree.
pub fn round_tree(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            serde_json::Number::from_f64(round15(n.as_f64().expect("f64 number")))
                .map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_tree).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_tree(v))).collect()),
        other => other,
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(&round_tree(value.clone())).expect("json serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

/// `t,[t_physical_ps,]site_1,...,site_N` table of a per-site series.
pub fn site_table(times: &[f64], rows: &[Vec<f64>], time_scale: Option<f64>) -> String {
    let n = rows.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    if time_scale.is_some() {
        out.push_str(",t_physical_ps");
    }
    for k in 1..=n {
        write!(out, ",site_{k}").unwrap();
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        out.push_str(&num(*t));
        if let Some(eta) = time_scale {
            write!(out, ",{}", num(t / eta * 1e12)).unwrap();
        }
        for v in row {
            write!(out, ",{}", num(*v)).unwrap();
        }
        out.push('\n');
    }
    out
}
