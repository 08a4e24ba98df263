use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// One judged residual.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Default)]
pub struct Report {
    pub checks: BTreeMap<String, Check>,
    /// Reported quantities that are not judged.
    pub values: BTreeMap<String, Value>,
}

impl Report {
    /// Records `value ≤ tolerance`.
    pub fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.insert(name.into(), Check { value, tolerance, pass: value <= tolerance });
    }

    /// Records `value ≥ tolerance`.
    pub fn at_least(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.insert(name.into(), Check { value, tolerance, pass: value >= tolerance });
    }

    pub fn value<T: Serialize>(&mut self, name: &str, v: T) {
        self.values.insert(name.into(), serde_json::to_value(v).expect("serializable value"));
    }

    pub fn pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect()
    }

    pub fn to_value(&self, command: &str, config: &Value, hash: &str) -> Value {
        serde_json::json!({
            "command": command,
            "config": config,
            "config_hash": hash,
            "versions": {
                "jacobi-renorm": jacobi_renorm::VERSION,
                "jacobi-renorm-cli": env!("CARGO_PKG_VERSION"),
            },
            "checks": self.checks,
            "values": self.values,
            "pass": self.pass(),
        })
    }
}

/// SHA-256 of the canonical rendering of `v`.
pub fn config_hash(v: &Value) -> String {
    let h = Sha256::digest(canonical_json(v).as_bytes());
    h.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Pretty JSON with sorted keys and floats at 17 significant digits.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    emit(v, 0, &mut out);
    out.push('\n');
    out
}

fn emit(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap();
                let _ = write!(out, "{x:.16e}");
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                emit(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                emit(&m[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

pub fn write_json(path: &Path, v: &Value) -> std::io::Result<()> {
    std::fs::write(path, canonical_json(v))
}
