use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

/// Significant digits used for every floating point number in a report.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub witness: Option<Value>,
}

/// What a command checked and measured. Keys are sorted on output and
/// empty sections are omitted, so a default report renders as `{}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub command: String,
    /// Flag name to SHA-256 of the input document.
    pub inputs: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub measurements: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), ..Self::default() }
    }

    /// Records a verdict; the witness is only built, and required, on failure.
    pub fn verdict(&mut self, name: impl Into<String>, pass: bool, witness: impl FnOnce() -> Value) {
        let witness = (!pass).then(witness);
        self.verdicts.push(Verdict { name: name.into(), pass, witness });
    }

    pub fn fail(&mut self, name: impl Into<String>, witness: Value) {
        self.verdicts.push(Verdict { name: name.into(), pass: false, witness: Some(witness) });
    }

    pub fn measure(&mut self, name: impl Into<String>, value: impl serde::Serialize) {
        let value = serde_json::to_value(value).expect("measurements are plain data");
        self.measurements.insert(name.into(), value);
    }

    pub fn passes(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_value(&self) -> Value {
        let mut obj = Map::new();
        if !self.command.is_empty() {
            obj.insert("command".into(), Value::String(self.command.clone()));
        }
        if !self.inputs.is_empty() {
            let inputs = self.inputs.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
            obj.insert("inputs".into(), Value::Object(inputs));
        }
        if !self.verdicts.is_empty() {
            let verdicts = self
                .verdicts
                .iter()
                .map(|v| {
                    let mut m = Map::new();
                    m.insert("name".into(), Value::String(v.name.clone()));
                    m.insert("pass".into(), Value::Bool(v.pass));
                    if let Some(w) = &v.witness {
                        m.insert("witness".into(), w.clone());
                    }
                    Value::Object(m)
                })
                .collect();
            obj.insert("verdicts".into(), Value::Array(verdicts));
        }
        if !self.measurements.is_empty() {
            obj.insert("measurements".into(), Value::Object(self.measurements.clone().into_iter().collect()));
        }
        Value::Object(obj)
    }
}

/// Fixed decimal notation with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("\"{x}\"");
    }
    let x = if x == 0.0 { 0.0 } else { x };
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exp: i64 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (SIGNIFICANT_DIGITS as i64 - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => out.push_str(&u.to_string()),
            (_, Some(i)) => out.push_str(&i.to_string()),
            _ => out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(|i| !i.is_array() && !i.is_object()) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_value(out, item, indent);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Deterministic text of any JSON value, with sorted keys and fixed float
/// formatting.
pub fn render_value(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

pub fn render(report: &Report) -> String {
    render_value(&report.to_value())
}

/// Writes the report to `path`, or to standard output when absent.
pub fn emit_report(report: &Report, path: Option<&Path>) -> std::io::Result<()> {
    let text = render(report);
    match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}
