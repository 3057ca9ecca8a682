//! JSON report assembly.
//!
//! Reals are printed as `{:.16e}` (17 significant digits), which round-trips
//! every `f64` and keeps reports byte-stable. Non-finite values become `null`.

use serde_json::{Map, Number, Value};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn real(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    Value::Number(serde_json::from_str::<Number>(&text).expect("formatted float is valid JSON"))
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| real(x)).collect())
}

pub fn opt_real(x: Option<f64>) -> Value {
    x.map_or(Value::Null, real)
}

/// JSON object builder; keys are emitted in sorted order.
#[derive(Debug, Default)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.insert(key.to_owned(), value.into());
        self
    }

    pub fn real(self, key: &str, x: f64) -> Self {
        self.set(key, real(x))
    }
}

impl From<Obj> for Value {
    fn from(o: Obj) -> Value {
        Value::Object(o.0)
    }
}

/// Top-level envelope shared by every command.
pub fn envelope(command: &str, config: Obj, result: Obj) -> Value {
    Obj::new()
        .set("schema_version", REPORT_SCHEMA_VERSION)
        .set("command", command)
        .set("library_version", blockspec::VERSION)
        .set("config", config)
        .set("result", result)
        .into()
}

pub fn render(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
