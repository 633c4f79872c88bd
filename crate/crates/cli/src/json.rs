//! JSON report output: struct field order is kept and every float is
//! rounded to 9 significant digits. Non-finite floats become `null`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};
use ttembed::report::sig9;

use crate::error::CliError;

pub fn finalize(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(sig9(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(finalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, finalize(v))).collect()),
        other => other,
    }
}

pub fn render<T: Serialize>(report: &T) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    serde_json::to_string_pretty(&finalize(value)).expect("values serialize")
}

/// Prints the report to stdout and optionally mirrors it to a file.
pub fn emit<T: Serialize>(report: &T, copy: Option<&Path>) -> Result<(), CliError> {
    let text = render(report);
    if let Some(path) = copy {
        std::fs::write(path, format!("{text}\n")).map_err(CliError::io(path))?;
    }
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        // a closed pipe (e.g. `| head`) is not a failure of the command
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"))(e)),
        _ => Ok(()),
    }
}
