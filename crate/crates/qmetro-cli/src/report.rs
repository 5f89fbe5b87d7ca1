//! Machine-readable run reports: one schema-versioned JSON document per run,
//! or a flat CSV table where a table is the natural shape.

use crate::CliError;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Report payload plus its CSV rendering.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub report: Value,
    pub csv: String,
}

pub fn document(command: &str, mut payload: Value) -> Value {
    let obj = payload.as_object_mut().expect("payload must be an object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    payload
}

pub fn key_value_csv(rows: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(k);
        out.push(',');
        out.push_str(v);
        out.push('\n');
    }
    out
}

pub fn table_csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Serializes the selected format to a string ready for stdout or a file.
pub fn render(output: &CommandOutput, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => serde_json::to_string_pretty(&output.report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::Config(format!("report serialize: {e}"))),
        Format::Csv => Ok(output.csv.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}
