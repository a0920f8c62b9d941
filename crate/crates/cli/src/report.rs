//! Machine-readable run report. Field order is fixed and all maps are
//! ordered, so identical inputs produce byte-identical JSON apart from the
//! top-level timing field.

use serde::Serialize;
use serde_json::{json, Value};

use dekl_core::{CheckFailure, ParseError, SourceSpan, TypeError};

#[derive(Debug, Serialize)]
pub struct Report {
    #[serde(rename = "schemaVersion")]
    pub schema_version: u32,
    pub command: String,
    pub items: Vec<Value>,
    #[serde(rename = "timingMs")]
    pub timing_ms: u128,
}

pub fn span_json(span: &SourceSpan) -> Value {
    json!({
        "file": span.file,
        "startLine": span.start_line,
        "startCol": span.start_col,
        "endLine": span.end_line,
        "endCol": span.end_col,
    })
}

pub fn type_error_json(e: &TypeError) -> Value {
    let mut obj = json!({
        "kind": e.kind.code(),
        "message": e.to_string(),
        "span": span_json(&e.span),
    });
    if let Some((expected, actual)) = e.printed_expected_actual() {
        obj["expected"] = Value::String(expected);
        obj["actual"] = Value::String(actual);
    }
    obj
}

pub fn parse_error_json(e: &ParseError) -> Value {
    json!({
        "kind": "ParseError",
        "message": e.to_string(),
        "span": span_json(&e.span),
        "expected": e.expected,
        "found": e.found,
    })
}

pub fn check_failure_json(e: &CheckFailure) -> Value {
    match e {
        CheckFailure::Type(t) => type_error_json(t),
        CheckFailure::System(s) => json!({
            "kind": "SystemError",
            "message": s.to_string(),
        }),
    }
}
