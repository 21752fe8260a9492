//! Report envelope, output files and exit codes.

use serde_json::{json, Value};
use std::path::Path;

/// Exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Input = 1,
    Certification = 2,
    Resource = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Input,
            message: message.into(),
        }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Resource,
            message: message.into(),
        }
    }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::input(e.to_string())
    }
}

/// What a command produced: the `result` body, plus the exit status to use
/// after writing it.
pub struct Report {
    pub inputs: Value,
    pub result: Value,
    pub exit: Exit,
}

impl Report {
    pub fn ok(inputs: Value, result: Value) -> Self {
        Report {
            inputs,
            result,
            exit: Exit::Ok,
        }
    }
}

pub fn envelope(command: &str, config: &Value, report: &Report) -> Value {
    json!({
        "tool": "ff",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "inputs": report.inputs,
        "result": report.result,
    })
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
