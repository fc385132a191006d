mod args;
mod commands;
mod grammar;
mod report;

use std::fmt;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use crate::args::Cli;

/// A usage or precondition problem; always exit status 2.
#[derive(Debug)]
pub struct Error(String);

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<quinque_core::Error> for Error {
    fn from(e: quinque_core::Error) -> Self {
        Error(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error(e.to_string())
    }
}

/// Appends `--key=value` for each config entry whose flag is not already on
/// the command line.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>, Error> {
    let path = argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error(format!("config {path}: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error(format!("config {path}: {e}")))?;
    let Value::Object(map) = value else {
        return Err(Error(format!("config {path}: expected a JSON object")));
    };
    let mut out = argv.clone();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let given = argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given || key == "command" {
            continue;
        }
        match value {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => out.push(format!("{flag}={s}")),
            Value::Number(n) => out.push(format!("{flag}={n}")),
            other => return Err(Error(format!("config {path}: unsupported value for {key}: {other}"))),
        }
    }
    Ok(out)
}

fn run() -> Result<ExitCode, Error> {
    let argv = expand_config(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(ExitCode::from(code));
        }
    };
    let report = commands::dispatch(&cli.command)?;
    let passed = report.passed();
    let config = serde_json::to_value(&cli.command).expect("config serializes");
    let doc = report.into_document(config);
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    match &cli.command.common().output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error(format!("{}: {e}", path.display())))?;
            let s = &doc["summary"];
            println!(
                "{}: {} checks, {} failed, {} findings, {} errata -> {}",
                s["status"].as_str().unwrap_or("?"),
                s["checks"],
                s["failed"],
                s["findings"],
                s["errata"],
                path.display()
            );
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(ExitCode::from(if passed { 0 } else { 1 }))
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
