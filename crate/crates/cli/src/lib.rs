//! The `agenda` command line. Every pipeline stage is a subcommand:
//!
//! | subcommand | reads | writes |
//! |---|---|---|
//! | `binarize-nli` | NLI corpus directory | entailment pairs |
//! | `make-pairs` | labeled dataset | entailment pairs |
//! | `mix` | entailment pairs | pairs with a translated fraction, mixing report |
//! | `split` | dataset | per-run split files and partitions |
//! | `bootstrap run` / `export` / `stats` | corpus files, review state | review rounds, labeled dataset |
//! | `classify` | dataset, backend or score matrix | predictions |
//! | `calibrate` | labeled dev set, backend or score matrix | calibration |
//! | `evaluate`, `confusion`, `agreement`, `compare` | predictions, gold | reports |
//! | `aggregate` | per-run evaluation reports | mean and standard deviation |
//! | `serve` | review state, backend | HTTP service |
//!
//! Reports carry a `provenance` block with the full resolved invocation.
//! Failures print `{"error", "kind", "exit_code"}` on stderr and exit with
//! [`EXIT_USAGE`], [`EXIT_VALIDATION`], [`EXIT_BACKEND`] or
//! [`EXIT_PRECONDITION`].
//!
//! `cargo run -p agenda-cli --example pipeline` chains the stages on a
//! synthetic corpus; `--config file.json` supplies long flags from a file.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use serde::Serialize;

use agenda_core::{Error, LabelSchema};

mod args;
mod commands;
mod config;

pub use args::*;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;
pub const EXIT_PRECONDITION: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<agenda_core::backends::BackendError> for CliError {
    fn from(e: agenda_core::backends::BackendError) -> Self {
        CliError::Core(Error::Backend(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(Error::Backend(_) | Error::Cell { .. }) => EXIT_BACKEND,
            CliError::Core(Error::Precondition(_) | Error::Conflict(_)) => EXIT_PRECONDITION,
            CliError::Core(_) => EXIT_VALIDATION,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                Error::Backend(_) | Error::Cell { .. } => "backend",
                Error::Precondition(_) => "precondition",
                Error::Conflict(_) => "conflict",
                Error::Io { .. } => "io",
                Error::UnknownLabel(_) => "unknown_label",
                Error::NotFound(_) => "not_found",
                _ => "validation",
            },
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// The exact invocation behind a report.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    report: &'a T,
    provenance: &'a Provenance,
}

pub(crate) struct Ctx<'a> {
    pub global: GlobalArgs,
    pub schema: LabelSchema,
    pub provenance: Provenance,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    pub fn dry_run(&self) -> bool {
        self.global.dry_run
    }

    /// Writes a JSON file unless this is a dry run.
    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> CliResult {
        if !self.dry_run() {
            let env = Envelope { report: value, provenance: &self.provenance };
            agenda_core::io::write_json(path, &env)?;
        }
        Ok(())
    }

    pub fn write_text(&self, path: &Path, text: &str) -> CliResult {
        if !self.dry_run() {
            std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })?;
        }
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&self, path: &Path, items: &[T]) -> CliResult {
        if !self.dry_run() {
            agenda_core::io::write_jsonl(path, items)?;
        }
        Ok(())
    }

    /// Prints `report` with provenance, as JSON or via `text`, and saves it to `file`.
    pub fn emit<T: Serialize>(&mut self, report: &T, file: Option<&Path>, text: impl FnOnce(&T) -> String) -> CliResult {
        if let Some(p) = file {
            self.write_json(p, report)?;
        }
        let rendered = match self.global.format {
            Format::Json => {
                let env = Envelope { report, provenance: &self.provenance };
                serde_json::to_string_pretty(&env)?
            }
            Format::Text => text(report).trim_end().to_owned(),
        };
        writeln!(self.out, "{rendered}").map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        Ok(())
    }

    /// Emits a summary object of an artifact-producing command.
    pub fn summary(&mut self, summary: serde_json::Value) -> CliResult {
        self.emit(&summary, None, |s| {
            let mut t = String::new();
            if let Some(obj) = s.as_object() {
                for (k, v) in obj {
                    t.push_str(&format!("{k}: {v}\n"));
                }
            }
            t
        })
    }
}

fn write_error(err: &mut dyn Write, e: &CliError) -> i32 {
    let code = e.exit_code();
    let body = serde_json::json!({ "error": e.to_string(), "kind": e.kind(), "exit_code": code });
    let _ = writeln!(err, "{body}");
    code
}

/// Runs one invocation, printing reports to `out` and errors to `err`.
/// Returns the process exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => return write_error(err, &e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => return write_error(err, &CliError::Usage(e.render().to_string().trim_end().to_owned())),
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => write_error(err, &e),
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(argv, &mut out, &mut err)
}

fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    let schema = match &cli.global.schema {
        Some(p) => LabelSchema::load(p)?,
        None => LabelSchema::agenda_default(),
    };
    let provenance = Provenance {
        tool: "agenda",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        seed: cli.global.seed,
        config: serde_json::to_value(&cli)?,
    };
    let mut ctx = Ctx { global: cli.global.clone(), schema, provenance, out };
    commands::dispatch(&cli.command, &mut ctx)
}
