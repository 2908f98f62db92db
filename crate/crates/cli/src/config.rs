//! Flat JSON config files, spliced into argv ahead of the user's own flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::CommandFactory;
use serde_json::Value;

use crate::args::Cli;
use crate::CliError;

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(CliError::Usage(format!(
            "config key `{key}` must be a string, number, boolean or array of those"
        ))),
    }
}

/// Returns `argv` with the config's values inserted right after the
/// subcommand path. Keys are long flag names (`-` or `_`); keys the user
/// already passed are skipped, and keys unknown to the subcommand are errors.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let obj = match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(o)) => o,
        Ok(_) => return Err(CliError::Usage(format!("config {} must be a JSON object", path.display()))),
        Err(e) => return Err(CliError::Usage(format!("config {}: {e}", path.display()))),
    };

    let root = Cli::command();
    let mut known: Vec<String> = root.get_arguments().filter_map(|a| a.get_long()).map(str::to_owned).collect();
    let mut cmd = &root;
    let mut insert_at = 1;
    for (i, tok) in argv.iter().enumerate().skip(1) {
        if let Some(sc) = cmd.find_subcommand(tok) {
            cmd = sc;
            insert_at = i + 1;
        }
    }
    if insert_at == 1 {
        return Err(CliError::Usage("config given without a subcommand".into()));
    }
    known.extend(cmd.get_arguments().filter_map(|a| a.get_long()).map(str::to_owned));

    let given = |flag: &str| {
        argv.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };
    let mut extra: Vec<OsString> = Vec::new();
    for (key, v) in &obj {
        let long = key.replace('_', "-");
        if long == "config" || !known.contains(&long) {
            return Err(CliError::Usage(format!(
                "unknown config key `{key}` for `{}`",
                cmd.get_name()
            )));
        }
        let flag = format!("--{long}");
        if given(&flag) {
            continue;
        }
        match v {
            Value::Bool(true) => extra.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    extra.push(flag.clone().into());
                    extra.push(scalar(key, item)?.into());
                }
            }
            v => {
                extra.push(flag.into());
                extra.push(scalar(key, v)?.into());
            }
        }
    }
    let mut out = argv;
    out.splice(insert_at..insert_at, extra);
    Ok(out)
}
