//! The `agenda` subcommands chained on a synthetic labeled corpus with the
//! mock backend: split, calibrate, classify, evaluate, aggregate.
//!
//! `cargo run -p agenda-cli --example pipeline`

use std::path::Path;

use agenda_core::{io, LabelSchema, Message};

fn agenda(args: &[&str]) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("agenda").chain(args.iter().copied()).map(std::ffi::OsString::from);
    let code = agenda_cli::run_with(argv, &mut out, &mut err);
    println!("$ agenda {}", args.join(" "));
    print!("{}", String::from_utf8_lossy(if code == 0 { &out } else { &err }));
    assert_eq!(code, 0);
}

fn main() -> agenda_core::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = |p: &str| dir.path().join(p).display().to_string();

    let labels: Vec<String> = LabelSchema::agenda_default().ids().map(str::to_owned).collect();
    let msgs: Vec<Message> = (0..120)
        .map(|i| Message::new(format!("m{i:03}"), format!("synthetic post {i}"), "en").with_gold([&labels[i % labels.len()]]))
        .collect();
    io::write_jsonl(Path::new(&path("agenda.jsonl")), &msgs)?;

    agenda(&["--format", "text", "split", "--data", &path("agenda.jsonl"), "--out-dir", &path("runs")]);
    let mut reports = Vec::new();
    for run in ["R1", "R2", "R3"] {
        let f = |name: &str| path(&format!("runs/{run}/{name}"));
        agenda(&["--format", "text", "calibrate", "--dev", &f("dev.jsonl"), "--backend", "mock", "--out", &f("cal.json")]);
        agenda(&[
            "--format", "text", "classify", "--data", &f("test.jsonl"), "--backend", "mock", "--calibration", &f("cal.json"),
            "--out", &f("pred.jsonl"),
        ]);
        agenda(&["--format", "text", "evaluate", "--pred", &f("pred.jsonl"), "--gold", &f("test.jsonl"), "--run-id", run,
            "--out", &f("eval.json")]);
        reports.push(f("eval.json"));
    }
    let mut args = vec!["--format", "text", "aggregate", "--reports"];
    args.extend(reports.iter().map(String::as_str));
    agenda(&args);
    Ok(())
}
