//! Command-line front end: load fixtures, run named verification suites at
//! configured truncation orders, and emit human- or machine-readable
//! reports. Exit status: 0 when every check passes, 1 when any check fails,
//! 2 when nothing fails but some check is window-limited or unsupported.

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use vockit::data::{validate_and_load, Loaded};
use vockit::report::Status;
use vockit::suites::{run_suite, SuiteConfig, SuiteReport, SUITE_NAMES};
use vockit::voc::VocData;

#[derive(Parser, Debug)]
#[command(
    name = "vockit",
    about = "Exact verification suites for the formal worldsheet calculus"
)]
struct Args {
    /// Suite to run (or "all")
    #[arg(long, default_value = "all")]
    suite: String,

    /// Series/weight truncation order
    #[arg(long, default_value_t = 8)]
    order: i64,

    /// Parameter degree bound
    #[arg(long, default_value_t = 3)]
    degree: i64,

    /// Optional data file (coalgebra fixtures for the voc suites)
    #[arg(long)]
    input: Option<PathBuf>,

    /// Report format
    #[arg(long, default_value = "text", value_parser = ["text", "machine"])]
    report: String,

    /// Replay a single check, written as suite/check-id
    #[arg(long)]
    check: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.order < 2 || args.degree < 1 {
        eprintln!("error: --order must be >= 2 and --degree >= 1");
        return ExitCode::from(2);
    }
    let cfg = SuiteConfig {
        order: args.order,
        degree: args.degree,
    };
    let input: Option<VocData> = match &args.input {
        None => None,
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match validate_and_load(&text) {
                Ok(Loaded::Voc(v)) => Some(v),
                Ok(Loaded::Moduli(_)) | Ok(Loaded::Graded(_)) => {
                    eprintln!(
                        "error: {} does not hold a coalgebra fixture; the voc suites need one",
                        path.display()
                    );
                    return ExitCode::from(2);
                }
                Err(e) => {
                    eprintln!("error: malformed input {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
        }
    };
    let (suite_filter, check_filter) = match &args.check {
        None => (args.suite.clone(), None),
        Some(spec) => match spec.split_once('/') {
            Some((s, c)) => (s.to_string(), Some(c.to_string())),
            None => {
                eprintln!("error: --check expects suite/check-id");
                return ExitCode::from(2);
            }
        },
    };
    let names: Vec<&str> = if suite_filter == "all" {
        SUITE_NAMES.to_vec()
    } else if let Some(n) = SUITE_NAMES.iter().find(|n| **n == suite_filter) {
        vec![*n]
    } else {
        eprintln!(
            "error: unknown suite {:?}; known suites: {} or all",
            suite_filter,
            SUITE_NAMES.join(", ")
        );
        return ExitCode::from(2);
    };
    let mut reports: Vec<(SuiteReport, f64)> = Vec::new();
    for name in names {
        let started = Instant::now();
        let mut rep = run_suite(name, cfg, input.as_ref()).expect("suite name validated");
        if let Some(cf) = &check_filter {
            rep.checks.retain(|c| &c.id == cf);
            if rep.checks.is_empty() {
                eprintln!("error: no check named {cf:?} in suite {name}");
                return ExitCode::from(2);
            }
        }
        let secs = started.elapsed().as_secs_f64();
        reports.push((rep, secs));
    }
    let mut any_fail = false;
    let mut any_limited = false;
    for (rep, _) in &reports {
        any_fail |= rep.any_failed();
        any_limited |= rep.any_limited();
    }
    match args.report.as_str() {
        "machine" => {
            // byte-identical for identical input and config: no wall time
            let value = serde_json::json!({
                "order": args.order,
                "degree": args.degree,
                "suites": reports.iter().map(|(r, _)| r).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&value).unwrap());
        }
        _ => {
            for (rep, secs) in &reports {
                println!("suite {} ({secs:.2}s)", rep.suite);
                for c in &rep.checks {
                    let (tag, detail) = match &c.status {
                        Status::Pass => ("pass", String::new()),
                        Status::Fail(w) => ("FAIL", format!(" [{w}]")),
                        Status::WindowLimited(w) => ("window-limited", format!(" [{w}]")),
                        Status::Unsupported(w) => ("unsupported", format!(" [{w}]")),
                    };
                    let window = if c.window.is_empty() {
                        String::new()
                    } else {
                        format!("  ({})", c.window)
                    };
                    println!("  {tag:<15} {}{window}{detail}", c.id);
                }
            }
            let total: usize = reports.iter().map(|(r, _)| r.checks.len()).sum();
            let passed: usize = reports
                .iter()
                .map(|(r, _)| r.checks.iter().filter(|c| c.status.passed()).count())
                .sum();
            println!("{passed}/{total} checks passed");
        }
    }
    if any_fail {
        ExitCode::from(1)
    } else if any_limited {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
