//! piconelab command line driver.
//!
//! Usage: `piconelab <subcommand> <config.json> [--out PREFIX]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error,
//! 4 verification report failure.

// !(x > 0.0) in the validators deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::process::ExitCode;

const USAGE: &str = "usage: piconelab <subcommand> <config.json> [--out PREFIX]

subcommands:
  eigen        principal eigenpair of the configured operator
  picone       generalized Picone identity check
  direction    bifurcation direction and nonexistence certificate
  branch       pseudo-arclength continuation of the positive branch
  window       F± stability window of a two-species system
  lv-solve     coexistence state of a two-species system
  lv-classify  (lambda, mu)-plane region classification
  evolve       semi-implicit parabolic evolution
";

const SUBCOMMANDS: [&str; 8] = [
    "eigen",
    "picone",
    "direction",
    "branch",
    "window",
    "lv-solve",
    "lv-classify",
    "evolve",
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "-h" || a == "--help") {
        print!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    let mut positional = Vec::new();
    let mut out_override: Option<String> = None;
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--out" {
            match it.next() {
                Some(v) => out_override = Some(v),
                None => {
                    eprintln!("error: --out needs a value");
                    return ExitCode::from(2);
                }
            }
        } else if arg.starts_with('-') {
            eprintln!("error: unknown flag {arg:?}\n{USAGE}");
            return ExitCode::from(2);
        } else {
            positional.push(arg);
        }
    }
    if positional.len() != 2 {
        eprint!("{USAGE}");
        return ExitCode::from(2);
    }
    let subcommand = positional[0].as_str();
    if !SUBCOMMANDS.contains(&subcommand) {
        eprintln!("error: unknown subcommand {subcommand:?}\n{USAGE}");
        return ExitCode::from(2);
    }
    let text = match std::fs::read_to_string(&positional[1]) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", positional[1]);
            return ExitCode::from(2);
        }
    };
    let cfg = match config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(subcommand, &cfg, out_override.as_deref()) {
        Ok(out) => {
            println!("{}", out.summary);
            if out.report_failure {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
