//! Command-line front end. Every registered operation is a subcommand with one
//! flag per parameter; `run`, `report` and `accept` drive experiments.
//!
//! Exit status: 0 success, 1 invalid input, 2 numerical failure, 3 failed checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use angbbm::acceptance;
use angbbm::harness::{self, Context, ExperimentSpec, Kind, OpSpec, RunOptions};
use angbbm::Execution;

const VALIDATION: u8 = 1;
const CHECKS_FAILED: u8 = 3;

fn flag_name(param: &str) -> String {
    param.replace('_', "-")
}

fn op_command(op: &'static OpSpec) -> Command {
    let mut cmd = Command::new(op.name).about(op.about);
    for p in op.params {
        let mut arg = Arg::new(p.name)
            .long(&*Box::leak(flag_name(p.name).into_boxed_str()))
            .help(format!(
                "{} [default: {}]",
                p.help,
                if p.default.is_empty() {
                    "none"
                } else {
                    p.default
                }
            ))
            .allow_hyphen_values(true);
        arg = match p.kind {
            Kind::Bool => arg
                .value_name("BOOL")
                .num_args(0..=1)
                .default_missing_value("true"),
            Kind::Int => arg.value_name("INT"),
            Kind::Float => arg.value_name("REAL"),
            Kind::List => arg.value_name("LIST"),
            Kind::Text => arg.value_name("TEXT"),
        };
        cmd = cmd.arg(arg);
    }
    if op.stochastic {
        cmd = cmd.arg(
            Arg::new("seed")
                .long("seed")
                .value_name("U64")
                .required(true)
                .value_parser(value_parser!(u64))
                .help("random seed"),
        );
    }
    cmd.arg(
        Arg::new("out")
            .long("out")
            .value_name("DIR")
            .value_parser(value_parser!(PathBuf))
            .help(format!(
                "write output files into DIR [default: ${}/<operation> when set]",
                harness::OUTPUT_ROOT_ENV
            )),
    )
}

fn cli() -> Command {
    let mut cmd = Command::new("angbbm")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Spectra, kernels, PDE solvers and exact simulators for angle-dependent branching Brownian motion")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("sequential")
                .long("sequential")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("run data-parallel loops on one thread (results are identical)"),
        );
    for op in harness::registry() {
        cmd = cmd.subcommand(op_command(op));
    }
    cmd.subcommand(
        Command::new("ops").about("List every operation with its parameters as JSON lines"),
    )
    .subcommand(
        Command::new("run")
            .about("Run an experiment file (ladder x replicates) and write a manifest")
            .arg(
                Arg::new("spec")
                    .required(true)
                    .value_parser(value_parser!(PathBuf))
                    .help("experiment TOML file"),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .value_parser(value_parser!(PathBuf))
                    .help("override the output directory"),
            )
            .arg(
                Arg::new("force")
                    .long("force")
                    .action(ArgAction::SetTrue)
                    .help("rerun completed cells"),
            ),
    )
    .subcommand(
        Command::new("report")
            .about("Summarise run directories and verify their digests")
            .arg(
                Arg::new("dir")
                    .required(true)
                    .value_parser(value_parser!(PathBuf)),
            ),
    )
    .subcommand(
        Command::new("accept")
            .about("Run the acceptance suite, one line per criterion")
            .arg(
                Arg::new("only")
                    .long("only")
                    .value_name("LIST")
                    .value_delimiter(',')
                    .value_parser(value_parser!(usize))
                    .help("criterion numbers to run"),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .value_parser(value_parser!(PathBuf))
                    .help("write results and a manifest into DIR"),
            ),
    )
}

fn exec_mode(m: &ArgMatches) -> Execution {
    if m.get_flag("sequential") {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn run_op(op: &'static OpSpec, m: &ArgMatches) -> Result<u8> {
    let mut pairs = Vec::new();
    for p in op.params {
        if let Some(v) = m.get_one::<String>(p.name) {
            pairs.push((p.name, v.as_str()));
        }
    }
    let params = op.resolve_text(pairs)?;
    let seed = if op.stochastic {
        *m.get_one::<u64>("seed").expect("required")
    } else {
        0
    };
    let out = (op.run)(
        &params,
        &Context {
            seed,
            exec: exec_mode(m),
        },
    )?;
    let record = json!({
        "operation": op.name,
        "anchor": op.anchor,
        "seed": if op.stochastic { Some(seed) } else { None },
        "params": params,
        "summary": out.summary,
        "checks": out.checks,
    });
    let mut text = serde_json::to_vec_pretty(&record)?;
    text.push(b'\n');
    let dir = m.get_one::<PathBuf>("out").cloned().or_else(|| {
        std::env::var_os(harness::OUTPUT_ROOT_ENV).map(|root| PathBuf::from(root).join(op.name))
    });
    if let Some(dir) = dir {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for f in &out.files {
            write_file(&dir, &f.name, &f.bytes)?;
        }
        write_file(&dir, "summary.json", &text)?;
        eprintln!("wrote {} files to {}", out.files.len() + 1, dir.display());
    }
    print!("{}", String::from_utf8_lossy(&text));
    Ok(if out.checks.iter().all(|c| c.passed) {
        0
    } else {
        CHECKS_FAILED
    })
}

fn run_spec(m: &ArgMatches) -> Result<u8> {
    let path = m.get_one::<PathBuf>("spec").expect("required");
    let spec =
        ExperimentSpec::from_file(path).with_context(|| format!("reading {}", path.display()))?;
    let root = m
        .get_one::<PathBuf>("out")
        .cloned()
        .unwrap_or_else(|| spec.output_dir());
    let opts = RunOptions {
        force: m.get_flag("force"),
        exec: exec_mode(m),
    };
    let record = harness::run_experiment_in(&spec, &root, &opts)?;
    let failed = record.cells.len() - record.ran() - record.skipped();
    println!(
        "{}: {} cells, ran {}, skipped {}, failed {}; manifest {}",
        record.name,
        record.cells.len(),
        record.ran(),
        record.skipped(),
        failed,
        root.join(harness::MANIFEST).display()
    );
    for c in record.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "cell {}: {}",
            c.index,
            c.error.as_deref().unwrap_or_default()
        );
    }
    Ok(match record.failure_code() {
        Some(code) => code as u8,
        None if !record.checks_passed() => CHECKS_FAILED,
        None => 0,
    })
}

fn run_report(m: &ArgMatches) -> Result<u8> {
    let dir = m.get_one::<PathBuf>("dir").expect("required");
    let rep = harness::report(dir);
    print!("{}", rep.text);
    Ok(rep.exit_code() as u8)
}

fn run_accept(m: &ArgMatches) -> Result<u8> {
    let only: Vec<usize> = m
        .get_many::<usize>("only")
        .map(|v| v.copied().collect())
        .unwrap_or_default();
    let started = harness::unix_now();
    let results = acceptance::run_suite(&only, exec_mode(m), |r| println!("{}", r.line()));
    let passed = results.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} criteria passed", results.len());
    let dir = m.get_one::<PathBuf>("out").cloned().or_else(|| {
        std::env::var_os(harness::OUTPUT_ROOT_ENV)
            .map(|root| PathBuf::from(root).join("acceptance"))
    });
    if let Some(dir) = dir {
        acceptance::write_results(&dir, &results, started)?;
        println!("results in {}", dir.display());
    }
    Ok(if passed == results.len() {
        0
    } else {
        CHECKS_FAILED
    })
}

fn list_ops() -> Result<u8> {
    for op in harness::registry() {
        let params: Vec<_> = op
            .params
            .iter()
            .map(|p| json!({ "name": p.name, "flag": format!("--{}", flag_name(p.name)), "default": p.default }))
            .collect();
        println!(
            "{}",
            json!({ "name": op.name, "stochastic": op.stochastic, "anchor": op.anchor, "params": params })
        );
    }
    Ok(0)
}

fn dispatch(m: &ArgMatches) -> Result<u8> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    match name {
        "ops" => list_ops(),
        "run" => run_spec(sub),
        "report" => run_report(sub),
        "accept" => run_accept(sub),
        _ => run_op(harness::lookup(name)?, sub),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { VALIDATION } else { 0 });
        }
    };
    match dispatch(&matches) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<angbbm::Error>()
                .map_or(VALIDATION as i32, angbbm::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
