mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use renewal_asym::config::{self, parse_precision, ProblemConfig};
use renewal_asym::corpus;
use renewal_asym::discrete::{run_discrete, Precision};
use renewal_asym::model::{validate_continuous, validate_discrete};
use renewal_asym::pipeline::{self, transform_check, tauberian_run};
use renewal_asym::volterra::run_volterra;
use renewal_asym::laplace::PerturbationTransform;
use renewal_asym::Error;
use serde_json::{json, Map, Value};

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_USAGE: u8 = 64;

pub const PRECISION_ENV: &str = "RENEWAL_ASYM_PRECISION";

/// Asymptotics of renewal-like recursions and perturbed renewal Volterra equations.
#[derive(Parser, Debug)]
#[command(name = "renewal-asym", version)]
struct Cli {
    /// Directory for `<name>.summary.json` and `<name>.trace.csv`.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the hypotheses on a problem.
    Validate { config: PathBuf },
    /// Solve a discrete recursion.
    SolveDiscrete {
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        /// auto, exact, float53 or float106.
        #[arg(long)]
        precision: Option<String>,
    },
    /// Solve a Volterra equation on a uniform grid.
    SolveVolterra {
        config: PathBuf,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Estimate the limit constant (discrete) or the exponent (continuous).
    Estimate {
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        precision: Option<String>,
    },
    /// Transforms, `G(s)`, and the comparison with the solved trace.
    Laplace {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
    },
    /// Small-`s` and large-`x` ladders and the slow-oscillation test.
    Tauberian {
        config: PathBuf,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Built-in problems with known answers.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Subcommand, Debug)]
enum CorpusAction {
    /// Print the catalog with expected facts.
    List,
    /// Run one entry, or every entry when no name is given.
    Run { name: Option<String> },
}

struct Outcome {
    code: u8,
    summary: Map<String, Value>,
    csv: Option<String>,
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ParseRational(_) | Error::UnknownEntry(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

fn write_outputs(dir: &Path, name: &str, summary: &Map<String, Value>, csv: Option<&str>) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(dir.join(format!("{name}.summary.json")), text)?;
    if let Some(csv) = csv {
        std::fs::write(dir.join(format!("{name}.trace.csv")), csv)?;
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into())
}

fn env_precision() -> Result<Option<Precision>, Error> {
    match std::env::var(PRECISION_ENV) {
        Ok(v) if !v.trim().is_empty() => parse_precision(&v).map(Some),
        _ => Ok(None),
    }
}

fn apply_precision(cfg: &mut ProblemConfig, flag: Option<&str>) -> Result<(), Error> {
    let chosen = match flag {
        Some(f) => Some(parse_precision(f)?),
        None => env_precision()?,
    };
    if let (Some(p), ProblemConfig::Discrete { settings, .. }) = (chosen, cfg) {
        settings.options.precision = p;
    }
    Ok(())
}

fn need_continuous(cfg: &ProblemConfig, command: &str) -> Result<(), Error> {
    match cfg {
        ProblemConfig::Continuous { .. } => Ok(()),
        ProblemConfig::Discrete { .. } => Err(Error::Config(format!("`{command}` needs a continuous problem"))),
    }
}

fn need_discrete(cfg: &ProblemConfig, command: &str) -> Result<(), Error> {
    match cfg {
        ProblemConfig::Discrete { .. } => Ok(()),
        ProblemConfig::Continuous { .. } => Err(Error::Config(format!("`{command}` needs a discrete problem"))),
    }
}

fn finish(command: &str, name: &str, code: u8, details: Value, csv: Option<String>) -> Outcome {
    let status = match code {
        EXIT_OK => "ok",
        EXIT_VALIDATION => "validation_failed",
        _ => "error",
    };
    let mut summary = report::header(command, name, status);
    if let Value::Object(m) = details {
        summary.extend(m);
    }
    Outcome { code, summary, csv }
}

fn run_config_command(command: &Command, cfg: &mut ProblemConfig, name: &str) -> Result<Outcome, Error> {
    match command {
        Command::Validate { .. } => {
            let rep = match &*cfg {
                ProblemConfig::Discrete { problem, settings, .. } => {
                    validate_discrete(&problem.to_scalar::<f64>(), &settings.z_grid)?
                }
                ProblemConfig::Continuous { problem, settings, .. } => {
                    validate_continuous(problem, settings.z, settings.tau, settings.validation_horizon)?
                }
            };
            let code = if rep.any_fail() { EXIT_VALIDATION } else { EXIT_OK };
            let details = json!({ "validation": report::validation(&Ok(rep)) });
            Ok(finish("validate", name, code, details, None))
        }
        Command::SolveDiscrete { n, precision, .. } => {
            need_discrete(cfg, "solve-discrete")?;
            apply_precision(cfg, precision.as_deref())?;
            let ProblemConfig::Discrete { problem, settings, .. } = cfg else { unreachable!() };
            if let Some(n) = n {
                settings.options.n_max = *n;
            }
            let pipe = pipeline::discrete_pipeline(problem, settings)?;
            let code = if report::validation_failed(&pipe.validation) { EXIT_VALIDATION } else { EXIT_OK };
            let csv = report::discrete_csv(&pipe.run);
            Ok(finish("solve-discrete", name, code, report::discrete_pipeline(&pipe), Some(csv)))
        }
        Command::SolveVolterra { h, t, .. } => {
            need_continuous(cfg, "solve-volterra")?;
            let ProblemConfig::Continuous { problem, settings, .. } = cfg else { unreachable!() };
            if let Some(h) = h {
                settings.volterra.h = *h;
            }
            if let Some(t) = t {
                settings.volterra.horizon = *t;
            }
            let validation = validate_continuous(problem, settings.z, settings.tau, settings.validation_horizon);
            let run = run_volterra(problem, &settings.volterra)?;
            let code = if report::validation_failed(&validation) { EXIT_VALIDATION } else { EXIT_OK };
            let mut details = report::volterra_run(&run);
            details["validation"] = report::validation(&validation);
            Ok(finish("solve-volterra", name, code, details, Some(report::volterra_csv(&run.trace))))
        }
        Command::Estimate { n, tol, precision, .. } => {
            apply_precision(cfg, precision.as_deref())?;
            match cfg {
                ProblemConfig::Discrete { problem, settings, .. } => {
                    if let Some(n) = n {
                        settings.options.n_max = *n;
                    }
                    if let Some(tol) = tol {
                        settings.options.tol = *tol;
                    }
                    let run = run_discrete(problem, &settings.options)?;
                    let details = report::discrete_run(&run);
                    let code = if run.estimate.is_ok() { EXIT_OK } else { EXIT_NUMERIC };
                    Ok(finish("estimate", name, code, details, Some(report::discrete_csv(&run))))
                }
                ProblemConfig::Continuous { problem, settings, .. } => {
                    if n.is_some() || tol.is_some() || precision.is_some() {
                        return Err(Error::Config("--n, --tol and --precision apply to discrete problems".into()));
                    }
                    let run = run_volterra(problem, &settings.volterra)?;
                    let code = if run.fit.is_ok() { EXIT_OK } else { EXIT_NUMERIC };
                    Ok(finish("estimate", name, code, report::volterra_run(&run), Some(report::volterra_csv(&run.trace))))
                }
            }
        }
        Command::Laplace { s, .. } => {
            need_continuous(cfg, "laplace")?;
            let ProblemConfig::Continuous { problem, settings, .. } = cfg else { unreachable!() };
            let s_values = s.clone().unwrap_or_else(|| settings.s_values.clone());
            let run = run_volterra(problem, &settings.volterra)?;
            let c_part = (!problem.c.is_zero()).then(|| PerturbationTransform::new(problem, &run.trace));
            let rows = s_values
                .iter()
                .map(|&s| transform_check(problem, &run, c_part.as_ref(), s))
                .collect::<Result<Vec<_>, _>>()?;
            let small = renewal_asym::laplace::compute_l(problem, settings.small_s).map(|l| l * settings.small_s);
            let details = json!({
                "gamma": run.trace.gamma,
                "rows": report::laplace_rows(&rows),
                "all_within_bounds": rows.iter().all(|r| r.within_bounds),
                "small_s": settings.small_s,
                "small_s_l": small.as_ref().ok(),
                "small_s_target": -(run.trace.gamma + 1.0),
            });
            Ok(finish("laplace", name, EXIT_OK, details, Some(report::laplace_csv(&rows))))
        }
        Command::Tauberian { h, t, .. } => {
            need_continuous(cfg, "tauberian")?;
            let ProblemConfig::Continuous { problem, settings, .. } = cfg else { unreachable!() };
            let (h0, t0) = settings.tauberian.unwrap_or((settings.volterra.h, settings.volterra.horizon));
            let rep = tauberian_run(problem, h.unwrap_or(h0), t.unwrap_or(t0))?;
            Ok(finish("tauberian", name, EXIT_OK, report::tauberian(&rep), Some(report::tauberian_csv(&rep))))
        }
        Command::Corpus { .. } => unreachable!("handled separately"),
    }
}

fn config_path(command: &Command) -> &Path {
    match command {
        Command::Validate { config }
        | Command::SolveDiscrete { config, .. }
        | Command::SolveVolterra { config, .. }
        | Command::Estimate { config, .. }
        | Command::Laplace { config, .. }
        | Command::Tauberian { config, .. } => config,
        Command::Corpus { .. } => unreachable!("corpus takes no config"),
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Validate { .. } => "validate",
        Command::SolveDiscrete { .. } => "solve-discrete",
        Command::SolveVolterra { .. } => "solve-volterra",
        Command::Estimate { .. } => "estimate",
        Command::Laplace { .. } => "laplace",
        Command::Tauberian { .. } => "tauberian",
        Command::Corpus { .. } => "corpus",
    }
}

fn config_command(cli: &Cli) -> u8 {
    let path = config_path(&cli.command);
    let loaded = config::load(path);
    let name = loaded
        .as_ref()
        .ok()
        .and_then(|c| c.name().map(str::to_owned))
        .unwrap_or_else(|| stem(path));
    let outcome = loaded.and_then(|mut cfg| run_config_command(&cli.command, &mut cfg, &name));
    let outcome = outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        let code = exit_for(&e);
        let details = json!({ "error": e.to_string() });
        finish(command_name(&cli.command), &name, code, details, None)
    });
    emit(&cli.out, &name, &outcome)
}

fn emit(dir: &Path, name: &str, outcome: &Outcome) -> u8 {
    if let Err(e) = write_outputs(dir, name, &outcome.summary, outcome.csv.as_deref()) {
        eprintln!("error: cannot write outputs to {}: {e}", dir.display());
        return EXIT_NUMERIC;
    }
    println!(
        "{name}: {}",
        outcome.summary.get("status").and_then(Value::as_str).unwrap_or("unknown")
    );
    outcome.code
}

fn corpus_list(dir: &Path) -> u8 {
    let entries = corpus::list();
    for e in &entries {
        println!("{}  {}", e.name, e.description);
        for f in &e.expected {
            println!(
                "    {} via {}: {} [{}]",
                f.name,
                f.operation,
                serde_json::to_string(&f.expected).unwrap_or_default(),
                serde_json::to_string(&f.provenance).unwrap_or_default().trim_matches('"'),
            );
        }
    }
    let mut summary = report::header("corpus list", "corpus-catalog", "ok");
    summary.insert("entries".into(), Value::Array(entries.iter().map(report::corpus_entry).collect()));
    match write_outputs(dir, "corpus-catalog", &summary, None) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NUMERIC
        }
    }
}

fn corpus_one(dir: &Path, entry: &corpus::CorpusEntry) -> (u8, bool) {
    let outcome = match corpus::run(entry) {
        Ok(run) => {
            let (details, csv) = report::corpus_run(&run);
            let pass = run.all_pass();
            let code = if pass { EXIT_OK } else { EXIT_VALIDATION };
            let mut o = finish("corpus run", entry.name, code, details, Some(csv));
            o.summary.insert("all_facts_pass".into(), json!(pass));
            o
        }
        Err(e) => finish("corpus run", entry.name, EXIT_NUMERIC, json!({ "error": e.to_string() }), None),
    };
    let code = emit(dir, entry.name, &outcome);
    (code, code == EXIT_OK)
}

fn corpus_run(dir: &Path, name: Option<&str>) -> u8 {
    let entries = match name {
        Some(n) => match corpus::builtin(n) {
            Ok(e) => vec![e],
            Err(e) => {
                eprintln!("error: {e}");
                let summary = report::header("corpus run", n, "error");
                let _ = write_outputs(dir, n, &summary, None);
                return EXIT_USAGE;
            }
        },
        None => corpus::list(),
    };
    let results: Vec<(u8, bool)> = std::thread::scope(|scope| {
        let handles: Vec<_> = entries.iter().map(|e| scope.spawn(move || corpus_one(dir, e))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or((EXIT_NUMERIC, false))).collect()
    });
    if name.is_none() {
        let mut summary = report::header("corpus run", "corpus", "ok");
        let rows: Vec<Value> = entries
            .iter()
            .zip(&results)
            .map(|(e, (code, pass))| json!({ "name": e.name, "exit": code, "pass": pass }))
            .collect();
        summary.insert("entries".into(), Value::Array(rows));
        let _ = write_outputs(dir, "corpus", &summary, None);
    }
    results.iter().map(|r| r.0).max().unwrap_or(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let code = match &cli.command {
        Command::Corpus { action: CorpusAction::List } => corpus_list(&cli.out),
        Command::Corpus {
            action: CorpusAction::Run { name },
        } => corpus_run(&cli.out, name.as_deref()),
        _ => config_command(&cli),
    };
    ExitCode::from(code)
}
