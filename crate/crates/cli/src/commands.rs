//! The subcommands. Each one validates first, then writes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hawkes_dt::analysis::{log_log_slope, AnalysisError, ExperimentSpec};
use hawkes_dt::dthp::StorageMode;
use hawkes_dt::io::{
    write_chain_streaming, write_chain_trajectory, write_convergence_csv, write_events,
    write_exact_states, ExportError, TrajectorySummary,
};
use hawkes_dt::operators::functions::{
    planar_family, planar_function, scalar_family, scalar_function,
};
use hawkes_dt::operators::{NormRow, OperatorError, Operators};
use hawkes_dt::{
    marginal_convergence_experiment, simulate_chain, state_at, GridSpec, HawkesParams, KernelKind,
    PathSeed,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{Defaults, RunConfig};
use crate::{Cli, CliError};

fn load(cli: &Cli, defaults: Defaults) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.params)?.resolved(defaults);
    cfg.check()?;
    log::info!("config digest {}", cfg.digest());
    Ok(cfg)
}

fn grid(cfg: &RunConfig) -> Result<GridSpec, CliError> {
    GridSpec::new(cfg.horizon.unwrap_or(1.0), cfg.steps.unwrap_or(1))
        .map_err(|e| CliError::Config(format!("grid: {e}")))
}

fn required_out(cli: &Cli) -> Result<&Path, CliError> {
    cli.out
        .as_deref()
        .ok_or_else(|| CliError::Config("--out is required for this command".into()))
}

/// Cheap up-front check so long runs do not fail only at the end.
fn check_parent(path: &Path) -> Result<(), CliError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(CliError::Io(format!(
            "{}: no such directory",
            parent.display()
        )));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(summary: serde_json::Value) {
    println!("{summary}");
}

fn kernel_name(p: &HawkesParams) -> &'static str {
    match p.kind() {
        KernelKind::Exponential => "exponential",
        KernelKind::Erlang => "erlang",
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// `simulate-dthp` and `reproduce-fig4`.
pub fn simulate_dthp(cli: &Cli, defaults: Defaults, name: &str) -> Result<(), CliError> {
    let cfg = load(cli, defaults)?;
    let params = cfg.model()?;
    let grid = grid(&cfg)?;
    let out = required_out(cli)?;
    let mut w = create(out)?;
    let seed = PathSeed::new(cli.seed, 0);
    let mode = StorageMode::for_steps(grid.steps());
    let started = Instant::now();
    let summary: TrajectorySummary = match mode {
        StorageMode::Full => {
            write_chain_trajectory(&simulate_chain(&params, grid, seed), &params, &mut w)?
        }
        StorageMode::Streaming => write_chain_streaming(&params, grid, seed, &mut w)?,
    };
    w.flush()?;
    log::info!(
        "{name}: {} steps in {:.2?}",
        grid.steps(),
        started.elapsed()
    );
    let mut line = json!({
        "command": name,
        "seed": cli.seed,
        "config_digest": cfg.digest(),
        "kernel": kernel_name(&params),
        "horizon": grid.horizon(),
        "steps": grid.steps(),
        "storage": if mode == StorageMode::Full { "full" } else { "streaming" },
        "events": summary.events,
        "final_lambda": summary.final_lambda,
        "final_xi": summary.final_xi,
        "final_loss": summary.final_loss,
        "out": display(out),
    });
    if name == "reproduce-fig4" {
        line["note"] = json!("the reference figure does not state its horizon; T defaults to 5");
    }
    emit(line);
    Ok(())
}

/// `simulate-exact`.
pub fn simulate_exact(cli: &Cli, states: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(cli, Defaults::SIMULATION)?;
    let params = cfg.model()?;
    let grid = grid(&cfg)?;
    let out = required_out(cli)?;
    if let Some(s) = states {
        check_parent(s)?;
    }
    let mut w = create(out)?;
    let horizon = grid.horizon();
    let record = hawkes_dt::simulate_exact(&params, horizon, PathSeed::new(cli.seed, 0));
    write_events(&record, &mut w)?;
    w.flush()?;
    if let Some(s) = states {
        let mut sw = create(s)?;
        write_exact_states(&record, &params, grid, &mut sw).map_err(|e| match e {
            ExportError::Csv(e) => CliError::Io(e.to_string()),
            ExportError::State(e) => CliError::Config(e.to_string()),
        })?;
        sw.flush()?;
    }
    let end = state_at(&record, &params, horizon).expect("horizon is inside the record");
    emit(json!({
        "command": "simulate-exact",
        "seed": cli.seed,
        "config_digest": cfg.digest(),
        "kernel": kernel_name(&params),
        "sampler": match params.kind() {
            KernelKind::Exponential => "exact",
            KernelKind::Erlang => "thinning",
        },
        "horizon": horizon,
        "events": record.len(),
        "final_lambda": end.lambda,
        "final_xi": end.xi,
        "final_loss": end.loss,
        "out": display(out),
        "states": states.map(display),
    }));
    Ok(())
}

#[derive(Debug, Serialize)]
struct FunctionReport {
    name: String,
    rows: Vec<NormRow>,
    strictly_decreasing: bool,
    identically_zero: bool,
    slope: Option<f64>,
}

impl FunctionReport {
    fn new(name: &str, rows: Vec<NormRow>) -> Self {
        let errs: Vec<f64> = rows.iter().map(|r| r.sup_norm_error).collect();
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        Self {
            name: name.into(),
            strictly_decreasing: errs.windows(2).all(|w| w[1] < w[0]),
            identically_zero: errs.iter().all(|&e| e == 0.0),
            slope: log_log_slope(&hs, &errs).ok(),
            rows,
        }
    }

    /// A function that `T` and `A` both map to zero has nothing to converge.
    fn passes(&self) -> bool {
        self.strictly_decreasing || self.identically_zero
    }
}

fn operator_error(e: OperatorError) -> CliError {
    CliError::Config(e.to_string())
}

/// `check-generator`.
pub fn check_generator(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli, Defaults::SIMULATION)?;
    let params = cfg.model()?;
    let ops = Operators::new(&params, cfg.operator_config()?).map_err(operator_error)?;
    let horizon = cfg.horizon.unwrap_or(1.0);
    let n_list = cfg.n_list.clone().unwrap_or_default();
    let erlang = params.kind() == KernelKind::Erlang;
    let names: Vec<String> = match &cfg.functions {
        Some(list) => list.clone(),
        None if erlang => planar_family()
            .into_iter()
            .map(|(n, _)| n.to_string())
            .collect(),
        None => scalar_family()
            .into_iter()
            .map(|(n, _)| n.to_string())
            .collect(),
    };
    // Resolve every name before any work or output.
    for name in &names {
        let known = if erlang {
            planar_function(name).is_some()
        } else {
            scalar_function(name).is_some()
        };
        if !known {
            return Err(CliError::Config(format!(
                "unknown {} test function `{name}`",
                kernel_name(&params)
            )));
        }
    }
    if let Some(out) = &cli.out {
        check_parent(out)?;
    }

    let started = Instant::now();
    let mut functions = Vec::with_capacity(names.len());
    for name in &names {
        let rows = n_list
            .iter()
            .map(|&n| {
                if erlang {
                    let f = planar_function(name).expect("checked above");
                    ops.convergence_norm_erlang(f.as_ref(), n, horizon)
                } else {
                    let f = scalar_function(name).expect("checked above");
                    ops.convergence_norm_exp(f.as_ref(), n, horizon)
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(operator_error)?;
        log::info!(
            "{name}: {:?}",
            rows.iter().map(|r| r.sup_norm_error).collect::<Vec<_>>()
        );
        functions.push(FunctionReport::new(name, rows));
    }
    log::info!("check-generator finished in {:.2?}", started.elapsed());
    let passed = functions.iter().all(FunctionReport::passes);
    let report = json!({
        "seed": cli.seed,
        "config_digest": cfg.digest(),
        "kernel": kernel_name(&params),
        "horizon": horizon,
        "functions": functions,
        "passed": passed,
    });
    if let Some(out) = &cli.out {
        write_json(out, &report)?;
    }
    let mut line = report;
    line["command"] = json!("check-generator");
    line["out"] = json!(cli.out.as_deref().map(display));
    emit(line);
    if !passed {
        let bad: Vec<&str> = functions
            .iter()
            .filter(|f| !f.passes())
            .map(|f| f.name.as_str())
            .collect();
        return Err(CliError::Verification(format!(
            "norms not strictly decreasing for {}",
            bad.join(", ")
        )));
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::NonFinite => CliError::Verification(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// `check-convergence`.
pub fn check_convergence(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli, Defaults::SIMULATION)?;
    let params = cfg.model()?;
    let oracle = cfg.oracle()?;
    let n_list = cfg.n_list.clone().unwrap_or_default();
    let spec = ExperimentSpec {
        params: &params,
        oracle: oracle.as_ref(),
        t: cfg.t.unwrap_or(1.0),
        n_list: &n_list,
        paths: cfg.paths.unwrap_or(0),
        seed: cli.seed,
    };
    let out: Option<PathBuf> = cli.out.clone();
    if let Some(out) = &out {
        check_parent(out)?;
    }
    let started = Instant::now();
    let reports = marginal_convergence_experiment(&spec).map_err(analysis_error)?;
    log::info!("check-convergence finished in {:.2?}", started.elapsed());
    let passed = reports.iter().all(|r| r.passes());
    if let Some(out) = &out {
        if is_csv(out) {
            let mut w = create(out)?;
            write_convergence_csv(&reports, &mut w)?;
            w.flush()?;
        } else {
            write_json(
                out,
                &json!({
                    "seed": cli.seed,
                    "config_digest": cfg.digest(),
                    "reports": reports,
                    "passed": passed,
                }),
            )?;
        }
    }
    emit(json!({
        "command": "check-convergence",
        "seed": cli.seed,
        "config_digest": cfg.digest(),
        "kernel": kernel_name(&params),
        "t": spec.t,
        "paths": spec.paths,
        "reports": reports,
        "passed": passed,
        "out": out.as_deref().map(display),
    }));
    if !passed {
        let bad: Vec<&str> = reports
            .iter()
            .filter(|r| !r.passes())
            .map(|r| r.coordinate.as_str())
            .collect();
        return Err(CliError::Verification(format!(
            "marginals at the largest N do not match the oracle for {}",
            bad.join(", ")
        )));
    }
    Ok(())
}
