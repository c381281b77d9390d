use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use nnsieve::sieve::{self, RateCheckInput};
use nnsieve::simulate::{self, CellRecord, ExperimentResult, GridConfig};
use nnsieve::trainer;
use nnsieve::{read_config, ActivationKind, Dataset, Error, NetworkParams, SieveSpec, TrainConfig};

/// Penalized neural-network sieve estimation: fitting, simulation and bound calculators.
#[derive(Debug, Parser)]
#[command(name = "nnsieve", version)]
struct Cli {
    /// Print machine-readable JSON on standard out instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one network to a CSV dataset (last column is the response).
    Fit {
        /// Training configuration (JSON, or TOML with a .toml extension).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Where to write the fit report (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Also write the objective trajectory as CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Run an experiment grid and write cells, tables and plot data.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "NNSIEVE_OUT")]
        out: PathBuf,
        /// Also render the plots as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Re-emit the tables of a results directory.
    Tables {
        #[arg(long, env = "NNSIEVE_OUT")]
        results: PathBuf,
    },
    /// Re-emit the plot data of a results directory.
    PlotData {
        #[arg(long, env = "NNSIEVE_OUT")]
        results: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Covering-number and entropy-integral bounds of a sieve.
    Entropy {
        #[arg(long)]
        activation: ActivationKind,
        #[arg(long)]
        r: usize,
        /// Output-weight budget V_n (tanh).
        #[arg(long, default_value_t = 2.0)]
        v: f64,
        /// Hidden-weight budget M_n (ReLU).
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Radius of the covering-number bound.
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// Check the rate conditions on a schedule CSV (n, r_n, V_n, M_n, lambda_n).
    Rates {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        activation: ActivationKind,
        /// Write the per-row ratios as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check whether a tanh network is minimal.
    Minimal {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Rescale a ReLU network so that every |alpha_j| is 1 or the unit is zero.
    Canonicalize {
        #[arg(long)]
        net: PathBuf,
        /// Write the canonical network here instead of standard out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the basic inequality for a fitted grid cell.
    Audit {
        #[arg(long)]
        cell: PathBuf,
    },
}

fn read_net(path: &Path) -> nnsieve::Result<NetworkParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    NetworkParams::from_json(&text)
}

fn load_results(dir: &Path) -> nnsieve::Result<ExperimentResult> {
    ExperimentResult::load(dir)
}

fn print_paths(json_out: bool, paths: &[PathBuf]) {
    if json_out {
        println!("{}", json!({ "written": paths }));
    } else {
        for p in paths {
            println!("wrote {}", p.display());
        }
    }
}

fn run(cli: Cli) -> nnsieve::Result<()> {
    let json_out = cli.json;
    match cli.command {
        Command::Fit {
            config,
            data,
            out,
            trajectory,
        } => {
            let config: TrainConfig = read_config(&config)?;
            let data = Dataset::read_csv(&data)?;
            let report = trainer::fit_dataset(&data, &config)?;
            std::fs::write(&out, report.to_json()?).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            if let Some(t) = &trajectory {
                report.write_trajectory_csv(t)?;
            }
            if json_out {
                println!("{}", report.to_json()?);
            } else {
                println!("objective      {:.6e}", report.objective);
                println!("empirical risk {:.6e}", report.empirical_risk);
                println!("penalty term   {:.6e}", report.penalty_term);
                println!("iterations     {}{}", report.iterations_run, if report.stalled { " (stalled)" } else { "" });
                println!("wrote {}", out.display());
            }
        }
        Command::Simulate { config, out, svg } => {
            let grid: GridConfig = read_config(&config)?;
            let result = simulate::run_grid(&grid, Some(&out))?;
            let mut written = simulate::emit_tables(&result, &out)?;
            written.extend(simulate::emit_plot_data(&result, &out, svg)?);
            let failed: Vec<&str> = result
                .records
                .iter()
                .filter(|r| r.fit().is_none())
                .map(|r| r.id.as_str())
                .collect();
            if json_out {
                println!("{}", json!({ "cells": result.records.len(), "failed": failed, "written": written }));
            } else {
                println!("{} cells, {} failed", result.records.len(), failed.len());
                for id in &failed {
                    println!("failed: {id}");
                }
                print_paths(false, &written);
            }
        }
        Command::Tables { results } => {
            let written = simulate::emit_tables(&load_results(&results)?, &results)?;
            print_paths(json_out, &written);
        }
        Command::PlotData { results, svg } => {
            let written = simulate::emit_plot_data(&load_results(&results)?, &results, svg)?;
            print_paths(json_out, &written);
        }
        Command::Entropy {
            activation,
            r,
            v,
            m,
            d,
            eps,
        } => {
            let spec = SieveSpec::new(r, v, m, d)?;
            let (covering, constant) = match activation {
                ActivationKind::Tanh => (sieve::covering_bound_tanh(&spec, eps)?, sieve::tanh_entropy_constant(&spec)),
                ActivationKind::Relu => (sieve::covering_bound_relu(&spec, eps)?, sieve::relu_entropy_constant(&spec)),
            };
            let integral = sieve::entropy_integral_bound(&spec, activation)?;
            if json_out {
                println!(
                    "{}",
                    json!({
                        "activation": activation,
                        "sieve": spec,
                        "eps": eps,
                        "log_covering_bound": covering,
                        "entropy_constant": constant,
                        "entropy_integral_bound": integral,
                    })
                );
            } else {
                println!("log covering number bound (eps = {eps}): {covering:.10}");
                println!("entropy constant: {constant:.10}");
                println!("entropy-integral bound: {integral:.10}");
            }
        }
        Command::Rates {
            csv,
            nu,
            activation,
            out,
        } => {
            let input = RateCheckInput::read_csv(&csv, nu)?;
            let report = sieve::check_rate_conditions(&input, activation)?;
            if let Some(out) = &out {
                report.write_csv(out)?;
            }
            if json_out {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                print!("{}", report.verdict_text());
            }
        }
        Command::Minimal { net, tol } => {
            let result = read_net(&net)?.is_minimal_tanh(tol)?;
            if json_out {
                let body = match result {
                    nnsieve::Minimality::Minimal => json!({ "minimal": true }),
                    nnsieve::Minimality::Violation(v) => json!({
                        "minimal": false,
                        "condition": v.condition(),
                        "message": v.to_string(),
                    }),
                };
                println!("{body}");
            } else {
                println!("{result}");
            }
        }
        Command::Canonicalize { net, out } => {
            let canonical = read_net(&net)?.canonicalize_relu()?;
            let text = canonical.to_json()?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &text).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    if !json_out {
                        println!("wrote {}", path.display());
                    } else {
                        println!("{}", json!({ "written": [path] }));
                    }
                }
                None => println!("{text}"),
            }
        }
        Command::Audit { cell } => {
            let record = CellRecord::read(&cell)?;
            let (report, exact) = simulate::audit_cell(&record)?;
            if json_out {
                println!("{}", json!({ "cell": record.id, "projection_exact": exact, "audit": report }));
            } else {
                println!("cell {}", record.id);
                println!("lhs        {:.6e}", report.lhs);
                println!("term I     {:.6e}", report.term_i);
                println!("term II    {:.6e}", report.term_ii);
                println!("term III   {:.6e}", report.term_iii);
                println!("eta slack  {:.6e}", report.eta_slack);
                println!("residual   {:.6e}", report.residual);
                println!(
                    "extremum check {}; inequality {}{}",
                    if report.extremum_holds { "holds" } else { "fails" },
                    if report.inequality_holds { "holds" } else { "fails" },
                    if exact { "" } else { " (projection approximated by an unpenalized fit)" }
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
