use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tresca_flow::dynamics::geometric_ladder;
use tresca_flow::harness::config::RunConfig;
use tresca_flow::harness::couette::{run_couette, CouetteCase, Regime};
use tresca_flow::harness::output::write_atomic;
use tresca_flow::harness::studies::{constants_report, dimension_study, run_member, trajectory_study};
use tresca_flow::harness::{load_checkpoint, parse_config, resume, run_config, verify_manifest};
use tresca_flow::{Error, Result};

#[derive(Parser)]
#[command(name = "tresca", version, about = "Shear flow in a channel with a Tresca friction wall")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a config and write energy, traces, checkpoint and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Closed-form validation cases.
    Validate {
        #[command(subcommand)]
        case: ValidateCase,
    },
    /// Poincaré, Ladyzhenskaya and Hopf constants for a config.
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        hopf_samples: usize,
        /// Print the Hopf ladder as CSV (alpha,hopf_ratio,F) instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Pairwise distances between shifted trajectory windows and the Hölder fit.
    Trajectories {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long)]
        dt_sample: Option<f64>,
        #[arg(long)]
        t_burn: Option<f64>,
        /// Comma-separated shift list.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.4,0.8")]
        shifts: Vec<f64>,
        /// Directory for distances.csv and holder.json; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Box-counting and correlation dimension of post-burn-in windows.
    Dimension {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long)]
        t_burn: Option<f64>,
        #[arg(long, default_value_t = 8)]
        m: usize,
        /// Comma-separated radii; a geometric ladder from 1e-3 to 1 when absent.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// H-norm of the random initial conditions.
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every checksum listed in a run manifest.
    VerifyManifest { dir: PathBuf },
}

#[derive(Subcommand)]
enum ValidateCase {
    Couette {
        #[arg(long)]
        regime: RegimeArg,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Stick,
    Slip,
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_config(&text)
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Analysis(format!("json encoding failed: {e}")))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, resume: from } => {
            let cfg = read_config(&config)?;
            let dir = out
                .or_else(|| cfg.output.out.as_ref().map(PathBuf::from))
                .ok_or_else(|| Error::ConfigMissing("no output directory: pass --out or set `out`".into()))?;
            let outcome = match from {
                Some(cp) => resume(&cfg, &load_checkpoint(&cp)?, Some(&dir), &mut [])?,
                None => run_config(&cfg, Some(&dir), &mut [])?,
            };
            let s = &outcome.summary;
            println!(
                "steps={} t={} max_energy_residual={:e} max_divergence={:e} out={}",
                s.steps,
                s.final_state.t,
                s.max_residual,
                s.max_divergence,
                dir.display()
            );
        }
        Command::Validate {
            case: ValidateCase::Couette { regime, n },
        } => {
            let regime = match regime {
                RegimeArg::Stick => Regime::Stick,
                RegimeArg::Slip => Regime::Slip,
            };
            let report = run_couette(&CouetteCase::standard(regime, n))?;
            println!("{}", to_json(&report)?);
            let c = &report.case;
            let ok = match regime {
                Regime::Stick => report.error_tresca <= 1e-3,
                Regime::Slip => {
                    let target = c.k / c.nu;
                    (report.u_bottom - target).abs() <= 0.02 * target
                        && report.r_eq <= 1e-3 * c.k
                        && report.r_bound <= 1e-3 * c.k
                }
            };
            if !ok {
                return Err(Error::Analysis(format!(
                    "couette {regime:?} outside tolerance: u_bottom={:.6} error={:.3e} r_eq={:.3e} r_bound={:.3e}",
                    report.u_bottom, report.error_tresca, report.r_eq, report.r_bound
                )));
            }
        }
        Command::Constants {
            config,
            samples,
            hopf_samples,
            table,
        } => {
            let cfg = read_config(&config)?;
            let report = constants_report(&cfg, samples, hopf_samples)?;
            if table {
                let mut s = String::from("alpha,hopf_ratio,F\n");
                for r in &report.ladder {
                    let f = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| format!("{v:e}"));
                    let _ = writeln!(s, "{:e},{},{}", r.alpha, f(r.ratio), f(r.forcing));
                }
                print!("{s}");
            } else {
                println!("{}", to_json(&report)?);
            }
        }
        Command::Trajectories {
            config,
            l,
            dt_sample,
            t_burn,
            shifts,
            out,
        } => {
            let mut cfg = read_config(&config)?;
            if let Some(l) = l {
                cfg.analysis.l = l;
            }
            if let Some(d) = dt_sample {
                cfg.analysis.dt_sample = d;
            }
            if let Some(t) = t_burn {
                cfg.analysis.t_burn = t;
            }
            let seed = cfg.analysis.seed.unwrap_or(0);
            let run = run_member(&cfg, cfg.init.amplitude, seed)?;
            let report = trajectory_study(&cfg, &run, &shifts)?;
            match out {
                Some(dir) => {
                    write_atomic(&dir.join("distances.csv"), report.distance_csv().as_bytes())?;
                    write_atomic(&dir.join("holder.json"), to_json(&report.holder)?.as_bytes())?;
                    println!(
                        "beta={} r2={} c={:e}",
                        report.holder.beta, report.holder.r2, report.holder.c
                    );
                }
                None => print!("{}", report.distance_csv()),
            }
        }
        Command::Dimension {
            config,
            ensemble,
            t_burn,
            m,
            eps,
            amplitude,
            out,
        } => {
            let mut cfg = read_config(&config)?;
            if let Some(n) = ensemble {
                cfg.analysis.ensemble = n;
            }
            if let Some(t) = t_burn {
                cfg.analysis.t_burn = t;
            }
            let eps = if eps.is_empty() {
                geometric_ladder(1e-3, 1.0, 16)
            } else {
                eps
            };
            let report = dimension_study(&cfg, amplitude.unwrap_or(cfg.init.amplitude), m, &eps)?;
            let mut curves = String::from("eps,box_count,correlation_sum\n");
            for (i, e) in report.eps.iter().enumerate() {
                let _ = writeln!(
                    curves,
                    "{:e},{},{:e}",
                    e, report.box_counts[i], report.correlation_sum[i]
                );
            }
            write_atomic(&out.join("dimension.json"), to_json(&report)?.as_bytes())?;
            write_atomic(&out.join("curves.csv"), curves.as_bytes())?;
            println!(
                "box_dimension={} correlation_dimension={:?} degenerate={}",
                report.box_dimension, report.correlation_dimension, report.degenerate
            );
        }
        Command::VerifyManifest { dir } => {
            let m = verify_manifest(&dir)?;
            println!("ok files={} config_hash={}", m.files.len(), m.config_hash);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
