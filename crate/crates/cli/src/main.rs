use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use weakkam::config::RunConfig;
use weakkam::pipeline::{self, Run};
use weakkam::{Error, Result};

#[derive(Parser)]
#[command(name = "weakkam", version, about = "Weak KAM numerics for control-affine systems on the torus")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Critical constant estimators and certificate.
    Critical,
    /// Peierls barrier and projected Aubry set.
    Aubry,
    /// Mather LP and the inclusion and graph checks.
    Mather,
    /// Bound and equality checks on a Grushin frame.
    GrushinDemo,
    /// Summary of the reports in the output directory.
    Report,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.verb {
        Verb::Report => {
            let dir = match (&cli.out, &cli.config) {
                (Some(out), _) => out.clone(),
                (None, Some(_)) => load(cli)?.output_dir,
                (None, None) => PathBuf::from("out"),
            };
            print!("{}", pipeline::report(&dir)?);
        }
        Verb::GrushinDemo => {
            let r = pipeline::cmd_grushin_demo(&load(cli)?)?;
            println!("c_est {} <= {} + {}: {}", r.c_est, r.rhs, r.tol, r.bound_ok);
        }
        verb => {
            let run = Run::new(load(cli)?)?;
            match verb {
                Verb::Critical => {
                    let out = pipeline::cmd_critical(&run)?;
                    let c = &out.certificate;
                    println!("c_lower {} c_ergodic {} c_upper {} c_longtime {}", c.c_lower, c.c_ergodic, c.c_upper, c.c_longtime);
                }
                Verb::Aubry => {
                    let out = pipeline::cmd_aubry(&run)?;
                    println!("c {} Aubry nodes {} eps_num {}", out.c, out.aubry.nodes.len(), out.report.eps_num);
                }
                Verb::Mather => {
                    let out = pipeline::cmd_mather(&run)?;
                    println!("LP value {} inclusion ok, graph residual {}", out.report.lp.value, out.report.graph.max_residual);
                }
                _ => unreachable!(),
            }
            println!("outputs in {}", run.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
