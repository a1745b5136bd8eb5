use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cim_core::config::ExperimentConfig;
use cim_core::runner::{self, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "cim", version, about = "Compact inertial manifold laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, global = true)]
    eps_list: Option<String>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Any config key, e.g. `--set flow=hyperbolic`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Spectral-gap certificate and eps_s.
    Certify,
    /// One trajectory with its audits.
    Simulate,
    /// Graph, omega and manifold clouds.
    Manifold,
    /// Eps sweep and power-law fit.
    Robustness,
    /// A-priori audits of both flows.
    Audit,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, String> {
    let mut kv = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.push((k.to_string(), v));
        }
    };
    push("seed", cli.seed.map(|x| x.to_string()));
    push("out", cli.out.as_ref().map(|p| p.display().to_string()));
    push("eps_list", cli.eps_list.clone());
    push("delta", cli.delta.map(|x| x.to_string()));
    push("modes", cli.modes.map(|x| x.to_string()));
    push("dt", cli.dt.map(|x| x.to_string()));
    for s in &cli.set {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
        kv.push((k.to_string(), v.to_string()));
    }
    Ok(kv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let kv = match overrides(&cli) {
        Ok(kv) => kv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let cfg = match ExperimentConfig::layered(cli.config.as_deref(), std::env::vars(), &kv) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(runner::exit_code(&e) as u8);
        }
    };
    let res = match cli.cmd {
        Cmd::Certify => runner::cmd_certify(&cfg),
        Cmd::Simulate => runner::cmd_simulate(&cfg),
        Cmd::Manifold => runner::cmd_manifold(&cfg),
        Cmd::Robustness => runner::cmd_robustness(&cfg),
        Cmd::Audit => runner::cmd_audit(&cfg),
    };
    match res {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
