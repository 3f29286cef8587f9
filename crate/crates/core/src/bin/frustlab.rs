use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use frustlab::experiments::{
    planted_triple_dataset, run_fisher_window, run_globe, run_realworld, run_synthetic,
    run_theory_check, ExperimentConfig, Preset, SuiteOutput,
};
use frustlab::ingest::{load_embedding_file, write_embedding_file};
use frustlab::Error;

#[derive(Parser)]
#[command(name = "frustlab", version, about = "Concept frustration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sphere versus cylinder globe benchmark.
    Globe(Common),
    /// Linear-Gaussian grid over k_known, alpha and omega.
    Synthetic(Common),
    /// Cross-validated CBM1 versus CBM2 on an embedding file.
    Realworld(Common),
    /// Globe comparison under several Fisher averaging windows.
    FisherWindow(Common),
    /// Closed-form Bayes accuracy against Monte Carlo.
    TheoryCheck(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; preset values fill anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `paper` or `quick`.
    #[arg(long, default_value = "paper")]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions, seeds, folds or instances, depending on the suite.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    p_low: Option<f64>,
    #[arg(long)]
    p_high: Option<f64>,
    /// Embedding file for `realworld`; a planted stand-in is generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Extra `section.key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn overrides(c: &Common, reps_key: Option<&str>) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(s) = c.seed {
        out.push(format!("seed={s}"));
    }
    if let Some(w) = c.workers {
        out.push(format!("workers={w}"));
    }
    if let Some(p) = c.p_low {
        out.push(format!("p_low={p:?}"));
    }
    if let Some(p) = c.p_high {
        out.push(format!("p_high={p:?}"));
    }
    if let (Some(r), Some(key)) = (c.reps, reps_key) {
        out.push(format!("{key}={r}"));
    }
    if let Some(p) = &c.input {
        out.push(format!("realworld.input={:?}", p.display().to_string()));
    }
    out.extend(c.set.iter().cloned());
    out
}

fn load(c: &Common, reps_key: &str) -> frustlab::Result<ExperimentConfig> {
    let preset = Preset::parse(&c.preset)?;
    ExperimentConfig::load(preset, c.config.as_deref(), &overrides(c, Some(reps_key)))
}

fn realworld(cfg: &ExperimentConfig, out_dir: &Path) -> frustlab::Result<SuiteOutput> {
    let data = match &cfg.realworld.input {
        Some(path) => load_embedding_file(path)?,
        None => {
            let rw = &cfg.realworld;
            let standin = planted_triple_dataset(
                rw.standin_n,
                rw.standin_r,
                rw.standin_coupling,
                rw.standin_omega,
                rw.standin_sigma_y,
                cfg.seed,
            )?;
            std::fs::create_dir_all(out_dir)?;
            let path = out_dir.join("standin_embeddings.csv");
            write_embedding_file(&standin, &path)?;
            eprintln!(
                "no --input given; wrote planted stand-in to {}",
                path.display()
            );
            load_embedding_file(&path)?
        }
    };
    run_realworld(cfg, &data)
}

fn run(cli: Cli) -> frustlab::Result<SuiteOutput> {
    let (c, reps_key) = match &cli.command {
        Command::Globe(c) => (c, "globe.reps"),
        Command::Synthetic(c) => (c, "synthetic.seeds"),
        Command::Realworld(c) => (c, "realworld.folds"),
        Command::FisherWindow(c) => (c, "fisher_window.reps"),
        Command::TheoryCheck(c) => (c, "theory.instances"),
    };
    let cfg = load(c, reps_key)?;
    let output = match &cli.command {
        Command::Globe(_) => run_globe(&cfg)?,
        Command::Synthetic(_) => run_synthetic(&cfg)?,
        Command::Realworld(_) => realworld(&cfg, &c.out_dir)?,
        Command::FisherWindow(_) => run_fisher_window(&cfg)?,
        Command::TheoryCheck(_) => run_theory_check(&cfg)?,
    };
    output.write_to(&c.out_dir)?;
    std::fs::write(c.out_dir.join("config.toml"), cfg.to_toml())?;
    Ok(output)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.summary);
            if out.null_rows() > 0 {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
