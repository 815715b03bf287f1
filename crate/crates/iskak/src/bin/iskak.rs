use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use iskak::{run_experiment, Experiment, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "iskak", about = "Isobe-Kakinuma water-wave model experiments")]
struct Cli {
    /// dispersion, convergence, consistency, conservation, simulate, elliptic-suite or dtn
    #[arg(value_parser = parse_experiment)]
    experiment: Experiment,
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `section.key=value`, TOML syntax for the value. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the summary to stdout.
    #[arg(long, short)]
    verbose: bool,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    Experiment::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Experiment::ALL.iter().map(Experiment::name).collect();
        format!("unknown experiment `{s}`; expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = match ExperimentConfig::from_file(&cli.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run_experiment(cli.experiment, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = cli.output_dir.unwrap_or_else(|| cfg.output_dir.clone());
    match report.write(&dir) {
        Ok((csv, summary)) => {
            if cli.verbose {
                print!("{}", report.summary());
            }
            println!("wrote {} and {}", csv.display(), summary.display());
        }
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    if report.passed() {
        println!("{}: PASS", cli.experiment.name());
        ExitCode::SUCCESS
    } else {
        println!("{}: FAIL", cli.experiment.name());
        ExitCode::from(1)
    }
}
