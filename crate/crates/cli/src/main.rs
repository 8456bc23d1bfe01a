use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cti_cli::{run, validate, ExperimentConfig, Problem};

/// Compare CTI prediction sets against split conformal and CQR.
#[derive(Parser, Debug)]
#[command(name = "cti", version)]
struct Args {
    /// Key-value config file; flags override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset with a header row.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Synthetic scenario: hetero-gauss, bimodal, lognormal or uniform.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Number of interquantile intervals.
    #[arg(long = "K")]
    k: Option<String>,
    /// Comma-separated subset of cti-forest, cti-pinball, cti-harmonic, split, cqr.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// clamp or infinite.
    #[arg(long)]
    boundary: Option<String>,
    /// Extra `key=value` settings, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Check the configuration and exit.
    #[arg(long)]
    check: bool,
}

impl Args {
    fn overrides(&self) -> Vec<(String, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut pairs: Vec<(String, String)> = [
            ("dataset", path(&self.dataset)),
            ("scenario", self.scenario.clone()),
            ("alpha", self.alpha.clone()),
            ("K", self.k.clone()),
            ("methods", self.methods.clone()),
            ("reps", self.reps.clone()),
            ("seed", self.seed.clone()),
            ("out", path(&self.out)),
            ("boundary", self.boundary.clone()),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_owned(), v)))
        .collect();
        for s in &self.set {
            let (k, v) = s.split_once('=').unwrap_or((s, ""));
            pairs.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        pairs
    }
}

fn report_problems(problems: &[Problem]) -> ExitCode {
    eprintln!("invalid configuration:");
    for p in problems {
        eprintln!("  {p}");
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();

    let mut cfg = match &args.config {
        Some(path) => match ExperimentConfig::from_file(path) {
            Ok(c) => c,
            Err(p) => return report_problems(&p),
        },
        None => ExperimentConfig::default(),
    };
    let overrides = args.overrides();
    // a flag naming the other data source replaces the file's choice
    if overrides
        .iter()
        .any(|(k, _)| k == "dataset" || k == "scenario")
    {
        cfg.source = None;
    }
    if let Err(p) = cfg.apply(&overrides) {
        return report_problems(&p);
    }
    let problems = validate(&cfg);
    if !problems.is_empty() {
        return report_problems(&problems);
    }
    if args.check {
        println!("configuration ok");
        return ExitCode::SUCCESS;
    }

    match run(&cfg) {
        Ok(out) => {
            for r in &out.reports {
                let s = r.summaries();
                let line: Vec<String> = s
                    .iter()
                    .map(|(m, s)| format!("{m} {}", s.display()))
                    .collect();
                println!("{:<13} {}", r.method, line.join("  "));
            }
            println!("wrote {} files to {}", out.files.len(), cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
