//! `decoh`: run an experiment and write its CSV.
//!
//! Exit status: 0 when every check passes, 1 when a tolerance check fails,
//! 2 on a configuration or I/O error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decoh_core::experiments::{read_config_file, run, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "decoh", version, about = "Decoherence Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean of η over d random environment states, against √(1 − d^(−2/n)).
    EtaMean(Params),
    /// Monte Carlo and analytic d_max over n.
    Dmax(Params),
    /// Spherical cap membership frequency against (1 − ε²)^(n−1).
    CapCheck(Params),
    /// Two-level entropy ratio prefactor grid.
    EntropyCheck(Params),
    /// η̃² of random states in Haar-random bases.
    EtaTilde(Params),
    /// Overlap variance of the lattice interaction model.
    Interaction(Params),
    /// Overlap law after Brownian motion on the sphere.
    BrownianMixing(Params),
    /// Run the experiment named by `experiment = …` in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Default)]
struct Params {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long = "n-range")]
    n_range: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long = "d-range")]
    d_range: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long = "T")]
    big_t: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long = "N")]
    big_n: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    g: Option<String>,
    /// Largest accepted deviation per row.
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Also write observed-vs-predicted plot data here.
    #[arg(long)]
    plot: Option<String>,
}

impl Params {
    fn into_map(self) -> Result<BTreeMap<String, String>, decoh_core::Error> {
        let mut map = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        let flags = [
            ("n", self.n),
            ("n-range", self.n_range),
            ("d", self.d),
            ("d-range", self.d_range),
            ("epsilon", self.epsilon),
            ("s", self.s),
            ("trials", self.trials),
            ("T", self.big_t),
            ("p", self.p),
            ("N", self.big_n),
            ("seed", self.seed),
            ("g", self.g),
            ("tolerance", self.tolerance),
            ("output", self.output),
            ("plot", self.plot),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        }
        Ok(map)
    }
}

fn build(command: Command) -> Result<ExperimentConfig, decoh_core::Error> {
    let (kind, params) = match command {
        Command::Run { config } => return ExperimentConfig::from_file_map(read_config_file(&config)?),
        Command::EtaMean(p) => (ExperimentKind::EtaMean, p),
        Command::Dmax(p) => (ExperimentKind::Dmax, p),
        Command::CapCheck(p) => (ExperimentKind::CapCheck, p),
        Command::EntropyCheck(p) => (ExperimentKind::EntropyCheck, p),
        Command::EtaTilde(p) => (ExperimentKind::EtaTilde, p),
        Command::Interaction(p) => (ExperimentKind::Interaction, p),
        Command::BrownianMixing(p) => (ExperimentKind::BrownianMixing, p),
    };
    ExperimentConfig::from_map(kind, params.into_map()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build(cli.command).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(out) => {
            println!("{}", out.summary);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("decoh: {e}");
            ExitCode::from(2)
        }
    }
}
