use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flowstack::cli::{cmd_evaluate, cmd_inspect, cmd_roc, cmd_synth, RunConfig};
use flowstack::Result;

#[derive(Parser)]
#[command(name = "flowstack", version, about = "DDoS flow classification: kNN + SVM + stacking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonFlags {
    /// Flat key = value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// table | csv | json
    #[arg(long)]
    format: Option<String>,
}

impl CommonFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(dataset) = &self.dataset {
            cfg.dataset = Some(dataset.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(format) = &self.format {
            cfg.format = format.parse()?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the repeats sweep and write report.json / report.txt.
    Evaluate {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Dump first-repeat ROC points for one model (knn, svm or stack).
    Roc {
        #[command(flatten)]
        common: CommonFlags,
        #[arg(long)]
        model: String,
    },
    /// Generate a synthetic two-cluster flow CSV.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 3.29)]
        separation: f64,
        #[arg(long, default_value_t = 0.5)]
        balance: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a flow CSV: rows, labels, dropped columns, nonfinite cells.
    Inspect { dataset: PathBuf },
}

fn init_worker_pool() {
    // FLOWSTACK_WORKERS is the only environment input; results are
    // worker-count independent either way.
    if let Ok(workers) = std::env::var("FLOWSTACK_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate { common } => cmd_evaluate(&common.resolve()?),
        Command::Roc { common, model } => {
            let path = cmd_roc(&common.resolve()?, &model)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Synth {
            n,
            d,
            separation,
            balance,
            seed,
            out,
        } => cmd_synth(n, d, separation, balance, seed, &out),
        Command::Inspect { dataset } => {
            print!("{}", cmd_inspect(&dataset)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    init_worker_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
