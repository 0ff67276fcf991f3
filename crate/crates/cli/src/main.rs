use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tokencluster::Variant;
use tokencluster_cli::{cmd_batch, cmd_gen, cmd_run, cmd_verify, RunOptions, Shape};

#[derive(Parser)]
#[command(
    name = "tokencluster",
    version,
    about = "Simulate and verify random-walk token clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Static,
    Mobile,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Static => Variant::Static,
            VariantArg::Mobile => Variant::Mobile,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Ring,
    Path,
    Complete,
    Star,
    Grid,
    Random,
}

#[derive(clap::Args)]
struct Overrides {
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the minimum cluster size.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Maximum number of processed events.
    #[arg(long, default_value_t = tokencluster_cli::DEFAULT_HORIZON)]
    horizon: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario. Exit 0 if legitimate at the end, 2 if not, 1 on input errors.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Print a status line every N events.
        #[arg(long, value_name = "N")]
        snapshot_every: Option<u64>,
        /// Stop at the first legitimate configuration after the last topology change.
        #[arg(long)]
        stop_when_legitimate: bool,
        /// Write the final clustering as Graphviz text.
        #[arg(long, value_name = "PATH")]
        export_dot: Option<PathBuf>,
        /// Write the JSON-lines trace.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Write the final snapshot as JSON.
        #[arg(long, value_name = "PATH")]
        final_snapshot: Option<PathBuf>,
    },
    /// Replay a trace and check the invariants on every snapshot.
    /// Exit 0 if clean, 2 on violations, 1 on malformed traces.
    Verify { trace: PathBuf },
    /// Run many seeds of one scenario in parallel, each until legitimate.
    Batch {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
    /// Print a scenario for a generated topology.
    Gen {
        #[arg(value_enum)]
        shape: ShapeArg,
        /// Node count (grid side for grids).
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, value_enum, default_value = "static")]
        variant: VariantArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra-edge probability for random graphs.
        #[arg(long, default_value_t = 0.2)]
        density: f64,
    },
}

fn options(o: &Overrides) -> RunOptions {
    RunOptions {
        seed: o.seed,
        m: o.m,
        variant: o.variant.map(Into::into),
        horizon: Some(o.horizon),
        ..RunOptions::default()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = io::stdout().lock();
    let result = match cli.command {
        Command::Run {
            scenario,
            overrides,
            snapshot_every,
            stop_when_legitimate,
            export_dot,
            trace,
            final_snapshot,
        } => {
            let opts = RunOptions {
                snapshot_every,
                stop_when_legitimate,
                export_dot,
                trace,
                final_snapshot,
                ..options(&overrides)
            };
            cmd_run(&scenario, &opts, &mut out)
        }
        Command::Verify { trace } => cmd_verify(&trace, &mut out),
        Command::Batch {
            scenario,
            overrides,
            first_seed,
            seeds,
        } => cmd_batch(&scenario, &options(&overrides), first_seed, seeds, &mut out),
        Command::Gen {
            shape,
            n,
            m,
            variant,
            seed,
            density,
        } => {
            let shape = match shape {
                ShapeArg::Ring => Shape::Ring,
                ShapeArg::Path => Shape::Path,
                ShapeArg::Complete => Shape::Complete,
                ShapeArg::Star => Shape::Star,
                ShapeArg::Grid => Shape::Grid,
                ShapeArg::Random => Shape::Random,
            };
            cmd_gen(shape, n, m, variant.into(), seed, density).map(|text| {
                print!("{text}");
                tokencluster_cli::exit::OK
            })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(tokencluster_cli::exit::INPUT)
        }
    }
}
