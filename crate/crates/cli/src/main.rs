//! `gasket`: command-line access to the walk on words, its potential theory
//! and its Martin boundary.

mod commands;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use martin_gasket::{ChainParams, KernelChoice, Mode};

use report::{CliError, Format};

#[derive(Debug, Parser)]
#[command(
    name = "gasket",
    version,
    about = "Random walk on words and its Martin boundary"
)]
pub struct Cli {
    /// The parameter p in (0, 1/2), as `num/den` or a decimal.
    #[arg(long, global = true, default_value = "1/3", allow_hyphen_values = true)]
    p: String,
    /// Arithmetic mode; defaults to exact for `num/den` and float for decimals.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Seed for Monte Carlo commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Standard,
    Rotated,
}

impl From<KernelArg> for KernelChoice {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Standard => KernelChoice::Standard,
            KernelArg::Rotated => KernelChoice::Rotated,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// The absorption probabilities (alpha, beta, gamma, a, b, c) per level.
    Sequences {
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Check the limit theorem and the lemma suite.
    Verify {
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Highest level the limit search may reach.
        #[arg(long, default_value_t = 120)]
        n_max: usize,
        /// Levels covered by the certified lemma suite.
        #[arg(long, default_value_t = 50)]
        lemma_levels: usize,
        /// Run the limit search in binary64.
        #[arg(long)]
        float: bool,
    },
    /// Monte Carlo estimate of the corner distribution at a level.
    Simulate {
        #[arg(long, default_value = "12")]
        start: String,
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, value_enum, default_value_t = KernelArg::Standard)]
        kernel: KernelArg,
    },
    /// Probability that the walk from x ever visits y.
    Hitting {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Expected number of visits to y from x.
    Green {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Martin kernel K(z, target) for a finite or boundary target.
    Kernel {
        #[arg(long)]
        z: String,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Truncated Martin metric between two words.
    Metric {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 1e-10)]
        kernel_tol: f64,
    },
    /// Minimal harmonic functions h_1, h_2, h_3 at a finite or boundary word.
    Harmonic {
        #[arg(long)]
        x: String,
        /// Report only h_i.
        #[arg(long)]
        i: Option<u8>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// SVG of the gasket with vertices coloured by h_i.
    Gasket {
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 1)]
        color_by: u8,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Graphviz DOT of the level graph.
    GraphExport {
        #[arg(long, default_value_t = 2)]
        level: usize,
    },
}

impl Cli {
    /// The chain parameter with the requested arithmetic mode.
    fn params(&self) -> Result<ChainParams, CliError> {
        let parsed: ChainParams = self.p.parse().map_err(CliError::usage)?;
        match self.mode {
            None => Ok(parsed),
            Some(ModeArg::Float) => Ok(parsed.to_float()),
            Some(ModeArg::Exact) => match parsed.p_exact() {
                Some(r) if parsed.mode() == Mode::Float => {
                    ChainParams::from_rational(r.clone()).map_err(CliError::usage)
                }
                _ => Ok(parsed),
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
