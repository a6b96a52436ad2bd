use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  malformed input (JSON syntax or schema); the message names the field
  3  precondition failed (e.g. prior not invertible, Hamiltonian not Hermitian)
  4  internal consistency check failed (equivalent conditions disagreed)";

#[derive(Debug, Parser)]
#[command(name = "macrostate", version, about = "Inferential frames, observational entropy and microscopicity", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Relative tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,

    /// Absolute tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub abs_tol: f64,

    /// Rank cutoff relative to the largest eigenvalue.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub rank_tol: f64,

    /// Seed for randomized subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for batch inputs (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Append a CSV row (header on first write) with the scalar results.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Frame file: a frame dump or an object with "povm" and "prior".
    #[arg(long, conflicts_with_all = ["povm", "prior"])]
    pub frame: Option<PathBuf>,

    #[arg(long, requires = "prior")]
    pub povm: Option<PathBuf>,

    #[arg(long, requires = "povm")]
    pub prior: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximal projective post-processing and destroying map of a POVM and prior.
    Mppp {
        #[arg(long)]
        povm: PathBuf,
        #[arg(long)]
        prior: PathBuf,
    },

    /// Von Neumann and observational entropy of one or more states.
    Entropy {
        #[arg(long, required = true, num_args = 1..)]
        state: Vec<PathBuf>,
        #[arg(long)]
        povm: PathBuf,
    },

    /// Observational deficit against a prior.
    Deficit {
        #[arg(long, required = true, num_args = 1..)]
        state: Vec<PathBuf>,
        #[arg(long)]
        povm: PathBuf,
        #[arg(long)]
        prior: PathBuf,
    },

    /// The four macroscopicity conditions.
    MacroTest {
        #[arg(long, required = true, num_args = 1..)]
        state: Vec<PathBuf>,
        #[command(flatten)]
        frame: FrameArgs,
    },

    /// CCO / RCO / MNO membership of channels.
    Classify {
        #[arg(long, required = true, num_args = 1..)]
        channel: Vec<PathBuf>,
        #[command(flatten)]
        frame: FrameArgs,
    },

    /// Observational discord of bipartite states, measuring A.
    Discord {
        #[arg(long, required = true, num_args = 1..)]
        state: Vec<PathBuf>,
        /// POVM on A.
        #[arg(long)]
        povm: PathBuf,
        /// Local dimensions as dA,dB.
        #[arg(long, value_parser = parse_dims)]
        dims: (usize, usize),
    },

    /// Entropies along e^{-iHt}; writes CSV.
    Evolve {
        #[command(flatten)]
        frame: FrameArgs,
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        t_max: f64,
        /// Number of grid points, both ends included.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Macrostate weights, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "state", required_unless_present = "state")]
        macro_weights: Option<Vec<f64>>,
        #[arg(long)]
        state: Option<PathBuf>,
    },

    /// Frames for the special cases.
    Scenario {
        #[command(subcommand)]
        which: Scenario,
    },

    /// Seeded random inputs.
    Sample {
        #[arg(value_enum)]
        what: SampleKind,
        #[arg(long)]
        dim: usize,
        /// Outcome bound for frames, Kraus rank for channels.
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum Scenario {
    /// Basis measurement, uniform prior.
    Coherence {
        #[arg(long)]
        dim: usize,
    },
    /// Gibbs prior with a POVM whose post-processing is trivial.
    Athermality {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        povm: PathBuf,
    },
    /// Isotypic measurement of a finite group representation.
    Asymmetry {
        /// File with {"unitaries": [...]}.
        #[arg(long)]
        rep: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SampleKind {
    State,
    Frame,
    Channel,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected dA,dB")?;
    let a = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    if a == 0 || b == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((a, b))
}
