use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Probabilistic and causal logics with summation: evaluate, ground,
/// check satisfiability, check proofs and decode succinct circuits.
#[derive(Parser, Debug)]
#[command(name = "probsum", version, about, long_about = None)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "PROBSUM_JOBS")]
    jobs: Option<usize>,
    /// Write the JSON summary here (`-` for standard output).
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Suppress the human-readable report.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Where variable names and the constant bound come from.
#[derive(Args, Debug, Clone, Default)]
pub struct SigArgs {
    /// Endogenous variables, comma separated (default: read off the input).
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    /// Constants per variable; omit for an unbounded signature.
    #[arg(long)]
    n: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a formula file (one formula per line) and report fragments.
    Parse {
        file: PathBuf,
        #[command(flatten)]
        sig: SigArgs,
    },
    /// Pretty-print a formula, sequent, model, circuit or ETR file.
    Print {
        file: PathBuf,
        #[command(flatten)]
        sig: SigArgs,
    },
    /// Evaluate formulas in a model, printing both sides of each comparison.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
        /// JSON-lines evaluation trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check whether a model satisfies a sequent.
    EntailCheck {
        #[arg(long)]
        model: PathBuf,
        sequent: PathBuf,
    },
    /// Random search for a model where the premises hold and the conclusion fails.
    FindCountermodel {
        sequent: PathBuf,
        #[command(flatten)]
        sig: SigArgs,
        /// Model class: M, M_fin, M_N, each optionally followed by `+`.
        #[arg(long, default_value = "M")]
        class: String,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the countermodel here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Universal closure and sum unfolding.
    Ground {
        file: PathBuf,
        #[arg(long)]
        n: u32,
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        /// Keep coefficient constants symbolic.
        #[arg(long)]
        symbolic: bool,
        /// Report sizes and the growth bound.
        #[arg(long)]
        stats: bool,
    },
    /// Bounded satisfiability through the state-description reduction.
    Sat {
        sequent: PathBuf,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 8)]
        denom: u64,
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        /// Search only positive models.
        #[arg(long)]
        positive: bool,
        /// Purely probabilistic mode (no interventions, single ordering).
        #[arg(long)]
        prob: bool,
        /// Largest support tried.
        #[arg(long, default_value_t = 64)]
        support_cap: usize,
        /// Write the witness model here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive enumeration of tiny models.
    BruteSat {
        sequent: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 4)]
        denom: u64,
        #[arg(long, default_value_t = 3)]
        outcomes: usize,
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        #[arg(long)]
        positive: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a proof script.
    Prove {
        script: PathBuf,
        /// AX, AX_N, AX_fin, with `_closed` and `+Distinct`/`+SumEquals` variants.
        #[arg(long)]
        system: String,
        /// Signature bound for `+Distinct` and `+SumEquals` systems.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = probsum_core::proofs::DEFAULT_N_MAX)]
        nmax: u32,
    },
    /// Sample schema instances against random positive models.
    FuzzSoundness {
        /// Schema name, or `all`.
        #[arg(long, default_value = "all")]
        schema: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the corrupted schemas, which must be caught.
        #[arg(long)]
        mutants: bool,
    },
    /// Boolean circuits and ETR trees.
    Circuit {
        #[command(subcommand)]
        command: CircuitCommand,
    },
    /// Run the acceptance scenarios and print a pass/fail table.
    Corpus {
        /// Run only the scenarios matching this key, number or name.
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value_t = probsum_core::acceptance::DEFAULT_SEED)]
        seed: u64,
        /// Read proof scripts and ETR trees from this directory.
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
        /// List the scenarios and the shipped files without running anything.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Subcommand, Debug)]
enum CircuitCommand {
    /// Evaluate a netlist on a bit string.
    Eval {
        file: PathBuf,
        /// Input bits, first input first (e.g. `0110`).
        #[arg(long)]
        input: String,
    },
    /// Decode the ETR tree computed by a netlist.
    Decode {
        file: PathBuf,
        #[arg(long)]
        width: usize,
    },
    /// Encode an ETR tree (S-expression) as a netlist.
    Encode {
        file: PathBuf,
        /// Address width (default: the smallest that fits).
        #[arg(long)]
        width: Option<usize>,
    },
    /// Bounded search for a real witness of an ETR instance.
    Feasible {
        /// A netlist (with `--width`) or an S-expression tree.
        file: PathBuf,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 4)]
        denom: u64,
        /// Search box `|x_i| <= magnitude`.
        #[arg(long, default_value_t = probsum_core::circuits::ETR_MAGNITUDE)]
        magnitude: u32,
    },
}

/// How a command ended when it did not fail.
pub enum Status {
    Definitive,
    Unknown,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: cannot start {} workers: {}", j, e);
            return ExitCode::from(1);
        }
    }
    let out = commands::Output { json: cli.json.clone(), quiet: cli.quiet };
    match commands::run(cli.command, &out) {
        Ok(Status::Definitive) => ExitCode::SUCCESS,
        Ok(Status::Unknown) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}
