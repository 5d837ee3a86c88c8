//! `netlock` command-line driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netlock::lock::HeuristicKind;

use config::RunConfig;

/// Exit statuses: usage problems, bad inputs, broken internal invariants.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<netlock::Error> for CliError {
    fn from(e: netlock::Error) -> Self {
        use netlock::Error as E;
        match e {
            E::ReplayDiverged(_) | E::Diverged(_) | E::NoMembers | E::OutOfRange(_) | E::Disconnected => {
                CliError::Internal(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "netlock", version, about = "Lock, re-synthesise and attack gate-level netlists")]
struct Cli {
    /// TOML file with run settings; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Insert key-gates into a bench netlist.
    Lock {
        #[command(flatten)]
        io: Io,
        /// Key-record sidecar (default: `<out>.keys.json`).
        #[arg(long)]
        keys: Option<PathBuf>,
        #[command(flatten)]
        key: KeyOpts,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Apply the rewrite rules to a fixpoint.
    Resynth {
        #[command(flatten)]
        io: Io,
        /// Rewrite log (default: `<out>.log.jsonl`).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        max_passes: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Manufacture training records by re-locking a locked netlist.
    Dataset {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        key: KeyOpts,
        #[command(flatten)]
        data: DataOpts,
    },
    /// Fit the change predictors and reconstruction networks.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        learn: LearnOpts,
    },
    /// Attack a locked netlist (`--in`), or evaluate on originals the
    /// harness locks itself (`--original`).
    Attack {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reuse trained models instead of training.
        #[arg(long)]
        models: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalOpts,
        #[command(flatten)]
        key: KeyOpts,
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        learn: LearnOpts,
        #[command(flatten)]
        boost: BoostOpts,
    },
    /// Evaluate the attack on originals the harness locks itself.
    Eval {
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalOpts,
        #[command(flatten)]
        key: KeyOpts,
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        learn: LearnOpts,
        #[command(flatten)]
        boost: BoostOpts,
    },
    /// Render a JSON report as csv, json or md.
    Report {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        format: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Io {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KeyOpts {
    /// Key size.
    #[arg(long)]
    bits: Option<usize>,
    /// Explicit key bits, e.g. 0110.
    #[arg(long)]
    key: Option<String>,
    /// Insertion heuristic(s): rnd, cs, cy, sll.
    #[arg(long, value_delimiter = ',')]
    heuristic: Vec<HeuristicKind>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DataOpts {
    /// Re-locking rounds for training data.
    #[arg(long)]
    instances: Option<usize>,
    /// Key size per re-locking round (default: the victim's key size).
    #[arg(long)]
    instance_bits: Option<usize>,
    #[arg(long)]
    max_passes: Option<usize>,
}

#[derive(Args, Debug)]
struct LearnOpts {
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Hidden layer widths, e.g. 128 or 64,32.
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Seed of the learners.
    #[arg(long)]
    train_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvalOpts {
    /// Original circuits: bundled names or bench paths.
    #[arg(long, value_delimiter = ',')]
    original: Vec<String>,
    /// `key-ratio 0.5,1,2,3`: scale `--bits` by each ratio.
    #[arg(long, num_args = 2, value_names = ["KIND", "VALUES"])]
    sweep: Vec<String>,
}

#[derive(Args, Debug)]
struct BoostOpts {
    /// Only the boosted attack.
    #[arg(long, conflicts_with = "no_boost")]
    boost: bool,
    /// Only the unboosted attack.
    #[arg(long)]
    no_boost: bool,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl Io {
    fn apply(self, c: &mut RunConfig) {
        set_opt(&mut c.input, self.input);
        set_opt(&mut c.output, self.out);
    }
}

impl KeyOpts {
    fn apply(self, c: &mut RunConfig) {
        set_opt(&mut c.bits, self.bits);
        set_opt(&mut c.key, self.key);
        if !self.heuristic.is_empty() {
            c.heuristics = self.heuristic;
        }
        set(&mut c.seed, self.seed);
    }
}

impl DataOpts {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.instances, self.instances);
        set_opt(&mut c.instance_bits, self.instance_bits);
        set(&mut c.max_passes, self.max_passes);
    }
}

impl LearnOpts {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.forest.trees, self.trees);
        set(&mut c.forest.max_depth, self.max_depth);
        set(&mut c.forest.min_leaf, self.min_leaf);
        if !self.hidden.is_empty() {
            c.network.hidden = self.hidden;
        }
        set(&mut c.network.epochs, self.epochs);
        set(&mut c.network.batch, self.batch);
        set(&mut c.network.learning_rate, self.learning_rate);
        if let Some(s) = self.train_seed {
            c.forest.seed = s;
            c.network.seed = s;
        }
    }
}

impl EvalOpts {
    fn apply(self, c: &mut RunConfig) -> Result<(), CliError> {
        if !self.original.is_empty() {
            c.originals = self.original;
        }
        if let [kind, values] = self.sweep.as_slice() {
            if kind != "key-ratio" {
                return Err(CliError::Usage(format!("unknown sweep `{kind}`")));
            }
            c.key_ratios = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .trim_end_matches('x')
                        .parse::<f64>()
                        .ok()
                        .filter(|r| *r > 0.0)
                        .ok_or_else(|| CliError::Usage(format!("bad key ratio `{v}`")))
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }
}

impl BoostOpts {
    fn apply(self, c: &mut RunConfig) {
        if self.boost {
            c.boost = Some(true);
        } else if self.no_boost {
            c.boost = Some(false);
        }
    }
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    set_opt(&mut c.workers, cli.workers);
    match cli.command {
        Command::Lock { io, keys, key, budget } => {
            c.command = "lock".into();
            io.apply(&mut c);
            set_opt(&mut c.keys, keys);
            key.apply(&mut c);
            set(&mut c.budget, budget);
        }
        Command::Resynth { io, log, max_passes, budget } => {
            c.command = "resynth".into();
            io.apply(&mut c);
            set_opt(&mut c.log, log);
            set(&mut c.max_passes, max_passes);
            set(&mut c.budget, budget);
        }
        Command::Dataset { io, key, data } => {
            c.command = "dataset".into();
            io.apply(&mut c);
            key.apply(&mut c);
            data.apply(&mut c);
        }
        Command::Train { dataset, out, learn } => {
            c.command = "train".into();
            set_opt(&mut c.dataset, dataset);
            set_opt(&mut c.output, out);
            learn.apply(&mut c);
        }
        Command::Attack { input, out, models, eval, key, data, learn, boost } => {
            c.command = "attack".into();
            set_opt(&mut c.input, input);
            set_opt(&mut c.output, out);
            set_opt(&mut c.models, models);
            eval.apply(&mut c)?;
            key.apply(&mut c);
            data.apply(&mut c);
            learn.apply(&mut c);
            boost.apply(&mut c);
        }
        Command::Eval { out, eval, key, data, learn, boost } => {
            c.command = "eval".into();
            set_opt(&mut c.output, out);
            eval.apply(&mut c)?;
            key.apply(&mut c);
            data.apply(&mut c);
            learn.apply(&mut c);
            boost.apply(&mut c);
        }
        Command::Report { io, format } => {
            c.command = "report".into();
            io.apply(&mut c);
            set_opt(&mut c.format, format);
        }
    }
    Ok(c)
}

fn run(c: &RunConfig) -> Result<(), CliError> {
    if let Some(w) = c.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match c.command.as_str() {
        "lock" => commands::lock(c),
        "resynth" => commands::resynth(c),
        "dataset" => commands::dataset(c),
        "train" => commands::train(c),
        "attack" if c.originals.is_empty() => commands::attack(c),
        "attack" | "eval" => commands::eval(c),
        "report" => commands::report(c),
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match resolve(cli).and_then(|c| run(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
