use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxlot::harness::Opponent;
use maxlot::prefdata::{TiePolicy, VoteFormat};

/// Maximal and distributionally robust lotteries over pairwise preference data.
///
/// Exit codes: 0 success, 2 input error, 3 infeasible constraints, 4 solver failure.
/// Set RUST_LOG (e.g. RUST_LOG=info) for diagnostics on stderr.
#[derive(Debug, Parser)]
#[command(name = "maxlot", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a vote log and write per-group margin matrices as JSON.
    Ingest(IngestArgs),
    /// Maximal lottery of one group or of a pooled mixture.
    Ml(MlArgs),
    /// Distributionally robust lottery over a total-variation ball of group mixtures.
    Drl(DrlArgs),
    /// Radius sweep with bootstrap error bars on a train/test split.
    Sweep(SweepArgs),
    /// Robust lotteries under a range of expected-cost budgets.
    Frontier(FrontierArgs),
    /// Monte Carlo check of the data-driven radius and its regret bound.
    RegretSim(RegretArgs),
    /// All tables (reversal rates, sweep, gap, frontier) plus a JSON summary.
    Report(ReportArgs),
    /// Generate a synthetic vote log from planted group matrices.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for VoteFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => VoteFormat::Csv,
            FormatArg::Jsonl => VoteFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TieArg {
    /// Ties are ignored.
    Drop,
    /// A tie counts as half a win for each side.
    #[value(name = "half_win", alias = "half-win")]
    HalfWin,
}

impl From<TieArg> for TiePolicy {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::Drop => TiePolicy::Drop,
            TieArg::HalfWin => TiePolicy::HalfWin,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OpponentArg {
    /// Each group's best pure response.
    Worst,
    /// The uniform lottery over all models.
    Uniform,
}

impl From<OpponentArg> for Opponent {
    fn from(o: OpponentArg) -> Self {
        match o {
            OpponentArg::Worst => Opponent::Worst,
            OpponentArg::Uniform => Opponent::Uniform,
        }
    }
}

/// Vote log input and margin construction.
#[derive(Debug, Args)]
pub struct VoteInput {
    /// Vote log (CSV `model_a,model_b,winner,group[,weight]` or JSON lines).
    #[arg(long, value_name = "PATH")]
    pub votes: PathBuf,
    /// Input format; inferred from the extension when omitted (.jsonl/.ndjson are JSON lines).
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Laplace smoothing added to both sides of every pairwise count.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// How ties are counted.
    #[arg(long, value_enum, default_value = "drop")]
    pub tie_policy: TieArg,
    /// Keep only these groups (comma separated).
    #[arg(long, value_delimiter = ',', value_name = "G1,G2")]
    pub groups: Vec<String>,
}

/// Mixture over groups; the vote shares recorded in the margins file by default.
#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Nonnegative group masses in file order (comma separated, normalized to sum 1).
    #[arg(long, value_delimiter = ',', value_name = "W1,W2")]
    pub weights: Vec<f64>,
}

/// Radius of the total-variation ball.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct RhoChoice {
    /// Fixed radius in [0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Data-driven radius from the total vote count in the margins file and --delta.
    #[arg(long)]
    pub rho_auto: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: VoteInput,
    /// Output margins JSON.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MlArgs {
    /// Margins JSON written by `ingest`.
    #[arg(long, value_name = "PATH")]
    pub margins: PathBuf,
    /// Use a single group's matrix.
    #[arg(long, conflicts_with = "weights")]
    pub group: Option<String>,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Also write the result JSON here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DrlArgs {
    /// Margins JSON written by `ingest`.
    #[arg(long, value_name = "PATH")]
    pub margins: PathBuf,
    #[command(flatten)]
    pub rho: RhoChoice,
    /// Failure probability for --rho-auto.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Center of the ball.
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Upper bound on the expected cost of the lottery (needs --costs).
    #[arg(long, requires = "costs")]
    pub budget: Option<f64>,
    /// CSV of `model,cost` rows.
    #[arg(long, value_name = "PATH", requires = "budget")]
    pub costs: Option<PathBuf>,
    /// Also return a sparse lottery within this robust value of the optimum.
    #[arg(long, value_name = "EPS", conflicts_with = "budget")]
    pub sparsify: Option<f64>,
    /// Sampling attempts for --sparsify.
    #[arg(long, default_value_t = maxlot::robust::DEFAULT_SPARSIFY_TRIALS)]
    pub trials: usize,
    /// Seed for --sparsify.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report JSON here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Sweep settings shared by `sweep` and `report`.
#[derive(Debug, Args)]
pub struct SweepSettings {
    /// Share of votes used for training.
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    /// Radii to evaluate (comma separated); defaults to 0, 0.1, ..., 1.
    #[arg(long, value_delimiter = ',', value_name = "R1,R2")]
    pub grid: Vec<f64>,
    /// Bootstrap replicates per split; 0 scores each split once, as is.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Seed for the split and the bootstrap.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Opponent used to score a lottery against each group.
    #[arg(long, value_enum, default_value = "worst")]
    pub opponent: OpponentArg,
    /// Resample within each group instead of over the whole table.
    #[arg(long)]
    pub stratified: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: VoteInput,
    #[command(flatten)]
    pub sweep: SweepSettings,
    /// Directory for sweep.csv, sweep.json and gap.csv.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    /// Margins JSON written by `ingest`.
    #[arg(long, value_name = "PATH")]
    pub margins: PathBuf,
    /// CSV of `model,cost` rows.
    #[arg(long, value_name = "PATH")]
    pub costs: PathBuf,
    /// Budgets to solve for (comma separated).
    #[arg(long, value_delimiter = ',', required = true, value_name = "B1,B2")]
    pub budgets: Vec<f64>,
    #[command(flatten)]
    pub rho: RhoChoice,
    /// Failure probability for --rho-auto.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Center of the ball.
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Directory for frontier.csv and frontier.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegretArgs {
    /// Margins JSON taken as the true per-group matrices.
    #[arg(long, value_name = "PATH")]
    pub margins: PathBuf,
    /// True group mixture (comma separated); the file's vote shares by default.
    #[arg(long, value_delimiter = ',', value_name = "W1,W2")]
    pub true_weights: Vec<f64>,
    /// Votes drawn per trial.
    #[arg(long, default_value_t = 2000)]
    pub n: u64,
    /// Failure probability of the radius.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Number of simulated datasets.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Seed for the simulated group labels.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for regret.csv and regret.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

/// Planted synthetic data.
#[derive(Debug, Args)]
pub struct SynthSettings {
    /// Number of synthetic models.
    #[arg(long, default_value_t = 6)]
    pub models: usize,
    /// Number of synthetic groups.
    #[arg(long, default_value_t = 3)]
    pub num_groups: usize,
    /// Comparisons sampled per group.
    #[arg(long, default_value_t = 2000)]
    pub votes_per_group: usize,
    /// Strength of a rock-paper-scissors cycle among the top three models in the first group.
    #[arg(long, default_value_t = 0.3)]
    pub cycle_strength: f64,
    /// Amplitude of per-group noise on every margin.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    /// Seed for the planted matrices and the sampled votes.
    #[arg(long, default_value_t = 0)]
    pub synth_seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub synth: SynthSettings,
    /// Output vote log (CSV).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also write the planted matrices as a margins JSON.
    #[arg(long, value_name = "PATH")]
    pub planted_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Vote log; synthetic data is generated when omitted.
    #[arg(long, value_name = "PATH")]
    pub votes: Option<PathBuf>,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum, requires = "votes")]
    pub format: Option<FormatArg>,
    /// Laplace smoothing added to both sides of every pairwise count.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// How ties are counted.
    #[arg(long, value_enum, default_value = "drop")]
    pub tie_policy: TieArg,
    /// Keep only these groups (comma separated).
    #[arg(long, value_delimiter = ',', value_name = "G1,G2")]
    pub groups: Vec<String>,
    #[command(flatten)]
    pub synth: SynthSettings,
    #[command(flatten)]
    pub sweep: SweepSettings,
    /// Radius for the robust lottery and the frontier; data-driven from --delta when omitted.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Failure probability for the data-driven radius.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// CSV of `model,cost` rows; enables frontier.csv.
    #[arg(long, value_name = "PATH")]
    pub costs: Option<PathBuf>,
    /// Budgets for the frontier; five evenly spaced between the cheapest and dearest model when omitted.
    #[arg(long, value_delimiter = ',', value_name = "B1,B2", requires = "costs")]
    pub budgets: Vec<f64>,
    /// Rows in the reversal-rate table.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}
