use maxlot::harness::HarnessError;
use maxlot::lottery::LotteryError;
use maxlot::prefdata::DataError;
use maxlot::robust::RobustError;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable/malformed input (exit 2).
    Input(String),
    /// Constraints admit no lottery (exit 3).
    Infeasible(String),
    /// The solver or a sampling procedure failed (exit 4).
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Solver(_) => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LotteryError> for CliError {
    fn from(e: LotteryError) -> Self {
        match e {
            LotteryError::Data(d) => d.into(),
            LotteryError::Invalid(m) => CliError::Input(m),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<RobustError> for CliError {
    fn from(e: RobustError) -> Self {
        match e {
            RobustError::Data(d) => d.into(),
            RobustError::Lottery(l) => l.into(),
            RobustError::Infeasible => CliError::Infeasible(e.to_string()),
            RobustError::Invalid(_) | RobustError::RadiusTooLarge { .. } => CliError::Input(e.to_string()),
            RobustError::Lp(_) | RobustError::SparsifyFailed { .. } => CliError::Solver(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Data(d) => d.into(),
            HarnessError::Robust(r) => r.into(),
            HarnessError::Invalid(m) => CliError::Input(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
