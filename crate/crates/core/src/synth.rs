//! Synthetic heterogeneous preference data.
//!
//! Each group gets a planted margin matrix built from a shared linear order
//! plus group-specific jitter, optionally with a 3-cycle, pairs whose sign
//! alternates across groups, and a handicapped copy of the top model. Votes are
//! then drawn as Bernoulli outcomes with win probability `½ + ½ M_ab`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::prefdata::{DataError, GroupMargins, MarginMatrix, Outcome, VoteRecord, VoteTable};
use crate::seeds::{substream, Stream};

/// Largest planted margin magnitude, keeping every outcome random.
const MAX_MARGIN: f64 = 0.95;
/// Margin magnitude forced on reversed pairs.
const MIN_REVERSAL: f64 = 0.1;
/// Handicap of the dominated copy of the top model.
const DOMINATED_HANDICAP: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub models: usize,
    pub groups: usize,
    /// Margin of the planted 3-cycle among the top three models in group 0; 0 disables.
    pub cycle_strength: f64,
    /// Pairs whose margin sign alternates between consecutive groups.
    pub reversal_pairs: Vec<(usize, usize)>,
    pub votes_per_group: usize,
    pub seed: u64,
    /// Margin scale of the shared order.
    pub base_margin: f64,
    /// Amplitude of per-group uniform jitter on every entry.
    pub jitter: f64,
    /// Replace the last model by a handicapped copy of model 0.
    pub dominated: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            models: 6,
            groups: 3,
            cycle_strength: 0.3,
            reversal_pairs: vec![(0, 1)],
            votes_per_group: 2000,
            seed: 0,
            base_margin: 0.3,
            jitter: 0.1,
            dominated: false,
        }
    }
}

fn padded(prefix: &str, i: usize, count: usize, min_width: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(min_width);
    format!("{prefix}{i:0width$}")
}

pub fn model_names(m: usize) -> Vec<String> {
    (0..m).map(|i| padded("m", i, m, 2)).collect()
}

pub fn group_names(k: usize) -> Vec<String> {
    (0..k).map(|g| padded("g", g, k, 1)).collect()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.models < 2 || self.groups < 1 {
            return Err(DataError::Invalid("need at least 2 models and 1 group".into()));
        }
        if !(0.0..=1.0).contains(&self.cycle_strength) {
            return Err(DataError::Invalid(format!(
                "cycle strength must lie in [0,1], got {}",
                self.cycle_strength
            )));
        }
        if !(0.0..=1.0).contains(&self.base_margin) || !(0.0..=1.0).contains(&self.jitter) {
            return Err(DataError::Invalid("base margin and jitter must lie in [0,1]".into()));
        }
        if self.cycle_strength > 0.0 && self.models < 3 {
            return Err(DataError::Invalid("a 3-cycle needs at least 3 models".into()));
        }
        for &(i, j) in &self.reversal_pairs {
            if i >= self.models || j >= self.models || i == j {
                return Err(DataError::Invalid(format!("bad reversal pair ({i},{j})")));
            }
        }
        Ok(())
    }
}

/// The planted per-group margin matrices.
pub fn planted_margins(config: &SynthConfig) -> Result<GroupMargins, DataError> {
    config.validate()?;
    let (m, k) = (config.models, config.groups);
    let roster = model_names(m);
    let mut rng = substream(config.seed, Stream::Synth, 0);
    let mut mats = Vec::with_capacity(k);
    for g in 0..k {
        let mut rows = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                let gap = (j - i) as f64 / (m - 1) as f64;
                let noise = if config.jitter > 0.0 {
                    rng.gen_range(-config.jitter..=config.jitter)
                } else {
                    0.0
                };
                rows[i][j] = (config.base_margin * (0.5 + 0.5 * gap) + noise).clamp(-MAX_MARGIN, MAX_MARGIN);
            }
        }
        if g == 0 && config.cycle_strength > 0.0 {
            let c = config.cycle_strength.min(MAX_MARGIN);
            rows[0][1] = c;
            rows[1][2] = c;
            rows[0][2] = -c;
        }
        for &(a, b) in &config.reversal_pairs {
            let (i, j) = (a.min(b), a.max(b));
            let mag = rows[i][j].abs().max(MIN_REVERSAL);
            rows[i][j] = if g % 2 == 0 { mag } else { -mag };
        }
        if config.dominated && m >= 3 {
            let d = m - 1;
            for j in 1..d {
                rows[j][d] = (-rows[0][j] + DOMINATED_HANDICAP).clamp(-MAX_MARGIN, MAX_MARGIN);
            }
            rows[0][d] = DOMINATED_HANDICAP;
        }
        for i in 0..m {
            for j in 0..i {
                rows[i][j] = -rows[j][i];
            }
        }
        mats.push(MarginMatrix::new(roster.clone(), rows)?);
    }
    GroupMargins::from_matrices(group_names(k), mats)
}

/// How many comparisons to draw per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteBudget {
    /// Pairs drawn uniformly at random.
    PerGroup(usize),
    /// Every unordered pair exactly this many times.
    PerPair(usize),
}

/// Draws Bernoulli comparisons from planted matrices. Presentation order is
/// randomized so neither side of a record is privileged.
pub fn sample_votes(planted: &GroupMargins, budget: VoteBudget, seed: u64) -> Result<VoteTable, DataError> {
    let m = planted.num_models();
    if m < 2 {
        return Err(DataError::Invalid("need at least 2 models".into()));
    }
    let mut records = Vec::new();
    for (g, mat) in planted.per_group.iter().enumerate() {
        let mut rng = substream(seed, Stream::Synth, 1 + g as u64);
        let group = &planted.groups[g];
        let mut push = |i: usize, j: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let (a, b) = if rng.gen_bool(0.5) { (i, j) } else { (j, i) };
            let p_a = (0.5 + 0.5 * mat.get(a, b)).clamp(0.0, 1.0);
            let outcome = if rng.gen_bool(p_a) {
                Outcome::AWins
            } else {
                Outcome::BWins
            };
            records.push(VoteRecord::new(&planted.roster[a], &planted.roster[b], outcome, group));
        };
        match budget {
            VoteBudget::PerGroup(n) => {
                for _ in 0..n {
                    let i = rng.gen_range(0..m);
                    let mut j = rng.gen_range(0..m - 1);
                    if j >= i {
                        j += 1;
                    }
                    push(i, j, &mut rng);
                }
            }
            VoteBudget::PerPair(n) => {
                for i in 0..m {
                    for j in i + 1..m {
                        for _ in 0..n {
                            push(i, j, &mut rng);
                        }
                    }
                }
            }
        }
    }
    VoteTable::with_lists(records, planted.roster.clone(), planted.groups.clone())
}

/// Plants matrices from `config` and samples `votes_per_group` comparisons per group.
pub fn synth_generate(config: &SynthConfig) -> Result<VoteTable, DataError> {
    let planted = planted_margins(config)?;
    sample_votes(&planted, VoteBudget::PerGroup(config.votes_per_group), config.seed)
}
