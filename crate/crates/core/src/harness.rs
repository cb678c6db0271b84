//! Experiment protocols: radius sweeps with bootstrap error bars,
//! generalization gaps, cost frontiers, and regret Monte Carlo.
//!
//! Independent tasks (grid points, replicates, budgets, trials) run in
//! parallel; results are always collected in index order, so output depends
//! only on the inputs and the seed.

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lottery::Lottery;
use crate::prefdata::{
    bootstrap_resample_with, build_margins, empirical_weights, pool, pooled_matrix, reversal_rate,
    stratified_resample_with, DataError, GroupMargins, MarginMatrix, MixtureWeights, TiePolicy, VoteTable,
};
use crate::robust::{
    inner_min_value, regret_bound, rho_from_data, robust_lottery, AmbiguitySet, LotteryConstraint, RobustError,
};
use crate::seeds::{substream, Stream};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error("{0}")]
    Invalid(String),
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Opponent used when scoring a lottery against one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Opponent {
    /// The group's best pure response: `½ + ½ min_j pᵀ M e_j`.
    #[default]
    Worst,
    /// The uniform lottery over the roster: `½ + ½ pᵀ M u`.
    Uniform,
}

/// Win rate of `p` under `m` against the chosen opponent.
pub fn score(p: &[f64], m: &MarginMatrix, opponent: Opponent) -> f64 {
    let payoffs = m.column_payoffs(p);
    let v = match opponent {
        Opponent::Worst => payoffs.iter().cloned().fold(f64::INFINITY, f64::min),
        Opponent::Uniform => payoffs.iter().sum::<f64>() / payoffs.len() as f64,
    };
    (0.5 + 0.5 * v).clamp(0.0, 1.0)
}

/// `min_k min_j pᵀ M^(k) e_j`.
pub fn worst_group_value(p: &[f64], gm: &GroupMargins) -> f64 {
    gm.per_group
        .iter()
        .flat_map(|m| m.column_payoffs(p))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rho: f64,
    pub split: Split,
    pub overall: Estimate,
    /// In group order.
    pub per_group: Vec<Estimate>,
    pub worst_group: Estimate,
    /// Lottery solved on the training margins at this radius.
    pub lottery: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid: Vec<f64>,
    /// Replicates per split; 0 evaluates the tables as given.
    pub bootstrap_n: usize,
    pub seed: u64,
    pub eta: f64,
    pub tie_policy: TiePolicy,
    pub opponent: Opponent,
    /// Resample within groups instead of over the whole table.
    pub stratified: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            bootstrap_n: 200,
            seed: 0,
            eta: 1.0,
            tie_policy: TiePolicy::Drop,
            opponent: Opponent::Worst,
            stratified: false,
        }
    }
}

/// Margins and weights of one evaluation replicate.
struct Replicate {
    gm: GroupMargins,
    pooled_weights: MixtureWeights,
}

fn replicates(votes: &VoteTable, opts: &SweepOptions, offset: u64) -> Result<Vec<Replicate>, HarnessError> {
    let build = |table: &VoteTable| -> Result<Replicate, HarnessError> {
        let gm = build_margins(table, opts.eta, opts.tie_policy)?;
        Ok(Replicate {
            pooled_weights: empirical_weights(table)?,
            gm,
        })
    };
    if opts.bootstrap_n == 0 {
        return Ok(vec![build(votes)?]);
    }
    (0..opts.bootstrap_n)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(opts.seed, Stream::Bootstrap, offset + b as u64);
            let table = if opts.stratified {
                stratified_resample_with(votes, &mut rng)?
            } else {
                bootstrap_resample_with(votes, &mut rng)?
            };
            build(&table)
        })
        .collect()
}

fn evaluate(
    p: &[f64],
    reps: &[Replicate],
    opponent: Opponent,
) -> Result<(Estimate, Vec<Estimate>, Estimate), HarnessError> {
    let k = reps[0].gm.num_groups();
    let mut overall = Vec::with_capacity(reps.len());
    let mut groups = vec![Vec::with_capacity(reps.len()); k];
    let mut worst = Vec::with_capacity(reps.len());
    for rep in reps {
        let pooled = pooled_matrix(&rep.gm, &rep.pooled_weights)?;
        overall.push(score(p, &pooled, opponent));
        let mut lo = f64::INFINITY;
        for (g, m) in rep.gm.per_group.iter().enumerate() {
            let s = score(p, m, opponent);
            groups[g].push(s);
            lo = lo.min(s);
        }
        worst.push(lo);
    }
    Ok((
        Estimate::from_samples(&overall),
        groups.iter().map(|xs| Estimate::from_samples(xs)).collect(),
        Estimate::from_samples(&worst),
    ))
}

/// For every radius in the grid, solves the robust lottery on the training
/// margins (centered at the training group shares) and scores it on bootstrap
/// replicates of both splits. Returns a train and a test point per radius.
pub fn sweep_rho(train: &VoteTable, test: &VoteTable, opts: &SweepOptions) -> Result<Vec<SweepPoint>, HarnessError> {
    if opts.grid.is_empty() {
        return Err(HarnessError::Invalid("empty radius grid".into()));
    }
    if let Some(r) = opts.grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(HarnessError::Invalid(format!("radius {r} outside [0,1]")));
    }
    if train.is_empty() || test.is_empty() {
        return Err(DataError::Empty.into());
    }
    let test = VoteTable::with_lists(test.records.clone(), train.roster.clone(), train.groups.clone())
        .map_err(|e| HarnessError::Invalid(format!("test votes do not fit the training roster: {e}")))?;
    let gm = build_margins(train, opts.eta, opts.tie_policy)?;
    let center = empirical_weights(train)?;

    let lotteries: Vec<Vec<f64>> = opts
        .grid
        .par_iter()
        .map(|&rho| {
            let amb = AmbiguitySet::tv_ball(gm.clone(), center.clone(), rho)?;
            Ok(robust_lottery(&amb, &[])?.lottery.probs)
        })
        .collect::<Result<_, RobustError>>()?;

    // Train replicates use a disjoint block of bootstrap indices.
    let train_reps = replicates(train, opts, 1 << 32)?;
    let test_reps = replicates(&test, opts, 0)?;
    let mut out = Vec::with_capacity(2 * opts.grid.len());
    for (&rho, p) in opts.grid.iter().zip(&lotteries) {
        for (split, reps) in [(Split::Train, &train_reps), (Split::Test, &test_reps)] {
            let (overall, per_group, worst_group) = evaluate(p, reps, opts.opponent)?;
            out.push(SweepPoint {
                rho,
                split,
                overall,
                per_group,
                worst_group,
                lottery: p.clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPoint {
    pub rho: f64,
    pub gap: f64,
}

/// Train minus test overall win rate, per radius.
pub fn generalization_gap(train: &[SweepPoint], test: &[SweepPoint]) -> Result<Vec<GapPoint>, HarnessError> {
    if train.len() != test.len() || train.iter().zip(test).any(|(a, b)| a.rho != b.rho) {
        return Err(HarnessError::Invalid(
            "train and test sweeps use different radius grids".into(),
        ));
    }
    Ok(train
        .iter()
        .zip(test)
        .map(|(a, b)| GapPoint {
            rho: a.rho,
            gap: a.overall.mean - b.overall.mean,
        })
        .collect())
}

/// Splits a combined sweep into its train and test points.
pub fn split_points(points: &[SweepPoint]) -> (Vec<SweepPoint>, Vec<SweepPoint>) {
    points.iter().cloned().partition(|p| p.split == Split::Train)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub budget: f64,
    pub feasible: bool,
    pub lottery: Option<Lottery>,
    /// `½ + ½ v*` under the budget.
    pub worst_case_win_rate: Option<f64>,
    pub expected_cost: Option<f64>,
}

/// Robust lotteries under expected-cost budgets `Σ_i c_i p_i <= B`.
pub fn cost_frontier(
    gm: &GroupMargins,
    center: &MixtureWeights,
    rho: f64,
    costs: &[f64],
    budgets: &[f64],
) -> Result<Vec<FrontierPoint>, HarnessError> {
    if costs.len() != gm.num_models() {
        return Err(HarnessError::Invalid(format!(
            "{} costs for {} models",
            costs.len(),
            gm.num_models()
        )));
    }
    if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(HarnessError::Invalid("costs must be finite and nonnegative".into()));
    }
    let amb = AmbiguitySet::tv_ball(gm.clone(), center.clone(), rho)?;
    let min_cost = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    budgets
        .par_iter()
        .map(|&budget| {
            let infeasible = FrontierPoint {
                budget,
                feasible: false,
                lottery: None,
                worst_case_win_rate: None,
                expected_cost: None,
            };
            if budget < min_cost {
                return Ok(infeasible);
            }
            match robust_lottery(&amb, &[LotteryConstraint::budget(costs, budget)]) {
                Ok(rep) => {
                    let cost = rep.lottery.probs.iter().zip(costs).map(|(p, c)| p * c).sum();
                    Ok(FrontierPoint {
                        budget,
                        feasible: true,
                        worst_case_win_rate: Some(0.5 + 0.5 * rep.robust_value),
                        expected_cost: Some(cost),
                        lottery: Some(rep.lottery),
                    })
                }
                Err(RobustError::Infeasible) => Ok(infeasible),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretSample {
    pub trial: usize,
    pub rho_used: f64,
    pub regret: f64,
    /// Whether the true mixture lies in the ball around the estimate.
    pub covered: bool,
    pub bound: f64,
    pub tv_error: f64,
}

/// Draws `n` group labels from `w_star` per trial, solves the robust lottery at
/// the data-driven radius around the estimated shares, and measures its
/// shortfall `−v(p̂, w*)` under the true pooled matrix.
pub fn regret_simulation(
    gm: &GroupMargins,
    w_star: &MixtureWeights,
    n: u64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<RegretSample>, HarnessError> {
    let k = gm.num_groups();
    if w_star.len() != k {
        return Err(HarnessError::Invalid(format!(
            "{} true weights for {k} groups",
            w_star.len()
        )));
    }
    let rho = rho_from_data(n, k, delta)?;
    let bound = regret_bound(n, k, delta);
    let truth = AmbiguitySet::singleton(pool(&gm.per_group, w_star.as_slice())?);
    let labels =
        WeightedIndex::new(w_star.as_slice()).map_err(|e| HarnessError::Invalid(format!("true weights: {e}")))?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(seed, Stream::Regret, trial as u64);
            let mut counts = vec![0.0; k];
            for _ in 0..n {
                counts[labels.sample(&mut rng)] += 1.0;
            }
            let w_hat = MixtureWeights::normalized(&counts)?;
            let amb = AmbiguitySet::tv_ball(gm.clone(), w_hat.clone(), rho)?;
            let p_hat = robust_lottery(&amb, &[])?.lottery;
            let regret = -inner_min_value(&p_hat.probs, &truth)?;
            let tv_error = w_hat.tv_distance(w_star);
            Ok(RegretSample {
                trial,
                rho_used: rho,
                regret,
                covered: tv_error <= rho,
                bound,
                tv_error,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversalRow {
    pub model_i: String,
    pub model_j: String,
    pub rate: f64,
}

/// Model pairs sorted by reversal rate (highest first, then by index), truncated to `top`.
pub fn reversal_table(gm: &GroupMargins, w: &MixtureWeights, top: usize) -> Result<Vec<ReversalRow>, HarnessError> {
    let m = gm.num_models();
    let mut rows = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            rows.push((i, j, reversal_rate(gm, w, i, j)?));
        }
    }
    rows.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    Ok(rows
        .into_iter()
        .take(top)
        .map(|(i, j, rate)| ReversalRow {
            model_i: gm.roster[i].clone(),
            model_j: gm.roster[j].clone(),
            rate,
        })
        .collect())
}
