//! Maximal lotteries over a single margin matrix.
//!
//! A maximal lottery is a maximin strategy of the symmetric zero-sum game whose
//! payoff matrix is the margin matrix. The game value is always zero, so the
//! maximal lotteries are exactly the distributions `p` with `pᵀ M e_j >= 0` for
//! every pure opponent `j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpError, LpSolution, LpStatus};
use crate::prefdata::{DataError, MarginMatrix};

/// Probability above which an alternative counts as supported.
pub const SUPPORT_EPS: f64 = 1e-7;
/// Primal feasibility tolerance shared with the LP solver.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LotteryError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("solver returned {status:?}; program:\n{dump}")]
    Solver { status: LpStatus, dump: String },
    #[error("{0}")]
    Invalid(String),
}

/// A distribution over the roster together with the guarantee it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct Lottery {
    pub roster: Vec<String>,
    pub probs: Vec<f64>,
    pub value: f64,
}

impl Lottery {
    pub fn point_mass(roster: Vec<String>, at: usize) -> Self {
        let mut probs = vec![0.0; roster.len()];
        probs[at] = 1.0;
        Self {
            roster,
            probs,
            value: f64::NAN,
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > SUPPORT_EPS)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(LotteryFile::from(self)).expect("lottery serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LotteryFile::from(self)).expect("lottery serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LotteryError> {
        let f: LotteryFile = serde_json::from_str(text).map_err(DataError::from)?;
        if f.roster.len() != f.probs.len() {
            return Err(LotteryError::Invalid("roster and probs differ in length".into()));
        }
        Ok(Self {
            roster: f.roster,
            probs: f.probs,
            value: f.value.unwrap_or(f64::NAN),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LotteryFile {
    roster: Vec<String>,
    probs: Vec<f64>,
    value: Option<f64>,
    #[serde(default)]
    support: Vec<String>,
}

impl Serialize for Lottery {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LotteryFile::from(self).serialize(serializer)
    }
}

impl From<&Lottery> for LotteryFile {
    fn from(l: &Lottery) -> Self {
        Self {
            roster: l.roster.clone(),
            probs: l.probs.clone(),
            value: l.value.is_finite().then_some(l.value),
            support: l.support().into_iter().map(|i| l.roster[i].clone()).collect(),
        }
    }
}

/// Clears round-off below `1e-13` (including tiny negatives) and renormalizes.
pub(crate) fn clean_distribution(raw: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = raw.iter().map(|&x| if x < 1e-13 { 0.0 } else { x }).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// Label-independent order of alternatives: by the sorted entries of each
/// alternative's rows across `mats`, ties kept in index order. Solving in this
/// order makes the solver's output exactly equivariant under relabeling.
pub(crate) fn canonical_order(mats: &[&MarginMatrix]) -> Vec<usize> {
    let m = mats.first().map_or(0, |x| x.dim());
    let keys: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut key = Vec::with_capacity(m * mats.len());
            for mat in mats {
                let mut row: Vec<f64> = (0..m).map(|j| mat.get(i, j)).collect();
                row.sort_by(f64::total_cmp);
                key.extend(row);
            }
            key
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Maximin program over payoff columns: maximize `t` subject to
/// `t <= Σ_i p_i col[i]` for every column, `Σ p = 1`, `p >= 0`.
/// Variables are `p_0..p_{m-1}` then `t`.
pub(crate) fn maximin_program(m: usize, columns: &[Vec<f64>]) -> LinearProgram {
    let mut lp = LinearProgram::new(m + 1);
    lp.set_free(m);
    lp.set_objective(m, 1.0);
    lp.add_eq(&(0..m).map(|i| (i, 1.0)).collect::<Vec<_>>(), 1.0);
    for col in columns {
        let mut terms: Vec<(usize, f64)> = col
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| (i, -c))
            .collect();
        terms.push((m, 1.0));
        lp.add_le(&terms, 0.0);
    }
    lp
}

pub(crate) fn expect_optimal(lp: &LinearProgram, sol: LpSolution) -> Result<LpSolution, LotteryError> {
    if sol.is_optimal() {
        Ok(sol)
    } else {
        Err(LotteryError::Solver {
            status: sol.status,
            dump: lp.to_lp_string(),
        })
    }
}

fn matrix_columns(m: &MarginMatrix) -> Vec<Vec<f64>> {
    let n = m.dim();
    (0..n).map(|j| (0..n).map(|i| m.get(i, j)).collect()).collect()
}

/// A maximal lottery of `m`: the simplex vertex the deterministic solver lands
/// on. `value` is `min_j pᵀ M e_j`, which is zero up to solver tolerance.
pub fn maximal_lottery(m: &MarginMatrix) -> Result<Lottery, LotteryError> {
    let n = m.dim();
    if n == 0 {
        return Err(LotteryError::Invalid("empty roster".into()));
    }
    let order = canonical_order(&[m]);
    let canon = m.permuted(&order);
    let lp = maximin_program(n, &matrix_columns(&canon));
    let sol = expect_optimal(&lp, solve_lp(&lp)?)?;
    // Clean and evaluate in canonical order so relabeling is exact.
    let canon_probs = clean_distribution(&sol.point[..n]);
    let value = canon
        .column_payoffs(&canon_probs)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut probs = vec![0.0; n];
    for (k, &orig) in order.iter().enumerate() {
        probs[orig] = canon_probs[k];
    }
    Ok(Lottery {
        roster: m.roster().to_vec(),
        probs,
        value,
    })
}

/// Alternative beating (strict) or not losing to (weak) every other one.
/// Weak winners are reported by lowest index.
pub fn condorcet_winner(m: &MarginMatrix, strict: bool) -> Option<usize> {
    let n = m.dim();
    (0..n).find(|&i| {
        (0..n)
            .filter(|&j| j != i)
            .all(|j| if strict { m.get(i, j) > 0.0 } else { m.get(i, j) >= 0.0 })
    })
}

/// Largest probability alternative `i` can carry in any maximal lottery.
pub fn max_weight_in_maximal_lottery(m: &MarginMatrix, i: usize) -> Result<f64, LotteryError> {
    let n = m.dim();
    let mut lp = LinearProgram::new(n);
    lp.set_objective(i, 1.0);
    lp.add_eq(&(0..n).map(|k| (k, 1.0)).collect::<Vec<_>>(), 1.0);
    for j in 0..n {
        let terms: Vec<(usize, f64)> = (0..n)
            .filter(|&k| m.get(k, j) != 0.0)
            .map(|k| (k, m.get(k, j)))
            .collect();
        lp.add_ge(&terms, 0.0);
    }
    let sol = expect_optimal(&lp, solve_lp(&lp)?)?;
    Ok(sol.value)
}

/// Alternatives carrying positive probability in at least one maximal lottery.
pub fn bipartisan_set(m: &MarginMatrix) -> Result<Vec<usize>, LotteryError> {
    let weights: Result<Vec<f64>, LotteryError> = (0..m.dim())
        .into_par_iter()
        .map(|i| max_weight_in_maximal_lottery(m, i))
        .collect();
    Ok(weights?
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > SUPPORT_EPS)
        .map(|(i, _)| i)
        .collect())
}

/// Relation between an expanded roster and the original one.
#[derive(Debug, Clone, PartialEq)]
pub struct CloneMap {
    pub original_roster: Vec<String>,
    pub expanded_roster: Vec<String>,
    /// Original index of every expanded alternative (identity on originals).
    pub parent: Vec<usize>,
}

impl CloneMap {
    pub fn parent_of(&self, id: &str) -> Option<&str> {
        let k = self.expanded_roster.iter().position(|x| x == id)?;
        Some(&self.original_roster[self.parent[k]])
    }
}

pub(crate) fn clone_ids(roster: &[String], parent: usize, count: usize) -> Vec<String> {
    (1..=count)
        .map(|c| {
            let mut id = format!("{}#{c}", roster[parent]);
            while roster.contains(&id) {
                id.push('#');
            }
            id
        })
        .collect()
}

/// Appends `handicaps.len()` weak clones of alternative `i`.
///
/// Clone `c` scores `M_ix − h_c` against every original `x ≠ i`, `−h_c` against
/// its parent and `h_{c'} − h_c` against clone `c'`, so it is pointwise no better
/// than its parent. Entries leaving `[−1, 1]` are rejected.
pub fn expand_clones(m: &MarginMatrix, i: usize, handicaps: &[f64]) -> Result<(MarginMatrix, CloneMap), LotteryError> {
    let n = m.dim();
    if i >= n {
        return Err(LotteryError::Invalid(format!("clone parent {i} outside roster of {n}")));
    }
    if handicaps.is_empty() {
        return Err(LotteryError::Invalid("at least one clone is required".into()));
    }
    if handicaps.iter().any(|h| !h.is_finite() || *h < 0.0) {
        return Err(LotteryError::Invalid("handicaps must be nonnegative".into()));
    }
    let l = handicaps.len();
    let total = n + l;
    let mut rows = vec![vec![0.0; total]; total];
    for a in 0..n {
        for b in 0..n {
            rows[a][b] = m.get(a, b);
        }
    }
    for (c, &h) in handicaps.iter().enumerate() {
        let ci = n + c;
        for x in 0..n {
            let v = if x == i { -h } else { m.get(i, x) - h };
            rows[ci][x] = v;
            rows[x][ci] = -v;
        }
        for (c2, &h2) in handicaps.iter().enumerate().skip(c + 1) {
            let v = h2 - h;
            rows[ci][n + c2] = v;
            rows[n + c2][ci] = -v;
        }
    }
    for (a, row) in rows.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            if v.abs() > 1.0 {
                return Err(LotteryError::Invalid(format!(
                    "clone expansion puts entry ({a},{b}) = {v} outside [-1,1]; shrink the handicap"
                )));
            }
        }
    }
    let mut roster = m.roster().to_vec();
    roster.extend(clone_ids(m.roster(), i, l));
    let expanded = MarginMatrix::new(roster.clone(), rows)?;
    let mut parent: Vec<usize> = (0..n).collect();
    parent.extend(std::iter::repeat_n(i, l));
    Ok((
        expanded,
        CloneMap {
            original_roster: m.roster().to_vec(),
            expanded_roster: roster,
            parent,
        },
    ))
}

/// Moves clone mass onto the parent. The value is carried over unchanged.
pub fn project_lottery(expanded: &Lottery, map: &CloneMap) -> Result<Lottery, LotteryError> {
    if expanded.roster != map.expanded_roster {
        return Err(LotteryError::Invalid("lottery is not on the expanded roster".into()));
    }
    let mut probs = vec![0.0; map.original_roster.len()];
    for (k, &p) in expanded.probs.iter().enumerate() {
        probs[map.parent[k]] += p;
    }
    Ok(Lottery {
        roster: map.original_roster.clone(),
        probs,
        value: expanded.value,
    })
}
