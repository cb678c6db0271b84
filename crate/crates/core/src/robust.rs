//! Robust lotteries over ambiguity sets of margin matrices.
//!
//! Two representations are supported:
//!
//! * **TV ball**: mixtures `M(w) = Σ_k w_k M^(k)` of per-group matrices with
//!   `½‖w − w₀‖₁ <= ρ`. The robust lottery is computed from a single LP with
//!   `O(mK)` variables obtained by dualizing the inner minimization over `w`
//!   separately for every pure opponent.
//! * **Vertex hull**: the convex hull of an explicit list of matrices. The
//!   robust value is concave in the matrix, so the inner minimum is attained at a
//!   listed vertex and the program has one row per (vertex, opponent).
//!
//! For small radii (`ρ <= ρ₀ = min(min_k w₀_k, 1 − max_k w₀_k)`) the inner
//! minimum over the ball has the closed form `w₀·c − ρ (max_k c_k − min_k c_k)`.

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lottery::{
    canonical_order, clean_distribution, clone_ids, expand_clones, expect_optimal, maximin_program, CloneMap, Lottery,
    LotteryError, SUPPORT_EPS,
};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::prefdata::{pool, DataError, GroupMargins, MarginMatrix, MixtureWeights};
use crate::seeds::{substream, Stream};

/// Relaxation of the optimal value when probing the set of robust lotteries.
/// An alternative trailing the optimum by margin `g` can pick up spurious
/// weight up to `slack / g`, so this sits well below `SUPPORT_EPS`.
pub const RBP_VALUE_SLACK: f64 = 1e-10;
/// Margin entries within this distance of zero count as zero.
pub const ENTRY_TOL: f64 = 1e-12;
/// Default number of sampling rounds for [`sparsify`].
pub const DEFAULT_SPARSIFY_TRIALS: usize = 30;

#[derive(Debug, Error)]
pub enum RobustError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Lottery(#[from] LotteryError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("extra constraints on the lottery are infeasible")]
    Infeasible,
    #[error("{0}")]
    Invalid(String),
    #[error("vertex enumeration only for small radius (radius {radius} > threshold {threshold})")]
    RadiusTooLarge { radius: f64, threshold: f64 },
    #[error("no sparse sample reached the target {target} in {trials} trials; best value {best}")]
    SparsifyFailed { target: f64, best: f64, trials: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmbiguitySet {
    TvBall {
        center: MixtureWeights,
        radius: f64,
        margins: GroupMargins,
    },
    VertexHull {
        matrices: Vec<MarginMatrix>,
    },
}

impl AmbiguitySet {
    pub fn tv_ball(margins: GroupMargins, center: MixtureWeights, radius: f64) -> Result<Self, RobustError> {
        if center.len() != margins.num_groups() {
            return Err(RobustError::Invalid(format!(
                "center has {} weights for {} groups",
                center.len(),
                margins.num_groups()
            )));
        }
        if !(0.0..=1.0).contains(&radius) {
            return Err(RobustError::Invalid(format!("radius must lie in [0,1], got {radius}")));
        }
        Ok(Self::TvBall {
            center,
            radius,
            margins,
        })
    }

    pub fn vertex_hull(matrices: Vec<MarginMatrix>) -> Result<Self, RobustError> {
        let first = matrices
            .first()
            .ok_or_else(|| RobustError::Invalid("vertex hull needs at least one matrix".into()))?;
        if matrices.iter().any(|m| m.roster() != first.roster()) {
            return Err(RobustError::Invalid("hull matrices use different rosters".into()));
        }
        Ok(Self::VertexHull { matrices })
    }

    pub fn singleton(m: MarginMatrix) -> Self {
        Self::VertexHull { matrices: vec![m] }
    }

    pub fn roster(&self) -> &[String] {
        match self {
            Self::TvBall { margins, .. } => &margins.roster,
            Self::VertexHull { matrices } => matrices[0].roster(),
        }
    }

    pub fn dim(&self) -> usize {
        self.roster().len()
    }

    /// Matrices whose rows define the set: group matrices or hull vertices.
    fn generators(&self) -> &[MarginMatrix] {
        match self {
            Self::TvBall { margins, .. } => &margins.per_group,
            Self::VertexHull { matrices } => matrices,
        }
    }

    fn permuted(&self, order: &[usize]) -> Self {
        match self {
            Self::TvBall {
                center,
                radius,
                margins,
            } => {
                let mut g = margins.clone();
                g.per_group = margins.per_group.iter().map(|m| m.permuted(order)).collect();
                g.roster = g.per_group[0].roster().to_vec();
                Self::TvBall {
                    center: center.clone(),
                    radius: *radius,
                    margins: g,
                }
            }
            Self::VertexHull { matrices } => Self::VertexHull {
                matrices: matrices.iter().map(|m| m.permuted(order)).collect(),
            },
        }
    }
}

/// Minimizes `w·coeffs` over `{w ∈ Δ(K) : ½‖w − center‖₁ <= radius}`.
///
/// Uses the closed form when `radius <= ρ₀`, otherwise [`tv_min_linear_lp`].
/// Returns the value and a minimizing `w`.
pub fn tv_min_linear(center: &MixtureWeights, radius: f64, coeffs: &[f64]) -> Result<(f64, Vec<f64>), RobustError> {
    if radius <= center.small_radius_threshold() {
        Ok(tv_min_closed_form(center, radius, coeffs))
    } else {
        tv_min_linear_lp(center, radius, coeffs)
    }
}

/// `w₀·c − ρ (max c − min c)`, attained by moving `ρ` of mass from the
/// highest-coefficient group to the lowest. Valid only for `ρ <= ρ₀`.
pub fn tv_min_closed_form(center: &MixtureWeights, radius: f64, coeffs: &[f64]) -> (f64, Vec<f64>) {
    let w0 = center.as_slice();
    let mean: f64 = w0.iter().zip(coeffs).map(|(w, c)| w * c).sum();
    let (mut hi, mut lo) = (0, 0);
    for (k, &c) in coeffs.iter().enumerate() {
        if c > coeffs[hi] {
            hi = k;
        }
        if c < coeffs[lo] {
            lo = k;
        }
    }
    let mut w = w0.to_vec();
    if hi != lo && radius > 0.0 {
        w[hi] = (w[hi] - radius).max(0.0);
        w[lo] += radius;
    }
    (mean - radius * (coeffs[hi] - coeffs[lo]), w)
}

/// The inner minimization as an explicit LP over `(w, s)`:
/// `min Σ w_k c_k` s.t. `Σ w = 1`, `|w_k − w₀_k| <= s_k`, `Σ s <= 2ρ`, `w, s >= 0`.
pub fn tv_min_linear_lp(center: &MixtureWeights, radius: f64, coeffs: &[f64]) -> Result<(f64, Vec<f64>), RobustError> {
    let k = center.len();
    if coeffs.len() != k {
        return Err(RobustError::Invalid(format!(
            "{} coefficients for {k} groups",
            coeffs.len()
        )));
    }
    let w0 = center.as_slice();
    let mut lp = LinearProgram::new(2 * k);
    for (j, &c) in coeffs.iter().enumerate() {
        lp.set_objective(j, -c);
    }
    lp.add_eq(&(0..k).map(|j| (j, 1.0)).collect::<Vec<_>>(), 1.0);
    for j in 0..k {
        lp.add_le(&[(j, 1.0), (k + j, -1.0)], w0[j]);
        lp.add_le(&[(j, -1.0), (k + j, -1.0)], -w0[j]);
    }
    lp.add_le(&(0..k).map(|j| (k + j, 1.0)).collect::<Vec<_>>(), 2.0 * radius);
    let sol = expect_optimal(&lp, solve_lp(&lp)?)?;
    let w = sol.point[..k].to_vec();
    let value = w.iter().zip(coeffs).map(|(a, b)| a * b).sum();
    Ok((value, w))
}

/// Which member of the ambiguity set attains the worst case against an alternative.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstCase {
    Weights(Vec<f64>),
    Vertex(usize),
}

/// Per-opponent worst-case payoffs `min_{M ∈ 𝓜} pᵀ M e_a` and their minimizers.
pub fn opponent_worst_cases(p: &[f64], amb: &AmbiguitySet) -> Result<Vec<(f64, WorstCase)>, RobustError> {
    if p.len() != amb.dim() {
        return Err(RobustError::Invalid(format!(
            "lottery of length {} on a {}-model ambiguity set",
            p.len(),
            amb.dim()
        )));
    }
    let payoffs: Vec<Vec<f64>> = amb.generators().iter().map(|m| m.column_payoffs(p)).collect();
    let m = amb.dim();
    match amb {
        AmbiguitySet::TvBall { center, radius, .. } => (0..m)
            .map(|a| {
                let c: Vec<f64> = payoffs.iter().map(|row| row[a]).collect();
                let (v, w) = tv_min_linear(center, *radius, &c)?;
                Ok((v, WorstCase::Weights(w)))
            })
            .collect(),
        AmbiguitySet::VertexHull { .. } => Ok((0..m)
            .map(|a| {
                let (vi, v) = payoffs
                    .iter()
                    .enumerate()
                    .map(|(vi, row)| (vi, row[a]))
                    .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
                (v, WorstCase::Vertex(vi))
            })
            .collect()),
    }
}

/// Robust value `V(p, 𝓜) = min_{M ∈ 𝓜} min_a pᵀ M e_a`.
pub fn inner_min_value(p: &[f64], amb: &AmbiguitySet) -> Result<f64, RobustError> {
    Ok(opponent_worst_cases(p, amb)?
        .into_iter()
        .map(|(v, _)| v)
        .fold(f64::INFINITY, f64::min))
}

/// A linear side constraint on the lottery, `coeffs · p (<=|=|>=) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LotteryConstraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl LotteryConstraint {
    /// Expected cost budget `Σ_i c_i p_i <= budget`.
    pub fn budget(costs: &[f64], budget: f64) -> Self {
        Self {
            coeffs: costs.to_vec(),
            sense: Sense::Le,
            rhs: budget,
        }
    }

    fn permuted(&self, order: &[usize]) -> Self {
        Self {
            coeffs: order.iter().map(|&o| self.coeffs[o]).collect(),
            ..self.clone()
        }
    }

    fn apply(&self, lp: &mut LinearProgram) {
        let terms: Vec<(usize, f64)> = self.coeffs.iter().enumerate().map(|(i, &c)| (i, c)).collect();
        match self.sense {
            Sense::Le => lp.add_le(&terms, self.rhs),
            Sense::Ge => lp.add_ge(&terms, self.rhs),
            Sense::Eq => lp.add_eq(&terms, self.rhs),
        }
    }
}

/// Column layout of the TV-ball program: `p (m) | t | μ (m) | λ (m) | γ (m·K)`.
#[derive(Debug, Clone, Copy)]
pub struct TvLayout {
    pub m: usize,
    pub k: usize,
}

impl TvLayout {
    pub fn p(&self, i: usize) -> usize {
        i
    }
    pub fn t(&self) -> usize {
        self.m
    }
    pub fn mu(&self, a: usize) -> usize {
        self.m + 1 + a
    }
    pub fn lambda(&self, a: usize) -> usize {
        2 * self.m + 1 + a
    }
    pub fn gamma(&self, a: usize, g: usize) -> usize {
        3 * self.m + 1 + a * self.k + g
    }
    pub fn num_vars(&self) -> usize {
        3 * self.m + 1 + self.m * self.k
    }
}

/// Assembles the dualized TV-ball program:
///
/// ```text
/// max t
///   Σ p_i = 1, p >= 0
///   t <= μ_a − 2ρ λ_a + Σ_k w₀_k γ_{a,k}        ∀a
///   μ_a + γ_{a,k} <= pᵀ M^(k) e_a                 ∀a,k
///   −λ_a <= γ_{a,k} <= λ_a,  λ_a >= 0             ∀a,k
/// ```
pub fn build_tv_program(
    margins: &GroupMargins,
    center: &MixtureWeights,
    radius: f64,
    extra: &[LotteryConstraint],
) -> (LinearProgram, TvLayout) {
    let layout = TvLayout {
        m: margins.num_models(),
        k: margins.num_groups(),
    };
    let (m, k) = (layout.m, layout.k);
    let w0 = center.as_slice();
    let mut lp = LinearProgram::new(layout.num_vars());
    lp.set_objective(layout.t(), 1.0);
    lp.set_free(layout.t());
    for a in 0..m {
        lp.set_free(layout.mu(a));
        for g in 0..k {
            lp.set_free(layout.gamma(a, g));
        }
    }
    lp.add_eq(&(0..m).map(|i| (layout.p(i), 1.0)).collect::<Vec<_>>(), 1.0);
    for a in 0..m {
        let mut terms = vec![
            (layout.t(), 1.0),
            (layout.mu(a), -1.0),
            (layout.lambda(a), 2.0 * radius),
        ];
        for g in 0..k {
            if w0[g] != 0.0 {
                terms.push((layout.gamma(a, g), -w0[g]));
            }
        }
        lp.add_le(&terms, 0.0);
    }
    for a in 0..m {
        for (g, mat) in margins.per_group.iter().enumerate() {
            let mut terms = vec![(layout.mu(a), 1.0), (layout.gamma(a, g), 1.0)];
            for i in 0..m {
                let v = mat.get(i, a);
                if v != 0.0 {
                    terms.push((layout.p(i), -v));
                }
            }
            lp.add_le(&terms, 0.0);
        }
    }
    for a in 0..m {
        for g in 0..k {
            lp.add_le(&[(layout.gamma(a, g), 1.0), (layout.lambda(a), -1.0)], 0.0);
            lp.add_le(&[(layout.gamma(a, g), -1.0), (layout.lambda(a), -1.0)], 0.0);
        }
    }
    for c in extra {
        c.apply(&mut lp);
    }
    (lp, layout)
}

/// Maximin program over every (vertex, opponent) column; variables `p | t`.
pub fn build_hull_program(matrices: &[MarginMatrix], extra: &[LotteryConstraint]) -> LinearProgram {
    let m = matrices[0].dim();
    let columns: Vec<Vec<f64>> = matrices
        .iter()
        .flat_map(|mat| (0..m).map(move |a| (0..m).map(|i| mat.get(i, a)).collect::<Vec<f64>>()))
        .collect();
    let mut lp = maximin_program(m, &columns);
    for c in extra {
        c.apply(&mut lp);
    }
    lp
}

fn build_program(amb: &AmbiguitySet, extra: &[LotteryConstraint]) -> (LinearProgram, Option<TvLayout>) {
    match amb {
        AmbiguitySet::TvBall {
            center,
            radius,
            margins,
        } => {
            let (lp, layout) = build_tv_program(margins, center, *radius, extra);
            (lp, Some(layout))
        }
        AmbiguitySet::VertexHull { matrices } => (build_hull_program(matrices, extra), None),
    }
}

/// Auxiliary variables of the TV-ball program at the optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvDuals {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolveReport {
    pub lottery: Lottery,
    /// Optimal `t` of the program.
    pub robust_value: f64,
    /// Radius and center, for TV balls.
    pub rho: Option<f64>,
    pub w0: Option<Vec<f64>>,
    pub duals: Option<TvDuals>,
    /// Opponents whose worst-case payoff equals the robust value (within 1e-9).
    pub active: Vec<usize>,
    /// Minimizing mixture or vertex for each active opponent.
    pub worst_case: Vec<(usize, WorstCase)>,
    /// Full solution vector in the program's own layout, over the
    /// label-independent alternative order used for solving.
    pub raw_point: Vec<f64>,
}

impl RobustSolveReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        let roster = &self.lottery.roster;
        let worst: Vec<serde_json::Value> = self
            .worst_case
            .iter()
            .map(|(a, wc)| serde_json::json!({ "opponent": roster[*a], "worst_case": wc }))
            .collect();
        serde_json::json!({
            "rho": self.rho,
            "w0": self.w0,
            "lottery": self.lottery.to_json_value(),
            "robust_value": self.robust_value,
            "duals": self.duals,
            "active": self.active.iter().map(|&a| roster[a].clone()).collect::<Vec<_>>(),
            "worst_case": worst,
        })
    }
}

/// A robust lottery: maximizer of `V(p, 𝓜)`, optionally subject to extra
/// linear constraints on `p`. The program is solved in a label-independent
/// order so that relabeling the roster relabels the answer exactly.
pub fn robust_lottery(amb: &AmbiguitySet, extra: &[LotteryConstraint]) -> Result<RobustSolveReport, RobustError> {
    let m = amb.dim();
    if m == 0 {
        return Err(RobustError::Invalid("empty roster".into()));
    }
    if let Some(c) = extra.iter().find(|c| c.coeffs.len() != m) {
        return Err(RobustError::Invalid(format!(
            "constraint has {} coefficients for {m} models",
            c.coeffs.len()
        )));
    }
    let gens: Vec<&MarginMatrix> = amb.generators().iter().collect();
    let order = canonical_order(&gens);
    let canon = amb.permuted(&order);
    let canon_extra: Vec<LotteryConstraint> = extra.iter().map(|c| c.permuted(&order)).collect();
    let (lp, layout) = build_program(&canon, &canon_extra);
    let sol = solve_lp(&lp)?;
    if sol.status == LpStatus::Infeasible {
        return Err(RobustError::Infeasible);
    }
    let sol = expect_optimal(&lp, sol)?;

    let canon_probs = clean_distribution(&sol.point[..m]);
    let mut probs = vec![0.0; m];
    for (k, &orig) in order.iter().enumerate() {
        probs[orig] = canon_probs[k];
    }
    let t = sol.point[m];
    let duals = layout.map(|lay| {
        let mut mu = vec![0.0; m];
        let mut lambda = vec![0.0; m];
        let mut gamma = vec![vec![0.0; lay.k]; m];
        for (ca, &a) in order.iter().enumerate() {
            mu[a] = sol.point[lay.mu(ca)];
            lambda[a] = sol.point[lay.lambda(ca)];
            for g in 0..lay.k {
                gamma[a][g] = sol.point[lay.gamma(ca, g)];
            }
        }
        TvDuals { mu, lambda, gamma }
    });
    let worst = opponent_worst_cases(&probs, amb)?;
    let achieved = worst.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let mut active = Vec::new();
    let mut worst_case = Vec::new();
    for (a, (v, wc)) in worst.into_iter().enumerate() {
        if v - achieved <= 1e-9 {
            active.push(a);
            worst_case.push((a, wc));
        }
    }
    let (rho, w0) = match amb {
        AmbiguitySet::TvBall { center, radius, .. } => (Some(*radius), Some(center.as_slice().to_vec())),
        AmbiguitySet::VertexHull { .. } => (None, None),
    };
    Ok(RobustSolveReport {
        lottery: Lottery {
            roster: amb.roster().to_vec(),
            probs,
            value: t,
        },
        robust_value: t,
        rho,
        w0,
        duals,
        active,
        worst_case,
        raw_point: sol.point,
    })
}

/// Largest weight alternative `i` can carry among lotteries whose robust value
/// is at least `floor`.
fn max_weight_at_value(amb: &AmbiguitySet, i: usize, floor: f64) -> Result<f64, RobustError> {
    let (mut lp, _) = build_program(amb, &[]);
    let m = amb.dim();
    lp.objective.iter_mut().for_each(|c| *c = 0.0);
    lp.set_objective(i, 1.0);
    lp.add_ge(&[(m, 1.0)], floor);
    let sol = expect_optimal(&lp, solve_lp(&lp)?)?;
    Ok(sol.value)
}

/// Alternatives with positive probability in at least one robust lottery.
pub fn robust_bipartisan_set(amb: &AmbiguitySet) -> Result<Vec<usize>, RobustError> {
    let v_star = robust_lottery(amb, &[])?.robust_value;
    let floor = v_star - RBP_VALUE_SLACK;
    let weights: Result<Vec<f64>, RobustError> = (0..amb.dim())
        .into_par_iter()
        .map(|i| max_weight_at_value(amb, i, floor))
        .collect();
    Ok(weights?
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > SUPPORT_EPS)
        .map(|(i, _)| i)
        .collect())
}

/// `min_{M ∈ 𝓜} Σ_i coeffs_i · (entry i of M)` for a linear functional given
/// per generator.
fn min_over_set(amb: &AmbiguitySet, per_generator: &[f64]) -> Result<f64, RobustError> {
    match amb {
        AmbiguitySet::TvBall { center, radius, .. } => Ok(tv_min_linear(center, *radius, per_generator)?.0),
        AmbiguitySet::VertexHull { .. } => Ok(per_generator.iter().cloned().fold(f64::INFINITY, f64::min)),
    }
}

/// Range of the entry `M_ij` over the ambiguity set.
pub fn entry_range(amb: &AmbiguitySet, i: usize, j: usize) -> Result<(f64, f64), RobustError> {
    let c: Vec<f64> = amb.generators().iter().map(|m| m.get(i, j)).collect();
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    Ok((min_over_set(amb, &c)?, -min_over_set(amb, &neg)?))
}

/// An alternative that no matrix in the set ranks below any opponent. In strict
/// mode every opponent must additionally lose to it under some matrix.
pub fn robust_condorcet_winner(amb: &AmbiguitySet, strict: bool) -> Result<Option<usize>, RobustError> {
    let m = amb.dim();
    'candidates: for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            let (lo, hi) = entry_range(amb, i, j)?;
            if lo < -ENTRY_TOL || (strict && hi <= ENTRY_TOL) {
                continue 'candidates;
            }
        }
        return Ok(Some(i));
    }
    Ok(None)
}

/// Alternatives `y` for which some `x` has `M_xj > M_yj` for every opponent `j`
/// and every matrix in the set. Such `y` carry no weight in any robust lottery.
pub fn robust_dominated(amb: &AmbiguitySet) -> Result<Vec<usize>, RobustError> {
    let m = amb.dim();
    let gens = amb.generators();
    let mut out = Vec::new();
    for y in 0..m {
        'dominators: for x in (0..m).filter(|&x| x != y) {
            for j in 0..m {
                let d: Vec<f64> = gens.iter().map(|g| g.get(x, j) - g.get(y, j)).collect();
                if min_over_set(amb, &d)? <= ENTRY_TOL {
                    continue 'dominators;
                }
            }
            out.push(y);
            break;
        }
    }
    Ok(out)
}

/// Data-driven radius `min(1, √(K/n) + √((2/n) ln(2/δ)))`.
pub fn rho_from_data(n: u64, k: usize, delta: f64) -> Result<f64, RobustError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(RobustError::Invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    if n == 0 || k == 0 {
        return Err(RobustError::Invalid("n and K must be positive".into()));
    }
    let n = n as f64;
    Ok(((k as f64 / n).sqrt() + (2.0 / n * (2.0 / delta).ln()).sqrt()).min(1.0))
}

/// Regret bound `4√(K/n) + 4√((2/n) ln(2/δ))` for the data-driven radius.
pub fn regret_bound(n: u64, k: usize, delta: f64) -> f64 {
    let n = n as f64;
    4.0 * (k as f64 / n).sqrt() + 4.0 * (2.0 / n * (2.0 / delta).ln()).sqrt()
}

/// Sample count `ceil(max{(8/ε²) ln(4m), (32ρ²/ε²) ln(8mK)})` that makes an
/// empirical lottery ε-optimal with probability at least ½.
pub fn sparse_sample_size(m: usize, k: usize, eps: f64, rho: f64) -> usize {
    let a = 8.0 / (eps * eps) * (4.0 * m as f64).ln();
    let b = 32.0 * rho * rho / (eps * eps) * (8.0 * (m * k) as f64).ln();
    a.max(b).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyOutcome {
    pub lottery: Lottery,
    pub sample_size: usize,
    /// Robust value of the input lottery, taken as `v*`.
    pub reference_value: f64,
    pub best_trial: usize,
}

/// Replaces an optimal TV-ball lottery by the empirical distribution of `s`
/// iid draws from it, keeping the best of `trials` independent draws. Fails if
/// none reaches `v* − ε`.
pub fn sparsify(
    p_star: &Lottery,
    amb: &AmbiguitySet,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<SparsifyOutcome, RobustError> {
    let AmbiguitySet::TvBall {
        center,
        radius,
        margins,
    } = amb
    else {
        return Err(RobustError::Invalid("sparsify needs a TV-ball ambiguity set".into()));
    };
    let threshold = center.small_radius_threshold();
    if *radius > threshold {
        return Err(RobustError::RadiusTooLarge {
            radius: *radius,
            threshold,
        });
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(RobustError::Invalid(format!("epsilon must lie in (0,1], got {eps}")));
    }
    if trials == 0 {
        return Err(RobustError::Invalid("need at least one trial".into()));
    }
    let m = amb.dim();
    let s = sparse_sample_size(m, margins.num_groups(), eps, *radius);
    let v_star = inner_min_value(&p_star.probs, amb)?;
    let target = v_star - eps;
    let dist = WeightedIndex::new(&p_star.probs)
        .map_err(|e| RobustError::Invalid(format!("input lottery is not a distribution: {e}")))?;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for trial in 0..trials {
        let mut rng = substream(seed, Stream::Sparsify, trial as u64);
        let mut counts = vec![0usize; m];
        for _ in 0..s {
            counts[dist.sample(&mut rng)] += 1;
        }
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / s as f64).collect();
        let value = inner_min_value(&probs, amb)?;
        if best.as_ref().is_none_or(|(bv, _, _)| value > *bv) {
            best = Some((value, trial, probs));
        }
    }
    let (value, best_trial, probs) = best.expect("at least one trial ran");
    if value < target {
        return Err(RobustError::SparsifyFailed {
            target,
            best: value,
            trials,
        });
    }
    Ok(SparsifyOutcome {
        lottery: Lottery {
            roster: amb.roster().to_vec(),
            probs,
            value,
        },
        sample_size: s,
        reference_value: v_star,
        best_trial,
    })
}

/// Minkowski mixture `λ 𝓐 ⊕ (1 − λ) 𝓑` of two hulls, as the hull of all pairwise
/// vertex mixes (exact duplicates removed).
pub fn mixture_ambiguity(a: &AmbiguitySet, b: &AmbiguitySet, lambda: f64) -> Result<AmbiguitySet, RobustError> {
    let (AmbiguitySet::VertexHull { matrices: va }, AmbiguitySet::VertexHull { matrices: vb }) = (a, b) else {
        return Err(RobustError::Invalid(
            "population mixtures are defined on vertex hulls".into(),
        ));
    };
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RobustError::Invalid(format!("lambda must lie in [0,1], got {lambda}")));
    }
    if a.roster() != b.roster() {
        return Err(RobustError::Invalid("hulls use different rosters".into()));
    }
    let mut out: Vec<MarginMatrix> = Vec::new();
    for ma in va {
        for mb in vb {
            let mix = pool(&[ma.clone(), mb.clone()], &[lambda, 1.0 - lambda])?;
            if !out.iter().any(|o| o == &mix) {
                out.push(mix);
            }
        }
    }
    AmbiguitySet::vertex_hull(out)
}

/// Vertices of the TV ball for `radius <= ρ₀`: the center plus
/// `w₀ − ρ e_{k⁺} + ρ e_{k⁻}` for every ordered pair `k⁺ ≠ k⁻`.
pub fn tv_ball_vertices(center: &MixtureWeights, radius: f64) -> Result<Vec<MixtureWeights>, RobustError> {
    let threshold = center.small_radius_threshold();
    if radius > threshold {
        return Err(RobustError::RadiusTooLarge { radius, threshold });
    }
    if radius < 0.0 {
        return Err(RobustError::Invalid("radius must be nonnegative".into()));
    }
    let mut out = vec![center.clone()];
    if radius == 0.0 {
        return Ok(out);
    }
    let k = center.len();
    for hi in 0..k {
        for lo in 0..k {
            if hi == lo {
                continue;
            }
            let mut w = center.as_slice().to_vec();
            w[hi] = (w[hi] - radius).max(0.0);
            w[lo] += radius;
            out.push(MixtureWeights::normalized(&w)?);
        }
    }
    Ok(out)
}

/// The TV ball (small radius) as an explicit hull of pooled matrices.
pub fn tv_ball_as_hull(amb: &AmbiguitySet) -> Result<AmbiguitySet, RobustError> {
    let AmbiguitySet::TvBall {
        center,
        radius,
        margins,
    } = amb
    else {
        return Ok(amb.clone());
    };
    let mats = tv_ball_vertices(center, *radius)?
        .iter()
        .map(|w| pool(&margins.per_group, w.as_slice()))
        .collect::<Result<Vec<_>, _>>()?;
    AmbiguitySet::vertex_hull(mats)
}

/// Weak-clone expansion of every generator of the set with a shared handicap pattern.
pub fn expand_ambiguity_clones(
    amb: &AmbiguitySet,
    i: usize,
    handicaps: &[f64],
) -> Result<(AmbiguitySet, CloneMap), RobustError> {
    let expanded: Vec<(MarginMatrix, CloneMap)> = amb
        .generators()
        .iter()
        .map(|m| expand_clones(m, i, handicaps))
        .collect::<Result<_, _>>()?;
    let map = expanded[0].1.clone();
    debug_assert_eq!(
        map.expanded_roster[amb.dim()..],
        clone_ids(amb.roster(), i, handicaps.len())[..]
    );
    let mats: Vec<MarginMatrix> = expanded.into_iter().map(|(m, _)| m).collect();
    let set = match amb {
        AmbiguitySet::TvBall {
            center,
            radius,
            margins,
        } => {
            let mut g = margins.clone();
            g.roster = map.expanded_roster.clone();
            g.per_group = mats;
            AmbiguitySet::TvBall {
                center: center.clone(),
                radius: *radius,
                margins: g,
            }
        }
        AmbiguitySet::VertexHull { .. } => AmbiguitySet::vertex_hull(mats)?,
    };
    Ok((set, map))
}
