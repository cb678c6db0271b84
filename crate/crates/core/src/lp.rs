//! Two-phase bounded-variable primal simplex.
//!
//! Every lottery computation in the crate reduces to a modest linear program
//! (at most a few thousand rows), so the solver keeps a dense basis inverse and
//! sparse columns. Free and boxed variables are handled natively. Entering
//! columns are priced by largest reduced cost; after a run of degenerate pivots
//! the solver falls back to Bland's rule (lowest index, ratio ties to the
//! lowest basic index) until the objective moves again, which rules out
//! cycling. No step depends on anything but the input, so identical programs
//! give bit-identical solutions.

use std::fmt::Write as _;

use thiserror::Error;

/// Tolerances used by [`solve_lp_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Maximum accepted primal violation (phase-one objective, residual).
    pub feas_tol: f64,
    /// Smallest magnitude accepted as a pivot element.
    pub pivot_tol: f64,
    /// Reduced-cost threshold for declaring a column improving.
    pub opt_tol: f64,
    /// Hard cap on pivots across both phases; `None` picks a size-based cap.
    pub max_pivots: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            pivot_tol: 1e-10,
            opt_tol: 1e-9,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("invalid bounds for variable {var}: [{lower}, {upper}]")]
    Bounds { var: usize, lower: f64, upper: f64 },
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
    #[error("basis became numerically singular")]
    Singular,
}

/// Outcome class of a solve. Infeasibility and unboundedness are results,
/// not errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point in the caller's variable space; empty unless optimal.
    pub point: Vec<f64>,
    /// `objective · point`; NaN unless optimal.
    pub value: f64,
    pub max_primal_residual: f64,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// `maximize objective · x` subject to equality rows, `<=` rows and per-variable
/// bounds. Variables default to `[0, +inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub le_rows: Vec<Vec<f64>>,
    pub le_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY);
    }

    fn dense(&self, terms: &[(usize, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            row[j] += a;
        }
        row
    }

    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let row = self.dense(terms);
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let row = self.dense(terms);
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    /// Stored as the negated `<=` row.
    pub fn add_ge(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let neg: Vec<(usize, f64)> = terms.iter().map(|&(j, a)| (j, -a)).collect();
        self.add_le(&neg, -rhs);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{} variables but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.eq_rows.len() != self.eq_rhs.len() {
            return Err(LpError::Dimension(format!(
                "{} equality rows but {} right-hand sides",
                self.eq_rows.len(),
                self.eq_rhs.len()
            )));
        }
        if self.le_rows.len() != self.le_rhs.len() {
            return Err(LpError::Dimension(format!(
                "{} inequality rows but {} right-hand sides",
                self.le_rows.len(),
                self.le_rhs.len()
            )));
        }
        for (kind, rows) in [("equality", &self.eq_rows), ("inequality", &self.le_rows)] {
            for (r, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(LpError::Dimension(format!(
                        "{kind} row {r} has {} coefficients, expected {n}",
                        row.len()
                    )));
                }
                if row.iter().any(|a| !a.is_finite()) {
                    return Err(LpError::NonFinite(format!("{kind} row {r}")));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        if self.eq_rhs.iter().chain(&self.le_rhs).any(|b| !b.is_finite()) {
            return Err(LpError::NonFinite("right-hand side".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Bounds {
                    var: j,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(())
    }

    /// Plain-text dump in CPLEX LP style, for cross-checking with external solvers.
    pub fn to_lp_string(&self) -> String {
        fn terms(row: &[f64]) -> String {
            let mut s = String::new();
            for (j, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 { "-" } else { "+" };
                let _ = write!(s, " {sign} {:?} x{j}", a.abs());
            }
            if s.is_empty() {
                s.push_str(" 0 x0");
            }
            s
        }
        let mut out = String::from("Maximize\n obj:");
        out.push_str(&terms(&self.objective));
        out.push_str("\nSubject To\n");
        for (r, (row, b)) in self.eq_rows.iter().zip(&self.eq_rhs).enumerate() {
            let _ = writeln!(out, " e{r}:{} = {b:?}", terms(row));
        }
        for (r, (row, b)) in self.le_rows.iter().zip(&self.le_rhs).enumerate() {
            let _ = writeln!(out, " c{r}:{} <= {b:?}", terms(row));
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            match (l.is_finite(), u.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " x{j} free");
                }
                (true, true) => {
                    let _ = writeln!(out, " {l:?} <= x{j} <= {u:?}");
                }
                (true, false) => {
                    let _ = writeln!(out, " x{j} >= {l:?}");
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= x{j} <= {u:?}");
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Constraint violations of a candidate point, by constraint class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `max |A_eq x − b_eq|`.
    pub eq: f64,
    /// `max (A_le x − b_le)`; negative when every row is slack.
    pub ineq: f64,
    /// `max(lower − x, x − upper)`; negative when strictly inside the box.
    pub bounds: f64,
}

impl ResidualReport {
    /// Largest violation, counting slack classes as zero.
    pub fn max_violation(&self) -> f64 {
        self.eq.max(self.ineq).max(self.bounds).max(0.0)
    }
}

/// Independent verifier: evaluates every constraint at `point`.
pub fn check_solution(lp: &LinearProgram, point: &[f64]) -> Result<ResidualReport, LpError> {
    if point.len() != lp.num_vars() {
        return Err(LpError::Dimension(format!(
            "point has {} entries, program has {} variables",
            point.len(),
            lp.num_vars()
        )));
    }
    let dot = |row: &[f64]| row.iter().zip(point).map(|(a, x)| a * x).sum::<f64>();
    let eq = lp
        .eq_rows
        .iter()
        .zip(&lp.eq_rhs)
        .map(|(row, b)| (dot(row) - b).abs())
        .fold(0.0, f64::max);
    let ineq = lp
        .le_rows
        .iter()
        .zip(&lp.le_rhs)
        .map(|(row, b)| dot(row) - b)
        .reduce(f64::max)
        .unwrap_or(0.0);
    let bounds = (0..lp.num_vars())
        .map(|j| {
            let lo = if lp.lower[j].is_finite() {
                lp.lower[j] - point[j]
            } else {
                f64::NEG_INFINITY
            };
            let hi = if lp.upper[j].is_finite() {
                point[j] - lp.upper[j]
            } else {
                f64::NEG_INFINITY
            };
            lo.max(hi)
        })
        .reduce(f64::max)
        .map(|v| if v == f64::NEG_INFINITY { 0.0 } else { v })
        .unwrap_or(0.0);
    Ok(ResidualReport { eq, ineq, bounds })
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SolverOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut simplex = Simplex::new(lp, opts);
    let max_pivots = opts.max_pivots.unwrap_or(20_000 + 50 * (simplex.rows + simplex.ncols));

    // Phase one: maximize −Σ artificials.
    if simplex.ncols > simplex.art_start {
        let cost: Vec<f64> = (0..simplex.ncols)
            .map(|j| if j >= simplex.art_start { -1.0 } else { 0.0 })
            .collect();
        simplex.cost = cost;
        if let Phase::Unbounded = simplex.run(max_pivots)? {
            unreachable!("phase one objective is bounded by zero");
        }
        let infeas: f64 = (simplex.art_start..simplex.ncols).map(|j| simplex.x[j]).sum();
        if infeas > opts.feas_tol {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                point: Vec::new(),
                value: f64::NAN,
                max_primal_residual: infeas,
                pivots: simplex.pivots,
            });
        }
        for j in simplex.art_start..simplex.ncols {
            simplex.upper[j] = 0.0;
            if simplex.pos[j].is_none() {
                simplex.x[j] = 0.0;
            }
        }
    }

    // Phase two.
    simplex.cost = vec![0.0; simplex.ncols];
    simplex.cost[..simplex.n].copy_from_slice(&lp.objective);
    if let Phase::Unbounded = simplex.run(max_pivots)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            point: Vec::new(),
            value: f64::NAN,
            max_primal_residual: 0.0,
            pivots: simplex.pivots,
        });
    }

    // Restore the exact rows, repair the basis, and re-optimize from it.
    simplex.remove_perturbation()?;
    loop {
        if !simplex.dual_repair(max_pivots)? {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                point: Vec::new(),
                value: f64::NAN,
                max_primal_residual: simplex.primal_infeasibility(),
                pivots: simplex.pivots,
            });
        }
        if let Phase::Unbounded = simplex.run(max_pivots)? {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                point: Vec::new(),
                value: f64::NAN,
                max_primal_residual: 0.0,
                pivots: simplex.pivots,
            });
        }
        if simplex.primal_infeasibility() <= opts.feas_tol * 0.1 {
            break;
        }
    }

    let point: Vec<f64> = (0..simplex.n)
        .map(|j| simplex.x[j].clamp(lp.lower[j], lp.upper[j]))
        .collect();
    let value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    let residual = check_solution(lp, &point)?.max_violation();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        point,
        value,
        max_primal_residual: residual,
        pivots: simplex.pivots,
    })
}

enum Phase {
    Optimal,
    Unbounded,
}

/// Consecutive pivots without objective progress before switching to Bland's rule.
const STALL_LIMIT: usize = 50;
/// Pivots between checks of the primal residual `A x − b`.
const RESIDUAL_CHECK_EVERY: usize = 100;
/// Base relaxation of `<=` rows while optimizing.
const PERTURBATION: f64 = 1e-7;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Bounded-variable revised simplex over `A x + s (+ σ a) = b`.
///
/// Columns are the structural variables, one logical `s_i` per row (`[0, inf)`
/// for `<=` rows, `[0, 0]` for equalities), then one artificial per row whose
/// starting logical is out of bounds. The basis inverse is kept dense and
/// rebuilt from scratch whenever the residual drifts.
struct Simplex<'a> {
    opts: &'a SolverOptions,
    n: usize,
    rows: usize,
    ncols: usize,
    art_start: usize,
    /// Sparse columns.
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    /// Basic column of each row.
    basis: Vec<usize>,
    /// Row of each basic column.
    pos: Vec<Option<usize>>,
    /// Row-major `B⁻¹`.
    binv: Vec<f64>,
    /// Logical columns whose lower bound is currently relaxed.
    perturbed: Vec<usize>,
    pivots: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let n = lp.num_vars();
        let rows = lp.eq_rows.len() + lp.le_rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let all_rows = lp.eq_rows.iter().chain(&lp.le_rows);
        for (r, row) in all_rows.enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    cols[j].push((r, a));
                }
            }
        }
        let rhs: Vec<f64> = lp.eq_rhs.iter().chain(&lp.le_rhs).copied().collect();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut x: Vec<f64> = (0..n)
            .map(|j| {
                if lower[j].is_finite() {
                    lower[j]
                } else if upper[j].is_finite() {
                    upper[j]
                } else {
                    0.0
                }
            })
            .collect();
        let mut resid = rhs.clone();
        for (j, col) in cols.iter().enumerate() {
            for &(r, a) in col {
                resid[r] -= a * x[j];
            }
        }
        let mut perturbed = Vec::new();
        for r in 0..rows {
            cols.push(vec![(r, 1.0)]);
            if r < lp.eq_rows.len() {
                lower.push(0.0);
                upper.push(0.0);
            } else {
                // Spread degenerate rows apart; removed again before returning.
                let jitter = (r as f64 * GOLDEN).fract();
                lower.push(-PERTURBATION * (1.0 + jitter) * (1.0 + rhs[r].abs()));
                upper.push(f64::INFINITY);
                perturbed.push(n + r);
            }
        }
        let art_start = n + rows;
        let mut basis = vec![0usize; rows];
        x.extend(std::iter::repeat_n(0.0, rows));
        for r in 0..rows {
            let logical = n + r;
            let fits = resid[r] >= lower[logical] && resid[r] <= upper[logical];
            if fits {
                basis[r] = logical;
                x[logical] = resid[r];
            } else {
                let sigma = if resid[r] > 0.0 { 1.0 } else { -1.0 };
                basis[r] = cols.len();
                cols.push(vec![(r, sigma)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                x.push(resid[r].abs());
            }
        }
        let ncols = cols.len();
        let mut pos = vec![None; ncols];
        for (r, &b) in basis.iter().enumerate() {
            pos[b] = Some(r);
        }
        let mut simplex = Self {
            opts,
            n,
            rows,
            ncols,
            art_start,
            cols,
            rhs,
            lower,
            upper,
            cost: vec![0.0; ncols],
            x,
            basis,
            pos,
            binv: Vec::new(),
            perturbed,
            pivots: 0,
        };
        simplex.binv = simplex.identity_inverse();
        simplex
    }

    /// The starting basis is diagonal with entries ±1.
    fn identity_inverse(&self) -> Vec<f64> {
        let mut binv = vec![0.0; self.rows * self.rows];
        for (r, &b) in self.basis.iter().enumerate() {
            binv[r * self.rows + r] = 1.0 / self.cols[b][0].1;
        }
        binv
    }

    /// `y = c_Bᵀ B⁻¹`.
    fn duals(&self) -> Vec<f64> {
        let m = self.rows;
        let mut y = vec![0.0; m];
        for (r, &b) in self.basis.iter().enumerate() {
            let c = self.cost[b];
            if c != 0.0 {
                for (yi, &v) in y.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                    *yi += c * v;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(r, a)| a * y[r]).sum::<f64>()
    }

    /// `B⁻¹ A_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.rows;
        let mut alpha = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for (i, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[i * m + r] * a;
            }
        }
        alpha
    }

    /// Direction (+1 up, −1 down) in which nonbasic column `j` improves the objective.
    fn improving_direction(&self, j: usize, d: f64) -> Option<f64> {
        let tol = self.opts.opt_tol;
        if d > tol && self.x[j] < self.upper[j] {
            Some(1.0)
        } else if d < -tol && self.x[j] > self.lower[j] {
            Some(-1.0)
        } else {
            None
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<Phase, LpError> {
        let ray_tol = self.opts.opt_tol.max(1e-7);
        let mut stalled = 0usize;
        let mut since_check = 0usize;
        let mut verified = false;
        loop {
            let y = self.duals();
            let bland = stalled >= STALL_LIMIT;
            let mut candidates: Vec<(usize, f64, f64)> = (0..self.ncols)
                .filter(|&j| self.pos[j].is_none() && self.lower[j] < self.upper[j])
                .filter_map(|j| {
                    let d = self.reduced_cost(j, &y);
                    self.improving_direction(j, d).map(|dir| (j, d, dir))
                })
                .collect();
            if !bland {
                // Dantzig: largest |d| first, lowest index among equals.
                candidates.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            }
            if candidates.is_empty() {
                // Confirm optimality on a freshly refactored basis once.
                if verified {
                    return Ok(Phase::Optimal);
                }
                self.refactor()?;
                verified = true;
                continue;
            }
            verified = false;
            let mut moved = false;
            for &(q, d, dir) in &candidates {
                let alpha = self.ftran(q);
                let step = self.ratio_test(q, dir, &alpha, bland);
                let (theta, leave) = match step {
                    Some(s) => s,
                    None => {
                        if d.abs() > ray_tol {
                            return Ok(Phase::Unbounded);
                        }
                        continue;
                    }
                };
                if self.pivots >= max_pivots {
                    return Err(LpError::PivotLimit(max_pivots));
                }
                let leave = leave.map(|r| {
                    let out = self.basis[r];
                    let exit = if dir * alpha[r] > 0.0 {
                        self.lower[out]
                    } else {
                        self.upper[out]
                    };
                    (r, exit)
                });
                self.apply_step(q, dir, theta, &alpha, leave);
                self.pivots += 1;
                since_check += 1;
                if theta * d.abs() > 1e-12 {
                    stalled = 0;
                } else {
                    stalled += 1;
                }
                moved = true;
                break;
            }
            if !moved {
                if verified {
                    return Ok(Phase::Optimal);
                }
                self.refactor()?;
                verified = true;
                continue;
            }
            if since_check >= RESIDUAL_CHECK_EVERY {
                since_check = 0;
                if self.primal_residual() > self.opts.feas_tol * 0.1 {
                    self.refactor()?;
                }
            }
        }
    }

    /// Step length and leaving row (`None` row means the entering column hits
    /// its own opposite bound). `None` overall means an unblocked ray.
    ///
    /// Dantzig mode uses a two-pass Harris test that prefers large pivots among
    /// near-tied rows; Bland mode takes the exact minimum ratio with ties to the
    /// lowest basic index.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<(f64, Option<usize>)> {
        let ptol = self.opts.pivot_tol;
        let ftol = if bland { 0.0 } else { self.opts.feas_tol };
        // Rate of change of basic r per unit step.
        let rate = |r: usize| -dir * alpha[r];
        let room = |r: usize, relaxed: f64| -> Option<f64> {
            let b = self.basis[r];
            let g = rate(r);
            if g < -ptol && self.lower[b].is_finite() {
                Some(((self.x[b] - self.lower[b]).max(0.0) + relaxed) / -g)
            } else if g > ptol && self.upper[b].is_finite() {
                Some(((self.upper[b] - self.x[b]).max(0.0) + relaxed) / g)
            } else {
                None
            }
        };
        let mut bound = f64::INFINITY;
        for r in 0..self.rows {
            if let Some(t) = room(r, ftol) {
                bound = bound.min(t);
            }
        }
        let own = self.upper[q] - self.lower[q];
        if bound == f64::INFINITY && !own.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for r in 0..self.rows {
            let Some(t) = room(r, 0.0) else { continue };
            if bland {
                let tie_or_less = match best {
                    None => true,
                    Some((br, bt, _)) => {
                        t < bt - 1e-12 * (1.0 + bt)
                            || ((t - bt).abs() <= 1e-12 * (1.0 + bt) && self.basis[r] < self.basis[br])
                    }
                };
                if tie_or_less {
                    best = Some((r, t, alpha[r].abs()));
                }
            } else if t <= bound {
                let mag = alpha[r].abs();
                let better = match best {
                    None => true,
                    Some((br, _, bm)) => mag > bm || (mag == bm && self.basis[r] < self.basis[br]),
                };
                if better {
                    best = Some((r, t, mag));
                }
            }
        }
        match best {
            Some((r, t, _)) if t < own => Some((t, Some(r))),
            _ if own.is_finite() => Some((own, None)),
            Some((r, t, _)) => Some((t, Some(r))),
            None => None,
        }
    }

    /// Moves entering column `q` by `dir·θ`. When `leave` is set, that row's
    /// basic column exits at the given value.
    fn apply_step(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64], leave: Option<(usize, f64)>) {
        self.x[q] += dir * theta;
        for r in 0..self.rows {
            if alpha[r] != 0.0 {
                let b = self.basis[r];
                self.x[b] -= dir * theta * alpha[r];
            }
        }
        let Some((r, exit_value)) = leave else {
            // Bound flip: snap the entering column to the bound it reached.
            self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            return;
        };
        let out = self.basis[r];
        self.x[out] = exit_value;
        self.basis[r] = q;
        self.pos[out] = None;
        self.pos[q] = Some(r);

        let m = self.rows;
        let piv = alpha[r];
        let prow: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v / piv).collect();
        for i in 0..m {
            let f = alpha[i];
            if i == r || f == 0.0 {
                continue;
            }
            for (v, &p) in self.binv[i * m..(i + 1) * m].iter_mut().zip(&prow) {
                *v -= f * p;
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&prow);
    }

    /// `max |A x − b|` over rows, including logicals and artificials.
    fn primal_residual(&self) -> f64 {
        let mut r = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            let xj = self.x[j];
            if xj != 0.0 {
                for &(i, a) in col {
                    r[i] -= a * xj;
                }
            }
        }
        r.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest bound violation among basic columns.
    fn primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&b| (self.lower[b] - self.x[b]).max(self.x[b] - self.upper[b]))
            .fold(0.0, f64::max)
    }

    fn remove_perturbation(&mut self) -> Result<(), LpError> {
        for &j in &self.perturbed {
            self.lower[j] = 0.0;
            if self.pos[j].is_none() {
                self.x[j] = 0.0;
            }
        }
        self.perturbed.clear();
        self.refactor()
    }

    /// Dual simplex pivots that drive every basic column back inside its
    /// bounds while keeping reduced costs optimal. Returns `false` when some
    /// row cannot be repaired, which certifies infeasibility.
    fn dual_repair(&mut self, max_pivots: usize) -> Result<bool, LpError> {
        let tol = self.opts.feas_tol * 0.1;
        let m = self.rows;
        let mut since_check = 0usize;
        loop {
            let mut pick: Option<(usize, f64, bool)> = None;
            for (r, &b) in self.basis.iter().enumerate() {
                let below = self.lower[b] - self.x[b];
                let above = self.x[b] - self.upper[b];
                let (v, up) = if below >= above { (below, true) } else { (above, false) };
                if v > tol && pick.is_none_or(|(_, pv, _)| v > pv) {
                    pick = Some((r, v, up));
                }
            }
            let Some((r, v, up)) = pick else {
                return Ok(true);
            };
            let y = self.duals();
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for j in 0..self.ncols {
                if self.pos[j].is_some() || self.lower[j] >= self.upper[j] {
                    continue;
                }
                let arj: f64 = self.cols[j].iter().map(|&(i, a)| rho[i] * a).sum();
                if arj.abs() <= self.opts.pivot_tol {
                    continue;
                }
                // The basic in row r moves by −dir·arj per unit step.
                let dir = if (arj < 0.0) == up { 1.0 } else { -1.0 };
                if (dir > 0.0 && self.x[j] >= self.upper[j]) || (dir < 0.0 && self.x[j] <= self.lower[j]) {
                    continue;
                }
                let ratio = self.reduced_cost(j, &y).abs() / arj.abs();
                let better = match best {
                    None => true,
                    Some((bj, br, bm, _)) => {
                        ratio < br - 1e-12 || (ratio <= br + 1e-12 && (arj.abs() > bm || (arj.abs() == bm && j < bj)))
                    }
                };
                if better {
                    best = Some((j, ratio, arj.abs(), dir));
                }
            }
            let Some((q, _, mag, dir)) = best else {
                return Ok(false);
            };
            if self.pivots >= max_pivots {
                return Err(LpError::PivotLimit(max_pivots));
            }
            let b = self.basis[r];
            let exit = if up { self.lower[b] } else { self.upper[b] };
            let alpha = self.ftran(q);
            self.apply_step(q, dir, v / mag, &alpha, Some((r, exit)));
            self.pivots += 1;
            since_check += 1;
            if since_check >= RESIDUAL_CHECK_EVERY {
                since_check = 0;
                if self.primal_residual() > self.opts.feas_tol * 0.1 {
                    self.refactor()?;
                }
            }
        }
    }

    /// Rebuilds `B⁻¹` by Gauss-Jordan elimination with partial pivoting and
    /// recomputes the basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.rows;
        let mut a = vec![0.0; m * m];
        for (c, &b) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[b] {
                a[r * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv_row = (col..m)
                .max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()).then(j.cmp(&i)))
                .expect("nonempty range");
            let piv = a[piv_row * m + col];
            if piv.abs() < 1e-13 {
                return Err(LpError::Singular);
            }
            if piv_row != col {
                for k in 0..m {
                    a.swap(col * m + k, piv_row * m + k);
                    inv.swap(col * m + k, piv_row * m + k);
                }
            }
            let scale = 1.0 / piv;
            for k in 0..m {
                a[col * m + k] *= scale;
                inv[col * m + k] *= scale;
            }
            let arow: Vec<f64> = a[col * m..(col + 1) * m].to_vec();
            let irow: Vec<f64> = inv[col * m..(col + 1) * m].to_vec();
            for i in 0..m {
                if i == col {
                    continue;
                }
                let f = a[i * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[i * m + k] -= f * arow[k];
                    inv[i * m + k] -= f * irow[k];
                }
            }
        }
        // Row c of inv now maps row space to the basic variable in position c.
        self.binv = inv;

        let mut resid = self.rhs.clone();
        for j in 0..self.ncols {
            if self.pos[j].is_none() && self.x[j] != 0.0 {
                for &(i, v) in &self.cols[j] {
                    resid[i] -= v * self.x[j];
                }
            }
        }
        for r in 0..m {
            let v: f64 = self.binv[r * m..(r + 1) * m]
                .iter()
                .zip(&resid)
                .map(|(a, b)| a * b)
                .sum();
            self.x[self.basis[r]] = v;
        }
        Ok(())
    }
}
