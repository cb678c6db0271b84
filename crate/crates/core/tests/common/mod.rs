#![allow(dead_code)]

use maxlot::prefdata::{GroupMargins, MarginMatrix, MixtureWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("a{i}")).collect()
}

pub fn skew_rows<R: Rng>(rng: &mut R, m: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let v: f64 = rng.gen_range(-1.0..=1.0);
            rows[i][j] = v;
            rows[j][i] = -v;
        }
    }
    rows
}

pub fn random_skew<R: Rng>(rng: &mut R, m: usize) -> MarginMatrix {
    MarginMatrix::new(ids(m), skew_rows(rng, m)).unwrap()
}

pub fn random_groups<R: Rng>(rng: &mut R, m: usize, k: usize) -> GroupMargins {
    let mats = (0..k).map(|_| random_skew(rng, m)).collect();
    GroupMargins::from_matrices((0..k).map(|g| format!("g{g}")).collect(), mats).unwrap()
}

/// Weights bounded away from zero so that the small-radius regime is nontrivial.
pub fn random_weights<R: Rng>(rng: &mut R, k: usize) -> MixtureWeights {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    MixtureWeights::normalized(&raw).unwrap()
}

/// `pᵀ M e_j` for every `j`, computed directly from the rows.
pub fn payoffs(p: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.len();
    (0..m).map(|j| (0..m).map(|i| p[i] * rows[i][j]).sum()).collect()
}

pub fn min_payoff(p: &[f64], rows: &[Vec<f64>]) -> f64 {
    payoffs(p, rows).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn mix_rows(gm: &GroupMargins, w: &[f64]) -> Vec<Vec<f64>> {
    let m = gm.num_models();
    let mut out = vec![vec![0.0; m]; m];
    for (k, mat) in gm.per_group.iter().enumerate() {
        let rows = mat.rows();
        for i in 0..m {
            for j in 0..m {
                out[i][j] += w[k] * rows[i][j];
            }
        }
    }
    out
}

/// Exact minimum of `w·c` over the simplex intersected with the TV ball of
/// radius `rho` around `w0`: move up to `rho` of mass from the most expensive
/// groups onto the cheapest one.
pub fn greedy_tv_min(w0: &[f64], rho: f64, c: &[f64]) -> f64 {
    let k = w0.len();
    let lo = (0..k).min_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
    let mut w = w0.to_vec();
    let mut order: Vec<usize> = (0..k).filter(|&g| g != lo).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
    let mut budget = rho;
    for g in order {
        if budget <= 0.0 {
            break;
        }
        let moved = w[g].min(budget);
        w[g] -= moved;
        w[lo] += moved;
        budget -= moved;
    }
    w.iter().zip(c).map(|(a, b)| a * b).sum()
}

/// Robust value of `p` over the TV ball, from the greedy inner minimum per opponent.
pub fn tv_value_oracle(p: &[f64], gm: &GroupMargins, w0: &[f64], rho: f64) -> f64 {
    let rows: Vec<Vec<Vec<f64>>> = gm.per_group.iter().map(|m| m.rows()).collect();
    let per_group: Vec<Vec<f64>> = rows.iter().map(|r| payoffs(p, r)).collect();
    (0..gm.num_models())
        .map(|a| {
            let c: Vec<f64> = per_group.iter().map(|row| row[a]).collect();
            greedy_tv_min(w0, rho, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Closed-form small-radius value `min_a [w0·c_a − ρ (max c_a − min c_a)]`.
pub fn closed_form_value(p: &[f64], gm: &GroupMargins, w0: &[f64], rho: f64) -> f64 {
    let per_group: Vec<Vec<f64>> = gm.per_group.iter().map(|m| payoffs(p, &m.rows())).collect();
    (0..gm.num_models())
        .map(|a| {
            let c: Vec<f64> = per_group.iter().map(|row| row[a]).collect();
            let mean: f64 = w0.iter().zip(&c).map(|(w, x)| w * x).sum();
            let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            mean - rho * (hi - lo)
        })
        .fold(f64::INFINITY, f64::min)
}
