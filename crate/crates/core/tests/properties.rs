mod common;

use common::*;
use maxlot::lottery::{condorcet_winner, maximal_lottery};
use maxlot::prefdata::{
    build_margins, pooled_matrix, reversal_rate, win_rate, MixtureWeights, Outcome, TiePolicy, VoteRecord, VoteTable,
};
use maxlot::robust::{inner_min_value, robust_lottery, AmbiguitySet};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn vote_table() -> impl Strategy<Value = VoteTable> {
    (2usize..6, 1usize..4).prop_flat_map(|(m, k)| {
        prop::collection::vec((0..m, 1..m, 0u8..3, 0..k), 1..80).prop_map(move |raw| {
            let records = raw
                .into_iter()
                .map(|(a, off, o, g)| {
                    let b = (a + off) % m;
                    let outcome = [Outcome::AWins, Outcome::BWins, Outcome::Tie][o as usize];
                    VoteRecord::new(&format!("x{a}"), &format!("x{b}"), outcome, &format!("g{g}"))
                })
                .collect();
            VoteTable::new(records)
        })
    })
}

fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn built_margins_are_skew_and_bounded(
        votes in vote_table(),
        eta in 0.0f64..3.0,
        half in any::<bool>(),
    ) {
        let policy = if half { TiePolicy::HalfWin } else { TiePolicy::Drop };
        let gm = build_margins(&votes, eta, policy).unwrap();
        for mat in &gm.per_group {
            for i in 0..mat.dim() {
                prop_assert_eq!(mat.get(i, i), 0.0);
                for j in 0..mat.dim() {
                    prop_assert_eq!(mat.get(i, j), -mat.get(j, i));
                    prop_assert!(mat.get(i, j).abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn unsmoothed_margins_match_raw_formula(seed in seeds(), m in 2usize..5) {
        let mut r = rng(seed);
        let mut records = Vec::new();
        let mut wins = vec![vec![0.0f64; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                // at least one comparison per pair
                for _ in 0..r.gen_range(1..6) {
                    let (a, b) = if r.gen_bool(0.5) { (i, j) } else { (j, i) };
                    records.push(VoteRecord::new(&format!("x{a}"), &format!("x{b}"), Outcome::AWins, "g"));
                    wins[a][b] += 1.0;
                }
            }
        }
        let gm = build_margins(&VoteTable::new(records), 0.0, TiePolicy::Drop).unwrap();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    let expect = (wins[i][j] - wins[j][i]) / (wins[i][j] + wins[j][i]);
                    prop_assert_eq!(gm.per_group[0].get(i, j), expect);
                }
            }
        }
    }

    #[test]
    fn pooling_is_linear(seed in seeds(), m in 2usize..6, k in 1usize..5, lambda in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let gm = random_groups(&mut r, m, k);
        let w1 = random_weights(&mut r, k);
        let w2 = random_weights(&mut r, k);
        let mixed: Vec<f64> = w1.as_slice().iter().zip(w2.as_slice()).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let lhs = pooled_matrix(&gm, &MixtureWeights::normalized(&mixed).unwrap()).unwrap();
        let a = pooled_matrix(&gm, &w1).unwrap();
        let b = pooled_matrix(&gm, &w2).unwrap();
        for i in 0..m {
            for j in 0..m {
                prop_assert!((lhs.get(i, j) - (lambda * a.get(i, j) + (1.0 - lambda) * b.get(i, j))).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn win_rates_are_complementary(seed in seeds(), m in 2usize..7) {
        let mut r = rng(seed);
        let mat = random_skew(&mut r, m);
        let p = random_weights(&mut r, m);
        let q = random_weights(&mut r, m);
        let a = win_rate(p.as_slice(), &mat, q.as_slice()).unwrap();
        let b = win_rate(q.as_slice(), &mat, p.as_slice()).unwrap();
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn reversal_rate_is_symmetric(seed in seeds(), m in 2usize..6, k in 2usize..5) {
        let mut r = rng(seed);
        let gm = random_groups(&mut r, m, k);
        let w = random_weights(&mut r, k);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    let a = reversal_rate(&gm, &w, i, j).unwrap();
                    prop_assert_eq!(a, reversal_rate(&gm, &w, j, i).unwrap());
                    prop_assert!((0.0..=1.0).contains(&a));
                }
            }
        }
    }

    #[test]
    fn maximal_lottery_never_loses(seed in seeds(), m in 2usize..9) {
        let mut r = rng(seed);
        let rows = skew_rows(&mut r, m);
        let mat = maxlot::prefdata::MarginMatrix::new(ids(m), rows.clone()).unwrap();
        let ml = maximal_lottery(&mat).unwrap();
        prop_assert!(min_payoff(&ml.probs, &rows) >= -1e-7);
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            prop_assert!(win_rate(&ml.probs, &mat, &e).unwrap() >= 0.5 - 1e-7);
        }
    }

    #[test]
    fn condorcet_winner_gets_everything(seed in seeds(), m in 2usize..8) {
        let mut r = rng(seed);
        let mut rows = skew_rows(&mut r, m);
        let w = r.gen_range(0..m);
        for j in 0..m {
            if j != w {
                let v = r.gen_range(0.01..1.0);
                rows[w][j] = v;
                rows[j][w] = -v;
            }
        }
        let mat = maxlot::prefdata::MarginMatrix::new(ids(m), rows).unwrap();
        prop_assert_eq!(condorcet_winner(&mat, true), Some(w));
        prop_assert_eq!(maximal_lottery(&mat).unwrap().support(), vec![w]);
    }

    #[test]
    fn maximal_lottery_is_neutral(seed in seeds(), m in 2usize..8) {
        let mut r = rng(seed);
        let rows = skew_rows(&mut r, m);
        let mat = maxlot::prefdata::MarginMatrix::new(ids(m), rows).unwrap();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut r);
        let base = maximal_lottery(&mat).unwrap();
        let moved = maximal_lottery(&mat.permuted(&order)).unwrap();
        for (k, &o) in order.iter().enumerate() {
            prop_assert_eq!(moved.probs[k], base.probs[o]);
        }
    }

    #[test]
    fn value_is_lipschitz_in_weights(seed in seeds(), m in 2usize..6, k in 1usize..5) {
        let mut r = rng(seed);
        let gm = random_groups(&mut r, m, k);
        let p = random_weights(&mut r, m);
        let w1 = random_weights(&mut r, k);
        let w2 = random_weights(&mut r, k);
        let v1 = min_payoff(p.as_slice(), &mix_rows(&gm, w1.as_slice()));
        let v2 = min_payoff(p.as_slice(), &mix_rows(&gm, w2.as_slice()));
        let l1: f64 = w1.as_slice().iter().zip(w2.as_slice()).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!((v1 - v2).abs() <= l1 + 1e-12);
    }

    #[test]
    fn robust_value_nonpositive_and_self_consistent(seed in seeds(), m in 2usize..6, k in 1usize..4, rho in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let gm = random_groups(&mut r, m, k);
        let w0 = random_weights(&mut r, k);
        let amb = AmbiguitySet::tv_ball(gm.clone(), w0.clone(), rho).unwrap();
        let rep = robust_lottery(&amb, &[]).unwrap();
        prop_assert!(rep.robust_value <= 1e-9);
        let direct = inner_min_value(&rep.lottery.probs, &amb).unwrap();
        prop_assert!((direct - rep.robust_value).abs() <= 1e-7);
        prop_assert!((tv_value_oracle(&rep.lottery.probs, &gm, w0.as_slice(), rho) - direct).abs() <= 1e-9);
    }

    #[test]
    fn tv_ball_matches_its_vertex_hull(seed in seeds(), m in 2usize..6, k in 2usize..5, frac in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let gm = random_groups(&mut r, m, k);
        let w0 = random_weights(&mut r, k);
        let rho = frac * w0.small_radius_threshold();
        let amb = AmbiguitySet::tv_ball(gm, w0, rho).unwrap();
        let hull = maxlot::robust::tv_ball_as_hull(&amb).unwrap();
        let a = robust_lottery(&amb, &[]).unwrap().robust_value;
        let b = robust_lottery(&hull, &[]).unwrap().robust_value;
        prop_assert!((a - b).abs() <= 1e-7);
    }
}
