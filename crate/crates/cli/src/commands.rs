use std::path::Path;

use maxlot::harness::{
    cost_frontier, generalization_gap, regret_simulation, reversal_table, split_points, sweep_rho, FrontierPoint,
    GapPoint, SweepOptions, SweepPoint,
};
use maxlot::lottery::{bipartisan_set, condorcet_winner, maximal_lottery, Lottery};
use maxlot::prefdata::{build_margins, pooled_matrix, split, write_votes_csv, GroupMargins, MixtureWeights, VoteTable};
use maxlot::robust::{
    inner_min_value, rho_from_data, robust_lottery, sparsify, AmbiguitySet, LotteryConstraint, RobustSolveReport,
};
use maxlot::synth::{planted_margins, synth_generate, SynthConfig};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::CliError;
use crate::io::{num, opt_num, read_costs, read_margins, read_votes, write_atomic, write_csv, write_json};

fn names(roster: &[String], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| roster[i].clone()).collect()
}

fn load_votes(input: &VoteInput) -> Result<VoteTable, CliError> {
    let table = read_votes(&input.votes, input.format.map(Into::into))?;
    Ok(filter(table, &input.groups))
}

fn filter(table: VoteTable, groups: &[String]) -> VoteTable {
    if groups.is_empty() {
        return table;
    }
    let (kept, dropped) = table.filter_groups(groups);
    if dropped > 0 {
        log::warn!("dropped {dropped} votes outside --groups");
    }
    kept
}

/// Explicit masses if given, else the vote shares recorded with the margins.
fn mixture(gm: &GroupMargins, masses: &[f64], flag: &str) -> Result<MixtureWeights, CliError> {
    if masses.is_empty() {
        return gm
            .empirical_weights()
            .map_err(|_| CliError::input(format!("margins file has no vote counts; pass {flag}")));
    }
    if masses.len() != gm.num_groups() {
        return Err(CliError::input(format!(
            "{flag} has {} entries for {} groups",
            masses.len(),
            gm.num_groups()
        )));
    }
    Ok(MixtureWeights::normalized(masses)?)
}

fn total_votes(gm: &GroupMargins) -> Result<u64, CliError> {
    let n = gm.votes_per_group.iter().sum::<f64>().round();
    if n < 1.0 {
        return Err(CliError::input("--rho-auto needs vote counts in the margins file"));
    }
    Ok(n as u64)
}

/// Resolves `--rho` / `--rho-auto` into a radius and a JSON note on how it was chosen.
fn resolve_rho(gm: &GroupMargins, choice: &RhoChoice, delta: f64) -> Result<(f64, Value), CliError> {
    match choice.rho {
        Some(rho) => Ok((rho, json!({ "mode": "fixed" }))),
        None => {
            let n = total_votes(gm)?;
            let rho = rho_from_data(n, gm.num_groups(), delta)?;
            Ok((rho, json!({ "mode": "auto", "n": n, "delta": delta })))
        }
    }
}

fn print_json(value: &Value) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ml_json(gm_roster: &[String], lot: &Lottery, bp: &[usize], cw: Option<usize>) -> Value {
    json!({
        "lottery": lot.to_json_value(),
        "value": lot.value,
        "bipartisan_set": names(gm_roster, bp),
        "condorcet_winner": cw.map(|i| gm_roster[i].clone()),
    })
}

pub fn ingest(args: &IngestArgs) -> Result<(), CliError> {
    let votes = load_votes(&args.input)?;
    let gm = build_margins(&votes, args.input.eta, args.input.tie_policy.into())?;
    let mut text = gm.to_json()?;
    text.push('\n');
    write_atomic(&args.out, text.as_bytes())?;
    println!("models: {}", gm.num_models());
    println!("groups: {}", gm.num_groups());
    for (g, n) in gm.groups.iter().zip(&gm.votes_per_group) {
        println!("votes[{g}]: {}", num(*n));
    }
    Ok(())
}

pub fn ml(args: &MlArgs) -> Result<(), CliError> {
    let gm = read_margins(&args.margins)?;
    let (mat, source) = match &args.group {
        Some(g) => {
            let k = gm
                .group_index(g)
                .ok_or_else(|| CliError::input(format!("unknown group {g:?}; known: {}", gm.groups.join(","))))?;
            (gm.per_group[k].clone(), json!({ "group": g }))
        }
        None => {
            let w = mixture(&gm, &args.weights.weights, "--weights")?;
            let source = json!({ "weights": w.as_slice() });
            (pooled_matrix(&gm, &w)?, source)
        }
    };
    let lot = maximal_lottery(&mat)?;
    let bp = bipartisan_set(&mat)?;
    let mut out = ml_json(&gm.roster, &lot, &bp, condorcet_winner(&mat, true));
    out["source"] = source;
    if let Some(path) = &args.out {
        write_json(path, &out)?;
    }
    print_json(&out)
}

pub fn drl(args: &DrlArgs) -> Result<(), CliError> {
    let gm = read_margins(&args.margins)?;
    let center = mixture(&gm, &args.weights.weights, "--weights")?;
    let (rho, how) = resolve_rho(&gm, &args.rho, args.delta)?;
    let amb = AmbiguitySet::tv_ball(gm.clone(), center, rho)?;
    let mut extra = Vec::new();
    let mut costs = None;
    if let (Some(budget), Some(path)) = (args.budget, &args.costs) {
        let c = read_costs(path, &gm.roster)?;
        extra.push(LotteryConstraint::budget(&c, budget));
        costs = Some(c);
    }
    let rep: RobustSolveReport = robust_lottery(&amb, &extra).map_err(|e| match e {
        maxlot::robust::RobustError::Infeasible => CliError::Infeasible(format!(
            "no lottery has expected cost at most {}",
            args.budget.unwrap_or(f64::NAN)
        )),
        other => other.into(),
    })?;
    let mut out = rep.to_json_value();
    out["rho_source"] = how;
    if let (Some(c), Some(budget)) = (&costs, args.budget) {
        let cost: f64 = rep.lottery.probs.iter().zip(c).map(|(p, c)| p * c).sum();
        out["budget"] = json!({ "budget": budget, "expected_cost": cost });
    }
    if let Some(eps) = args.sparsify {
        let sp = sparsify(&rep.lottery, &amb, eps, args.trials, args.seed)?;
        let value = inner_min_value(&sp.lottery.probs, &amb)?;
        out["sparse"] = json!({
            "epsilon": eps,
            "sample_size": sp.sample_size,
            "trial": sp.best_trial,
            "reference_value": sp.reference_value,
            "robust_value": value,
            "lottery": sp.lottery.to_json_value(),
        });
    }
    if let Some(path) = &args.out {
        write_json(path, &out)?;
    }
    print_json(&out)
}

fn sweep_options(s: &SweepSettings, eta: f64, tie: TieArg) -> SweepOptions {
    let mut opts = SweepOptions {
        bootstrap_n: s.bootstrap,
        seed: s.seed,
        eta,
        tie_policy: tie.into(),
        opponent: s.opponent.into(),
        stratified: s.stratified,
        ..SweepOptions::default()
    };
    if !s.grid.is_empty() {
        opts.grid = s.grid.clone();
    }
    opts
}

struct SweepOutput {
    points: Vec<SweepPoint>,
    gap: Vec<GapPoint>,
}

fn run_sweep(votes: &VoteTable, s: &SweepSettings, opts: &SweepOptions) -> Result<SweepOutput, CliError> {
    let (train, test) = split(votes, s.train_fraction, s.seed)?;
    let points = sweep_rho(&train, &test, opts)?;
    let (tr, te) = split_points(&points);
    let gap = generalization_gap(&tr, &te)?;
    Ok(SweepOutput { points, gap })
}

fn write_sweep(
    dir: &Path,
    votes: &VoteTable,
    s: &SweepSettings,
    opts: &SweepOptions,
    out: &SweepOutput,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for p in &out.points {
        let base = |scope: &str, group: &str, e: &maxlot::harness::Estimate| {
            vec![
                num(p.rho),
                p.split.as_str().into(),
                scope.into(),
                group.into(),
                num(e.mean),
                num(e.stderr),
            ]
        };
        rows.push(base("overall", "", &p.overall));
        rows.push(base("worst_group", "", &p.worst_group));
        for (g, e) in votes.groups.iter().zip(&p.per_group) {
            rows.push(base("group", g, e));
        }
    }
    write_csv(
        &dir.join("sweep.csv"),
        &["rho", "split", "scope", "group", "mean", "stderr"],
        &rows,
    )?;
    let points: Vec<Value> = out
        .points
        .iter()
        .map(|p| {
            let per_group: serde_json::Map<String, Value> = votes
                .groups
                .iter()
                .cloned()
                .zip(p.per_group.iter().map(|e| json!(e)))
                .collect();
            json!({
                "rho": p.rho,
                "split": p.split,
                "overall": p.overall,
                "worst_group": p.worst_group,
                "per_group": per_group,
                "lottery": p.lottery,
            })
        })
        .collect();
    write_json(
        &dir.join("sweep.json"),
        &json!({
            "roster": votes.roster,
            "groups": votes.groups,
            "train_fraction": s.train_fraction,
            "options": opts,
            "points": points,
            "gap": out.gap,
        }),
    )?;
    let gap_rows: Vec<Vec<String>> = out.gap.iter().map(|g| vec![num(g.rho), num(g.gap)]).collect();
    write_csv(&dir.join("gap.csv"), &["rho", "gap"], &gap_rows)
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let votes = load_votes(&args.input)?;
    let opts = sweep_options(&args.sweep, args.input.eta, args.input.tie_policy);
    let out = run_sweep(&votes, &args.sweep, &opts)?;
    write_sweep(&args.out_dir, &votes, &args.sweep, &opts, &out)?;
    println!("wrote sweep.csv, sweep.json, gap.csv to {}", args.out_dir.display());
    Ok(())
}

fn frontier_rows(roster: &[String], points: &[FrontierPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            let support = p
                .lottery
                .as_ref()
                .map(|l| names(roster, &l.support()).join(";"))
                .unwrap_or_default();
            vec![
                num(p.budget),
                p.feasible.to_string(),
                opt_num(p.worst_case_win_rate),
                opt_num(p.expected_cost),
                support,
            ]
        })
        .collect()
}

fn frontier_json(roster: &[String], costs: &[f64], rho: f64, how: Value, points: &[FrontierPoint]) -> Value {
    json!({
        "rho": rho,
        "rho_source": how,
        "roster": roster,
        "costs": costs,
        "points": points,
    })
}

const FRONTIER_HEADER: [&str; 5] = ["budget", "feasible", "worst_case_win_rate", "expected_cost", "support"];

fn write_frontier(
    dir: &Path,
    gm: &GroupMargins,
    costs: &[f64],
    rho: f64,
    how: Value,
    points: &[FrontierPoint],
) -> Result<(), CliError> {
    write_csv(
        &dir.join("frontier.csv"),
        &FRONTIER_HEADER,
        &frontier_rows(&gm.roster, points),
    )?;
    write_json(
        &dir.join("frontier.json"),
        &frontier_json(&gm.roster, costs, rho, how, points),
    )
}

pub fn frontier(args: &FrontierArgs) -> Result<(), CliError> {
    let gm = read_margins(&args.margins)?;
    let center = mixture(&gm, &args.weights.weights, "--weights")?;
    let (rho, how) = resolve_rho(&gm, &args.rho, args.delta)?;
    let costs = read_costs(&args.costs, &gm.roster)?;
    let points = cost_frontier(&gm, &center, rho, &costs, &args.budgets)?;
    write_frontier(&args.out_dir, &gm, &costs, rho, how, &points)?;
    println!("wrote frontier.csv, frontier.json to {}", args.out_dir.display());
    Ok(())
}

pub fn regret_sim(args: &RegretArgs) -> Result<(), CliError> {
    let gm = read_margins(&args.margins)?;
    let w_star = mixture(&gm, &args.true_weights, "--true-weights")?;
    if args.trials == 0 {
        return Err(CliError::input("--trials must be positive"));
    }
    let samples = regret_simulation(&gm, &w_star, args.n, args.delta, args.trials, args.seed)?;
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            vec![
                s.trial.to_string(),
                num(s.rho_used),
                num(s.tv_error),
                s.covered.to_string(),
                num(s.regret),
                num(s.bound),
                (s.regret <= s.bound).to_string(),
            ]
        })
        .collect();
    write_csv(
        &args.out_dir.join("regret.csv"),
        &["trial", "rho", "tv_error", "covered", "regret", "bound", "within_bound"],
        &rows,
    )?;
    let t = samples.len() as f64;
    let coverage = samples.iter().filter(|s| s.covered).count() as f64 / t;
    let within = samples.iter().filter(|s| s.regret <= s.bound).count() as f64 / t;
    let mean = samples.iter().map(|s| s.regret).sum::<f64>() / t;
    let max = samples.iter().map(|s| s.regret).fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "n": args.n,
        "delta": args.delta,
        "groups": gm.num_groups(),
        "true_weights": w_star.as_slice(),
        "trials": args.trials,
        "seed": args.seed,
        "rho": samples[0].rho_used,
        "bound": samples[0].bound,
        "coverage": coverage,
        "bound_satisfaction": within,
        "mean_regret": mean,
        "max_regret": max,
    });
    write_json(&args.out_dir.join("regret.json"), &summary)?;
    print_json(&summary)
}

fn synth_config(s: &SynthSettings) -> SynthConfig {
    SynthConfig {
        models: s.models,
        groups: s.num_groups,
        votes_per_group: s.votes_per_group,
        cycle_strength: s.cycle_strength,
        jitter: s.jitter,
        seed: s.synth_seed,
        ..SynthConfig::default()
    }
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let config = synth_config(&args.synth);
    let votes = synth_generate(&config)?;
    let mut buf = Vec::new();
    write_votes_csv(&votes, &mut buf)?;
    write_atomic(&args.out, &buf)?;
    if let Some(path) = &args.planted_out {
        let mut text = planted_margins(&config)?.to_json()?;
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    println!(
        "wrote {} votes over {} models and {} groups",
        votes.len(),
        votes.roster.len(),
        votes.groups.len()
    );
    Ok(())
}

/// Evenly spaced budgets from the cheapest to the dearest model.
fn default_budgets(costs: &[f64]) -> Vec<f64> {
    let lo = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let (votes, source) = match &args.votes {
        Some(path) => (
            filter(read_votes(path, args.format.map(Into::into))?, &args.groups),
            json!({ "votes": path.display().to_string() }),
        ),
        None => {
            let config = synth_config(&args.synth);
            (
                filter(synth_generate(&config)?, &args.groups),
                json!({ "synthetic": config }),
            )
        }
    };
    let gm = build_margins(&votes, args.eta, args.tie_policy.into())?;
    let w = gm.empirical_weights()?;
    let dir = &args.out_dir;

    let reversals = if gm.num_groups() >= 2 {
        reversal_table(&gm, &w, args.top)?
    } else {
        log::warn!("reversal table needs at least two groups; writing it empty");
        Vec::new()
    };
    let rev_rows: Vec<Vec<String>> = reversals
        .iter()
        .map(|r| vec![r.model_i.clone(), r.model_j.clone(), num(r.rate)])
        .collect();
    write_csv(&dir.join("reversal.csv"), &["model_i", "model_j", "rate"], &rev_rows)?;

    let opts = sweep_options(&args.sweep, args.eta, args.tie_policy);
    let sw = run_sweep(&votes, &args.sweep, &opts)?;
    write_sweep(dir, &votes, &args.sweep, &opts, &sw)?;

    let pooled = pooled_matrix(&gm, &w)?;
    let ml = maximal_lottery(&pooled)?;
    let bp = bipartisan_set(&pooled)?;
    let (rho, how) = match args.rho {
        Some(r) => (r, json!({ "mode": "fixed" })),
        None => {
            let n = total_votes(&gm)?;
            let rho = rho_from_data(n, gm.num_groups(), args.delta)?;
            (rho, json!({ "mode": "auto", "n": n, "delta": args.delta }))
        }
    };
    let amb = AmbiguitySet::tv_ball(gm.clone(), w.clone(), rho)?;
    let drl = robust_lottery(&amb, &[])?;

    let mut frontier_summary = Value::Null;
    if let Some(path) = &args.costs {
        let costs = read_costs(path, &gm.roster)?;
        let budgets = if args.budgets.is_empty() {
            default_budgets(&costs)
        } else {
            args.budgets.clone()
        };
        let points = cost_frontier(&gm, &w, rho, &costs, &budgets)?;
        write_frontier(dir, &gm, &costs, rho, how.clone(), &points)?;
        frontier_summary = json!({ "budgets": budgets, "feasible": points.iter().filter(|p| p.feasible).count() });
    }

    let per_group: serde_json::Map<String, Value> = gm
        .groups
        .iter()
        .cloned()
        .zip(gm.votes_per_group.iter().map(|v| json!(v)))
        .collect();
    let summary = json!({
        "source": source,
        "models": gm.num_models(),
        "groups": gm.num_groups(),
        "votes_per_group": per_group,
        "weights": w.as_slice(),
        "eta": args.eta,
        "ml": ml_json(&gm.roster, &ml, &bp, condorcet_winner(&pooled, true)),
        "drl": { "rho": rho, "rho_source": how, "report": drl.to_json_value() },
        "reversal_top": reversals,
        "gap": sw.gap,
        "frontier": frontier_summary,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    let mut files = vec!["summary.json", "reversal.csv", "sweep.csv", "sweep.json", "gap.csv"];
    if args.costs.is_some() {
        files.extend(["frontier.csv", "frontier.json"]);
    }
    println!("wrote {} to {}", files.join(", "), dir.display());
    Ok(())
}
