//! Vote ingestion, per-group majority margins, resampling and descriptive
//! statistics.
//!
//! A vote log is a list of pairwise comparisons, each tagged with the
//! subpopulation (language, task family, annotator pool, ...) it came from.
//! Margins are built per group on a shared, lexicographically ordered roster so
//! that every downstream matrix uses identical indices.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds::{substream, Stream};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed record at line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("unknown winner token {token:?} at line {line}")]
    UnknownWinner { line: u64, token: String },
    #[error("self-comparison at line {line}")]
    SelfComparison { line: u64 },
    #[error("input is not valid UTF-8: {0}")]
    Encoding(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("empty vote table")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("reversal undefined for one group")]
    SingleGroup,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    AWins,
    BWins,
    Tie,
}

impl Outcome {
    /// Accepts `a`/`b`/`tie` and the arena spellings `model_a`/`model_b`/`tie (bothbad)`.
    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "a" | "model_a" => Some(Outcome::AWins),
            "b" | "model_b" => Some(Outcome::BWins),
            "tie" | "tie (bothbad)" | "both_bad" | "draw" => Some(Outcome::Tie),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Outcome::AWins => "a",
            Outcome::BWins => "b",
            Outcome::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub model_a: String,
    pub model_b: String,
    pub outcome: Outcome,
    pub group: String,
    pub weight: f64,
}

impl VoteRecord {
    pub fn new(model_a: &str, model_b: &str, outcome: Outcome, group: &str) -> Self {
        Self {
            model_a: model_a.to_string(),
            model_b: model_b.to_string(),
            outcome,
            group: group.to_string(),
            weight: 1.0,
        }
    }
}

/// Comparison records plus the sorted roster and group lists they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    pub records: Vec<VoteRecord>,
    pub roster: Vec<String>,
    pub groups: Vec<String>,
}

impl VoteTable {
    /// Roster and groups are the sorted distinct identifiers in `records`.
    pub fn new(records: Vec<VoteRecord>) -> Self {
        let mut models = BTreeSet::new();
        let mut groups = BTreeSet::new();
        for r in &records {
            models.insert(r.model_a.clone());
            models.insert(r.model_b.clone());
            groups.insert(r.group.clone());
        }
        Self {
            records,
            roster: models.into_iter().collect(),
            groups: groups.into_iter().collect(),
        }
    }

    /// Same records on explicit roster/group lists, which may list identifiers
    /// that have no records.
    pub fn with_lists(records: Vec<VoteRecord>, roster: Vec<String>, groups: Vec<String>) -> Result<Self, DataError> {
        let rs: BTreeSet<&String> = roster.iter().collect();
        let gs: BTreeSet<&String> = groups.iter().collect();
        if rs.len() != roster.len() || gs.len() != groups.len() {
            return Err(DataError::Invalid("duplicate roster or group identifiers".into()));
        }
        for r in &records {
            if !rs.contains(&r.model_a) || !rs.contains(&r.model_b) {
                return Err(DataError::Invalid(format!(
                    "record {} vs {} references a model outside the roster",
                    r.model_a, r.model_b
                )));
            }
            if !gs.contains(&r.group) {
                return Err(DataError::Invalid(format!("unknown group {:?}", r.group)));
            }
        }
        Ok(Self {
            records,
            roster,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn derive(&self, records: Vec<VoteRecord>) -> Self {
        Self {
            records,
            roster: self.roster.clone(),
            groups: self.groups.clone(),
        }
    }

    /// Keeps only records whose group is whitelisted; returns the table
    /// (re-derived roster/groups) and the number of records dropped.
    pub fn filter_groups(&self, whitelist: &[String]) -> (Self, usize) {
        let keep: BTreeSet<&String> = whitelist.iter().collect();
        let records: Vec<VoteRecord> = self
            .records
            .iter()
            .filter(|r| keep.contains(&r.group))
            .cloned()
            .collect();
        let dropped = self.records.len() - records.len();
        if dropped > 0 {
            log::info!("dropped {dropped} records outside the group whitelist");
        }
        (Self::new(records), dropped)
    }

    /// Total record weight per group, in `groups` order.
    pub fn group_totals(&self) -> Vec<f64> {
        let index: BTreeMap<&str, usize> = self.groups.iter().enumerate().map(|(k, g)| (g.as_str(), k)).collect();
        let mut totals = vec![0.0; self.groups.len()];
        for r in &self.records {
            totals[index[r.group.as_str()]] += r.weight;
        }
        totals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteFormat {
    Csv,
    Jsonl,
}

#[derive(Deserialize)]
struct JsonVote {
    model_a: Option<String>,
    model_b: Option<String>,
    winner: Option<String>,
    #[serde(alias = "language")]
    group: Option<String>,
    weight: Option<f64>,
}

fn make_record(
    line: u64,
    model_a: Option<&str>,
    model_b: Option<&str>,
    winner: Option<&str>,
    group: Option<&str>,
    weight: Option<&str>,
) -> Result<VoteRecord, DataError> {
    let field = |v: Option<&str>, name: &str| -> Result<String, DataError> {
        match v.map(str::trim) {
            Some(s) if !s.is_empty() => Ok(s.to_string()),
            _ => Err(DataError::Malformed {
                line,
                msg: format!("missing field {name}"),
            }),
        }
    };
    let model_a = field(model_a, "model_a")?;
    let model_b = field(model_b, "model_b")?;
    let token = field(winner, "winner")?;
    let group = field(group, "group")?;
    let outcome = Outcome::parse(&token).ok_or(DataError::UnknownWinner { line, token })?;
    if model_a == model_b {
        return Err(DataError::SelfComparison { line });
    }
    let weight = match weight.map(str::trim) {
        None | Some("") => 1.0,
        Some(w) => w.parse::<f64>().map_err(|_| DataError::Malformed {
            line,
            msg: format!("weight {w:?} is not a number"),
        })?,
    };
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(DataError::Malformed {
            line,
            msg: format!("weight must be finite and nonnegative, got {weight}"),
        });
    }
    Ok(VoteRecord {
        model_a,
        model_b,
        outcome,
        group,
        weight,
    })
}

/// Parses a vote log. CSV columns are `model_a,model_b,winner,group[,weight]`;
/// a header row is optional and, when present, may reorder the columns.
/// Line numbers in errors are physical lines of the input.
pub fn parse_votes<R: Read>(input: R, format: VoteFormat) -> Result<VoteTable, DataError> {
    match format {
        VoteFormat::Csv => parse_csv(input),
        VoteFormat::Jsonl => parse_jsonl(input),
    }
}

fn parse_csv<R: Read>(input: R) -> Result<VoteTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    // Column positions of model_a, model_b, winner, group, weight.
    let mut cols: [Option<usize>; 5] = [Some(0), Some(1), Some(2), Some(3), Some(4)];
    let mut records = Vec::new();
    let mut first = true;
    for row in reader.records() {
        let row = row.map_err(|e| match e.kind() {
            csv::ErrorKind::Utf8 { .. } => DataError::Encoding(e.to_string()),
            _ => DataError::Malformed {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                msg: e.to_string(),
            },
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if first {
            first = false;
            if row.iter().any(|f| f == "model_a") {
                let find = |name: &str| row.iter().position(|h| h == name);
                cols = [
                    find("model_a"),
                    find("model_b"),
                    find("winner"),
                    find("group").or_else(|| find("language")),
                    find("weight"),
                ];
                if cols[..4].iter().any(Option::is_none) {
                    return Err(DataError::Malformed {
                        line,
                        msg: "header must name model_a, model_b, winner and group".into(),
                    });
                }
                continue;
            }
        }
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() < 4 {
            return Err(DataError::Malformed {
                line,
                msg: format!("expected at least 4 fields, found {}", row.len()),
            });
        }
        let get = |c: Option<usize>| c.and_then(|c| row.get(c));
        records.push(make_record(
            line,
            get(cols[0]),
            get(cols[1]),
            get(cols[2]),
            get(cols[3]),
            get(cols[4]),
        )?);
    }
    Ok(VoteTable::new(records))
}

fn parse_jsonl<R: Read>(input: R) -> Result<VoteTable, DataError> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| DataError::Encoding(format!("line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: JsonVote = serde_json::from_str(&line).map_err(|e| DataError::Malformed {
            line: lineno,
            msg: e.to_string(),
        })?;
        let weight = v.weight.map(|w| w.to_string());
        records.push(make_record(
            lineno,
            v.model_a.as_deref(),
            v.model_b.as_deref(),
            v.winner.as_deref(),
            v.group.as_deref(),
            weight.as_deref(),
        )?);
    }
    Ok(VoteTable::new(records))
}

/// Writes records as CSV with a header row.
pub fn write_votes_csv<W: std::io::Write>(table: &VoteTable, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model_a", "model_b", "winner", "group", "weight"])?;
    for r in &table.records {
        w.write_record([
            r.model_a.as_str(),
            r.model_b.as_str(),
            r.outcome.token(),
            r.group.as_str(),
            &format!("{}", r.weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Skew-symmetric matrix of pairwise win margins on a fixed roster, with the
/// raw comparison counts it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginMatrix {
    roster: Vec<String>,
    margins: Vec<f64>,
    counts: Vec<f64>,
}

/// Slack allowed when validating externally supplied matrices.
const MATRIX_TOL: f64 = 1e-12;

impl MarginMatrix {
    /// Validates skew-symmetry and the `[-1, 1]` range, then stores the exactly
    /// antisymmetrized upper triangle.
    pub fn new(roster: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let m = roster.len();
        let counts = vec![vec![0.0; m]; m];
        Self::with_counts(roster, rows, counts)
    }

    pub fn with_counts(roster: Vec<String>, rows: Vec<Vec<f64>>, counts: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let m = roster.len();
        if rows.len() != m || rows.iter().any(|r| r.len() != m) {
            return Err(DataError::Dimension(format!("margin matrix must be {m}x{m}")));
        }
        if counts.len() != m || counts.iter().any(|r| r.len() != m) {
            return Err(DataError::Dimension(format!("count matrix must be {m}x{m}")));
        }
        let mut margins = vec![0.0; m * m];
        let mut flat_counts = vec![0.0; m * m];
        for i in 0..m {
            if rows[i][i].abs() > MATRIX_TOL {
                return Err(DataError::Invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..m {
                let v = rows[i][j];
                if !v.is_finite() || v.abs() > 1.0 + MATRIX_TOL {
                    return Err(DataError::Invalid(format!("margin ({i},{j}) = {v} outside [-1,1]")));
                }
                if (v + rows[j][i]).abs() > MATRIX_TOL {
                    return Err(DataError::Invalid(format!("margins not skew-symmetric at ({i},{j})")));
                }
                let c = counts[i][j];
                if !(c.is_finite() && c >= 0.0) || (i == j && c != 0.0) || c != counts[j][i] {
                    return Err(DataError::Invalid(format!("invalid count at ({i},{j})")));
                }
                flat_counts[i * m + j] = c;
            }
            for j in i + 1..m {
                let v = rows[i][j].clamp(-1.0, 1.0);
                margins[i * m + j] = v;
                margins[j * m + i] = -v;
            }
        }
        Ok(Self {
            roster,
            margins,
            counts: flat_counts,
        })
    }

    /// Fills in a matrix from its strict upper triangle, antisymmetrizing exactly.
    /// Caller guarantees entries in `[-1, 1]`.
    pub(crate) fn from_upper(roster: Vec<String>, upper: impl Fn(usize, usize) -> f64, counts: Vec<f64>) -> Self {
        let m = roster.len();
        let mut margins = vec![0.0; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let v = upper(i, j);
                margins[i * m + j] = v;
                margins[j * m + i] = -v;
            }
        }
        Self {
            roster,
            margins,
            counts,
        }
    }

    pub fn dim(&self) -> usize {
        self.roster.len()
    }

    pub fn roster(&self) -> &[String] {
        &self.roster
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.margins[i * self.dim() + j]
    }

    pub fn count(&self, i: usize, j: usize) -> f64 {
        self.counts[i * self.dim() + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.margins
            .chunks(self.dim().max(1))
            .map(<[f64]>::to_vec)
            .take(self.dim())
            .collect()
    }

    pub fn count_rows(&self) -> Vec<Vec<f64>> {
        self.counts
            .chunks(self.dim().max(1))
            .map(<[f64]>::to_vec)
            .take(self.dim())
            .collect()
    }

    /// `pᵀ M e_a` for every alternative `a`.
    pub fn column_payoffs(&self, p: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut out = vec![0.0; m];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let row = &self.margins[i * m..(i + 1) * m];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += pi * v;
            }
        }
        out
    }

    /// `pᵀ M q`.
    pub fn bilinear(&self, p: &[f64], q: &[f64]) -> f64 {
        self.column_payoffs(p).iter().zip(q).map(|(a, b)| a * b).sum()
    }

    /// Same matrix with alternatives reordered: new index `k` is old index `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let m = self.dim();
        let roster = order.iter().map(|&o| self.roster[o].clone()).collect();
        let mut margins = vec![0.0; m * m];
        let mut counts = vec![0.0; m * m];
        for (a, &oa) in order.iter().enumerate() {
            for (b, &ob) in order.iter().enumerate() {
                margins[a * m + b] = self.margins[oa * m + ob];
                counts[a * m + b] = self.counts[oa * m + ob];
            }
        }
        Self {
            roster,
            margins,
            counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Ties are ignored.
    Drop,
    /// A tie adds half its weight to each side's wins.
    HalfWin,
}

/// Mixture weights over groups.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, DataError> {
        if weights.is_empty() {
            return Err(DataError::Invalid("mixture weights are empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DataError::Invalid(format!(
                "mixture weights must be nonnegative: {weights:?}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DataError::Invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Rescales nonnegative masses to sum to one.
    pub fn normalized(masses: &[f64]) -> Result<Self, DataError> {
        if masses.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DataError::Invalid(format!("masses must be nonnegative: {masses:?}")));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(DataError::Invalid("masses sum to zero".into()));
        }
        Ok(Self(masses.iter().map(|w| w / total).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        let mut w = vec![0.0; k];
        w[at] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total-variation distance `½‖w − v‖₁`.
    pub fn tv_distance(&self, other: &MixtureWeights) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Largest radius for which the TV ball around `self` has the simple
    /// two-coordinate-shift vertex structure: `min(min_k w_k, 1 − max_k w_k)`.
    pub fn small_radius_threshold(&self) -> f64 {
        let min = self.0.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        min.min(1.0 - max)
    }
}

/// Per-group margin matrices on a shared roster.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMargins {
    pub roster: Vec<String>,
    pub groups: Vec<String>,
    pub per_group: Vec<MarginMatrix>,
    pub votes_per_group: Vec<f64>,
    pub eta: f64,
    pub tie_policy: TiePolicy,
}

impl GroupMargins {
    /// Wraps hand-built matrices (e.g. planted or textbook instances).
    pub fn from_matrices(groups: Vec<String>, per_group: Vec<MarginMatrix>) -> Result<Self, DataError> {
        if groups.len() != per_group.len() || per_group.is_empty() {
            return Err(DataError::Dimension("need one matrix per group".into()));
        }
        let roster = per_group[0].roster().to_vec();
        if per_group.iter().any(|m| m.roster() != roster.as_slice()) {
            return Err(DataError::Invalid("group matrices use different rosters".into()));
        }
        let k = groups.len();
        Ok(Self {
            roster,
            groups,
            per_group,
            votes_per_group: vec![1.0; k],
            eta: 0.0,
            tie_policy: TiePolicy::Drop,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_models(&self) -> usize {
        self.roster.len()
    }

    /// Vote shares per group.
    pub fn empirical_weights(&self) -> Result<MixtureWeights, DataError> {
        MixtureWeights::normalized(&self.votes_per_group).map_err(|_| DataError::Empty)
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == name)
    }

    pub fn to_json(&self) -> Result<String, DataError> {
        let file = GroupMarginsFile {
            roster: self.roster.clone(),
            groups: self.groups.clone(),
            matrices: self
                .groups
                .iter()
                .cloned()
                .zip(self.per_group.iter().map(MarginMatrix::rows))
                .collect(),
            counts: self
                .groups
                .iter()
                .cloned()
                .zip(self.per_group.iter().map(MarginMatrix::count_rows))
                .collect(),
            votes_per_group: self
                .groups
                .iter()
                .cloned()
                .zip(self.votes_per_group.iter().cloned())
                .collect(),
            eta: self.eta,
            tie_policy: self.tie_policy,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let file: GroupMarginsFile = serde_json::from_str(text)?;
        let mut per_group = Vec::with_capacity(file.groups.len());
        let mut votes = Vec::with_capacity(file.groups.len());
        for g in &file.groups {
            let rows = file
                .matrices
                .get(g)
                .ok_or_else(|| DataError::Invalid(format!("no matrix for group {g:?}")))?;
            let counts = file.counts.get(g).cloned().unwrap_or_else(|| {
                let m = file.roster.len();
                vec![vec![0.0; m]; m]
            });
            per_group.push(MarginMatrix::with_counts(file.roster.clone(), rows.clone(), counts)?);
            votes.push(*file.votes_per_group.get(g).unwrap_or(&0.0));
        }
        if per_group.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Self {
            roster: file.roster,
            groups: file.groups,
            per_group,
            votes_per_group: votes,
            eta: file.eta,
            tie_policy: file.tie_policy,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct GroupMarginsFile {
    roster: Vec<String>,
    groups: Vec<String>,
    matrices: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    counts: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    votes_per_group: BTreeMap<String, f64>,
    #[serde(default)]
    eta: f64,
    #[serde(default = "default_tie_policy")]
    tie_policy: TiePolicy,
}

fn default_tie_policy() -> TiePolicy {
    TiePolicy::Drop
}

/// Builds one smoothed margin matrix per group.
///
/// With raw wins `w_ij` the smoothed margin is
/// `((w_ij + η) − (w_ji + η)) / (w_ij + w_ji + 2η)`, and `0` when the
/// denominator vanishes. Counts hold the unsmoothed `n_ij = w_ij + w_ji`.
pub fn build_margins(votes: &VoteTable, eta: f64, tie_policy: TiePolicy) -> Result<GroupMargins, DataError> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(DataError::Invalid(format!("smoothing must be nonnegative, got {eta}")));
    }
    let m = votes.roster.len();
    let k = votes.groups.len();
    let model_ix: BTreeMap<&str, usize> = votes.roster.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let group_ix: BTreeMap<&str, usize> = votes.groups.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut wins = vec![vec![0.0; m * m]; k];
    let mut totals = vec![0.0; k];
    for r in &votes.records {
        let (Some(&a), Some(&b), Some(&g)) = (
            model_ix.get(r.model_a.as_str()),
            model_ix.get(r.model_b.as_str()),
            group_ix.get(r.group.as_str()),
        ) else {
            return Err(DataError::Invalid(format!(
                "record {} vs {} in {:?} is outside the table's roster/groups",
                r.model_a, r.model_b, r.group
            )));
        };
        totals[g] += r.weight;
        let w = &mut wins[g];
        match (r.outcome, tie_policy) {
            (Outcome::AWins, _) => w[a * m + b] += r.weight,
            (Outcome::BWins, _) => w[b * m + a] += r.weight,
            (Outcome::Tie, TiePolicy::Drop) => {}
            (Outcome::Tie, TiePolicy::HalfWin) => {
                w[a * m + b] += 0.5 * r.weight;
                w[b * m + a] += 0.5 * r.weight;
            }
        }
    }
    let per_group = wins
        .iter()
        .map(|w| {
            let mut counts = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        counts[i * m + j] = w[i * m + j] + w[j * m + i];
                    }
                }
            }
            MarginMatrix::from_upper(
                votes.roster.clone(),
                |i, j| {
                    let (wij, wji) = (w[i * m + j] + eta, w[j * m + i] + eta);
                    let denom = wij + wji;
                    if denom > 0.0 {
                        ((wij - wji) / denom).clamp(-1.0, 1.0)
                    } else {
                        0.0
                    }
                },
                counts,
            )
        })
        .collect();
    Ok(GroupMargins {
        roster: votes.roster.clone(),
        groups: votes.groups.clone(),
        per_group,
        votes_per_group: totals,
        eta,
        tie_policy,
    })
}

/// `M(w) = Σ_k w_k M^(k)`, with summed counts.
pub fn pooled_matrix(gm: &GroupMargins, w: &MixtureWeights) -> Result<MarginMatrix, DataError> {
    pool(&gm.per_group, w.as_slice())
}

pub(crate) fn pool(mats: &[MarginMatrix], w: &[f64]) -> Result<MarginMatrix, DataError> {
    if mats.len() != w.len() || mats.is_empty() {
        return Err(DataError::Dimension(format!(
            "{} weights for {} matrices",
            w.len(),
            mats.len()
        )));
    }
    let m = mats[0].dim();
    let mut counts = vec![0.0; m * m];
    for mat in mats {
        for (c, v) in counts.iter_mut().zip(&mat.counts) {
            *c += v;
        }
    }
    Ok(MarginMatrix::from_upper(
        mats[0].roster().to_vec(),
        |i, j| {
            mats.iter()
                .zip(w)
                .map(|(mat, wk)| wk * mat.get(i, j))
                .sum::<f64>()
                .clamp(-1.0, 1.0)
        },
        counts,
    ))
}

/// Group shares `ŵ_k ∝` total record weight of group `k`.
pub fn empirical_weights(votes: &VoteTable) -> Result<MixtureWeights, DataError> {
    if votes.is_empty() {
        return Err(DataError::Empty);
    }
    MixtureWeights::normalized(&votes.group_totals()).map_err(|_| DataError::Empty)
}

/// Probability that a draw from `p` beats a draw from `q`: `½ + ½ pᵀMq`.
pub fn win_rate(p: &[f64], m: &MarginMatrix, q: &[f64]) -> Result<f64, DataError> {
    if p.len() != m.dim() || q.len() != m.dim() {
        return Err(DataError::Dimension(format!(
            "lotteries of length {} and {} on a {}-model roster",
            p.len(),
            q.len(),
            m.dim()
        )));
    }
    Ok((0.5 + 0.5 * m.bilinear(p, q)).clamp(0.0, 1.0))
}

fn sign_class(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Probability that two distinct groups, drawn iid from `w` and conditioned on
/// being different, order the pair `(i, j)` differently. Zero margins form their
/// own sign class.
pub fn reversal_rate(gm: &GroupMargins, w: &MixtureWeights, i: usize, j: usize) -> Result<f64, DataError> {
    let k = gm.num_groups();
    if k < 2 {
        return Err(DataError::SingleGroup);
    }
    if w.len() != k {
        return Err(DataError::Dimension(format!("{} weights for {k} groups", w.len())));
    }
    let m = gm.num_models();
    if i >= m || j >= m || i == j {
        return Err(DataError::Invalid(format!(
            "need two distinct models below {m}, got ({i},{j})"
        )));
    }
    let signs: Vec<i8> = gm.per_group.iter().map(|mat| sign_class(mat.get(i, j))).collect();
    let ws = w.as_slice();
    let (mut disagree, mut total) = (0.0, 0.0);
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let mass = ws[a] * ws[b];
            total += mass;
            if signs[a] != signs[b] {
                disagree += mass;
            }
        }
    }
    if total <= 0.0 {
        return Err(DataError::Invalid("fewer than two groups carry weight".into()));
    }
    Ok((disagree / total).clamp(0.0, 1.0))
}

/// Seeded uniform train/test partition; the train part gets `floor(n·fraction)`
/// records. Both halves keep the original record order and the full roster.
pub fn split(votes: &VoteTable, train_fraction: f64, seed: u64) -> Result<(VoteTable, VoteTable), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "train fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    if votes.is_empty() {
        return Err(DataError::Empty);
    }
    let n = votes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, Stream::Split, 0));
    let cut = (n as f64 * train_fraction).floor() as usize;
    let mut train_ix = order[..cut].to_vec();
    let mut test_ix = order[cut..].to_vec();
    train_ix.sort_unstable();
    test_ix.sort_unstable();
    let pick = |ix: &[usize]| votes.derive(ix.iter().map(|&i| votes.records[i].clone()).collect());
    Ok((pick(&train_ix), pick(&test_ix)))
}

pub fn bootstrap_resample(votes: &VoteTable, seed: u64) -> Result<VoteTable, DataError> {
    bootstrap_resample_with(votes, &mut substream(seed, Stream::Bootstrap, 0))
}

/// `n` draws with replacement from the `n` records.
pub fn bootstrap_resample_with<R: Rng>(votes: &VoteTable, rng: &mut R) -> Result<VoteTable, DataError> {
    if votes.is_empty() {
        return Err(DataError::Empty);
    }
    let n = votes.len();
    let records = (0..n).map(|_| votes.records[rng.gen_range(0..n)].clone()).collect();
    Ok(votes.derive(records))
}

/// Resamples within each group separately, preserving group sizes.
pub fn stratified_resample_with<R: Rng>(votes: &VoteTable, rng: &mut R) -> Result<VoteTable, DataError> {
    if votes.is_empty() {
        return Err(DataError::Empty);
    }
    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in votes.records.iter().enumerate() {
        by_group.entry(r.group.as_str()).or_default().push(i);
    }
    let mut records = Vec::with_capacity(votes.len());
    for g in &votes.groups {
        if let Some(ix) = by_group.get(g.as_str()) {
            for _ in 0..ix.len() {
                records.push(votes.records[ix[rng.gen_range(0..ix.len())]].clone());
            }
        }
    }
    Ok(votes.derive(records))
}
