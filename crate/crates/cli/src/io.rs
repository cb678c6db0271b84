use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use maxlot::prefdata::{parse_votes, GroupMargins, VoteFormat, VoteTable};
use serde::Serialize;

use crate::error::CliError;

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Renders rows with a header into CSV bytes.
fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Input(e.to_string()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialize")
    } else {
        String::new()
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn read_votes(path: &Path, format: Option<VoteFormat>) -> Result<VoteTable, CliError> {
    let format = format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => VoteFormat::Jsonl,
        _ => VoteFormat::Csv,
    });
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    Ok(parse_votes(BufReader::new(file), format)?)
}

pub fn read_margins(path: &Path) -> Result<GroupMargins, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(GroupMargins::from_json(&text)?)
}

/// Reads a `model,cost` CSV (header optional) and returns costs in roster order.
pub fn read_costs(path: &Path, roster: &[String]) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut costs: Vec<Option<f64>> = vec![None; roster.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(CliError::input(format!("costs line {}: expected model,cost", line + 1)));
        }
        let cost: f64 = match rec[1].parse() {
            Ok(c) => c,
            Err(_) if line == 0 => continue, // header
            Err(_) => {
                return Err(CliError::input(format!(
                    "costs line {}: bad cost {:?}",
                    line + 1,
                    &rec[1]
                )))
            }
        };
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(CliError::input(format!(
                "costs line {}: cost must be nonnegative",
                line + 1
            )));
        }
        match roster.iter().position(|m| m == &rec[0]) {
            Some(i) => costs[i] = Some(cost),
            None => log::warn!("costs file lists unknown model {:?}", &rec[0]),
        }
    }
    costs
        .into_iter()
        .zip(roster)
        .map(|(c, m)| c.ok_or_else(|| CliError::input(format!("no cost for model {m:?}"))))
        .collect()
}
