//! CSV and JSON artifacts.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::engine::record::{EpisodeRecord, PeriodRow};
use crate::error::{Error, Result};

/// Header of the per-period table for `m` companies and `n` investors.
pub fn csv_header(m: usize, n: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t",
        "year",
        "risk_h",
        "risk_p",
        "risk_d",
        "risk_overall",
        "ev_h",
        "ev_p",
        "ev_d",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..m {
        for f in ["K", "Q", "L", "um", "ug", "ur", "rew", "bankrupt"] {
            h.push(format!("{f}{i}"));
        }
    }
    for j in 0..n {
        for i in 0..m {
            h.push(format!("H{j}_{i}"));
        }
        h.push(format!("C{j}"));
        h.push(format!("rew{j}"));
    }
    h
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn row_fields(row: &PeriodRow) -> Vec<String> {
    let mut f = vec![row.t.to_string(), row.year().to_string()];
    f.extend(row.risks.to_array().iter().map(f64::to_string));
    f.push(row.overall_risk().to_string());
    f.extend(row.events.to_array().map(flag));
    for c in &row.companies {
        f.extend(
            [
                c.capital,
                c.esg_score,
                c.vulnerability,
                c.action.mitigation,
                c.action.greenwash,
                c.action.resilience,
                c.reward,
            ]
            .iter()
            .map(f64::to_string),
        );
        f.push(flag(c.bankrupt));
    }
    for inv in &row.investors {
        f.extend(inv.holdings.iter().map(f64::to_string));
        f.push(inv.cash.to_string());
        f.push(inv.reward.to_string());
    }
    f
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Writes the per-period table. Floats use the shortest round-trip form, so
/// rewriting a record yields identical bytes.
pub fn write_episode_csv(record: &EpisodeRecord, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(csv_header(record.num_companies(), record.num_investors()))
        .map_err(|e| csv_err(path, e))?;
    for row in &record.rows {
        w.write_record(row_fields(row))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes any serializable value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Creates `dir` and writes `trajectory.csv` and `summary.json` into it.
pub fn write_outputs(record: &EpisodeRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_episode_csv(record, &dir.join("trajectory.csv"))?;
    write_json(&record.summary, &dir.join("summary.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = csv_header(2, 1);
        assert_eq!(
            h[..9],
            [
                "t",
                "year",
                "risk_h",
                "risk_p",
                "risk_d",
                "risk_overall",
                "ev_h",
                "ev_p",
                "ev_d"
            ]
        );
        assert_eq!(
            h[9..17],
            ["K0", "Q0", "L0", "um0", "ug0", "ur0", "rew0", "bankrupt0"]
        );
        assert_eq!(h[25..], ["H0_0", "H0_1", "C0", "rew0"]);
        assert_eq!(h.len(), 9 + 8 * 2 + 4);
    }
}
