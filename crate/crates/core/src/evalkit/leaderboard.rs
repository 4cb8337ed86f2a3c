use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::Correlation;
use super::report::EvalReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub mae: f64,
    pub rmse: f64,
    pub r: Correlation,
}

impl Entry {
    pub fn from_report(name: impl Into<String>, report: &EvalReport) -> Entry {
        Entry {
            name: name.into(),
            mae: report.overall.mae,
            rmse: report.overall.rmse,
            r: report.overall.r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub entry: Entry,
    pub mae_rank: usize,
    pub rmse_rank: usize,
    pub r_rank: usize,
}

/// Competition ranks ("1224"): equal keys share a rank and the next rank skips.
pub fn competition_ranks<T>(items: &[T], cmp: impl Fn(&T, &T) -> Ordering) -> Vec<usize> {
    items
        .iter()
        .map(|a| 1 + items.iter().filter(|b| cmp(b, a) == Ordering::Less).count())
        .collect()
}

/// Keeps each name's lowest-MAE entry, ranks every metric, and orders rows by
/// MAE rank (then RMSE, R and name for stable output).
pub fn leaderboard(entries: &[Entry]) -> Vec<RankedRow> {
    let mut best: Vec<Entry> = Vec::new();
    for e in entries {
        match best.iter_mut().find(|b| b.name == e.name) {
            Some(b) if e.mae < b.mae => *b = e.clone(),
            Some(_) => {}
            None => best.push(e.clone()),
        }
    }
    let mae = competition_ranks(&best, |a, b| a.mae.total_cmp(&b.mae));
    let rmse = competition_ranks(&best, |a, b| a.rmse.total_cmp(&b.rmse));
    let r = competition_ranks(&best, |a, b| a.r.rank_cmp(b.r));
    let mut rows: Vec<RankedRow> = best
        .into_iter()
        .enumerate()
        .map(|(i, entry)| RankedRow {
            entry,
            mae_rank: mae[i],
            rmse_rank: rmse[i],
            r_rank: r[i],
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.mae_rank, a.rmse_rank, a.r_rank)
            .cmp(&(b.mae_rank, b.rmse_rank, b.r_rank))
            .then_with(|| a.entry.name.cmp(&b.entry.name))
    });
    rows
}

pub fn leaderboard_from_reports(reports: &[(String, EvalReport)]) -> Vec<RankedRow> {
    let entries: Vec<Entry> = reports
        .iter()
        .map(|(n, r)| Entry::from_report(n.clone(), r))
        .collect();
    leaderboard(&entries)
}

fn cell(value: String, rank: usize) -> String {
    format!("{value} ({rank})")
}

/// Aligned plain-text table, values printed as `6.94289 (1)`.
pub fn render_text(rows: &[RankedRow]) -> String {
    let header = ["Rank", "Name", "MAE", "RMSE", "R"].map(String::from);
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|row| {
            [
                row.mae_rank.to_string(),
                row.entry.name.clone(),
                cell(format!("{:.5}", row.entry.mae), row.mae_rank),
                cell(format!("{:.5}", row.entry.rmse), row.rmse_rank),
                cell(row.entry.r.to_string(), row.r_rank),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..5)
        .map(|c| {
            body.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in std::iter::once(&header).chain(body.iter()) {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 1 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).expect("writing to a String");
    }
    out
}

pub fn render_csv(rows: &[RankedRow]) -> String {
    let mut out = String::from("name,mae,mae_rank,rmse,rmse_rank,r,r_rank\n");
    for row in rows {
        let r = row
            .entry
            .r
            .value()
            .map(|v| v.to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.entry.name,
            row.entry.mae,
            row.mae_rank,
            row.entry.rmse,
            row.rmse_rank,
            r,
            row.r_rank
        )
        .expect("writing to a String");
    }
    out
}
