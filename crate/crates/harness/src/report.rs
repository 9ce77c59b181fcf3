//! Result tables shared by every command.
//!
//! CSV columns, in order: `method,n,m,makespan,gap_pct,time_s,group`.
//! `makespan` and `gap_pct` are means over instances, then over trials;
//! `time_s` is wall-clock summed over instances, averaged over trials.
//! JSON carries the full report including per-trial detail.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
use crate::HarnessError;

pub const CSV_COLUMNS: [&str; 7] = ["method", "n", "m", "makespan", "gap_pct", "time_s", "group"];

/// One trial of one method over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDetail {
    pub seed: u64,
    pub makespan: f64,
    pub gap_pct: f64,
    pub time_s: f64,
    /// Per-instance makespans, in dataset order.
    pub makespans: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub makespan: f64,
    pub gap_pct: f64,
    pub time_s: f64,
    /// Sweep group label such as `sigma=2`, empty for plain runs.
    #[serde(default)]
    pub group: String,
    #[serde(default)]
    pub trials: Vec<TrialDetail>,
}

impl ReportRow {
    /// Aggregates trials: means of the per-trial means and time sums.
    pub fn from_trials(method: &str, n: usize, m: usize, group: &str, trials: Vec<TrialDetail>) -> Self {
        let k = trials.len().max(1) as f64;
        Self {
            method: method.to_string(),
            n,
            m,
            makespan: trials.iter().map(|t| t.makespan).sum::<f64>() / k,
            gap_pct: trials.iter().map(|t| t.gap_pct).sum::<f64>() / k,
            time_s: trials.iter().map(|t| t.time_s).sum::<f64>() / k,
            group: group.to_string(),
            trials,
        }
    }

    /// Per-instance makespan averaged over trials.
    pub fn instance_means(&self) -> Vec<f64> {
        let Some(first) = self.trials.first() else { return Vec::new() };
        let k = self.trials.len() as f64;
        (0..first.makespans.len()).map(|i| self.trials.iter().map(|t| t.makespans[i]).sum::<f64>() / k).collect()
    }
}

/// A paired significance test of `method` against `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub method: String,
    pub baseline: String,
    #[serde(default)]
    pub group: String,
    pub result: Option<WilcoxonResult>,
    /// Why no result was computed.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub command: String,
    pub expert: String,
    pub config_hash: String,
    pub git_revision: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub significance: Vec<Significance>,
}

impl Report {
    pub fn row(&self, method: &str, group: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.group == group)
    }

    /// Pairs each non-reference row of a group with the reference row by
    /// per-instance mean makespan.
    pub fn add_significance(&mut self, reference: &str) {
        let mut out = Vec::new();
        for base in self.rows.iter().filter(|r| r.method == reference) {
            let baseline = base.instance_means();
            for row in self.rows.iter().filter(|r| r.group == base.group && r.method != reference) {
                let (result, note) = match wilcoxon_signed_rank(&row.instance_means(), &baseline) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                out.push(Significance { method: row.method.clone(), baseline: reference.into(), group: base.group.clone(), result, note });
            }
        }
        self.significance.extend(out);
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.makespan.to_string(),
                r.gap_pct.to_string(),
                r.time_s.to_string(),
                r.group.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses the CSV columns back; per-trial detail is not part of CSV.
    pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>, HarnessError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != CSV_COLUMNS {
            return Err(HarnessError::Data(format!("unexpected report columns {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| HarnessError::Data(format!("column {}: {e}", CSV_COLUMNS[i])));
            let int = |i: usize| rec[i].parse::<usize>().map_err(|e| HarnessError::Data(format!("column {}: {e}", CSV_COLUMNS[i])));
            rows.push(ReportRow {
                method: rec[0].to_string(),
                n: int(1)?,
                m: int(2)?,
                makespan: num(3)?,
                gap_pct: num(4)?,
                time_s: num(5)?,
                group: rec[6].to_string(),
                trials: Vec::new(),
            });
        }
        Ok(rows)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes CSV or JSON by the path's extension (`.json` → JSON).
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = match ExportFormat::from_path(path) {
            ExportFormat::Json => self.to_json()?,
            ExportFormat::Csv => self.to_csv()?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        match ExportFormat::from_path(path) {
            ExportFormat::Json => Self::from_json(&text),
            ExportFormat::Csv => Ok(Self { rows: Self::rows_from_csv(&text)?, ..Default::default() }),
        }
    }

    /// Aligned plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<28} {:>5} {:>4} {:>12} {:>9} {:>10} {}\n", "method", "n", "m", "makespan", "gap_pct", "time_s", "group");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<28} {:>5} {:>4} {:>12.4} {:>8.3}% {:>10.3} {}\n",
                r.method, r.n, r.m, r.makespan, r.gap_pct, r.time_s, r.group
            ));
        }
        for s in &self.significance {
            match &s.result {
                Some(w) => out.push_str(&format!(
                    "wilcoxon {} vs {} {}: W={} p={:.4}{}\n",
                    s.method,
                    s.baseline,
                    s.group,
                    w.statistic,
                    w.p_value,
                    if w.significant { " *" } else { "" }
                )),
                None => out.push_str(&format!("wilcoxon {} vs {} {}: {}\n", s.method, s.baseline, s.group, s.note.as_deref().unwrap_or(""))),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(HarnessError::Usage(format!("unknown export format {other:?} (csv or json)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let trial = |seed, spans: Vec<f64>| TrialDetail {
            seed,
            makespan: spans.iter().sum::<f64>() / spans.len() as f64,
            gap_pct: 0.1 * seed as f64,
            time_s: 0.25,
            makespans: spans,
        };
        Report {
            meta: ReportMeta { command: "solve".into(), expert: "neh".into(), config_hash: "abc".into(), git_revision: None },
            rows: vec![ReportRow::from_trials(
                "rs",
                20,
                5,
                "sigma=2",
                vec![trial(0, vec![10.0, 12.0, 1.0 / 3.0]), trial(1, vec![11.0, 13.0, 0.1])],
            )],
            significance: Vec::new(),
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(Report::default().to_csv().unwrap(), "method,n,m,makespan,gap_pct,time_s,group\n");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = sample();
        assert_eq!(Report::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn csv_round_trip_keeps_columns() {
        let r = sample();
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("method,n,m,makespan,gap_pct,time_s"));
        let rows = Report::rows_from_csv(&csv).unwrap();
        assert_eq!(rows[0].makespan, r.rows[0].makespan);
        assert_eq!(rows[0].group, "sigma=2");
    }

    #[test]
    fn aggregates_average_trials() {
        let r = sample();
        let row = &r.rows[0];
        assert!((row.gap_pct - 0.05).abs() < 1e-15);
        assert_eq!(row.time_s, 0.25);
        assert_eq!(row.instance_means(), vec![10.5, 12.5, (1.0 / 3.0 + 0.1) / 2.0]);
    }
}
