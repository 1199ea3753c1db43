use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::experiment::{EvalConfig, MetricRow};
use crate::{Error, Result};

/// All rows for one configuration: per-repeat metrics plus per-model means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: EvalConfig,
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<MetricRow>,
    pub warnings: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    config: &'a EvalConfig,
    rows: &'a [MetricRow],
    aggregates: &'a [MetricRow],
    warnings: &'a [String],
    timings: BTreeMap<String, f64>,
}

impl ExperimentReport {
    /// Canonical JSON document: stable key order, byte-deterministic for a
    /// fixed config. Wall-clock timings are reported separately (table
    /// footer) and left empty here so identical runs serialize identically.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReportDoc {
            config: &self.config,
            rows: &self.rows,
            aggregates: &self.aggregates,
            warnings: &self.warnings,
            timings: BTreeMap::new(),
        })?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStyle {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for ReportStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportStyle::Table),
            "csv" => Ok(ReportStyle::Csv),
            "json" => Ok(ReportStyle::Json),
            other => Err(Error::Config(format!(
                "unknown format '{other}' (expected table, csv or json)"
            ))),
        }
    }
}

/// Arithmetic mean of per-repeat rows, metric by metric. Averaging, not
/// pooling: the mean of per-repeat metrics generally differs from metrics of
/// the pooled confusion matrix.
pub fn aggregate(rows: &[MetricRow]) -> Result<MetricRow> {
    let first = rows.first().ok_or(Error::EmptyInput)?;
    if rows.iter().any(|r| r.model_name != first.model_name) {
        return Err(Error::MixedModelNames);
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(MetricRow {
        model_name: first.model_name.clone(),
        auc: mean(|r| r.auc),
        ca: mean(|r| r.ca),
        f1: mean(|r| r.f1),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        repeats: first.repeats,
        train_fraction: first.train_fraction,
    })
}

/// Round to 5 decimal places on the shortest decimal representation, ties
/// away from zero, '.' as separator.
pub fn round5(x: f64) -> String {
    let s = format!("{x}");
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => ("-", r),
        None => ("", s.as_str()),
    };
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((i, f)) => (i.to_string(), f.to_string()),
        None => (rest.to_string(), String::new()),
    };
    if frac_part.len() <= 5 {
        return format!("{sign}{int_part}.{frac_part:0<5}");
    }
    let mut digits: Vec<u8> = frac_part.bytes().take(5).map(|b| b - b'0').collect();
    let round_up = frac_part.as_bytes()[5] >= b'5';
    let mut int_val: u64 = int_part.parse().unwrap_or(0);
    if round_up {
        let mut i = 4;
        loop {
            if digits[i] < 9 {
                digits[i] += 1;
                break;
            }
            digits[i] = 0;
            if i == 0 {
                int_val += 1;
                break;
            }
            i -= 1;
        }
    }
    let frac: String = digits.iter().map(|d| (d + b'0') as char).collect();
    format!("{sign}{int_val}.{frac}")
}

fn percent(fraction: f64) -> String {
    let pct = fraction * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}%", pct.round() as i64)
    } else {
        format!("{pct:.1}%")
    }
}

const TABLE_HEADER: [&str; 8] = [
    "MODEL",
    "AUC",
    "CA",
    "F1",
    "PRECISION",
    "RECALL",
    "TRAIN/TEST",
    "TRAIN SETSIZE",
];

fn table_row(row: &MetricRow) -> [String; 8] {
    [
        row.model_name.clone(),
        round5(row.auc),
        round5(row.ca),
        round5(row.f1),
        round5(row.precision),
        round5(row.recall),
        row.repeats.to_string(),
        percent(row.train_fraction),
    ]
}

fn render_table(blocks: &[&ExperimentReport]) -> String {
    let mut rows: Vec<[String; 8]> = Vec::new();
    for report in blocks {
        // Within a repeat-count block, models sorted descending by CA.
        let mut aggs = report.aggregates.clone();
        aggs.sort_by(|a, b| b.ca.total_cmp(&a.ca).then(a.model_name.cmp(&b.model_name)));
        rows.extend(aggs.iter().map(table_row));
    }
    let mut widths = [0usize; 8];
    for (w, h) in widths.iter_mut().zip(TABLE_HEADER) {
        *w = h.len();
    }
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let fmt_line = |cells: &[String; 8]| -> String {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let header: [String; 8] = TABLE_HEADER.map(str::to_string);
    let mut out = vec![fmt_line(&header)];
    out.extend(rows.iter().map(fmt_line));
    out.join("\n") + "\n"
}

fn render_csv(report: &ExperimentReport) -> String {
    let mut out =
        String::from("kind,model,auc,ca,f1,precision,recall,repeats,train_fraction\n");
    for (i, row) in report.rows.iter().enumerate() {
        let repeat = i / report.aggregates.len().max(1);
        out.push_str(&csv_line(&format!("repeat{repeat}"), row));
    }
    for row in &report.aggregates {
        out.push_str(&csv_line("mean", row));
    }
    out
}

fn csv_line(kind: &str, row: &MetricRow) -> String {
    format!(
        "{kind},{},{},{},{},{},{},{},{}\n",
        row.model_name,
        row.auc,
        row.ca,
        row.f1,
        row.precision,
        row.recall,
        row.repeats,
        row.train_fraction
    )
}

pub fn format_report(report: &ExperimentReport, style: ReportStyle) -> Result<String> {
    Ok(match style {
        ReportStyle::Table => render_table(&[report]),
        ReportStyle::Csv => render_csv(report),
        ReportStyle::Json => report.to_json()?,
    })
}

/// One table over several repeat-count configurations, one block per config.
pub fn format_sweep(reports: &[ExperimentReport]) -> String {
    let refs: Vec<&ExperimentReport> = reports.iter().collect();
    render_table(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, ca: f64) -> MetricRow {
        MetricRow {
            model_name: name.to_string(),
            auc: ca,
            ca,
            f1: ca,
            precision: ca,
            recall: ca,
            repeats: 10,
            train_fraction: 0.1,
        }
    }

    #[test]
    fn round5_matches_reported_precision() {
        assert_eq!(round5(0.984405), "0.98441");
        assert_eq!(round5(0.99748), "0.99748");
        assert_eq!(round5(1.0), "1.00000");
        assert_eq!(round5(0.0), "0.00000");
        assert_eq!(round5(0.123456789), "0.12346");
        assert_eq!(round5(0.9999999), "1.00000");
    }

    #[test]
    fn aggregate_single_row_is_identity() {
        let r = row("KNN", 0.9);
        let a = aggregate(&[r.clone()]).unwrap();
        assert_eq!(a, r);
    }

    #[test]
    fn aggregate_means_each_metric() {
        let a = aggregate(&[row("KNN", 0.9), row("KNN", 1.0)]).unwrap();
        assert!((a.ca - 0.95).abs() < 1e-15);
    }

    #[test]
    fn aggregate_rejects_mixed_models() {
        assert!(matches!(
            aggregate(&[row("KNN", 0.9), row("SVM", 0.8)]),
            Err(Error::MixedModelNames)
        ));
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn mean_of_metrics_differs_from_pooled_confusion() {
        use crate::eval::metrics::{metrics_from_confusion, ConfusionMatrix};
        // Repeat 1: 1/2 correct on 2 rows; repeat 2: 8/8 correct on 8 rows.
        let m1 = metrics_from_confusion(&ConfusionMatrix {
            tp: 1,
            fp: 0,
            tn: 0,
            fn_: 1,
        })
        .unwrap();
        let m2 = metrics_from_confusion(&ConfusionMatrix {
            tp: 4,
            fp: 0,
            tn: 4,
            fn_: 0,
        })
        .unwrap();
        let mean_ca = (m1.ca + m2.ca) / 2.0; // 0.75
        let pooled = metrics_from_confusion(&ConfusionMatrix {
            tp: 5,
            fp: 0,
            tn: 4,
            fn_: 1,
        })
        .unwrap();
        assert!((mean_ca - 0.75).abs() < 1e-15);
        assert!((pooled.ca - 0.9).abs() < 1e-15);
        assert!(mean_ca != pooled.ca);
    }

    #[test]
    fn table_sorts_by_ca_descending() {
        let report = ExperimentReport {
            config: EvalConfig::default(),
            rows: vec![],
            aggregates: vec![row("SVM", 0.79), row("KNN", 0.997), row("STACK", 0.996)],
            warnings: vec![],
            timings: BTreeMap::new(),
        };
        let text = format_report(&report, ReportStyle::Table).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("MODEL"));
        assert!(lines[1].starts_with("KNN"));
        assert!(lines[2].starts_with("STACK"));
        assert!(lines[3].starts_with("SVM"));
    }

    #[test]
    fn json_round_trips_metric_values() {
        let report = ExperimentReport {
            config: EvalConfig::default(),
            rows: vec![row("KNN", 0.123456789123)],
            aggregates: vec![row("KNN", 0.123456789123)],
            warnings: vec![],
            timings: BTreeMap::new(),
        };
        let json = report.to_json().unwrap();
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(
            back["rows"][0]["ca"].as_f64().unwrap(),
            0.123456789123_f64
        );
    }
}
