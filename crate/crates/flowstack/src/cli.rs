//! Command-line wiring: flat key-value config files, flag overrides, and the
//! evaluate / roc / synth / inspect commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::eval::{
    format_sweep, repeat_scores, roc_points, run_experiment, synth_flows, EvalConfig,
    ExperimentReport, ReportStyle,
};
use crate::flowdata::{load_flow_csv, write_flow_csv};
use crate::learners::{KernelSpec, SmoConfig};
use crate::{Error, Result};

/// Full run configuration: dataset, sweep parameters and learner
/// hyperparameters. File keys use `key = value` lines with '#' comments;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub positive_label: String,
    pub sample_fraction: f64,
    pub train_fraction: f64,
    pub repeats: Vec<usize>,
    pub seed: u64,
    pub knn_k: usize,
    pub kernel: KernelSpec,
    pub svm_c: f64,
    pub svm_tolerance: f64,
    pub svm_max_passes: usize,
    pub svm_row_cap: Option<usize>,
    pub internal_folds: usize,
    pub l2_lambda: f64,
    pub out_dir: PathBuf,
    pub format: ReportStyle,
}

impl Default for RunConfig {
    fn default() -> Self {
        let smo = SmoConfig::default();
        RunConfig {
            dataset: None,
            positive_label: "DrDoS_NTP".to_string(),
            sample_fraction: 0.10,
            train_fraction: 0.10,
            repeats: vec![5, 10, 20],
            seed: 42,
            knn_k: 5,
            kernel: smo.kernel,
            svm_c: smo.c,
            svm_tolerance: smo.tolerance,
            svm_max_passes: smo.max_passes,
            svm_row_cap: smo.row_cap,
            internal_folds: 5,
            l2_lambda: 1e-3,
            out_dir: PathBuf::from("."),
            format: ReportStyle::Table,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Config(format!("invalid value '{value}' for key '{key}'"))
    })
}

impl RunConfig {
    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "positive_label" => self.positive_label = value.to_string(),
            "sample_fraction" => self.sample_fraction = parse_num(key, value)?,
            "train_fraction" => self.train_fraction = parse_num(key, value)?,
            "repeats" => {
                self.repeats = value
                    .split(',')
                    .map(|v| parse_num(key, v.trim()))
                    .collect::<Result<_>>()?;
                if self.repeats.is_empty() {
                    return Err(Error::Config("repeats list is empty".into()));
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "k" => self.knn_k = parse_num(key, value)?,
            "kernel" => {
                self.kernel = match value {
                    "linear" => KernelSpec::Linear,
                    "rbf" => KernelSpec::Rbf {
                        gamma: match self.kernel {
                            KernelSpec::Rbf { gamma } => gamma,
                            KernelSpec::Linear => None,
                        },
                    },
                    other => {
                        return Err(Error::Config(format!(
                            "invalid value '{other}' for key 'kernel' (linear or rbf)"
                        )))
                    }
                }
            }
            "c" => self.svm_c = parse_num(key, value)?,
            "gamma" => {
                let gamma = if value == "scale" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                };
                self.kernel = KernelSpec::Rbf { gamma };
            }
            "tolerance" => self.svm_tolerance = parse_num(key, value)?,
            "max_passes" => self.svm_max_passes = parse_num(key, value)?,
            "svm_row_cap" => {
                self.svm_row_cap = if value == "none" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "internal_folds" => self.internal_folds = parse_num(key, value)?,
            "l2_lambda" => self.l2_lambda = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.apply_key(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    fn smo(&self) -> SmoConfig {
        SmoConfig {
            c: self.svm_c,
            kernel: self.kernel,
            tolerance: self.svm_tolerance,
            max_passes: self.svm_max_passes,
            seed: 0, // derived per repeat by the harness
            row_cap: self.svm_row_cap,
        }
    }

    pub fn eval_config(&self, repeats: usize) -> EvalConfig {
        EvalConfig {
            sample_fraction: self.sample_fraction,
            train_fraction: self.train_fraction,
            repeats,
            seed: self.seed,
            positive_label: self.positive_label.clone(),
            knn_k: self.knn_k,
            svm: self.smo(),
            internal_folds: self.internal_folds,
            l2_lambda: self.l2_lambda,
        }
    }

    fn dataset(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset configured (key 'dataset')".into()))
    }
}

/// Run the repeats sweep and write report.json plus report.txt (table
/// layout) into the output directory.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let table = load_flow_csv(cfg.dataset()?)?;
    let mut reports: Vec<ExperimentReport> = Vec::new();
    for &repeats in &cfg.repeats {
        reports.push(run_experiment(&table, &cfg.eval_config(repeats))?);
    }

    std::fs::create_dir_all(&cfg.out_dir)?;
    let json_docs: Vec<String> = reports
        .iter()
        .map(ExperimentReport::to_json)
        .collect::<Result<_>>()?;
    let json = format!("[\n{}\n]\n", json_docs.join(",\n"));
    std::fs::write(cfg.out_dir.join("report.json"), json)?;

    let mut text = format_sweep(&reports);
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    for report in &reports {
        for (stage, secs) in &report.timings {
            *timings.entry(stage.clone()).or_default() += secs;
        }
    }
    text.push('\n');
    for (stage, secs) in &timings {
        text.push_str(&format!("# {stage}: {secs:.3}\n"));
    }
    for report in &reports {
        for warning in &report.warnings {
            text.push_str(&format!("# warning ({} repeats): {warning}\n", report.config.repeats));
        }
    }
    std::fs::write(cfg.out_dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// ROC points of one model's pooled test scores for the first repeat.
pub fn cmd_roc(cfg: &RunConfig, model: &str) -> Result<PathBuf> {
    let table = load_flow_csv(cfg.dataset()?)?;
    let repeats = cfg.repeats.first().copied().unwrap_or(10);
    let (y_true, scores) = repeat_scores(&table, &cfg.eval_config(repeats), model)?;
    let curve = roc_points(&y_true, &scores)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg
        .out_dir
        .join(format!("roc_{}.csv", model.to_ascii_lowercase()));
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
    }
    std::fs::write(&path, out)?;
    Ok(path)
}

/// Generate a flow-CSV-compatible synthetic two-cluster dataset.
pub fn cmd_synth(
    n: usize,
    d: usize,
    separation: f64,
    balance: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let (table, _) = synth_flows(n, d, separation, balance, seed)?;
    write_flow_csv(&table, out)?;
    Ok(())
}

/// Dataset summary: row count, per-label counts, dropped columns and
/// nonfinite cells.
pub fn cmd_inspect(path: &Path) -> Result<String> {
    let table = load_flow_csv(path)?;
    let mut label_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for label in &table.raw_labels {
        *label_counts.entry(label).or_default() += 1;
    }
    let mut out = format!("rows: {}\n", table.features.rows());
    out.push_str(&format!("feature columns: {}\n", table.features.cols()));
    for (label, count) in &label_counts {
        out.push_str(&format!("label {label}: {count}\n"));
    }
    out.push_str(&format!(
        "dropped columns: {}\n",
        if table.dropped_columns.is_empty() {
            "(none)".to_string()
        } else {
            table.dropped_columns.join(", ")
        }
    ));
    out.push_str(&format!("nonfinite cells: {}\n", table.nonfinite_cells));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_file_round_trip() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "dataset = /tmp/x.csv\nseed = 7\nrepeats = 5, 10\nkernel = linear\n# comment\nk = 3"
        )
        .unwrap();
        let cfg = RunConfig::from_file(f.path()).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.repeats, vec![5, 10]);
        assert_eq!(cfg.kernel, KernelSpec::Linear);
        assert_eq!(cfg.knn_k, 3);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = RunConfig::default();
        match cfg.apply_key("bogus", "1") {
            Err(Error::Config(msg)) => assert!(msg.contains("bogus")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn gamma_value_switches_to_rbf() {
        let mut cfg = RunConfig::default();
        cfg.apply_key("kernel", "linear").unwrap();
        cfg.apply_key("gamma", "0.25").unwrap();
        assert_eq!(cfg.kernel, KernelSpec::Rbf { gamma: Some(0.25) });
    }

    #[test]
    fn defaults_mirror_reported_sweep() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.repeats, vec![5, 10, 20]);
        assert_eq!(cfg.sample_fraction, 0.10);
        assert_eq!(cfg.train_fraction, 0.10);
        assert_eq!(cfg.positive_label, "DrDoS_NTP");
    }
}
