use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::Metrics;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    /// Pass-1 mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Pass-1 held-out accuracy per epoch.
    pub validation_accuracy: Vec<f64>,
    /// 1-based epoch with the best held-out accuracy.
    pub chosen_epoch: usize,
    /// Pass-2 mean training loss per epoch.
    pub final_epoch_losses: Vec<f64>,
    pub test: Metrics,
    /// `None` when the test set has no hard examples.
    pub hard: Option<Metrics>,
    pub hard_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub test_accuracy: f64,
    pub test_macro_f1: f64,
    pub hard_accuracy: Option<f64>,
    pub hard_macro_f1: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Aggregate {
    pub fn from_runs(runs: &[RunReport]) -> Self {
        let hard = || runs.iter().filter_map(|r| r.hard);
        Aggregate {
            test_accuracy: mean(runs.iter().map(|r| r.test.accuracy)).unwrap_or(f64::NAN),
            test_macro_f1: mean(runs.iter().map(|r| r.test.macro_f1)).unwrap_or(f64::NAN),
            hard_accuracy: mean(hard().map(|m| m.accuracy)),
            hard_macro_f1: mean(hard().map(|m| m.macro_f1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RunReport>,
    pub aggregate: Aggregate,
}

fn cell(main: f64, hard: Option<f64>) -> String {
    match hard {
        Some(h) => format!("{:.2} ({:.2})", 100.0 * main, 100.0 * h),
        None => format!("{:.2} (n/a)", 100.0 * main),
    }
}

impl TrainReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Accuracy / F1 table in percent, hard-slice values in parentheses.
    pub fn to_table(&self) -> String {
        let label = self.config.model.label();
        let mut rows = vec![(
            format!("{label} (mean of {})", self.runs.len()),
            cell(self.aggregate.test_accuracy, self.aggregate.hard_accuracy),
            cell(self.aggregate.test_macro_f1, self.aggregate.hard_macro_f1),
        )];
        for r in &self.runs {
            rows.push((
                format!("  seed {} (epoch {})", r.seed, r.chosen_epoch),
                cell(r.test.accuracy, r.hard.map(|m| m.accuracy)),
                cell(r.test.macro_f1, r.hard.map(|m| m.macro_f1)),
            ));
        }
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(5);
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w0$} | {:<w1$} | F1", "Model", "Accuracy");
        let _ = writeln!(out, "{}-|-{}-|-{}", "-".repeat(w0), "-".repeat(w1), "-".repeat(w1));
        for (a, b, c) in rows {
            let _ = writeln!(out, "{a:<w0$} | {b:<w1$} | {c}");
        }
        let name = self.config.dataset.as_deref().unwrap_or("-");
        let _ = writeln!(out, "dataset: {name}; hard-slice size: {}", self.runs.first().map_or(0, |r| r.hard_count));
        out
    }
}
