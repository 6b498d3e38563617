//! Confusion-matrix metrics and the rank-statistic AUC.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (s, y) in scores.iter().zip(labels) {
            match (*s >= threshold, *y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub auc: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub kappa: f64,
    pub mcc: f64,
    pub confusion: Confusion,
    /// Metrics whose denominator was zero; each is reported as 0.
    pub undefined: Vec<String>,
}

/// Column order of the report table.
pub const METRIC_NAMES: [&str; 7] = ["Accuracy", "AUC", "Recall", "Prec.", "F1", "Kappa", "MCC"];

fn ratio(num: i128, den: i128, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_owned());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Mann-Whitney U over average ranks, divided by `n1 · n0`. Ties count half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n1 = labels.iter().filter(|l| **l == 1).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum += mean_rank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Some(u / (n1 as f64 * n0 as f64))
}

impl MetricsReport {
    pub fn from_confusion(c: Confusion, auc_value: Option<f64>) -> Self {
        let mut undefined = Vec::new();
        let (tp, fp, tn, fn_) = (c.tp as i128, c.fp as i128, c.tn as i128, c.fn_ as i128);
        let accuracy = ratio(tp + tn, tp + fp + tn + fn_, "accuracy", &mut undefined);
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let recall = ratio(tp, tp + fn_, "recall", &mut undefined);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_, "f1", &mut undefined);
        let kappa =
            ratio(2 * (tp * tn - fn_ * fp), (tp + fp) * (fp + tn) + (tp + fn_) * (fn_ + tn), "kappa", &mut undefined);
        let marginals = (tp + fp) as f64 * (tp + fn_) as f64 * (tn + fp) as f64 * (tn + fn_) as f64;
        let mcc = if marginals == 0.0 {
            undefined.push("mcc".to_owned());
            0.0
        } else {
            (tp * tn - fp * fn_) as f64 / marginals.sqrt()
        };
        let auc = auc_value.unwrap_or_else(|| {
            undefined.push("auc".to_owned());
            0.0
        });
        MetricsReport { accuracy, auc, recall, precision, f1, kappa, mcc, confusion: c, undefined }
    }

    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Self {
        Self::from_confusion(Confusion::from_scores(scores, labels, threshold), auc(scores, labels))
    }

    pub fn values(&self) -> [f64; 7] {
        [self.accuracy, self.auc, self.recall, self.precision, self.f1, self.kappa, self.mcc]
    }

    /// Element-wise mean of several reports; confusion counts are summed.
    pub fn mean(reports: &[MetricsReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mut sums = [0.0; 7];
        let mut confusion = Confusion::default();
        let mut undefined: Vec<String> = Vec::new();
        for r in reports {
            sums.iter_mut().zip(r.values()).for_each(|(s, v)| *s += v);
            confusion.tp += r.confusion.tp;
            confusion.fp += r.confusion.fp;
            confusion.tn += r.confusion.tn;
            confusion.fn_ += r.confusion.fn_;
            for u in &r.undefined {
                if !undefined.contains(u) {
                    undefined.push(u.clone());
                }
            }
        }
        let [accuracy, auc, recall, precision, f1, kappa, mcc] = sums.map(|s| s / n);
        MetricsReport { accuracy, auc, recall, precision, f1, kappa, mcc, confusion, undefined }
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let keys = ["accuracy", "auc", "recall", "precision", "f1", "kappa", "mcc"];
        let mut out = String::new();
        for (k, v) in keys.iter().zip(self.values()) {
            let _ = writeln!(out, "{k}={v:.6}");
        }
        let c = self.confusion;
        let _ = writeln!(out, "tp={}\nfp={}\ntn={}\nfn={}", c.tp, c.fp, c.tn, c.fn_);
        if !self.undefined.is_empty() {
            let _ = writeln!(out, "undefined={}", self.undefined.join(","));
        }
        out
    }
}

/// Fixed-width table with one row per model.
pub fn metrics_table(rows: &[(&str, &MetricsReport)]) -> String {
    let width = rows.iter().map(|(name, _)| name.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}", "Model");
    for name in METRIC_NAMES {
        let _ = write!(out, " {name:>8}");
    }
    out.push('\n');
    for (name, report) in rows {
        let _ = write!(out, "{name:<width$}");
        for v in report.values() {
            let _ = write!(out, " {v:>8.4}");
        }
        out.push('\n');
    }
    out
}
