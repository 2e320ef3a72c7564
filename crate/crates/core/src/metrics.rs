//! Confusion matrices and the five summary statistics: accuracy, balanced
//! accuracy, precision, recall and F1.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entry `(i, j)` counts samples of true class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
            class_names: (0..n_classes).map(|k| k.to_string()).collect(),
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if let Some(row) = counts.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: row.len(),
            });
        }
        Ok(ConfusionMatrix {
            counts,
            class_names: (0..k).map(|c| c.to_string()).collect(),
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes(),
                found: names.len(),
            });
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|k| self.counts[k][k]).sum()
    }

    /// True samples of class `k`.
    pub fn support(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    /// Samples predicted as class `k`.
    pub fn predicted(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    /// Delimited form: a header of predicted class names, then one row per
    /// true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: n_classes,
                });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Per-class values weighted by class support.
    #[default]
    Weighted,
    /// Unweighted mean over all classes.
    Macro,
}

impl Averaging {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "weighted" => Some(Averaging::Weighted),
            "macro" => Some(Averaging::Macro),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Averaging::Weighted => "weighted",
            Averaging::Macro => "macro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub per_class: Vec<ClassMetrics>,
    /// Some precision, recall or F1 had an empty denominator and was set to 0.
    pub zero_division: bool,
}

impl MetricsReport {
    /// The five statistics in table order.
    pub fn values(&self) -> [f64; 5] {
        [
            self.accuracy,
            self.balanced_accuracy,
            self.precision,
            self.recall,
            self.f1,
        ]
    }
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Balanced accuracy averages recall over the classes that occur in the
/// truth; classes with no true samples do not contribute.
pub fn compute_metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let k = cm.n_classes();
    let mut zero_division = false;
    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.counts[c][c];
        let support = cm.support(c);
        let precision = ratio(tp, cm.predicted(c), &mut zero_division);
        let recall = ratio(tp, support, &mut zero_division);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            zero_division = true;
            0.0
        };
        per_class.push(ClassMetrics {
            name: cm.class_names[c].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }

    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let balanced_accuracy = present.iter().map(|m| m.recall).sum::<f64>() / present.len() as f64;
    let aggregate = |get: fn(&ClassMetrics) -> f64| -> f64 {
        match averaging {
            Averaging::Weighted => per_class.iter().map(|m| get(m) * m.support as f64).sum::<f64>() / total as f64,
            Averaging::Macro => per_class.iter().map(get).sum::<f64>() / k as f64,
        }
    };
    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        balanced_accuracy,
        precision: aggregate(|m| m.precision),
        recall: aggregate(|m| m.recall),
        f1: aggregate(|m| m.f1),
        averaging,
        zero_division,
        per_class,
    })
}

pub const METRIC_COLUMNS: [&str; 5] = ["Accuracy", "Balanced accuracy", "Precision", "Recall", "F1 score"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Experiment type, e.g. "Standard" or "Voting".
    pub group: String,
    pub name: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    /// Aligned plain-text table.
    pub text: String,
    /// Machine-readable table with best-value flags.
    pub csv: String,
    /// Experiment name and balanced accuracy, for a bar chart.
    pub bar_csv: String,
}

pub fn format_metric(x: f64) -> String {
    format!("{x:.4}")
}

/// Best values are compared after rounding to the four printed decimals, so
/// every row that displays the maximum is marked.
fn best_marks(rows: &[ReportRow]) -> (Vec<[bool; 5]>, Vec<[bool; 5]>) {
    let rounded: Vec<[String; 5]> = rows.iter().map(|r| r.report.values().map(format_metric)).collect();
    let max_over = |idx: &mut dyn Iterator<Item = usize>, col: usize| -> Option<String> {
        idx.map(|i| rounded[i][col].clone()).max()
    };
    let mut in_group = vec![[false; 5]; rows.len()];
    let mut overall = vec![[false; 5]; rows.len()];
    for col in 0..5 {
        let best = max_over(&mut (0..rows.len()), col);
        for i in 0..rows.len() {
            let group_best = max_over(&mut (0..rows.len()).filter(|&j| rows[j].group == rows[i].group), col);
            in_group[i][col] = Some(&rounded[i][col]) == group_best.as_ref();
            overall[i][col] = Some(&rounded[i][col]) == best.as_ref();
        }
    }
    (in_group, overall)
}

/// Comparison table: one row per experiment with the five statistics to four
/// decimals. `*` marks the best value within a group, brackets the best value
/// overall. Groups with a single row are not marked.
pub fn render_report(rows: &[ReportRow]) -> RenderedReport {
    let (in_group, overall) = best_marks(rows);
    let group_sizes: Vec<usize> = rows
        .iter()
        .map(|r| rows.iter().filter(|o| o.group == r.group).count())
        .collect();
    let multi = rows.len() > 1;

    let mut cells: Vec<Vec<String>> = Vec::with_capacity(rows.len() + 1);
    let mut header = vec![String::from("Experiments"), String::from("Case")];
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    cells.push(header);
    for (i, row) in rows.iter().enumerate() {
        let first_of_group = i == 0 || rows[i - 1].group != row.group;
        let mut line = vec![
            if first_of_group {
                row.group.clone()
            } else {
                String::new()
            },
            row.name.clone(),
        ];
        for (col, value) in row.report.values().iter().enumerate() {
            let mut s = format_metric(*value);
            if group_sizes[i] > 1 && in_group[i][col] {
                s.push('*');
            }
            if multi && overall[i][col] {
                s = format!("[{s}]");
            }
            line.push(s);
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..7)
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for (r, line) in cells.iter().enumerate() {
        let mut out = String::new();
        for (c, cell) in line.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:<w$}", w = widths[c]);
        }
        text.push_str(out.trim_end());
        text.push('\n');
        if r == 0 {
            let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            text.push_str(&"-".repeat(rule));
            text.push('\n');
        }
    }

    let mut csv = String::from(
        "group,experiment,accuracy,balanced_accuracy,precision,recall,f1,averaging,best_in_group,best_overall\n",
    );
    let flags = |marks: &[bool; 5]| -> String {
        let names = ["accuracy", "balanced_accuracy", "precision", "recall", "f1"];
        let picked: Vec<&str> = (0..5).filter(|&c| marks[c]).map(|c| names[c]).collect();
        picked.join(";")
    };
    let mut bar_csv = String::from("experiment,balanced_accuracy\n");
    for (i, row) in rows.iter().enumerate() {
        let v = row.report.values().map(format_metric);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&row.group),
            csv_field(&row.name),
            v[0],
            v[1],
            v[2],
            v[3],
            v[4],
            row.report.averaging.name(),
            flags(&in_group[i]),
            flags(&overall[i])
        );
        let _ = writeln!(bar_csv, "{},{}", csv_field(&row.name), v[1]);
    }
    RenderedReport { text, csv, bar_csv }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
