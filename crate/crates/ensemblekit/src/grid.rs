//! Exhaustive search over per-parameter candidate lists.

use std::fmt::Write as _;

use ensemblekit_core::metrics::MetricsReport;
use ensemblekit_core::{ParamSet, ParamValue};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<ParamValue>,
}

/// The Cartesian product of its axes, enumerated in lexicographic order:
/// the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn cell(&self, mut index: usize) -> ParamSet {
        let mut picks = vec![0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            picks[k] = index % axis.values.len();
            index /= axis.values.len();
        }
        let mut out = ParamSet::new();
        for (axis, &p) in self.axes.iter().zip(&picks) {
            out.set(&axis.name, axis.values[p].clone());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Accuracy,
    BalancedAccuracy,
    Precision,
    Recall,
    F1,
}

impl Selection {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "accuracy" => Selection::Accuracy,
            "balanced_accuracy" => Selection::BalancedAccuracy,
            "precision" => Selection::Precision,
            "recall" => Selection::Recall,
            "f1" => Selection::F1,
            _ => return None,
        })
    }

    pub fn of(&self, r: &MetricsReport) -> f64 {
        match self {
            Selection::Accuracy => r.accuracy,
            Selection::BalancedAccuracy => r.balanced_accuracy,
            Selection::Precision => r.precision,
            Selection::Recall => r.recall,
            Selection::F1 => r.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    /// Position in grid order.
    pub cell: usize,
    pub params: ParamSet,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Infeasible {
    pub cell: usize,
    pub params: ParamSet,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub size: usize,
    pub axes: Vec<String>,
    pub selection: Selection,
    pub rows: Vec<GridRow>,
    pub infeasible: Vec<Infeasible>,
    /// Index into `rows` of the best cell; the earliest wins ties.
    pub best: Option<usize>,
}

impl GridOutcome {
    pub fn best_row(&self) -> Option<&GridRow> {
        self.best.map(|b| &self.rows[b])
    }

    /// One row per evaluated cell: its index, its parameters, then the five
    /// metrics and the selection value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell");
        for a in &self.axes {
            let _ = write!(out, ",{a}");
        }
        out.push_str(",accuracy,balanced_accuracy,precision,recall,f1,selection\n");
        for row in &self.rows {
            let _ = write!(out, "{}", row.cell);
            for a in &self.axes {
                let v = row.params.get(a).map(ToString::to_string).unwrap_or_default();
                let _ = write!(out, ",{v}");
            }
            for v in row.report.values() {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.selection.of(&row.report));
        }
        out
    }

    pub fn summary(&self, name: &str) -> GridSummary {
        GridSummary {
            name: name.to_string(),
            size: self.size,
            evaluated: self.rows.len(),
            infeasible_count: self.infeasible.len(),
            selection: self.selection,
            best: self.best_row().map(|r| BestCell {
                cell: r.cell,
                params: r.params.clone(),
                value: self.selection.of(&r.report),
            }),
            infeasible: self.infeasible.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestCell {
    pub cell: usize,
    pub params: ParamSet,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub name: String,
    pub size: usize,
    pub evaluated: usize,
    pub infeasible_count: usize,
    pub selection: Selection,
    pub best: Option<BestCell>,
    pub infeasible: Vec<Infeasible>,
}

/// Evaluates every cell, in parallel on the current rayon pool. A cell
/// whose evaluation fails is recorded as infeasible and skipped.
pub fn grid_search<F>(grid: &GridSpec, selection: Selection, evaluate: F) -> GridOutcome
where
    F: Fn(&ParamSet) -> Result<MetricsReport, String> + Sync,
{
    let results: Vec<(usize, ParamSet, Result<MetricsReport, String>)> = (0..grid.size())
        .into_par_iter()
        .map(|i| {
            let params = grid.cell(i);
            let r = evaluate(&params);
            (i, params, r)
        })
        .collect();
    let mut rows = Vec::new();
    let mut infeasible = Vec::new();
    for (cell, params, r) in results {
        match r {
            Ok(report) => rows.push(GridRow { cell, params, report }),
            Err(reason) => infeasible.push(Infeasible { cell, params, reason }),
        }
    }
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        if best.is_none_or(|b| selection.of(&row.report) > selection.of(&rows[b].report)) {
            best = Some(i);
        }
    }
    GridOutcome {
        size: grid.size(),
        axes: grid.axes.iter().map(|a| a.name.clone()).collect(),
        selection,
        rows,
        infeasible,
        best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(name: &str, values: &[i64]) -> Axis {
        Axis {
            name: name.into(),
            values: values.iter().map(|&v| ParamValue::Int(v)).collect(),
        }
    }

    #[test]
    fn cells_enumerate_lexicographically() {
        let g = GridSpec {
            axes: vec![axis("a", &[1, 2]), axis("b", &[10, 20, 30])],
        };
        assert_eq!(g.size(), 6);
        let cells: Vec<(i64, i64)> = (0..6)
            .map(|i| {
                let c = g.cell(i);
                match (c.get("a"), c.get("b")) {
                    (Some(ParamValue::Int(a)), Some(ParamValue::Int(b))) => (*a, *b),
                    _ => unreachable!(),
                }
            })
            .collect();
        assert_eq!(cells, [(1, 10), (1, 20), (1, 30), (2, 10), (2, 20), (2, 30)]);
    }
}
