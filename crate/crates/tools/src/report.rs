//! Curve and summary files produced by `eval`.

use std::io::Write;

use adsage_core::eval::{
    aggregate_user_days, confidence_interval, cross_source_labels, per_scenario_report, recall_curve, Aggregation,
    LabelRecord, RecallCurve, ScenarioReport, ScoredEvent,
};

use crate::error::{ToolError, ToolResult};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub k_max: usize,
    pub step: usize,
    /// Budgets reported in the summary; `k_max` when empty.
    pub budgets: Vec<usize>,
    pub aggregation: Aggregation,
}

impl EvalSettings {
    pub fn report_budgets(&self) -> Vec<usize> {
        if self.budgets.is_empty() {
            vec![self.k_max]
        } else {
            self.budgets.clone()
        }
    }

    pub fn validate(&self) -> ToolResult<()> {
        if self.k_max == 0 || self.step == 0 {
            return Err(ToolError::Config("k_max and step must be positive".into()));
        }
        if let Some(b) = self.budgets.iter().find(|&&b| b > self.k_max) {
            return Err(ToolError::Config(format!("budget {b} exceeds k_max {}", self.k_max)));
        }
        Ok(())
    }
}

/// Evaluation of one score file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEval {
    pub curve: RecallCurve,
    pub scenarios: Vec<ScenarioReport>,
    /// Labelled user-days with no scored event.
    pub unscored_labels: usize,
}

/// Aggregates user-days, merges the external labels and computes the
/// overall and per-scenario curves.
pub fn evaluate_run(scored: &[ScoredEvent], labels: &[LabelRecord], settings: &EvalSettings) -> ToolResult<RunEval> {
    let mut table = aggregate_user_days(scored, settings.aggregation);
    let unscored_labels = cross_source_labels(&mut table, labels);
    let curve = recall_curve(&table, settings.k_max, settings.step)?;
    let expected: Vec<String> = labels.iter().map(|l| l.scenario.clone()).collect();
    let scenarios = per_scenario_report(&table, &expected, settings.k_max, settings.step)?;
    Ok(RunEval {
        curve,
        scenarios,
        unscored_labels,
    })
}

fn csv_err(e: csv::Error) -> ToolError {
    ToolError::Data(e.to_string())
}

/// `budget,R,CR` per grid point, averaged over runs.
pub fn write_curve<W: Write>(writer: W, runs: &[RunEval]) -> ToolResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["budget", "R", "CR"]).map_err(csv_err)?;
    if let Some(first) = runs.first() {
        let n = runs.len() as f64;
        for (i, b) in first.curve.budgets.iter().enumerate() {
            let r = runs.iter().map(|e| e.curve.recall[i]).sum::<f64>() / n;
            let cr = runs.iter().map(|e| e.curve.cumulative[i]).sum::<f64>() / n;
            w.write_record([b.to_string(), r.to_string(), cr.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| ToolError::Data(e.to_string()))
}

/// One summary row: CR at a budget, over all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// `all` or a scenario tag.
    pub scope: String,
    pub budget: usize,
    /// Runs in which the scope had malicious user-days.
    pub runs: usize,
    pub mean: Option<f64>,
    pub ci95: Option<f64>,
}

pub fn summarize(runs: &[RunEval], settings: &EvalSettings) -> Vec<SummaryRow> {
    let budgets = settings.report_budgets();
    let mut rows = Vec::new();
    let mut push = |scope: &str, curves: Vec<&RecallCurve>| {
        for &b in &budgets {
            let values: Vec<f64> = curves.iter().filter_map(|c| c.cr_at(b)).collect();
            let ci = confidence_interval(&values);
            rows.push(SummaryRow {
                scope: scope.to_string(),
                budget: b,
                runs: values.len(),
                mean: ci.map(|c| c.0),
                ci95: ci.map(|c| c.1),
            });
        }
    };
    push("all", runs.iter().map(|r| &r.curve).collect());
    let tags: Vec<&str> = runs
        .first()
        .map(|r| r.scenarios.iter().map(|s| s.scenario.as_str()).collect())
        .unwrap_or_default();
    for tag in tags {
        let curves = runs
            .iter()
            .filter_map(|r| r.scenarios.iter().find(|s| s.scenario == tag))
            .filter_map(|s| s.curve.as_ref())
            .collect();
        push(tag, curves);
    }
    rows
}

/// `scope,budget,runs,cr_mean,cr_ci95`; a scenario absent from the test
/// data has empty values rather than zero.
pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> ToolResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scope", "budget", "runs", "cr_mean", "cr_ci95"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.scope.clone(),
            r.budget.to_string(),
            r.runs.to_string(),
            opt(r.mean),
            opt(r.ci95),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| ToolError::Data(e.to_string()))
}
