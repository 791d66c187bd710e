//! Labels, metrics, significance testing and experiment orchestration.
//!
//! A label for prediction date `t` and horizon `h` looks only at
//! `V(t+h)` and `V(t+h-1)`:
//!
//! * next-value: `V(t+h)`
//! * pct-change: `100 * (V(t+h) - V(t+h-1)) / V(t+h-1)`
//! * direction-change: increase iff `V(t+h) > V(t+h-1)`
//!
//! Horizons count trading-day observations.

pub mod experiment;
pub mod metrics;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use experiment::{
    feature_table, predict_table_model, run_experiment, run_experiments, train_table_model,
    ExperimentConfig, ExperimentOutcome, ExperimentReport, FeatureTable,
};
pub use metrics::{
    evaluate, evaluate_classification, evaluate_regression, mcnemar, mcnemar_counts, McNemarMethod,
    McNemarResult, MetricsReport,
};

use crate::direction::Direction;
use crate::ingest::Indicator;
use crate::models::InputClass;

pub const HORIZONS: [usize; 3] = [1, 7, 30];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no samples to evaluate")]
    Empty,
    #[error("horizon {0} not supported (use 1, 7 or 30)")]
    Horizon(usize),
    #[error("series of {len} values is too short for horizon {horizon}")]
    TooShort { len: usize, horizon: usize },
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl HarnessError {
    pub fn stage(stage: &'static str, err: impl fmt::Display) -> Self {
        HarnessError::Stage {
            stage,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    NextValue,
    PctChange,
    DirectionChange,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        self == TaskKind::DirectionChange
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::NextValue => "next-value",
            TaskKind::PctChange => "pct-change",
            TaskKind::DirectionChange => "direction-change",
        }
    }

    /// The label computed from the pair `(V(t+h-1), V(t+h))`.
    pub fn label(self, before: f64, at: f64) -> f64 {
        match self {
            TaskKind::NextValue => at,
            TaskKind::PctChange => 100.0 * (at - before) / before,
            TaskKind::DirectionChange => Direction::between(before, at).as_f64(),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "next-value" => Ok(TaskKind::NextValue),
            "pct-change" => Ok(TaskKind::PctChange),
            "direction-change" | "direction" => Ok(TaskKind::DirectionChange),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub target: Indicator,
    pub task: TaskKind,
    pub horizon: usize,
    #[serde(default = "default_kind")]
    pub kind: InputClass,
}

fn default_kind() -> InputClass {
    InputClass::Tf
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !HORIZONS.contains(&self.horizon) {
            return Err(HarnessError::Horizon(self.horizon));
        }
        Ok(())
    }

    /// Metric names reported for this task.
    pub fn metrics(&self) -> &'static [&'static str] {
        if self.task.is_classification() {
            &["accuracy", "f1"]
        } else {
            &["mse"]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPoint {
    /// Index of the prediction date in the series.
    pub index: usize,
    pub date: NaiveDate,
    /// Date of `V(t+h)`, the latest value the label depends on.
    pub label_date: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub task: TaskKind,
    pub horizon: usize,
    pub points: Vec<LabelPoint>,
}

impl LabelSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn get(&self, index: usize) -> Option<&LabelPoint> {
        let first = self.points.first()?.index;
        self.points.get(index.checked_sub(first)?)
    }
}

/// Labels for every date with `t + h` inside the series; the last `h`
/// dates get none.
pub fn make_labels(
    dates: &[NaiveDate],
    values: &[f64],
    task: TaskKind,
    horizon: usize,
) -> Result<LabelSeries, HarnessError> {
    if dates.len() != values.len() {
        return Err(HarnessError::LengthMismatch(dates.len(), values.len()));
    }
    if horizon == 0 || horizon >= values.len() {
        return Err(HarnessError::TooShort {
            len: values.len(),
            horizon,
        });
    }
    let points = (0..values.len() - horizon)
        .map(|t| LabelPoint {
            index: t,
            date: dates[t],
            label_date: dates[t + horizon],
            value: task.label(values[t + horizon - 1], values[t + horizon]),
        })
        .collect();
    Ok(LabelSeries {
        task,
        horizon,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dates(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|i| {
                NaiveDate::from_ymd_opt(2022, 1, 3).unwrap() + chrono::Duration::days(i as i64)
            })
            .collect()
    }

    #[test]
    fn label_examples() {
        let d = dates(2);
        let pct = make_labels(&d, &[100.0, 110.0], TaskKind::PctChange, 1).unwrap();
        assert!((pct.points[0].value - 10.0).abs() < 1e-12);
        let dir = make_labels(&d, &[100.0, 110.0], TaskKind::DirectionChange, 1).unwrap();
        assert_eq!(dir.points[0].value, 1.0);
        let tie = make_labels(&d, &[5.0, 5.0], TaskKind::DirectionChange, 1).unwrap();
        assert_eq!(tie.points[0].value, 0.0);
        for eps in [1e-9, 1e-3, 1.0] {
            let up = make_labels(&d, &[5.0, 5.0 + eps], TaskKind::DirectionChange, 1).unwrap();
            let down = make_labels(&d, &[5.0, 5.0 - eps], TaskKind::DirectionChange, 1).unwrap();
            assert_eq!((up.points[0].value, down.points[0].value), (1.0, 0.0));
        }
    }

    #[test]
    fn horizon_uses_day_before_target() {
        let d = dates(10);
        let v: Vec<f64> = (0..10).map(|i| (i * i) as f64 + 1.0).collect();
        let l = make_labels(&d, &v, TaskKind::PctChange, 7).unwrap();
        assert_eq!(l.points.len(), 3);
        let p = l.points[1];
        assert_eq!(p.label_date, d[8]);
        assert!((p.value - 100.0 * (v[8] - v[7]) / v[7]).abs() < 1e-12);
        assert!(make_labels(&d, &v, TaskKind::NextValue, 10).is_err());
    }

    #[test]
    fn horizons_restricted() {
        let spec = TaskSpec {
            target: Indicator::Vix,
            task: TaskKind::NextValue,
            horizon: 3,
            kind: InputClass::F,
        };
        assert!(spec.validate().is_err());
    }
}
