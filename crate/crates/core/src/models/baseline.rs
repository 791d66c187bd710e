//! Rule-based financial baselines.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::direction::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    AsPrevious,
    InversePrevious,
    WeekMajority,
    TrainMajority,
    Up,
    Down,
    TrainMean,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::AsPrevious,
        BaselineKind::InversePrevious,
        BaselineKind::WeekMajority,
        BaselineKind::TrainMajority,
        BaselineKind::Up,
        BaselineKind::Down,
        BaselineKind::TrainMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::AsPrevious => "as-previous",
            BaselineKind::InversePrevious => "inverse-previous",
            BaselineKind::WeekMajority => "week-majority",
            BaselineKind::TrainMajority => "train-majority",
            BaselineKind::Up => "up",
            BaselineKind::Down => "down",
            BaselineKind::TrainMean => "train-mean",
        }
    }

    pub fn supports_classification(self) -> bool {
        self != BaselineKind::TrainMean
    }

    pub fn supports_regression(self) -> bool {
        matches!(self, BaselineKind::AsPrevious | BaselineKind::TrainMean)
    }
}

impl FromStr for BaselineKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| {
                k.name() == s
                    || (s == "up-predictor" && *k == BaselineKind::Up)
                    || (s == "down-predictor" && *k == BaselineKind::Down)
            })
            .ok_or_else(|| ModelError::Config(format!("unknown baseline {s:?}")))
    }
}

/// What a baseline may look at. Fields a kind does not use may be `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineContext {
    pub previous_value: Option<f64>,
    pub previous_direction: Option<Direction>,
    /// Most recent directions, oldest first.
    pub recent_directions: Option<Vec<Direction>>,
    pub train_majority: Option<Direction>,
    pub train_mean: Option<f64>,
    /// Whether the task is classification (as-previous answers with a
    /// direction) or regression (it answers with a value).
    pub classification: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Direction(Direction),
    Value(f64),
}

impl Prediction {
    pub fn as_f64(self) -> f64 {
        match self {
            Prediction::Direction(d) => d.as_f64(),
            Prediction::Value(v) => v,
        }
    }
}

fn need<T>(value: Option<T>, what: &str) -> Result<T, ModelError> {
    value.ok_or_else(|| ModelError::MissingContext(what.to_owned()))
}

pub fn financial_baseline(
    kind: BaselineKind,
    ctx: &BaselineContext,
) -> Result<Prediction, ModelError> {
    use BaselineKind::*;
    Ok(match kind {
        AsPrevious if ctx.classification => {
            Prediction::Direction(need(ctx.previous_direction, "previous direction")?)
        }
        AsPrevious => Prediction::Value(need(ctx.previous_value, "previous value")?),
        InversePrevious => {
            Prediction::Direction(need(ctx.previous_direction, "previous direction")?.flip())
        }
        WeekMajority => {
            let recent = need(ctx.recent_directions.as_deref(), "recent directions")?;
            if recent.is_empty() {
                return Err(ModelError::MissingContext("recent directions".into()));
            }
            Prediction::Direction(Direction::majority(recent))
        }
        TrainMajority => Prediction::Direction(need(ctx.train_majority, "train majority")?),
        Up => Prediction::Direction(Direction::Increase),
        Down => Prediction::Direction(Direction::Decrease),
        TrainMean => Prediction::Value(need(ctx.train_mean, "train mean")?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    #[test]
    fn rules() {
        let ctx = BaselineContext {
            previous_value: Some(3.0),
            previous_direction: Some(Increase),
            recent_directions: Some(vec![
                Increase, Increase, Increase, Decrease, Decrease, Increase, Increase,
            ]),
            train_majority: Some(Decrease),
            train_mean: Some(2.0),
            classification: false,
        };
        assert_eq!(
            financial_baseline(BaselineKind::AsPrevious, &ctx).unwrap(),
            Prediction::Value(3.0)
        );
        assert_eq!(
            financial_baseline(BaselineKind::InversePrevious, &ctx).unwrap(),
            Prediction::Direction(Decrease)
        );
        assert_eq!(
            financial_baseline(BaselineKind::WeekMajority, &ctx).unwrap(),
            Prediction::Direction(Increase)
        );
        assert_eq!(
            financial_baseline(BaselineKind::TrainMean, &ctx).unwrap(),
            Prediction::Value(2.0)
        );
        let cls = BaselineContext {
            classification: true,
            ..ctx
        };
        assert_eq!(
            financial_baseline(BaselineKind::AsPrevious, &cls).unwrap(),
            Prediction::Direction(Increase)
        );
    }

    #[test]
    fn missing_context_is_an_error() {
        let empty = BaselineContext::default();
        for kind in [
            BaselineKind::AsPrevious,
            BaselineKind::WeekMajority,
            BaselineKind::TrainMean,
        ] {
            assert!(matches!(
                financial_baseline(kind, &empty),
                Err(ModelError::MissingContext(_))
            ));
        }
        assert!(financial_baseline(BaselineKind::Up, &empty).is_ok());
        assert_eq!(
            "up-predictor".parse::<BaselineKind>().unwrap(),
            BaselineKind::Up
        );
    }
}
