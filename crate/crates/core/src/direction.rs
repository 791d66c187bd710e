use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Direction of change between two consecutive observations. A zero
/// change counts as a decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Decrease,
    Increase,
}

impl Direction {
    pub fn between(previous: f64, next: f64) -> Self {
        if next > previous {
            Direction::Increase
        } else {
            Direction::Decrease
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Direction::Decrease
        } else {
            Direction::Increase
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Direction::Decrease => 0,
            Direction::Increase => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.bit())
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::Decrease => Direction::Increase,
            Direction::Increase => Direction::Decrease,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Decrease => "decrease",
            Direction::Increase => "increase",
        }
    }

    /// Majority of `dirs`; ties and empty input give `Decrease`.
    pub fn majority(dirs: &[Direction]) -> Direction {
        let ups = dirs.iter().filter(|d| **d == Direction::Increase).count();
        if 2 * ups > dirs.len() {
            Direction::Increase
        } else {
            Direction::Decrease
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "increase" | "up" | "1" => Ok(Direction::Increase),
            "decrease" | "down" | "0" => Ok(Direction::Decrease),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

/// Directions of consecutive changes in `values` (one fewer element).
pub fn directions(values: &[f64]) -> Vec<Direction> {
    values
        .windows(2)
        .map(|w| Direction::between(w[0], w[1]))
        .collect()
}
