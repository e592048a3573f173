use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Extraction stage; doubles as the curve kind each stage consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Gate capacitance vs gate voltage, 15 points.
    Cgg,
    /// Drain current vs gate voltage at two drain biases, 16 points.
    Id,
}

impl Stage {
    pub const ALL: [Stage; 2] = [Stage::Cgg, Stage::Id];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Cgg => "cgg",
            Stage::Id => "id",
        }
    }

    /// Number of points in this stage's curve vector.
    pub fn curve_len(self) -> usize {
        match self {
            Stage::Cgg => 15,
            Stage::Id => 16,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cgg" => Ok(Stage::Cgg),
            "id" => Ok(Stage::Id),
            other => Err(Error::invalid(format!("unknown stage {other:?}"))),
        }
    }
}

/// Normalization scheme a dataset or network was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Every range equals the global bounds.
    Fixed,
    /// Per-sample local ranges (floating normalization).
    Custom,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Fixed => "fixed",
            Scheme::Custom => "custom",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Scheme::Fixed),
            "custom" => Ok(Scheme::Custom),
            other => Err(Error::invalid(format!("unknown scheme {other:?}"))),
        }
    }
}
