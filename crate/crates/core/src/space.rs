//! The five-dimensional input space of the segregation model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of input variables.
pub const NUM_FEATURES: usize = 5;

/// Column names, in feature order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] =
    ["num_types", "density", "intolerance", "map_side", "perception"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Integer,
    Continuous,
}

/// Closed range of one input variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBounds {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

impl VarBounds {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        VarBounds { name: name.to_string(), lower, upper, kind: VarKind::Continuous }
    }

    pub fn integer(name: &str, lower: i64, upper: i64) -> Self {
        VarBounds { name: name.to_string(), lower: lower as f64, upper: upper as f64, kind: VarKind::Integer }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Number of integer levels (only meaningful for integer variables).
    pub fn cardinality(&self) -> usize {
        (self.upper - self.lower).round() as usize + 1
    }

    /// Min-max map to `[0, 1]`.
    pub fn normalize(&self, value: f64) -> f64 {
        if self.width() == 0.0 {
            0.0
        } else {
            (value - self.lower) / self.width()
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }

    /// Maps a unit-interval coordinate onto the variable. Integer variables
    /// scale onto `[lower, upper + 1)` and floor.
    pub fn from_unit(&self, u: f64) -> f64 {
        match self.kind {
            VarKind::Continuous => self.lower + u * self.width(),
            VarKind::Integer => {
                let levels = self.cardinality() as f64;
                (self.lower + (u * levels).floor()).min(self.upper)
            }
        }
    }
}

/// Bounds of the segregation model's inputs, in [`FEATURE_NAMES`] order.
pub fn scenario_bounds() -> Vec<VarBounds> {
    vec![
        VarBounds::integer("num_types", 2, 5),
        VarBounds::continuous("density", 0.01, 1.0),
        VarBounds::continuous("intolerance", 0.0, 1.0),
        VarBounds::integer("map_side", 10, 40),
        VarBounds::integer("perception", 1, 10),
    ]
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{name} = {value} is outside [{lower}, {upper}]")]
    OutOfBounds { name: &'static str, value: f64, lower: f64, upper: f64 },
    #[error("expected {expected} features, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("{name} = {value} is not an integer")]
    NotInteger { name: &'static str, value: f64 },
}

/// One point of the input space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub num_types: u32,
    pub density: f64,
    pub intolerance: f64,
    pub map_side: usize,
    pub perception: u32,
}

impl ScenarioParams {
    pub fn new(
        num_types: u32,
        density: f64,
        intolerance: f64,
        map_side: usize,
        perception: u32,
    ) -> Result<Self, ParamError> {
        let params = ScenarioParams { num_types, density, intolerance, map_side, perception };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let bounds = scenario_bounds();
        for ((name, value), b) in FEATURE_NAMES.iter().zip(self.features()).zip(&bounds) {
            if !b.contains(value) {
                return Err(ParamError::OutOfBounds { name, value, lower: b.lower, upper: b.upper });
            }
        }
        Ok(())
    }

    /// The point as a feature vector in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [
            self.num_types as f64,
            self.density,
            self.intolerance,
            self.map_side as f64,
            self.perception as f64,
        ]
    }

    pub fn from_features(values: &[f64]) -> Result<Self, ParamError> {
        if values.len() != NUM_FEATURES {
            return Err(ParamError::WrongArity { expected: NUM_FEATURES, got: values.len() });
        }
        for &i in &[0usize, 3, 4] {
            if values[i].fract() != 0.0 {
                return Err(ParamError::NotInteger { name: FEATURE_NAMES[i], value: values[i] });
            }
        }
        let params = ScenarioParams {
            num_types: values[0] as u32,
            density: values[1],
            intolerance: values[2],
            map_side: values[3] as usize,
            perception: values[4] as u32,
        };
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_scaling_covers_every_level() {
        let b = VarBounds::integer("num_types", 2, 5);
        assert_eq!(b.from_unit(0.0), 2.0);
        assert_eq!(b.from_unit(0.2499), 2.0);
        assert_eq!(b.from_unit(0.25), 3.0);
        assert_eq!(b.from_unit(0.9999), 5.0);
        assert_eq!(b.from_unit(1.0), 5.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ScenarioParams::new(1, 0.5, 0.5, 20, 2).is_err());
        assert!(ScenarioParams::new(2, 0.0, 0.5, 20, 2).is_err());
        assert!(ScenarioParams::new(2, 0.5, 0.5, 41, 2).is_err());
        assert!(ScenarioParams::new(5, 1.0, 1.0, 40, 10).is_ok());
    }

    #[test]
    fn feature_round_trip() {
        let p = ScenarioParams::new(3, 0.6, 0.33, 30, 3).unwrap();
        assert_eq!(ScenarioParams::from_features(&p.features()).unwrap(), p);
        assert!(ScenarioParams::from_features(&[3.5, 0.6, 0.33, 30.0, 3.0]).is_err());
    }
}
