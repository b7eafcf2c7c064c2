use serde::{Deserialize, Serialize};

use crate::DesignError;

/// Named box-bounded search space with a current point.
///
/// Search algorithms work in unit coordinates `u = (x − lower)/(upper − lower)`
/// so that distances and radii are comparable across dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBox {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub point: Vec<f64>,
}

impl ParamBox {
    /// Box with the point at its center.
    pub fn new(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DesignError> {
        let point = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let b = Self { names, lower, upper, point };
        b.validate()?;
        Ok(b)
    }

    /// The unit hypercube of dimension `d` with names x0, x1, ….
    pub fn unit(d: usize) -> Self {
        Self::new((0..d).map(|i| format!("x{i}")).collect(), vec![0.0; d], vec![1.0; d]).expect("valid unit box")
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let d = self.names.len();
        if d == 0 || self.lower.len() != d || self.upper.len() != d || self.point.len() != d {
            return Err(DesignError::InvalidInput("box dimensions disagree".into()));
        }
        for i in 0..d {
            if !(self.lower[i] < self.upper[i]) || !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(DesignError::InvalidInput(format!("empty or unbounded range for {}", self.names[i])));
            }
        }
        if !self.contains(&self.point) {
            return Err(DesignError::InvalidInput("point outside box".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| v.clamp(self.lower[i], self.upper[i])).collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| (v - self.lower[i]) / (self.upper[i] - self.lower[i])).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, v)| (self.lower[i] + v * (self.upper[i] - self.lower[i])).clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    /// Diagonal length in unit coordinates, √d.
    pub fn unit_diagonal(&self) -> f64 {
        (self.dim() as f64).sqrt()
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_round_trip_and_validation() {
        let b = ParamBox::new(vec!["w".into(), "h".into()], vec![300e-9, 150e-9], vec![500e-9, 220e-9]).unwrap();
        let x = vec![402.8e-9, 182.8e-9];
        let back = b.from_unit(&b.to_unit(&x));
        assert!((back[0] - x[0]).abs() < 1e-20 && (back[1] - x[1]).abs() < 1e-20);
        assert!(b.contains(&b.point));
        assert!(ParamBox::new(vec!["a".into()], vec![1.0], vec![1.0]).is_err());
        let mut bad = b.clone();
        bad.point[0] = 1.0;
        assert!(bad.validate().is_err());
    }
}
