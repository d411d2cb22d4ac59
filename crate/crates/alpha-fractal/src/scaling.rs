//! Per-subinterval vertical scaling: a constant factor or a sampled
//! scaling function for each subinterval.

use crate::error::{FractalError, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone)]
pub enum ScalingEntry {
    Constant(f64),
    Sampled(GridFunction),
}

impl ScalingEntry {
    /// Sup magnitude `‖α_i‖_∞`: the absolute value for constants, the
    /// largest absolute sample otherwise.
    pub fn sup_magnitude(&self) -> f64 {
        match self {
            ScalingEntry::Constant(c) => c.abs(),
            ScalingEntry::Sampled(g) => g.sup_norm(),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            ScalingEntry::Constant(c) => *c,
            ScalingEntry::Sampled(g) => g.eval_clamped(y),
        }
    }

    /// `‖α_i‖_{C^k}`; all derivatives of a constant vanish, so the constant
    /// case is just `|α_i|`.
    pub fn ck_norm(&self, k: usize) -> Result<f64> {
        match self {
            ScalingEntry::Constant(c) => Ok(c.abs()),
            ScalingEntry::Sampled(g) => {
                let mut worst: f64 = 0.0;
                for r in 0..=k {
                    worst = worst.max(g.derivative(r)?.sup_norm());
                }
                Ok(worst)
            }
        }
    }
}

/// The scale vector: one entry per subinterval, all of the same kind.
#[derive(Debug, Clone)]
pub struct ScalingProfile {
    entries: Vec<ScalingEntry>,
}

impl ScalingProfile {
    pub fn constant(values: Vec<f64>) -> Self {
        ScalingProfile {
            entries: values.into_iter().map(ScalingEntry::Constant).collect(),
        }
    }

    pub fn sampled(functions: Vec<GridFunction>) -> Self {
        ScalingProfile {
            entries: functions.into_iter().map(ScalingEntry::Sampled).collect(),
        }
    }

    pub fn from_entries(entries: Vec<ScalingEntry>) -> Result<Self> {
        let constants = entries
            .iter()
            .filter(|e| matches!(e, ScalingEntry::Constant(_)))
            .count();
        if constants != 0 && constants != entries.len() {
            return Err(FractalError::SpecInvalid {
                reason: "scaling entries must be uniformly constant or uniformly sampled".into(),
            });
        }
        Ok(ScalingProfile { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize) -> &ScalingEntry {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[ScalingEntry] {
        &self.entries
    }

    pub fn is_constant(&self) -> bool {
        self.entries
            .iter()
            .all(|e| matches!(e, ScalingEntry::Constant(_)))
    }

    /// Constant values when the profile is constant-kind.
    pub fn constants(&self) -> Option<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| match e {
                ScalingEntry::Constant(c) => Some(*c),
                ScalingEntry::Sampled(_) => None,
            })
            .collect()
    }

    /// `max_i ‖α_i‖_∞`.
    pub fn sup_magnitude(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |m, e| m.max(e.sup_magnitude()))
    }

    pub fn is_zero(&self) -> bool {
        self.sup_magnitude() == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sup_magnitude_is_abs() {
        let p = ScalingProfile::constant(vec![-0.4, 0.2]);
        assert_eq!(p.entry(0).sup_magnitude(), 0.4);
        assert_eq!(p.sup_magnitude(), 0.4);
        assert!(p.is_constant());
    }

    #[test]
    fn sampled_sup_magnitude_is_max_sample() {
        let g = GridFunction::sample(0.0, 1.0, 6, |x| 0.3 * (6.0 * x).sin());
        let p = ScalingProfile::sampled(vec![g.clone(), g]);
        assert!(p.sup_magnitude() <= 0.3 + 1e-12);
        assert!(p.sup_magnitude() > 0.29);
        assert!(!p.is_constant());
    }

    #[test]
    fn mixed_kinds_rejected() {
        let g = GridFunction::constant(0.0, 1.0, 4, 0.1);
        let err = ScalingProfile::from_entries(vec![
            ScalingEntry::Constant(0.2),
            ScalingEntry::Sampled(g),
        ])
        .unwrap_err();
        assert!(matches!(err, FractalError::SpecInvalid { .. }));
    }

    #[test]
    fn ck_norm_of_constant_is_abs() {
        let e = ScalingEntry::Constant(-0.25);
        assert_eq!(e.ck_norm(3).unwrap(), 0.25);
    }
}
