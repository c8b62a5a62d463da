use nalgebra::DVector;

use crate::error::Result;
use crate::manifold::{minimal_image, ClosedFormGeometry};

/// Straight lines, optionally identified modulo per-axis periods.
#[derive(Debug, Clone, Default)]
pub struct FlatGeometry {
    periods: Option<Vec<f64>>,
}

impl FlatGeometry {
    pub fn euclidean() -> Self {
        Self { periods: None }
    }

    pub fn periodic(periods: Vec<f64>) -> Self {
        Self {
            periods: Some(periods),
        }
    }

    fn chord(&self, from: &DVector<f64>, to: &DVector<f64>) -> DVector<f64> {
        let mut d = to - from;
        if let Some(periods) = &self.periods {
            for (di, &p) in d.iter_mut().zip(periods) {
                *di = minimal_image(*di, p);
            }
        }
        d
    }
}

impl ClosedFormGeometry for FlatGeometry {
    fn exp(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        base + v
    }

    fn log(&self, from: &DVector<f64>, to: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.chord(from, to))
    }

    fn transport(
        &self,
        _from: &DVector<f64>,
        v: &DVector<f64>,
        _to: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(v.clone())
    }

    fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.chord(a, b).norm()
    }
}
