use nalgebra::DVector;

use crate::error::{GeoError, Result};

/// Chart coordinates of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: DVector<f64>,
}

impl Point {
    pub fn new(coords: DVector<f64>) -> Self {
        Self { coords }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub(crate) fn check(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(GeoError::DimensionMismatch {
                expected,
                got: self.len(),
            });
        }
        if !self.is_finite() {
            return Err(GeoError::NonFinite("point"));
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Self::new(DVector::from_vec(v))
    }
}

/// A tangent vector: a base point plus chart components.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub components: DVector<f64>,
}

impl Tangent {
    pub fn new(base: Point, components: DVector<f64>) -> Result<Self> {
        if base.len() != components.len() {
            return Err(GeoError::DimensionMismatch {
                expected: base.len(),
                got: components.len(),
            });
        }
        if !components.iter().all(|c| c.is_finite()) {
            return Err(GeoError::NonFinite("tangent"));
        }
        Ok(Self { base, components })
    }

    pub fn from_slices(base: &[f64], components: &[f64]) -> Result<Self> {
        Self::new(Point::from_slice(base), DVector::from_column_slice(components))
    }

    pub fn zero(base: Point) -> Self {
        let n = base.len();
        Self {
            base,
            components: DVector::zeros(n),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            base: self.base.clone(),
            components: &self.components * s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| *c == 0.0)
    }
}
