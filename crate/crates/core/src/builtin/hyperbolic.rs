//! Upper half-plane `{(x, y) : y > 0}` with metric `(dx^2 + dy^2) / y^2`.
//!
//! Closed forms go through the hyperboloid model, which keeps exp and
//! transport well conditioned for near-vertical geodesics where the
//! semicircle parametrisation loses precision.

use nalgebra::{DMatrix, DVector, Matrix3x2, Vector2, Vector3};

use crate::error::{GeoError, Result};
use crate::manifold::{Christoffel, ClosedFormGeometry, MetricField};

#[derive(Debug, Clone, Copy, Default)]
pub struct HalfPlaneMetric;

impl MetricField for HalfPlaneMetric {
    fn coord_dim(&self) -> usize {
        2
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2) / (q[1] * q[1])
    }

    fn christoffel(&self, q: &DVector<f64>) -> Option<Christoffel> {
        let k = 1.0 / q[1];
        let mut gamma = Christoffel::zeros(2);
        gamma.set(0, 0, 1, -k);
        gamma.set(0, 1, 0, -k);
        gamma.set(1, 0, 0, k);
        gamma.set(1, 1, 1, -k);
        Some(gamma)
    }

    fn in_domain(&self, q: &DVector<f64>) -> bool {
        q[1] > 0.0
    }
}

/// Minkowski product with signature (-, +, +).
fn mink(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn to_hyperboloid(x: f64, y: f64) -> Vector3<f64> {
    let r2 = x * x + y * y;
    Vector3::new((r2 + 1.0) / (2.0 * y), x / y, (r2 - 1.0) / (2.0 * y))
}

fn from_hyperboloid(p: &Vector3<f64>) -> (f64, f64) {
    // (p0 - p2)(p0 + p2) = 1 + p1^2 avoids cancellation when p2 > 0.
    let gap = if p[2] > 0.0 {
        (1.0 + p[1] * p[1]) / (p[0] + p[2])
    } else {
        p[0] - p[2]
    };
    let y = 1.0 / gap;
    (p[1] * y, y)
}

/// Differential of the chart-to-hyperboloid map at `(x, y)`.
fn chart_jacobian(x: f64, y: f64) -> Matrix3x2<f64> {
    let y2 = y * y;
    Matrix3x2::new(
        x / y,
        (y2 - x * x - 1.0) / (2.0 * y2),
        1.0 / y,
        -x / y2,
        x / y,
        (y2 - x * x + 1.0) / (2.0 * y2),
    )
}

fn push(x: f64, y: f64, v: &DVector<f64>) -> Vector3<f64> {
    chart_jacobian(x, y) * Vector2::new(v[0], v[1])
}

/// Inverse of [`push`] on tangent vectors: the map is an isometry onto the
/// tangent plane, so `v = g^{-1} Jᵀ η V` with `g = I / y^2`.
fn pull(x: f64, y: f64, w: &Vector3<f64>) -> DVector<f64> {
    let eta_w = Vector3::new(-w[0], w[1], w[2]);
    let v = chart_jacobian(x, y).transpose() * eta_w * (y * y);
    DVector::from_column_slice(v.as_slice())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HalfPlaneGeometry;

/// The isometry `(x, y) -> ((x - a) / b, y / b)` taking a base point to
/// `(0, 1)`. Hyperboloid coordinates grow like `1/y`, so working at the
/// normalised base keeps the Minkowski products free of cancellation.
struct Frame {
    a: f64,
    b: f64,
}

impl Frame {
    fn at(base: &DVector<f64>) -> Self {
        Self { a: base[0], b: base[1] }
    }

    fn point_in(&self, q: &DVector<f64>) -> (f64, f64) {
        ((q[0] - self.a) / self.b, q[1] / self.b)
    }

    fn point_out(&self, x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![self.a + self.b * x, self.b * y])
    }

    fn vector_in(&self, v: &DVector<f64>) -> DVector<f64> {
        v / self.b
    }

    fn vector_out(&self, v: &DVector<f64>) -> DVector<f64> {
        v * self.b
    }
}

impl ClosedFormGeometry for HalfPlaneGeometry {
    fn exp(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let frame = Frame::at(base);
        let w = push(0.0, 1.0, &frame.vector_in(v));
        let s = mink(&w, &w).max(0.0).sqrt();
        if s == 0.0 {
            return base.clone();
        }
        let q = Vector3::new(s.cosh(), 0.0, 0.0) + w * (s.sinh() / s);
        let (qx, qy) = from_hyperboloid(&q);
        frame.point_out(qx, qy)
    }

    fn log(&self, from: &DVector<f64>, to: &DVector<f64>) -> Result<DVector<f64>> {
        let frame = Frame::at(from);
        let (tx, ty) = frame.point_in(to);
        let d = self.distance(from, to);
        if d == 0.0 {
            return Ok(DVector::zeros(2));
        }
        // At p = (1, 0, 0) the tangential part of q is its last two entries.
        let q = to_hyperboloid(tx, ty);
        let u = Vector3::new(0.0, q[1], q[2]);
        let un = u.norm();
        if un == 0.0 {
            return Ok(DVector::zeros(2));
        }
        Ok(frame.vector_out(&pull(0.0, 1.0, &(u * (d / un)))))
    }

    fn transport(
        &self,
        from: &DVector<f64>,
        v: &DVector<f64>,
        to: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let frame = Frame::at(from);
        let (tx, ty) = frame.point_in(to);
        let p = Vector3::new(1.0, 0.0, 0.0);
        let q = to_hyperboloid(tx, ty);
        let w = push(0.0, 1.0, &frame.vector_in(v));
        let denom = 1.0 + q[0];
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(GeoError::NonFinite("hyperbolic transport"));
        }
        let moved = w + (p + q) * (mink(&q, &w) / denom);
        Ok(frame.vector_out(&pull(tx, ty, &moved)))
    }

    fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let chord = (dx * dx + dy * dy).sqrt();
        2.0 * (chord / (2.0 * (a[1] * b[1]).sqrt())).asinh()
    }
}
