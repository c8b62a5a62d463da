use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{GeoError, Result};
use crate::manifold::{ClosedFormGeometry, MetricField};

/// Unit sphere in embedded coordinates `(x, y, z)`.
///
/// The chart metric is the product metric `dr^2 + g_S2` on `R^3 \ {0}`,
/// written in Cartesian coordinates as `x̂x̂ᵀ + (I - x̂x̂ᵀ)/|x|^2`. The unit
/// sphere is a totally geodesic slice of it, so generic numeric geodesics
/// started tangent to the sphere stay on it and reproduce great circles.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereMetric;

impl MetricField for SphereMetric {
    fn coord_dim(&self) -> usize {
        3
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let r2 = q.norm_squared();
        let xhat = q / r2.sqrt();
        let radial = &xhat * xhat.transpose();
        let tangential = DMatrix::identity(3, 3) - &radial;
        radial + tangential / r2
    }

    fn in_domain(&self, q: &DVector<f64>) -> bool {
        let r = q.norm();
        r > 0.25 && r < 4.0
    }

    fn canonicalize(&self, q: DVector<f64>) -> DVector<f64> {
        let r = q.norm();
        q / r
    }

    fn project_tangent(&self, q: &DVector<f64>, v: DVector<f64>) -> DVector<f64> {
        let n2 = q.norm_squared();
        let radial = v.dot(q) / n2;
        v - q * radial
    }
}

fn v3(v: &DVector<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn dv(v: Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// Great-circle geometry on the unit sphere.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereGeometry;

impl ClosedFormGeometry for SphereGeometry {
    fn exp(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let p = v3(base).normalize();
        let v = v3(v);
        let v = v - p * v.dot(&p);
        let theta = v.norm();
        if theta == 0.0 {
            return dv(p);
        }
        dv((p * theta.cos() + v * (theta.sin() / theta)).normalize())
    }

    fn log(&self, from: &DVector<f64>, to: &DVector<f64>) -> Result<DVector<f64>> {
        let p = v3(from).normalize();
        let q = v3(to).normalize();
        let c = p.dot(&q);
        let w = q - p * c;
        let s = w.norm();
        let theta = p.cross(&q).norm().atan2(c);
        if s == 0.0 || theta == 0.0 {
            if c > 0.0 {
                return Ok(DVector::zeros(3));
            }
            return Err(GeoError::InjectivityViolation {
                distance: std::f64::consts::PI,
                radius: std::f64::consts::PI,
            });
        }
        Ok(dv(w * (theta / s)))
    }

    fn transport(
        &self,
        from: &DVector<f64>,
        v: &DVector<f64>,
        to: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let p = v3(from).normalize();
        let u = v3(&self.log(from, to)?);
        let theta = u.norm();
        let v = v3(v);
        if theta == 0.0 {
            return Ok(dv(v));
        }
        let e = u / theta;
        let a = v.dot(&e);
        Ok(dv(v + (e * (theta.cos() - 1.0) - p * theta.sin()) * a))
    }

    fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let a = v3(a).normalize();
        let b = v3(b).normalize();
        a.cross(&b).norm().atan2(a.dot(&b))
    }
}
