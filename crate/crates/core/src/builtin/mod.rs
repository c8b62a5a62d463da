//! Built-in manifolds with closed-form geometry, plus chart presets used as
//! numeric oracles.

mod flat;
mod hyperbolic;
mod sphere;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use flat::FlatGeometry;
pub use hyperbolic::{HalfPlaneGeometry, HalfPlaneMetric};
pub use sphere::{SphereGeometry, SphereMetric};

use crate::error::{GeoError, Result};
use crate::manifold::{ChartMetric, Manifold};

/// Which built-in manifold to instantiate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinSpec {
    /// `R^n` with the Euclidean metric.
    Euclidean { dim: usize },
    /// Unit sphere in embedded coordinates `(x, y, z)`.
    Sphere2,
    /// Poincaré upper half-plane, curvature -1.
    Hyperbolic2,
    /// Flat torus `R^2 / (p0 Z x p1 Z)`.
    Torus2 { periods: [f64; 2] },
}

/// Instantiate a built-in manifold with its closed forms, curvature bound and
/// injectivity radius.
pub fn make_builtin(spec: &BuiltinSpec) -> Result<Manifold> {
    let m = match spec {
        BuiltinSpec::Euclidean { dim } => {
            let n = *dim;
            if n == 0 {
                return Err(GeoError::invalid("euclidean dimension must be positive"));
            }
            Manifold::from_chart(
                format!("euclidean{n}"),
                ChartMetric::new(n, move |_| DMatrix::identity(n, n)).constant(),
            )
            .with_closed_form(Arc::new(FlatGeometry::euclidean()))
            .with_curvature_upper_bound(0.0)
        }
        BuiltinSpec::Sphere2 => Manifold::new("sphere2", 2, Arc::new(SphereMetric))
            .with_closed_form(Arc::new(SphereGeometry))
            .with_curvature_upper_bound(1.0)
            .with_injectivity_radius(PI),
        BuiltinSpec::Hyperbolic2 => Manifold::from_chart("hyperbolic2", HalfPlaneMetric)
            .with_closed_form(Arc::new(HalfPlaneGeometry))
            .with_curvature_upper_bound(-1.0),
        BuiltinSpec::Torus2 { periods } => {
            if !periods.iter().all(|p| *p > 0.0 && p.is_finite()) {
                return Err(GeoError::invalid(format!(
                    "torus periods must be positive, got {periods:?}"
                )));
            }
            let periods = periods.to_vec();
            let radius = 0.5 * periods.iter().cloned().fold(f64::INFINITY, f64::min);
            Manifold::from_chart(
                "torus2",
                ChartMetric::new(2, |_| DMatrix::identity(2, 2))
                    .constant()
                    .with_periods(periods.clone()),
            )
            .with_closed_form(Arc::new(FlatGeometry::periodic(periods)))
            .with_curvature_upper_bound(0.0)
            .with_injectivity_radius(radius)
        }
    };
    Ok(m)
}

/// Numeric-only chart manifolds with known constant curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartPreset {
    /// `S^2` in colatitude/longitude `(θ, φ)`, metric `diag(1, sin^2 θ)`.
    SphericalAngles,
    /// Poincaré disk, metric `4 / (1 - |x|^2)^2 I`.
    PoincareDisk,
}

pub fn make_chart(preset: ChartPreset) -> Manifold {
    match preset {
        ChartPreset::SphericalAngles => Manifold::from_chart(
            "spherical_angles",
            ChartMetric::new(2, |q: &DVector<f64>| {
                let s = q[0].sin();
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, s * s]))
            })
            .with_domain(|q| q[0] > 0.0 && q[0] < PI)
            .with_periods(vec![0.0, 2.0 * PI]),
        )
        .with_curvature_upper_bound(1.0)
        .with_injectivity_radius(PI),
        ChartPreset::PoincareDisk => Manifold::from_chart(
            "poincare_disk",
            ChartMetric::new(2, |q: &DVector<f64>| {
                let c = 2.0 / (1.0 - q.norm_squared());
                DMatrix::identity(2, 2) * (c * c)
            })
            .with_domain(|q| q.norm_squared() < 1.0),
        )
        .with_curvature_upper_bound(-1.0),
    }
}

/// Embedded sphere point from colatitude/longitude.
pub fn sphere_from_angles(theta: f64, phi: f64) -> DVector<f64> {
    DVector::from_vec(vec![
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ])
}

/// Colatitude/longitude of an embedded sphere point.
pub fn sphere_to_angles(p: &DVector<f64>) -> (f64, f64) {
    let r = p.norm();
    let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
    let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    (theta, phi)
}
