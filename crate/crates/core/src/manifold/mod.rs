//! Chart-based Riemannian manifolds.
//!
//! A [`Manifold`] couples a coordinate metric with optional closed-form
//! geometry. Every operation has a numeric route built only on the metric
//! (finite-difference Christoffel symbols, RK4 geodesics, Newton shooting for
//! the logarithm); built-in manifolds additionally carry closed forms which
//! are preferred when present and tested against the numeric route.

mod christoffel;
mod metric;
mod numeric;
mod point;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use christoffel::Christoffel;
pub use metric::{minimal_image, wrap, ChartMetric, ClosedFormGeometry, MetricField};
pub use point::{Point, Tangent};

pub(crate) use numeric::fd_christoffel;

use crate::error::{GeoError, Result};

/// Default tolerance for the numeric exp/log/transport routes.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Newton iteration cap for the shooting logarithm.
pub const MAX_LOG_ITERATIONS: usize = 100;

/// Metrics with a larger condition number are rejected as degenerate.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Largest tolerated asymmetry `|g_ij - g_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative step for metric derivatives (`h = 1e-5 * max(1, |q|_inf)`).
pub const METRIC_FD_STEP: f64 = 1e-5;

/// Relative step for Christoffel derivatives in the curvature tensor.
pub const CHRISTOFFEL_FD_STEP: f64 = 1e-4;

/// Smallest admissible Gram determinant for a sectional-curvature plane.
pub const GRAM_TOL: f64 = 1e-12;

type InjectivityFn = dyn Fn(&Point) -> f64 + Send + Sync;

#[derive(Clone)]
enum InjectivityRadius {
    Constant(f64),
    Function(Arc<InjectivityFn>),
}

/// An immutable manifold definition, cheap to clone and share across threads.
#[derive(Clone)]
pub struct Manifold {
    name: String,
    dim: usize,
    metric: Arc<dyn MetricField>,
    closed_form: Option<Arc<dyn ClosedFormGeometry>>,
    curvature_upper_bound: f64,
    injectivity: InjectivityRadius,
}

impl fmt::Debug for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manifold")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("coord_dim", &self.metric.coord_dim())
            .field("closed_form", &self.closed_form.is_some())
            .field("curvature_upper_bound", &self.curvature_upper_bound)
            .finish()
    }
}

impl Manifold {
    /// A manifold of intrinsic dimension `dim` given by a chart metric.
    /// Curvature bound and injectivity radius default to `+inf` (unknown).
    pub fn new(name: impl Into<String>, dim: usize, metric: Arc<dyn MetricField>) -> Self {
        Self {
            name: name.into(),
            dim,
            metric,
            closed_form: None,
            curvature_upper_bound: f64::INFINITY,
            injectivity: InjectivityRadius::Constant(f64::INFINITY),
        }
    }

    /// Convenience for a full-dimensional chart.
    pub fn from_chart(name: impl Into<String>, metric: impl MetricField + 'static) -> Self {
        let dim = metric.coord_dim();
        Self::new(name, dim, Arc::new(metric))
    }

    pub fn with_closed_form(mut self, cf: Arc<dyn ClosedFormGeometry>) -> Self {
        self.closed_form = Some(cf);
        self
    }

    pub fn with_curvature_upper_bound(mut self, a: f64) -> Self {
        self.curvature_upper_bound = a;
        self
    }

    pub fn with_injectivity_radius(mut self, radius: f64) -> Self {
        self.injectivity = InjectivityRadius::Constant(radius);
        self
    }

    pub fn with_injectivity_fn<F>(mut self, f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        self.injectivity = InjectivityRadius::Function(Arc::new(f));
        self
    }

    /// The same manifold stripped of its closed forms: every operation takes
    /// the numeric route.
    pub fn numeric(&self) -> Self {
        Self {
            closed_form: None,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of chart coordinates (3 for the embedded sphere).
    pub fn coord_dim(&self) -> usize {
        self.metric.coord_dim()
    }

    pub fn curvature_upper_bound(&self) -> f64 {
        self.curvature_upper_bound
    }

    pub fn injectivity_radius(&self, q: &Point) -> f64 {
        match &self.injectivity {
            InjectivityRadius::Constant(r) => *r,
            InjectivityRadius::Function(f) => f(q),
        }
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub fn metric_field(&self) -> &Arc<dyn MetricField> {
        &self.metric
    }

    pub fn in_domain(&self, q: &Point) -> bool {
        q.len() == self.coord_dim() && q.is_finite() && self.metric.in_domain(q.coords())
    }

    /// Canonical representative of a point (wrapped torus coordinates,
    /// renormalised sphere coordinates).
    pub fn canonical(&self, q: Point) -> Point {
        Point::new(self.metric.canonicalize(q.into_coords()))
    }

    /// Project a tangent onto the configuration submanifold at its base.
    pub fn project(&self, v: &Tangent) -> Tangent {
        Tangent {
            base: v.base.clone(),
            components: self
                .metric
                .project_tangent(v.base.coords(), v.components.clone()),
        }
    }

    /// Chart displacement `to - from` (minimal image on quotient charts).
    pub fn displacement(&self, from: &Point, to: &Point) -> DVector<f64> {
        self.metric.displacement(from.coords(), to.coords())
    }

    pub(crate) fn check_point(&self, q: &Point) -> Result<()> {
        q.check(self.coord_dim())?;
        if !self.metric.in_domain(q.coords()) {
            return Err(GeoError::OutsideDomain(q.as_slice().to_vec()));
        }
        Ok(())
    }

    pub(crate) fn check_tangent(&self, v: &Tangent) -> Result<()> {
        self.check_point(&v.base)?;
        if v.components.len() != self.coord_dim() {
            return Err(GeoError::DimensionMismatch {
                expected: self.coord_dim(),
                got: v.components.len(),
            });
        }
        if !v.components.iter().all(|c| c.is_finite()) {
            return Err(GeoError::NonFinite("tangent"));
        }
        Ok(())
    }

    /// `g(q)` after domain, symmetry and conditioning checks.
    pub fn metric_at(&self, q: &Point) -> Result<DMatrix<f64>> {
        self.check_point(q)?;
        let g = self.metric.metric(q.coords());
        let n = self.coord_dim();
        if g.nrows() != n || g.ncols() != n {
            return Err(GeoError::DimensionMismatch {
                expected: n,
                got: g.nrows(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (g[(i, j)] - g[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(GeoError::invalid(format!(
                        "metric not symmetric at {:?}",
                        q.as_slice()
                    )));
                }
            }
        }
        let eig = g.clone().symmetric_eigen();
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
        if lo <= 0.0 || !lo.is_finite() {
            return Err(GeoError::DegenerateMetric(f64::INFINITY));
        }
        let cond = hi / lo;
        if cond > CONDITION_LIMIT {
            return Err(GeoError::DegenerateMetric(cond));
        }
        Ok(g)
    }

    /// `<u, w>_g` at `base`.
    pub fn inner(&self, base: &Point, u: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        self.check_point(base)?;
        let g = self.metric.metric(base.coords());
        Ok(u.dot(&(g * w)))
    }

    /// `||v||_g` at the tangent's base.
    pub fn norm(&self, v: &Tangent) -> Result<f64> {
        Ok(self
            .inner(&v.base, &v.components, &v.components)?
            .max(0.0)
            .sqrt())
    }

    /// Christoffel symbols by central differences of the metric, symmetrised
    /// in the lower indices.
    pub fn christoffel(&self, q: &Point) -> Result<Christoffel> {
        self.metric_at(q)?;
        self.christoffel_raw(q.coords())
    }

    /// One RK4 step of the geodesic equation `q'' = -Γ(q)(q', q')`.
    ///
    /// On failure mid-step the error carries the (unchanged) input state.
    pub fn geodesic_step(&self, state: &Tangent, dt: f64) -> Result<Tangent> {
        self.check_tangent(state)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(GeoError::invalid(format!("dt must be positive, got {dt}")));
        }
        let (q, v) = self.rk4_geodesic(state.base.coords(), &state.components, dt)?;
        let q = self.metric.canonicalize(q);
        let v = self.metric.project_tangent(&q, v);
        Ok(Tangent {
            base: Point::new(q),
            components: v,
        })
    }

    /// Advance geodesic flow by `dt`, exactly when closed forms exist and by
    /// one RK4 step otherwise.
    pub fn geodesic_flow(&self, state: &Tangent, dt: f64) -> Result<Tangent> {
        match &self.closed_form {
            Some(cf) => {
                self.check_tangent(state)?;
                let p = state.base.coords();
                let v = self.metric.project_tangent(p, state.components.clone());
                let step = &v * dt;
                let q1 = self.metric.canonicalize(cf.exp(p, &step));
                // The geodesic velocity at the endpoint is the transported
                // initial velocity. Transport is only defined along the
                // minimizing segment, so fall back to RK4 for huge steps.
                match cf.transport(p, &v, &q1) {
                    Ok(v1) => Ok(Tangent {
                        components: self.metric.project_tangent(&q1, v1),
                        base: Point::new(q1),
                    }),
                    Err(_) => self.geodesic_step(state, dt),
                }
            }
            None => self.geodesic_step(state, dt),
        }
    }

    /// Exponential map `exp_{v.base}(v)`.
    pub fn exp(&self, v: &Tangent, tol: f64) -> Result<Point> {
        self.check_tangent(v)?;
        check_tol(tol)?;
        let p = v.base.coords();
        let comps = self.metric.project_tangent(p, v.components.clone());
        let q = match &self.closed_form {
            Some(cf) => cf.exp(p, &comps),
            None => self.exp_raw(p, &comps, tol)?.0,
        };
        let q = Point::new(self.metric.canonicalize(q));
        if !self.in_domain(&q) {
            return Err(GeoError::OutsideDomain(q.as_slice().to_vec()));
        }
        Ok(q)
    }

    /// Logarithm map: the tangent at `from` whose geodesic reaches `to` at
    /// unit time. Fails when the distance reaches the injectivity radius.
    pub fn log(&self, from: &Point, to: &Point, tol: f64) -> Result<Tangent> {
        self.log_impl(from, to, tol, None)
    }

    /// [`Manifold::log`] with a starting guess for the shooting iteration,
    /// typically the previous log along a slowly moving pair. Ignored when
    /// closed forms are available.
    pub fn log_with_guess(
        &self,
        from: &Point,
        to: &Point,
        tol: f64,
        guess: &DVector<f64>,
    ) -> Result<Tangent> {
        self.log_impl(from, to, tol, Some(guess))
    }

    fn log_impl(
        &self,
        from: &Point,
        to: &Point,
        tol: f64,
        guess: Option<&DVector<f64>>,
    ) -> Result<Tangent> {
        self.check_point(from)?;
        self.check_point(to)?;
        check_tol(tol)?;
        let v = match &self.closed_form {
            Some(cf) => cf.log(from.coords(), to.coords())?,
            None => self.log_numeric(from.coords(), to.coords(), tol, guess)?,
        };
        let v = Tangent {
            base: from.clone(),
            components: v,
        };
        let d = self.norm(&v)?;
        let radius = self.injectivity_radius(to);
        if radius.is_finite() && d >= radius {
            return Err(GeoError::InjectivityViolation {
                distance: d,
                radius,
            });
        }
        Ok(v)
    }

    /// Geodesic distance.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        match &self.closed_form {
            Some(cf) => {
                self.check_point(a)?;
                self.check_point(b)?;
                let d = cf.distance(a.coords(), b.coords());
                let radius = self.injectivity_radius(b);
                if radius.is_finite() && d >= radius {
                    return Err(GeoError::InjectivityViolation {
                        distance: d,
                        radius,
                    });
                }
                Ok(d)
            }
            None => self.norm(&self.log(a, b, DEFAULT_TOL)?),
        }
    }

    /// Parallel transport of `v` along the minimizing geodesic from `v.base`
    /// to `to`.
    pub fn parallel_transport(&self, v: &Tangent, to: &Point, tol: f64) -> Result<Tangent> {
        self.check_tangent(v)?;
        self.check_point(to)?;
        check_tol(tol)?;
        let comps = match &self.closed_form {
            Some(cf) => cf.transport(v.base.coords(), &v.components, to.coords())?,
            None => {
                let path = self.log(&v.base, to, tol)?;
                self.transport_numeric(v.base.coords(), &path.components, &v.components, tol)?
            }
        };
        Ok(Tangent {
            base: to.clone(),
            components: self.metric.project_tangent(to.coords(), comps),
        })
    }

    /// Sectional curvature of the plane spanned by `u` and `w` at `q`,
    /// assembled from finite-difference derivatives of the Christoffel
    /// symbols.
    pub fn sectional_curvature(&self, q: &Point, u: &Tangent, w: &Tangent) -> Result<f64> {
        self.metric_at(q)?;
        let n = self.coord_dim();
        for t in [u, w] {
            if t.components.len() != n {
                return Err(GeoError::DimensionMismatch {
                    expected: n,
                    got: t.components.len(),
                });
            }
        }
        let g = self.metric.metric(q.coords());
        let (u, w) = (&u.components, &w.components);
        let uu = u.dot(&(&g * u));
        let ww = w.dot(&(&g * w));
        let uw = u.dot(&(&g * w));
        let gram = uu * ww - uw * uw;
        if gram < GRAM_TOL {
            return Err(GeoError::DegeneratePlane(gram));
        }
        let rww = self.riemann_apply(q.coords(), u, w, w)?;
        Ok(u.dot(&(&g * rww)) / gram)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(GeoError::invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
