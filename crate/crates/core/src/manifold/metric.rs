use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::Christoffel;
use crate::error::Result;

/// A Riemannian metric expressed in one chart.
///
/// Implementors only have to supply `g(q)`; the remaining hooks describe
/// quotient charts (torus), embedded normalisation (sphere) and the chart
/// domain.
pub trait MetricField: Send + Sync + fmt::Debug {
    /// Number of chart coordinates.
    fn coord_dim(&self) -> usize;

    /// Symmetric positive-definite matrix `g_ij(q)`.
    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64>;

    fn in_domain(&self, _q: &DVector<f64>) -> bool {
        true
    }

    /// Chart displacement from `from` to `to`. Quotient charts return the
    /// minimal image.
    fn displacement(&self, from: &DVector<f64>, to: &DVector<f64>) -> DVector<f64> {
        to - from
    }

    /// Map coordinates to their canonical representative.
    fn canonicalize(&self, q: DVector<f64>) -> DVector<f64> {
        q
    }

    /// Remove components that leave the configuration submanifold.
    fn project_tangent(&self, _q: &DVector<f64>, v: DVector<f64>) -> DVector<f64> {
        v
    }

    /// Exact Christoffel symbols when known; `None` falls back to central
    /// differences of `g`.
    fn christoffel(&self, _q: &DVector<f64>) -> Option<Christoffel> {
        None
    }

    /// `Γ^k_ij v^i v^j`, for metrics that can form it without assembling
    /// the symbols.
    fn christoffel_quadratic(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

/// Closed-form geometry for manifolds where exp/log/transport are known.
///
/// All vectors are raw chart components; inputs are canonical points.
pub trait ClosedFormGeometry: Send + Sync + fmt::Debug {
    fn exp(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    fn log(&self, from: &DVector<f64>, to: &DVector<f64>) -> Result<DVector<f64>>;

    /// Parallel transport of `v` (at `from`) along the minimizing geodesic to `to`.
    fn transport(
        &self,
        from: &DVector<f64>,
        v: &DVector<f64>,
        to: &DVector<f64>,
    ) -> Result<DVector<f64>>;

    fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64;
}

type MetricFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type DomainFn = dyn Fn(&DVector<f64>) -> bool + Send + Sync;

/// A user metric given as a closure over chart coordinates.
#[derive(Clone)]
pub struct ChartMetric {
    dim: usize,
    metric: Arc<MetricFn>,
    domain: Option<Arc<DomainFn>>,
    periods: Option<Vec<f64>>,
    flat: bool,
}

impl ChartMetric {
    pub fn new<F>(dim: usize, metric: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            metric: Arc::new(metric),
            domain: None,
            periods: None,
            flat: false,
        }
    }

    /// Declare the metric constant, so its Christoffel symbols vanish.
    pub fn constant(mut self) -> Self {
        self.flat = true;
        self
    }

    pub fn with_domain<F>(mut self, domain: F) -> Self
    where
        F: Fn(&DVector<f64>) -> bool + Send + Sync + 'static,
    {
        self.domain = Some(Arc::new(domain));
        self
    }

    /// Identify coordinates modulo the given periods (non-positive entries
    /// mean "not periodic").
    pub fn with_periods(mut self, periods: Vec<f64>) -> Self {
        self.periods = Some(periods);
        self
    }
}

impl fmt::Debug for ChartMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartMetric")
            .field("dim", &self.dim)
            .field("periods", &self.periods)
            .finish_non_exhaustive()
    }
}

impl MetricField for ChartMetric {
    fn coord_dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        (self.metric)(q)
    }

    fn in_domain(&self, q: &DVector<f64>) -> bool {
        self.domain.as_ref().map_or(true, |d| d(q))
    }

    fn christoffel(&self, _q: &DVector<f64>) -> Option<Christoffel> {
        self.flat.then(|| Christoffel::zeros(self.dim))
    }

    fn christoffel_quadratic(&self, _q: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.flat.then(|| DVector::zeros(v.len()))
    }

    fn displacement(&self, from: &DVector<f64>, to: &DVector<f64>) -> DVector<f64> {
        let mut d = to - from;
        if let Some(periods) = &self.periods {
            for (di, &p) in d.iter_mut().zip(periods) {
                if p > 0.0 {
                    *di = minimal_image(*di, p);
                }
            }
        }
        d
    }

    fn canonicalize(&self, mut q: DVector<f64>) -> DVector<f64> {
        if let Some(periods) = &self.periods {
            for (qi, &p) in q.iter_mut().zip(periods) {
                if p > 0.0 {
                    *qi = wrap(*qi, p);
                }
            }
        }
        q
    }
}

/// Wrap into `[0, period)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Representative of `d` modulo `period` in `[-period/2, period/2)`.
pub fn minimal_image(d: f64, period: f64) -> f64 {
    let half = 0.5 * period;
    wrap(d + half, period) - half
}
