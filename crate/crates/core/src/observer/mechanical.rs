//! Conservative mechanical systems and their Jacobi metric.
//!
//! A system `L = ½ g(q̇, q̇) - U(q)` at energy `E` moves along geodesics of
//! `ĝ = 2(E - U) g` when reparametrised by the Maupertuis time
//! `dτ/dt = 2(E - U(q))`. Running the observer on `ĝ` in τ-time gives
//!
//! ```text
//! dξ̂/dt = (2(E - U(q)) / λ) log^ĝ_ξ̂(q)
//! ```
//!
//! in real time.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{advance, ObserverState, StepContext, StepOutcome, StepScheme};
use crate::error::{GeoError, Result};
use crate::manifold::{fd_christoffel, Christoffel, Manifold, MetricField, Point, Tangent};

/// Relative energy slack tolerated by the truth model at turning points.
const REACH_SLACK: f64 = 1e-9;

/// A potential energy `U(q)` on chart coordinates.
pub trait Potential: Send + Sync + fmt::Debug {
    fn value(&self, q: &DVector<f64>) -> f64;

    /// Chart gradient `∂U/∂q`.
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64>;

    /// True when `U` vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn value(&self, _q: &DVector<f64>) -> f64 {
        0.0
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(q.len())
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `U(q) = ½ k |q|^2` in chart coordinates.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicPotential {
    pub stiffness: f64,
}

impl Potential for HarmonicPotential {
    fn value(&self, q: &DVector<f64>) -> f64 {
        0.5 * self.stiffness * q.norm_squared()
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        q * self.stiffness
    }
}

/// Serialisable potential selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    Harmonic {
        #[serde(default = "unit")]
        stiffness: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Arc<dyn Potential>> {
        match *self {
            PotentialSpec::Zero => Ok(Arc::new(ZeroPotential)),
            PotentialSpec::Harmonic { stiffness } => {
                if !stiffness.is_finite() {
                    return Err(GeoError::invalid("stiffness must be finite"));
                }
                Ok(Arc::new(HarmonicPotential { stiffness }))
            }
        }
    }
}

/// A Lagrangian system on a manifold with kinetic-energy metric `g`.
#[derive(Debug, Clone)]
pub struct MechanicalSystem {
    manifold: Manifold,
    potential: Arc<dyn Potential>,
    energy: f64,
}

impl MechanicalSystem {
    pub fn new(manifold: Manifold, potential: Arc<dyn Potential>, energy: f64) -> Result<Self> {
        if !energy.is_finite() {
            return Err(GeoError::NonFinite("energy"));
        }
        Ok(Self {
            manifold,
            potential,
            energy,
        })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `E - U(q)`, rejected when not positive.
    pub fn admissible_margin(&self, q: &Point) -> Result<f64> {
        let margin = self.energy - self.potential.value(q.coords());
        if !(margin > 0.0) {
            return Err(GeoError::InadmissibleRegion(margin));
        }
        Ok(margin)
    }

    /// Like [`Self::admissible_margin`] but accepting turning points where
    /// `U = E` up to rounding.
    fn check_reachable(&self, q: &Point) -> Result<()> {
        let margin = self.energy - self.potential.value(q.coords());
        if margin < -REACH_SLACK * self.energy.abs().max(1.0) {
            return Err(GeoError::InadmissibleRegion(margin));
        }
        Ok(())
    }

    /// Maupertuis clock rate `dτ/dt = 2(E - U(q))`.
    pub fn clock_rate(&self, q: &Point) -> Result<f64> {
        Ok(2.0 * self.admissible_margin(q)?)
    }

    pub fn kinetic_energy(&self, state: &Tangent) -> Result<f64> {
        let v = &state.components;
        Ok(0.5 * self.manifold.inner(&state.base, v, v)?)
    }

    pub fn total_energy(&self, state: &Tangent) -> Result<f64> {
        Ok(self.kinetic_energy(state)? + self.potential.value(state.base.coords()))
    }

    /// Rescale the speed of `qdot` so the state has energy `E`, keeping
    /// its direction.
    pub fn on_energy_shell(&self, qdot: &Tangent) -> Result<Tangent> {
        let margin = self.admissible_margin(&qdot.base)?;
        let speed = self.manifold.norm(qdot)?;
        if speed == 0.0 {
            return Err(GeoError::invalid(
                "initial velocity must be non-zero to fix a direction",
            ));
        }
        Ok(qdot.scaled((2.0 * margin).sqrt() / speed))
    }

    fn accel(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let geodesic = -self.manifold.christoffel_raw(q)?.contract(v, v);
        if self.potential.is_zero() {
            return Ok(geodesic);
        }
        let g = self.manifold.metric_field().metric(q);
        let force = g
            .cholesky()
            .ok_or(GeoError::DegenerateMetric(f64::INFINITY))?
            .solve(&self.potential.gradient(q));
        Ok(geodesic - force)
    }

    /// One RK4 step of `q̈ = -Γ(q)(q̇, q̇) - g^{-1} ∂U/∂q`.
    pub fn true_dynamics_step(&self, state: &Tangent, dt: f64) -> Result<Tangent> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(GeoError::invalid(format!("dt must be positive, got {dt}")));
        }
        self.manifold.check_tangent(state)?;
        self.check_reachable(&state.base)?;
        let (q, v) = (state.base.coords(), &state.components);
        let stage = |q: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
            self.accel(q, v).map_err(|e| match e {
                GeoError::OutsideDomain(_) => GeoError::ChartExit {
                    last_valid: Box::new(state.clone()),
                },
                other => other,
            })
        };
        let a1 = stage(q, v)?;
        let q2 = q + v * (0.5 * dt);
        let v2 = v + &a1 * (0.5 * dt);
        let a2 = stage(&q2, &v2)?;
        let q3 = q + &v2 * (0.5 * dt);
        let v3 = v + &a2 * (0.5 * dt);
        let a3 = stage(&q3, &v3)?;
        let q4 = q + &v3 * dt;
        let v4 = v + &a3 * dt;
        let a4 = stage(&q4, &v4)?;
        let q_new = q + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
        let v_new = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
        let metric = self.manifold.metric_field();
        if !metric.in_domain(&q_new) {
            return Err(GeoError::ChartExit {
                last_valid: Box::new(state.clone()),
            });
        }
        let q_new = metric.canonicalize(q_new);
        let v_new = metric.project_tangent(&q_new, v_new);
        let out = Tangent::new(Point::new(q_new), v_new)?;
        self.check_reachable(&out.base)?;
        Ok(out)
    }

    /// Wrap the system in its Jacobi metric.
    pub fn jacobi(&self) -> JacobiManifold {
        JacobiManifold::new(self.clone())
    }
}

/// `ĝ = 2(E - U(q)) g(q)` on the admissible region `U < E`.
#[derive(Debug, Clone)]
pub struct JacobiMetric {
    base: Arc<dyn MetricField>,
    potential: Arc<dyn Potential>,
    energy: f64,
}

impl MetricField for JacobiMetric {
    fn coord_dim(&self) -> usize {
        self.base.coord_dim()
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.base.metric(q) * (2.0 * (self.energy - self.potential.value(q)))
    }

    fn in_domain(&self, q: &DVector<f64>) -> bool {
        self.base.in_domain(q) && self.potential.value(q) < self.energy
    }

    fn displacement(&self, from: &DVector<f64>, to: &DVector<f64>) -> DVector<f64> {
        self.base.displacement(from, to)
    }

    fn canonicalize(&self, q: DVector<f64>) -> DVector<f64> {
        self.base.canonicalize(q)
    }

    fn project_tangent(&self, q: &DVector<f64>, v: DVector<f64>) -> DVector<f64> {
        self.base.project_tangent(q, v)
    }

    /// Conformal change `ĝ = φ g` with `f = ln φ`:
    /// `Γ̂^k_ij = Γ^k_ij + ½(δ^k_i ∂_j f + δ^k_j ∂_i f - g_ij g^{kl} ∂_l f)`.
    fn christoffel(&self, q: &DVector<f64>) -> Option<Christoffel> {
        let n = self.base.coord_dim();
        let phi = 2.0 * (self.energy - self.potential.value(q));
        if !(phi > 0.0) {
            return None;
        }
        let mut gamma = match self.base.christoffel(q) {
            Some(g) => g,
            None => fd_christoffel(self.base.as_ref(), q).ok()?,
        };
        let df = self.potential.gradient(q) * (-2.0 / phi);
        let g = self.base.metric(q);
        let raised = g.clone().cholesky()?.solve(&df);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut c = -g[(i, j)] * raised[k];
                    if k == i {
                        c += df[j];
                    }
                    if k == j {
                        c += df[i];
                    }
                    gamma.set(k, i, j, gamma.get(k, i, j) + 0.5 * c);
                }
            }
        }
        Some(gamma)
    }

    /// `Γ̂(v, v) = Γ(v, v) + (∂f·v) v - ½ g(v, v) g^{-1}∂f`.
    fn christoffel_quadratic(&self, q: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let phi = 2.0 * (self.energy - self.potential.value(q));
        if !(phi > 0.0) {
            return None;
        }
        let base = match self.base.christoffel_quadratic(q, v) {
            Some(a) => a,
            None => match self.base.christoffel(q) {
                Some(g) => g.contract(v, v),
                None => fd_christoffel(self.base.as_ref(), q).ok()?.contract(v, v),
            },
        };
        let mut df = self.potential.gradient(q);
        df *= -2.0 / phi;
        let g = self.base.metric(q);
        let vv = g.dot(&(v * v.transpose()));
        let mut raised = df.clone();
        g.cholesky()?.solve_mut(&mut raised);
        let mut acc = base;
        acc.axpy(df.dot(v), v, 1.0);
        acc.axpy(-0.5 * vv, &raised, 1.0);
        Some(acc)
    }
}

/// A mechanical system together with the manifold `(M, ĝ)`.
#[derive(Debug, Clone)]
pub struct JacobiManifold {
    system: MechanicalSystem,
    manifold: Manifold,
}

impl JacobiManifold {
    pub fn new(system: MechanicalSystem) -> Self {
        let base = system.manifold();
        let metric = JacobiMetric {
            base: base.metric_field().clone(),
            potential: system.potential.clone(),
            energy: system.energy,
        };
        let mut manifold = Manifold::new(
            format!("jacobi({})", base.name()),
            base.dim(),
            Arc::new(metric),
        );
        // A constant conformal factor 2E rescales curvature by 1/(2E) and
        // lengths by sqrt(2E); otherwise both are unknown.
        if system.potential.is_zero() && system.energy > 0.0 {
            let scale = 2.0 * system.energy;
            manifold = manifold.with_curvature_upper_bound(base.curvature_upper_bound() / scale);
            let probe = base.clone();
            manifold = manifold.with_injectivity_fn(move |q| probe.injectivity_radius(q) * scale.sqrt());
        }
        Self { system, manifold }
    }

    pub fn system(&self) -> &MechanicalSystem {
        &self.system
    }

    /// The manifold `(M, ĝ)`; all geometry is numeric.
    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn clock_rate(&self, q: &Point) -> Result<f64> {
        self.system.clock_rate(q)
    }

    /// Trapezoidal increment of `τ` over a step of length `dt` between
    /// configurations `q0` and `q1`.
    pub fn tau_increment(&self, q0: &Point, q1: &Point, dt: f64) -> Result<f64> {
        Ok(0.5 * dt * (self.clock_rate(q0)? + self.clock_rate(q1)?))
    }

    /// `dq/dτ = q̇ / (2(E - U))`.
    pub fn to_maupertuis(&self, qdot: &Tangent) -> Result<Tangent> {
        Ok(qdot.scaled(1.0 / self.clock_rate(&qdot.base)?))
    }

    /// `q̇ = 2(E - U) dq/dτ`.
    pub fn from_maupertuis(&self, dq_dtau: &Tangent) -> Result<Tangent> {
        Ok(dq_dtau.scaled(self.clock_rate(&dq_dtau.base)?))
    }

    /// Advance the observer on `(M, ĝ)` over a real-time step `dt`.
    ///
    /// Euler applies `dξ̂/dt = (2(E - U(q_prev)) / λ) log^ĝ_ξ̂(q_prev)`;
    /// the pursuit scheme uses the trapezoidal Maupertuis increment as its
    /// step. The returned state carries real time.
    pub fn observer_step_t(
        &self,
        obs: &ObserverState,
        q_prev: &Point,
        q_next: &Point,
        dt: f64,
        ctx: &StepContext<'_>,
    ) -> Result<StepOutcome> {
        let h = match ctx.scheme {
            StepScheme::Euler => dt * self.clock_rate(q_prev)?,
            StepScheme::Pursuit => self.tau_increment(q_prev, q_next, dt)?,
        };
        let mut out = advance(&self.manifold, obs, q_prev, q_next, h, ctx)?;
        out.state = out.state.with_time(obs.t() + dt);
        Ok(out)
    }
}
