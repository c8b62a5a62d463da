//! Reduced velocity observer.
//!
//! The observer state `ξ̂` pursues the measured configuration `q` along the
//! connecting geodesic with speed `D(ξ̂, q) / λ`:
//!
//! ```text
//! dξ̂/dt = (1/λ) log_ξ̂(q) = -(1/2λ) grad_ξ̂ D²(ξ̂, q)
//! ```
//!
//! and the velocity estimate is `v̂ = T_{ξ̂→q}(dξ̂/dt)`. On `R^n` this is
//! the linear reduced observer `dξ̂/dt = -(ξ̂ - q)/λ`.

mod mechanical;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use mechanical::{
    HarmonicPotential, JacobiManifold, JacobiMetric, MechanicalSystem, Potential, PotentialSpec,
    ZeroPotential,
};

use crate::error::{GeoError, Result};
use crate::manifold::{Manifold, Point, Tangent};

/// Observer state: the auxiliary point `ξ̂`, the gain `λ` (a time
/// constant) and the observer clock.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    xi_hat: Point,
    lambda: f64,
    t: f64,
}

impl ObserverState {
    pub fn new(xi_hat: Point, lambda: f64) -> Result<Self> {
        Self::at_time(xi_hat, lambda, 0.0)
    }

    pub fn at_time(xi_hat: Point, lambda: f64, t: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !xi_hat.is_finite() {
            return Err(GeoError::NonFinite("observer state"));
        }
        Ok(Self { xi_hat, lambda, t })
    }

    pub fn xi_hat(&self) -> &Point {
        &self.xi_hat
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub(crate) fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    fn advanced(&self, xi_hat: Point, dt: f64) -> Self {
        Self {
            xi_hat,
            lambda: self.lambda,
            t: self.t + dt,
        }
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(GeoError::invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Time discretisation of the observer flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScheme {
    /// Exact flow for a measurement moving along a geodesic at constant
    /// speed between samples (see [`pursuit_step`]).
    #[default]
    Pursuit,
    /// Geometric Euler: `ξ̂ ← exp_ξ̂(dt · rhs)`.
    Euler,
}

/// `(1/λ) log_ξ̂(q_meas)`, the observer vector field at `ξ̂`.
pub fn observer_rhs(m: &Manifold, obs: &ObserverState, q_meas: &Point, tol: f64) -> Result<Tangent> {
    Ok(m.log(&obs.xi_hat, q_meas, tol)?.scaled(1.0 / obs.lambda))
}

/// One geometric Euler step `ξ̂ ← exp_ξ̂(dt · rhs)`; the clock advances by
/// `dt`.
pub fn observer_step(
    m: &Manifold,
    obs: &ObserverState,
    q_meas: &Point,
    dt: f64,
    tol: f64,
) -> Result<ObserverState> {
    check_dt(dt)?;
    let rhs = observer_rhs(m, obs, q_meas, tol)?;
    let xi = m.exp(&rhs.scaled(dt), tol)?;
    Ok(obs.advanced(xi, dt))
}

/// A stepped observer together with `log_{q}(ξ̂)` at the new measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: ObserverState,
    /// `log_{q_next}(ξ̂_next)`.
    pub log_q_xi: Tangent,
}

impl StepOutcome {
    /// The velocity estimate at `q_next`, see [`velocity_from_log`].
    pub fn velocity(&self) -> Tangent {
        velocity_from_log(&self.log_q_xi, self.state.lambda)
    }
}

/// Options shared by [`advance`] calls along a run.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub scheme: StepScheme,
    pub tol: f64,
    /// Warm start for `log_{q_next}(ξ̂)` on numeric manifolds.
    pub guess: Option<&'a DVector<f64>>,
}

/// Advance by `h` with the chosen scheme. Euler uses the measurement at
/// the start of the step.
pub fn advance(
    m: &Manifold,
    obs: &ObserverState,
    q_prev: &Point,
    q_next: &Point,
    h: f64,
    ctx: &StepContext<'_>,
) -> Result<StepOutcome> {
    match ctx.scheme {
        StepScheme::Pursuit => pursuit_step(m, obs, q_prev, q_next, h, ctx.tol, ctx.guess),
        StepScheme::Euler => {
            let state = observer_step(m, obs, q_prev, h, ctx.tol)?;
            let log_q_xi = match ctx.guess {
                Some(g) => m.log_with_guess(q_next, &state.xi_hat, ctx.tol, g)?,
                None => m.log(q_next, &state.xi_hat, ctx.tol)?,
            };
            Ok(StepOutcome { state, log_q_xi })
        }
    }
}

/// Advance the observer by `h` with measurements `q_prev` (at the start of
/// the step) and `q_next` (at its end).
///
/// Between samples the measurement is taken to move along the geodesic
/// from `q_prev` to `q_next` at constant speed, with velocity
/// `w = -log_{q_next}(q_prev) / h` at `q_next`. Written in normal
/// coordinates at `q_next` the flat solution of the observer equation over
/// the step is
///
/// ```text
/// u = e^{-h/λ} log_{q_next}(ξ̂) + (e^{-h/λ}(h + λ) - λ) w,   ξ̂' = exp_{q_next}(u)
/// ```
///
/// This is exact on `R^n`, exact for a fixed measurement on any manifold
/// (`q_prev == q_next`: the geodesic contraction `σ' = -σ/λ`), and exact
/// for the trailing solution `ξ = exp_q(-λ q̇)` along any geodesic. In
/// general it is first order, with curvature entering the error constant.
pub fn pursuit_step(
    m: &Manifold,
    obs: &ObserverState,
    q_prev: &Point,
    q_next: &Point,
    h: f64,
    tol: f64,
    guess: Option<&DVector<f64>>,
) -> Result<StepOutcome> {
    check_dt(h)?;
    let lambda = obs.lambda;
    let decay = (-h / lambda).exp();
    let to_xi = match guess {
        Some(g) => m.log_with_guess(q_next, &obs.xi_hat, tol, g)?,
        None => m.log(q_next, &obs.xi_hat, tol)?,
    };
    let mut u = to_xi.components * decay;
    if q_prev != q_next {
        let back = m.log(q_next, q_prev, tol)?;
        let c = decay * (h + lambda) - lambda;
        u -= back.components * (c / h);
    }
    let u = m.project(&Tangent::new(q_next.clone(), u)?);
    let reach = m.norm(&u)?;
    let radius = m.injectivity_radius(q_next);
    if radius.is_finite() && reach >= radius {
        return Err(GeoError::InjectivityViolation {
            distance: reach,
            radius,
        });
    }
    let xi = m.exp(&u, tol)?;
    Ok(StepOutcome {
        state: obs.advanced(xi, h),
        log_q_xi: u,
    })
}

/// `v̂ = T_{ξ̂→q}((1/λ) log_ξ̂(q))`, transported along the connecting
/// geodesic.
pub fn velocity_estimate(m: &Manifold, obs: &ObserverState, q_meas: &Point, tol: f64) -> Result<Tangent> {
    let rhs = observer_rhs(m, obs, q_meas, tol)?;
    m.parallel_transport(&rhs, q_meas, tol)
}

/// The velocity estimate from `log_q(ξ̂)`.
///
/// Transporting the initial velocity of the geodesic from `ξ̂` to `q`
/// along itself gives its final velocity, which is `-log_q(ξ̂)`. So
/// `v̂ = -log_q(ξ̂) / λ` without a separate transport.
pub fn velocity_from_log(log_q_xi: &Tangent, lambda: f64) -> Tangent {
    log_q_xi.scaled(-1.0 / lambda)
}

/// The trailing reference `ξ = exp_q(-λ q̇)` of a known trajectory.
pub fn reference_state(m: &Manifold, qdot: &Tangent, lambda: f64, tol: f64) -> Result<Point> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(GeoError::invalid(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(qdot.base.clone());
    }
    let back = qdot.scaled(-lambda);
    let reach = m.norm(&back)?;
    let radius = m.injectivity_radius(&qdot.base);
    if radius.is_finite() && reach >= radius {
        return Err(GeoError::InjectivityViolation {
            distance: reach,
            radius,
        });
    }
    m.exp(&back, tol)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GeoError::invalid(format!("step must be positive, got {dt}")));
    }
    Ok(())
}
