//! Convergence diagnostics and bound checks for observer runs.
//!
//! All checks are inequality assertions with explicit slack. Diagnostics
//! are expressed in the geometry the observer runs on and on its clock
//! (the Jacobi metric and Maupertuis time for mechanical runs).

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::manifold::{Manifold, Point, Tangent};
use crate::observer::{check_lambda, reference_state, ObserverState};

/// Relative slack for pointwise trace bounds.
pub const TRACE_REL_SLACK: f64 = 1e-3;

/// Absolute slack added to pointwise trace bounds, so that bounds which
/// decay to zero are not judged below the accuracy of the geometry.
pub const TRACE_ABS_FLOOR: f64 = 1e-10;

/// Tolerance of the geometric primitives used by the simulator.
pub const INTEGRATOR_TOL: f64 = 1e-10;

/// Rate fits only use samples with `D(ξ̂, ξ)` above this floor.
pub const FIT_FLOOR: f64 = 100.0 * INTEGRATOR_TOL;

/// Absolute slack on the contraction-rate probe.
pub const PROBE_ABS_SLACK: f64 = 1e-2;

/// Absolute slack (radians) on the angle bound.
pub const ANGLE_SLACK: f64 = 1e-3;

/// Fewest samples a trace check accepts.
pub const MIN_TRACE_LEN: usize = 10;

/// Default geodesic offset for the contraction probe.
pub const DEFAULT_PROBE_DELTA: f64 = 1e-4;

/// Per-sample convergence measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    /// Observer clock (Maupertuis time for mechanical runs).
    pub t: f64,
    /// `D(ξ̂, ξ)` with `ξ = exp_q(-λ q̇)`.
    #[serde(rename = "D_xi")]
    pub d_xi: f64,
    /// `D(ξ̂, q)` with `q` the true configuration.
    #[serde(rename = "D_q")]
    pub d_q: f64,
    /// `‖v̂ - q̇‖`, with `q̇` transported to the measurement point.
    pub speed_err: f64,
    /// `|‖v̂‖ - ‖q̇‖|`.
    pub norm_err: f64,
    /// Angle between `v̂` and `q̇`, in `[0, π]`.
    pub angle: f64,
    /// Comparison bound `α_A` on the angle (`π` when no bound applies).
    pub angle_bound: f64,
    /// `D(ξ̂, q) < π / (4√A)`; always true when `A ≤ 0`.
    pub in_trap: bool,
    pub qdot_norm: f64,
    pub vhat_norm: f64,
}

/// Ground truth and observer output at one sample.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub t: f64,
    pub qdot_true: &'a Tangent,
    pub q_meas: &'a Point,
    pub xi_hat: &'a Point,
    pub v_hat: &'a Tangent,
}

/// Trap radius `π / (4√A)` for `A > 0`, `+inf` otherwise.
pub fn trap_radius(a: f64) -> f64 {
    if a > 0.0 && a.is_finite() {
        PI / (4.0 * a.sqrt())
    } else {
        f64::INFINITY
    }
}

/// Comparison bound on the angle between `v̂` and `q̇`.
///
/// For `A > 0`: `sin α_A = √A D / sin(√A λ‖q̇‖)`. For `A ≤ 0` the speed
/// bound `λ‖v̂ - q̇‖ ≤ D` gives `sin α ≤ D / (λ‖q̇‖)`. Returns `π` when the
/// right-hand side reaches 1, and an error when the sine denominator is
/// not in `(0, π)`.
pub fn angle_bound(a: f64, lambda: f64, qdot_norm: f64, d_xi: f64) -> Result<f64> {
    if a.is_nan() || a == f64::INFINITY {
        return Err(GeoError::BoundInapplicable(
            "no finite curvature upper bound".into(),
        ));
    }
    let s = if a > 0.0 {
        let arg = a.sqrt() * lambda * qdot_norm;
        if !(arg > 0.0 && arg < PI) {
            return Err(GeoError::BoundInapplicable(format!(
                "sqrt(A) * lambda * |qdot| = {arg:.6} outside (0, pi)"
            )));
        }
        a.sqrt() * d_xi / arg.sin()
    } else {
        if !(qdot_norm > 0.0) {
            return Err(GeoError::BoundInapplicable("zero true velocity".into()));
        }
        d_xi / (lambda * qdot_norm)
    };
    Ok(if s >= 1.0 { PI } else { s.asin() })
}

/// Compute diagnostics for one sample on manifold `m`.
///
/// Returns the diagnostics and the reference point `ξ`.
pub fn diagnose(
    m: &Manifold,
    sample: &Sample<'_>,
    lambda: f64,
    tol: f64,
) -> Result<(ConvergenceDiagnostics, Point)> {
    check_lambda(lambda)?;
    let q_true = &sample.qdot_true.base;
    let xi_ref = reference_state(m, sample.qdot_true, lambda, tol)?;
    let d_xi = m.distance(sample.xi_hat, &xi_ref)?;
    let d_q = m.distance(sample.xi_hat, q_true)?;
    let qdot_at_meas = if sample.q_meas == q_true {
        sample.qdot_true.clone()
    } else {
        m.parallel_transport(sample.qdot_true, sample.q_meas, tol)?
    };
    let base = sample.q_meas;
    let diff = &sample.v_hat.components - &qdot_at_meas.components;
    let speed_err = m.inner(base, &diff, &diff)?.max(0.0).sqrt();
    let vn = m.norm(sample.v_hat)?;
    let qn = m.norm(&qdot_at_meas)?;
    let angle = if vn > 0.0 && qn > 0.0 {
        let c = m.inner(base, &sample.v_hat.components, &qdot_at_meas.components)? / (vn * qn);
        c.clamp(-1.0, 1.0).acos()
    } else {
        0.0
    };
    let a = m.curvature_upper_bound();
    let bound = angle_bound(a, lambda, qn, d_xi).unwrap_or(PI);
    let diag = ConvergenceDiagnostics {
        t: sample.t,
        d_xi,
        d_q,
        speed_err,
        norm_err: (vn - qn).abs(),
        angle,
        angle_bound: bound,
        in_trap: d_q < trap_radius(a),
        qdot_norm: qn,
        vhat_norm: vn,
    };
    Ok((diag, xi_ref))
}

/// Outcome of one named inequality over a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBound {
    pub name: String,
    pub satisfied: bool,
    /// Smallest `bound - value` seen (negative when violated).
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreachEvent {
    pub t: f64,
    pub bound: String,
    pub value: f64,
}

/// Result of checking a trace against the convergence guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Least-squares decay rate of `ln D(ξ̂, ξ)` over the informative window.
    pub rate_fit: Option<f64>,
    /// `1/λ`.
    pub rate_required: f64,
    pub bounds_satisfied: Vec<NamedBound>,
    pub breach_events: Vec<BreachEvent>,
    /// Whether the guarantee's hypotheses held for this run.
    pub hypotheses_met: bool,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// An empty report for gain `λ`.
    pub fn new(lambda: f64) -> Self {
        Self {
            rate_fit: None,
            rate_required: 1.0 / lambda,
            bounds_satisfied: Vec::new(),
            breach_events: Vec::new(),
            hypotheses_met: true,
            notes: Vec::new(),
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.bounds_satisfied.iter().all(|b| b.satisfied)
    }

    pub fn bound(&self, name: &str) -> Option<&NamedBound> {
        self.bounds_satisfied.iter().find(|b| b.name == name)
    }

    /// Merge another report's bounds, breaches and notes into this one.
    pub fn merge(&mut self, other: BoundReport) {
        if self.rate_fit.is_none() {
            self.rate_fit = other.rate_fit;
        }
        self.hypotheses_met &= other.hypotheses_met;
        self.bounds_satisfied.extend(other.bounds_satisfied);
        self.breach_events.extend(other.breach_events);
        self.notes.extend(other.notes);
    }

    /// Evaluate `value(i) <= bound(i)` over the trace, recording the first
    /// breach.
    fn check<F>(&mut self, name: &str, trace: &[ConvergenceDiagnostics], mut f: F)
    where
        F: FnMut(&ConvergenceDiagnostics) -> (f64, f64),
    {
        let mut worst = f64::INFINITY;
        let mut breached = false;
        for d in trace {
            let (value, bound) = f(d);
            let margin = bound - value;
            worst = worst.min(margin);
            if !(margin >= 0.0) && !breached {
                breached = true;
                self.breach_events.push(BreachEvent {
                    t: d.t,
                    bound: name.to_string(),
                    value,
                });
            }
        }
        self.bounds_satisfied.push(NamedBound {
            name: name.to_string(),
            satisfied: !breached,
            worst_margin: worst,
        });
    }

    /// Human-readable summary table.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let rate = self
            .rate_fit
            .map_or_else(|| "n/a".to_string(), |r| format!("{r:.6}"));
        let _ = writeln!(out, "rate_fit      {rate}");
        let _ = writeln!(out, "rate_required {:.6}", self.rate_required);
        let _ = writeln!(out, "hypotheses    {}", if self.hypotheses_met { "met" } else { "not met" });
        let _ = writeln!(out, "{:<14} {:<6} {:>14}", "bound", "status", "worst margin");
        for b in &self.bounds_satisfied {
            let status = if b.satisfied { "ok" } else { "FAIL" };
            let _ = writeln!(out, "{:<14} {:<6} {:>14.6e}", b.name, status, b.worst_margin);
        }
        for e in &self.breach_events {
            let _ = writeln!(out, "breach {} at t={:.6} (value {:.6e})", e.bound, e.t, e.value);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

fn check_trace(trace: &[ConvergenceDiagnostics]) -> Result<()> {
    if trace.len() < MIN_TRACE_LEN {
        return Err(GeoError::TraceTooShort {
            got: trace.len(),
            need: MIN_TRACE_LEN,
        });
    }
    Ok(())
}

/// Least-squares decay rate `-d ln D / dt` over samples with `D > floor`.
pub fn fit_decay_rate(trace: &[ConvergenceDiagnostics], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|d| d.d_xi > floor && d.d_xi.is_finite())
        .map(|d| (d.t, d.d_xi.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    Some(-sxy / sxx)
}

/// `D(ξ̂(t), ξ(t)) ≤ e^{-(t - t0)/λ} D(ξ̂(t0), ξ(t0))` pointwise, plus the
/// fitted decay rate.
pub fn check_contraction_bound(trace: &[ConvergenceDiagnostics], lambda: f64) -> Result<BoundReport> {
    check_lambda(lambda)?;
    check_trace(trace)?;
    let mut report = BoundReport::new(lambda);
    let (t0, d0) = (trace[0].t, trace[0].d_xi);
    report.check("contraction", trace, |d| {
        let bound = (-(d.t - t0) / lambda).exp() * d0 * (1.0 + TRACE_REL_SLACK) + TRACE_ABS_FLOOR;
        (d.d_xi, bound)
    });
    report.rate_fit = fit_decay_rate(trace, FIT_FLOOR);
    if report.rate_fit.is_none() {
        report
            .notes
            .push("fewer than two samples above the fit floor; no rate fitted".into());
    }
    Ok(report)
}

/// Velocity error bounds.
///
/// `λ|‖v̂‖ - ‖q̇‖| ≤ D` always; for `A ≤ 0` also `λ‖v̂ - q̇‖ ≤ D`; for
/// `A > 0` the angle bound `α ≤ α_A`.
pub fn check_speed_bounds(trace: &[ConvergenceDiagnostics], lambda: f64, a: f64) -> Result<BoundReport> {
    check_lambda(lambda)?;
    check_trace(trace)?;
    let mut report = BoundReport::new(lambda);
    let slack = |d: f64| d * (1.0 + TRACE_REL_SLACK) + TRACE_ABS_FLOOR;
    report.check("norm", trace, |d| (lambda * d.norm_err, slack(d.d_xi)));
    if a <= 0.0 {
        report.check("speed", trace, |d| (lambda * d.speed_err, slack(d.d_xi)));
    } else {
        let mut bounds = Vec::with_capacity(trace.len());
        for d in trace {
            bounds.push(angle_bound(a, lambda, d.qdot_norm, d.d_xi)?);
        }
        let mut it = bounds.into_iter();
        report.check("angle", trace, |d| {
            (d.angle, it.next().unwrap_or(PI) + ANGLE_SLACK)
        });
    }
    Ok(report)
}

/// Trapping-region check for `A > 0`: whether `D(ξ̂, q)` stays below
/// `π / (4√A)`.
///
/// The guarantee is stated for `λ > π / (4‖q̇‖√A)` and
/// `D(ξ̂(0), q(0)) < π / (4√A)`; the report records whether those held.
pub fn check_trap_region(
    trace: &[ConvergenceDiagnostics],
    lambda: f64,
    a: f64,
    speed: f64,
) -> Result<BoundReport> {
    check_lambda(lambda)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(GeoError::invalid(format!(
            "trap region needs a positive finite curvature bound, got {a}"
        )));
    }
    check_trace(trace)?;
    let radius = trap_radius(a);
    let mut report = BoundReport::new(lambda);
    let threshold = PI / (4.0 * speed * a.sqrt());
    let gain_ok = lambda > threshold;
    let start_ok = trace[0].d_q < radius;
    report.hypotheses_met = gain_ok && start_ok;
    if !gain_ok {
        report.notes.push(format!(
            "lambda = {lambda:.6} does not exceed pi/(4 |qdot| sqrt(A)) = {threshold:.6}"
        ));
    }
    if !start_ok {
        report.notes.push(format!(
            "D(xi_hat(0), q(0)) = {:.6} is not below pi/(4 sqrt(A)) = {radius:.6}",
            trace[0].d_q
        ));
    }
    report.check("trap", trace, |d| (d.d_q, radius));
    if !report.hypotheses_met {
        let verdict = if report.all_satisfied() {
            "outside the guarantee's hypotheses, stayed inside the trap"
        } else {
            "outside the guarantee's hypotheses"
        };
        report.notes.push(verdict.into());
    }
    Ok(report)
}

/// Result of a [`contraction_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Largest `d/dt ‖δx‖² / ‖δx‖²` over all directions.
    pub worst_rate: f64,
    /// `-2/λ`.
    pub bound: f64,
    pub satisfied: bool,
    /// Principal rates, ascending.
    pub rates: Vec<f64>,
}

/// Numerically estimate `d/dt ‖δx‖² / ‖δx‖²` for the flow
/// `ẋ = (1/λ) log_x(P)` toward a fixed `P`.
///
/// Offsets `x_ε = exp_x(δ u)` follow the exact flow
/// `x(h) = exp_P(e^{-h/λ} log_P x)` for a short time `h`. The squared
/// stretch `D(x(h), x_ε(h))² / δ²` is a quadratic form in `u`; it is
/// sampled by polarization in an orthonormal frame at `x` and the worst
/// direction is its top eigenvector.
pub fn contraction_probe(
    m: &Manifold,
    p: &Point,
    x: &Point,
    lambda: f64,
    delta: f64,
    tol: f64,
) -> Result<ProbeReport> {
    check_lambda(lambda)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(GeoError::invalid(format!("delta must be positive, got {delta}")));
    }
    let d = m.distance(p, x)?;
    let radius = m.injectivity_radius(p);
    if d >= radius {
        return Err(GeoError::OutsideContractionRegion(format!(
            "D(P, x) = {d:.6} >= injectivity radius {radius:.6}"
        )));
    }
    let a = m.curvature_upper_bound();
    if a > 0.0 && d >= trap_radius(a) {
        return Err(GeoError::OutsideContractionRegion(format!(
            "D(P, x) = {d:.6} >= pi/(4 sqrt(A)) = {:.6}",
            trap_radius(a)
        )));
    }
    let h = 1e-3 * lambda;
    let flow = |y: &Point| -> Result<Point> {
        let obs = ObserverState::new(y.clone(), lambda)?;
        Ok(crate::observer::pursuit_step(m, &obs, p, p, h, tol, None)?
            .state
            .xi_hat()
            .clone())
    };
    let x_h = flow(x)?;
    let stretch = |u: &DVector<f64>| -> Result<f64> {
        let x_eps = m.exp(&Tangent::new(x.clone(), u * delta)?, tol)?;
        let d0 = m.distance(x, &x_eps)?;
        let d1 = m.distance(&x_h, &flow(&x_eps)?)?;
        Ok(((d1 / d0).powi(2) - 1.0) / h)
    };
    let frame = orthonormal_frame(m, x)?;
    let k = frame.len();
    let mut s = DMatrix::zeros(k, k);
    for i in 0..k {
        s[(i, i)] = stretch(&frame[i])?;
    }
    for i in 0..k {
        for j in 0..i {
            let u = (&frame[i] + &frame[j]) * std::f64::consts::FRAC_1_SQRT_2;
            let off = stretch(&u)? - 0.5 * (s[(i, i)] + s[(j, j)]);
            s[(i, j)] = off;
            s[(j, i)] = off;
        }
    }
    let mut rates: Vec<f64> = s
        .symmetric_eigenvalues()
        .iter()
        .map(|mu| (1.0 + h * mu).ln() / h)
        .collect();
    rates.sort_by(f64::total_cmp);
    let worst_rate = rates.last().copied().unwrap_or(f64::NEG_INFINITY);
    let bound = -2.0 / lambda;
    Ok(ProbeReport {
        worst_rate,
        bound,
        satisfied: worst_rate <= bound + PROBE_ABS_SLACK,
        rates,
    })
}

/// Gram-Schmidt in the metric over projected coordinate directions.
fn orthonormal_frame(m: &Manifold, x: &Point) -> Result<Vec<DVector<f64>>> {
    let n = m.coord_dim();
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(m.dim());
    for i in 0..n {
        if frame.len() == m.dim() {
            break;
        }
        let mut v = m
            .project(&Tangent::new(x.clone(), DVector::from_fn(n, |r, _| f64::from(r == i)))?)
            .components;
        for e in &frame {
            let c = m.inner(x, &v, e)?;
            v -= e * c;
        }
        let norm = m.inner(x, &v, &v)?.max(0.0).sqrt();
        if norm > 1e-6 {
            frame.push(v / norm);
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests;
