use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::builtin::{make_builtin, sphere_from_angles, BuiltinSpec};
use crate::manifold::DEFAULT_TOL;
use crate::observer::{pursuit_step, reference_state};

fn synthetic(t: f64, d_xi: f64) -> ConvergenceDiagnostics {
    ConvergenceDiagnostics {
        t,
        d_xi,
        d_q: d_xi,
        speed_err: 0.0,
        norm_err: 0.0,
        angle: 0.0,
        angle_bound: PI,
        in_trap: true,
        qdot_norm: 1.0,
        vhat_norm: 1.0,
    }
}

fn exponential_trace(lambda: f64, d0: f64, n: usize) -> Vec<ConvergenceDiagnostics> {
    (0..n)
        .map(|i| {
            let t = i as f64 * 0.1;
            synthetic(t, d0 * (-t / lambda).exp())
        })
        .collect()
}

/// Run the observer against a geodesic measurement and collect diagnostics.
fn geodesic_run(
    m: &Manifold,
    q0: &Tangent,
    xi0: &Point,
    lambda: f64,
    dt: f64,
    steps: usize,
) -> Vec<ConvergenceDiagnostics> {
    let mut obs = ObserverState::new(xi0.clone(), lambda).unwrap();
    let mut q = q0.clone();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let q_next = m.geodesic_flow(&q, dt).unwrap();
        let step = pursuit_step(m, &obs, &q.base, &q_next.base, dt, DEFAULT_TOL, None).unwrap();
        obs = step.state.clone();
        q = q_next;
        let v_hat = step.velocity();
        let sample = Sample {
            t: obs.t(),
            qdot_true: &q,
            q_meas: &q.base,
            xi_hat: obs.xi_hat(),
            v_hat: &v_hat,
        };
        out.push(diagnose(m, &sample, lambda, DEFAULT_TOL).unwrap().0);
    }
    out
}

#[test]
fn trap_radius_values() {
    assert_abs_diff_eq!(trap_radius(1.0), PI / 4.0);
    assert_abs_diff_eq!(trap_radius(4.0), PI / 8.0);
    assert!(trap_radius(0.0).is_infinite());
    assert!(trap_radius(-1.0).is_infinite());
}

#[test]
fn angle_bound_examples() {
    // sin α = D / sin(λ‖q̇‖) on the unit sphere.
    let b = angle_bound(1.0, 1.0, 1.0, 0.1).unwrap();
    assert_abs_diff_eq!(b, (0.1 / 1f64.sin()).asin(), epsilon = 1e-15);
    // Flat comparison.
    let b = angle_bound(0.0, 2.0, 1.0, 1.0).unwrap();
    assert_abs_diff_eq!(b, (0.5f64).asin(), epsilon = 1e-15);
    assert_eq!(angle_bound(-1.0, 1.0, 1.0, 5.0).unwrap(), PI);
    assert!(matches!(
        angle_bound(1.0, 4.0, 1.0, 0.1),
        Err(GeoError::BoundInapplicable(_))
    ));
    assert!(angle_bound(f64::INFINITY, 1.0, 1.0, 0.1).is_err());
}

#[test]
fn fitted_rate_of_exact_exponential() {
    let trace = exponential_trace(0.5, 2.0, 50);
    assert_abs_diff_eq!(fit_decay_rate(&trace, FIT_FLOOR).unwrap(), 2.0, epsilon = 1e-12);
    let report = check_contraction_bound(&trace, 0.5).unwrap();
    assert!(report.all_satisfied());
    assert_eq!(report.rate_required, 2.0);
}

#[test]
fn fit_ignores_samples_below_floor() {
    let mut trace = exponential_trace(1.0, 1.0, 20);
    trace.extend((0..20).map(|i| synthetic(2.0 + i as f64, 0.0)));
    assert_abs_diff_eq!(fit_decay_rate(&trace, FIT_FLOOR).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn slow_decay_breaches_contraction() {
    let trace = exponential_trace(2.0, 1.0, 30);
    let report = check_contraction_bound(&trace, 1.0).unwrap();
    assert!(!report.all_satisfied());
    assert_eq!(report.breach_events.len(), 1);
    assert!(report.breach_events[0].t > 0.0);
    assert!(report.summary_table().contains("FAIL"));
}

#[test]
fn short_trace_is_rejected() {
    let trace = exponential_trace(1.0, 1.0, 5);
    assert!(matches!(
        check_contraction_bound(&trace, 1.0),
        Err(GeoError::TraceTooShort { got: 5, need: 10 })
    ));
    assert!(check_speed_bounds(&trace, 1.0, 0.0).is_err());
}

#[test]
fn trap_requires_positive_curvature() {
    let trace = exponential_trace(1.0, 0.1, 20);
    assert!(check_trap_region(&trace, 1.0, 0.0, 1.0).is_err());
    let report = check_trap_region(&trace, 1.0, 1.0, 1.0).unwrap();
    assert!(report.hypotheses_met);
    assert!(report.all_satisfied());
    let report = check_trap_region(&trace, 0.5, 1.0, 1.0).unwrap();
    assert!(!report.hypotheses_met);
    assert!(!report.notes.is_empty());
}

#[test]
fn report_serializes_with_named_fields() {
    let report = check_contraction_bound(&exponential_trace(1.0, 1.0, 12), 1.0).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert!(json["bounds_satisfied"][0]["name"] == "contraction");
    let d = serde_json::to_value(synthetic(0.0, 0.5)).unwrap();
    assert_eq!(d["D_xi"], 0.5);
    assert!(d.get("D_q").is_some());
}

#[test]
fn flat_run_matches_analytic_decay() {
    let m = make_builtin(&BuiltinSpec::Euclidean { dim: 2 }).unwrap();
    let q0 = Tangent::from_slices(&[0.0, 0.0], &[1.0, 0.5]).unwrap();
    let xi0 = Point::from_slice(&[1.0, -2.0]);
    let lambda = 0.7;
    let trace = geodesic_run(&m, &q0, &xi0, lambda, 1e-2, 300);
    // ξ(0) = q0 - λ v, so D0 = |ξ̂0 - q0 + λ v|.
    let d0 = ((1.0f64 + 0.7).powi(2) + (-2.0f64 + 0.35).powi(2)).sqrt();
    for d in &trace {
        assert_abs_diff_eq!(d.d_xi, d0 * (-d.t / lambda).exp(), epsilon = 1e-9);
        assert!(lambda * d.speed_err <= d.d_xi + 1e-9);
    }
    let report = check_speed_bounds(&trace, lambda, 0.0).unwrap();
    assert!(report.all_satisfied(), "{}", report.summary_table());
}

#[test]
fn hyperbolic_run_satisfies_speed_bounds() {
    let m = make_builtin(&BuiltinSpec::Hyperbolic2).unwrap();
    let q0 = Tangent::from_slices(&[0.0, 1.0], &[1.0, 0.3]).unwrap();
    let xi0 = Point::from_slice(&[1.5, 2.5]);
    let trace = geodesic_run(&m, &q0, &xi0, 1.0, 1e-2, 400);
    let mut report = check_contraction_bound(&trace, 1.0).unwrap();
    report.merge(check_speed_bounds(&trace, 1.0, -1.0).unwrap());
    assert!(report.all_satisfied(), "{}", report.summary_table());
    assert!(report.rate_fit.unwrap() >= 0.99);
}

#[test]
fn sphere_run_satisfies_angle_bound() {
    let m = make_builtin(&BuiltinSpec::Sphere2).unwrap();
    let base = Point::from_slice(sphere_from_angles(PI / 2.0, 0.0).as_slice());
    let q0 = Tangent::new(base.clone(), nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap();
    let xi_ref = reference_state(&m, &q0, 0.5, DEFAULT_TOL).unwrap();
    let offset = m
        .exp(&Tangent::new(xi_ref.clone(), nalgebra::DVector::from_vec(vec![0.0, 0.0, 0.1])).unwrap(), DEFAULT_TOL)
        .unwrap();
    let trace = geodesic_run(&m, &q0, &offset, 0.5, 1e-2, 300);
    let report = check_speed_bounds(&trace, 0.5, 1.0).unwrap();
    assert!(report.all_satisfied(), "{}", report.summary_table());
    assert!(check_speed_bounds(&trace, 4.0, 1.0).is_err());
}

#[test]
fn probe_is_exact_in_flat_space() {
    let m = make_builtin(&BuiltinSpec::Euclidean { dim: 3 }).unwrap();
    let p = Point::from_slice(&[0.0, 0.0, 0.0]);
    let x = Point::from_slice(&[0.3, -0.2, 1.0]);
    let r = contraction_probe(&m, &p, &x, 0.8, DEFAULT_PROBE_DELTA, DEFAULT_TOL).unwrap();
    assert_abs_diff_eq!(r.worst_rate, -2.0 / 0.8, epsilon = 1e-6);
    assert!(r.satisfied);
}

#[test]
fn probe_on_hyperbolic_plane_contracts_faster() {
    let m = make_builtin(&BuiltinSpec::Hyperbolic2).unwrap();
    let p = Point::from_slice(&[0.0, 1.0]);
    let x = Point::from_slice(&[1.0, 2.0]);
    let r = contraction_probe(&m, &p, &x, 1.0, DEFAULT_PROBE_DELTA, DEFAULT_TOL).unwrap();
    assert!(r.satisfied, "{r:?}");
    // Transverse rate -2 σ coth σ / λ bounds the worst direction.
    let s = m.distance(&p, &x).unwrap();
    assert_abs_diff_eq!(r.worst_rate, -2.0, epsilon = 1e-2);
    assert!(r.rates.iter().all(|&k| k >= -2.0 * s / s.tanh() - 1e-2));
}

#[test]
fn probe_on_sphere_matches_jacobi_field_rate() {
    // Transverse separation scales with sin σ, so its squared norm decays
    // at 2 σ cot σ / λ.
    let m = make_builtin(&BuiltinSpec::Sphere2).unwrap();
    let p = Point::from_slice(&[0.0, 0.0, 1.0]);
    let s = 0.6f64;
    let x = Point::from_slice(&[s.sin(), 0.0, s.cos()]);
    let r = contraction_probe(&m, &p, &x, 1.0, DEFAULT_PROBE_DELTA, DEFAULT_TOL).unwrap();
    assert_abs_diff_eq!(r.worst_rate, -2.0 * s / s.tan(), epsilon = 1e-2);
}

#[test]
fn probe_rejects_points_outside_region() {
    let m = make_builtin(&BuiltinSpec::Sphere2).unwrap();
    let p = Point::from_slice(&[0.0, 0.0, 1.0]);
    let x = Point::from_slice(&[1.0, 0.0, 0.0]);
    assert!(matches!(
        contraction_probe(&m, &p, &x, 1.0, DEFAULT_PROBE_DELTA, DEFAULT_TOL),
        Err(GeoError::OutsideContractionRegion(_))
    ));
}

#[test]
fn probe_is_stable_under_halving_delta() {
    let m = make_builtin(&BuiltinSpec::Hyperbolic2).unwrap();
    let p = Point::from_slice(&[0.2, 1.0]);
    let x = Point::from_slice(&[-0.5, 1.7]);
    let a = contraction_probe(&m, &p, &x, 0.5, 1e-4, DEFAULT_TOL).unwrap().worst_rate;
    let b = contraction_probe(&m, &p, &x, 0.5, 5e-5, DEFAULT_TOL).unwrap().worst_rate;
    assert!(((a - b) / a).abs() < 0.1, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_exponential_always_passes(lambda in 0.1f64..5.0, d0 in 1e-3f64..5.0) {
        let trace = exponential_trace(lambda, d0, 40);
        let report = check_contraction_bound(&trace, lambda).unwrap();
        prop_assert!(report.all_satisfied());
        prop_assert!((report.rate_fit.unwrap() * lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hyperbolic_probe_never_beats_flat(x in -1.0f64..1.0, y in 0.5f64..2.0, lambda in 0.2f64..3.0) {
        let m = make_builtin(&BuiltinSpec::Hyperbolic2).unwrap();
        let p = Point::from_slice(&[0.0, 1.0]);
        let q = Point::from_slice(&[x, y]);
        prop_assume!(m.distance(&p, &q).unwrap() > 1e-2);
        let r = contraction_probe(&m, &p, &q, lambda, DEFAULT_PROBE_DELTA, DEFAULT_TOL).unwrap();
        prop_assert!(r.satisfied, "{:?}", r);
    }
}
