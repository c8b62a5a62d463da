use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4, PI};

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::builtin::{make_builtin, make_chart, BuiltinSpec, ChartPreset, HalfPlaneMetric, SphereMetric};

fn half_plane_numeric() -> Manifold {
    Manifold::from_chart("half-plane", HalfPlaneMetric)
}

fn sphere_numeric() -> Manifold {
    make_builtin(&BuiltinSpec::Sphere2).unwrap().numeric()
}

fn p(c: &[f64]) -> Point {
    Point::from_slice(c)
}

fn t(base: &[f64], c: &[f64]) -> Tangent {
    Tangent::from_slices(base, c).unwrap()
}

#[test]
fn euclidean_christoffel_vanishes() {
    let m = make_builtin(&BuiltinSpec::Euclidean { dim: 2 }).unwrap();
    let gamma = m.christoffel(&p(&[0.3, -1.7])).unwrap();
    assert_eq!(gamma.max_abs(), 0.0);
}

#[test]
fn spherical_chart_christoffel_matches_symbolic() {
    // Γ^θ_{φφ} = -sinθ cosθ, Γ^φ_{θφ} = cotθ for diag(1, sin²θ).
    let m = make_chart(ChartPreset::SphericalAngles);
    let theta = FRAC_PI_4;
    let gamma = m.christoffel(&p(&[theta, 0.4])).unwrap();
    assert_abs_diff_eq!(gamma.get(0, 1, 1), -theta.sin() * theta.cos(), epsilon = 1e-8);
    assert_abs_diff_eq!(gamma.get(0, 1, 1), -0.5, epsilon = 1e-8);
    assert_abs_diff_eq!(gamma.get(1, 0, 1), theta.cos() / theta.sin(), epsilon = 1e-8);
    assert_abs_diff_eq!(gamma.get(0, 0, 0), 0.0, epsilon = 1e-8);
}

#[test]
fn half_plane_christoffel_matches_symbolic() {
    // Γ^x_{xy} = -1/y, Γ^y_{xx} = 1/y, Γ^y_{yy} = -1/y.
    let m = half_plane_numeric();
    let y = 2.0;
    let gamma = m.christoffel(&p(&[0.7, y])).unwrap();
    assert_abs_diff_eq!(gamma.get(0, 0, 1), -1.0 / y, epsilon = 1e-8);
    assert_abs_diff_eq!(gamma.get(0, 0, 1), -0.5, epsilon = 1e-8);
    assert_abs_diff_eq!(gamma.get(1, 0, 0), 1.0 / y, epsilon = 1e-8);
    assert_abs_diff_eq!(gamma.get(1, 1, 1), -1.0 / y, epsilon = 1e-8);
    assert_abs_diff_eq!(gamma.get(0, 0, 0), 0.0, epsilon = 1e-8);
}

#[test]
fn degenerate_metric_is_rejected() {
    let m = Manifold::from_chart(
        "thin",
        ChartMetric::new(2, |_| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]))),
    );
    assert!(matches!(
        m.christoffel(&p(&[0.0, 0.0])),
        Err(GeoError::DegenerateMetric(_))
    ));
}

#[test]
fn outside_domain_is_rejected() {
    let m = half_plane_numeric();
    assert!(matches!(
        m.christoffel(&p(&[0.0, -1.0])),
        Err(GeoError::OutsideDomain(_))
    ));
    assert!(matches!(
        m.christoffel(&p(&[0.0])),
        Err(GeoError::DimensionMismatch { .. })
    ));
}

#[test]
fn euclidean_geodesic_step_is_a_straight_line() {
    let m = make_builtin(&BuiltinSpec::Euclidean { dim: 2 }).unwrap();
    let s = m.geodesic_step(&t(&[1.0, 2.0], &[0.5, -0.25]), 0.1).unwrap();
    assert_abs_diff_eq!(s.base.coords()[0], 1.05, epsilon = 1e-15);
    assert_abs_diff_eq!(s.base.coords()[1], 1.975, epsilon = 1e-15);
    assert_eq!(s.components.as_slice(), &[0.5, -0.25]);
}

#[test]
fn sphere_equator_half_turn_reaches_antipode() {
    let m = sphere_numeric();
    let mut s = t(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
    let dt = 1e-3;
    let steps = (PI / dt).round() as usize;
    let dt = PI / steps as f64;
    for _ in 0..steps {
        s = m.geodesic_step(&s, dt).unwrap();
    }
    // Great-circle oracle: cos(π), sin(π).
    let q = s.base.coords();
    assert_abs_diff_eq!(q[0], -1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(q[1], 0.0, epsilon = 1e-8);
    assert_abs_diff_eq!(q[2], 0.0, epsilon = 1e-12);
    let speed = m.norm(&s).unwrap();
    assert!((speed - 1.0).abs() < 1e-9, "speed drift {}", speed - 1.0);
}

#[test]
fn geodesic_step_is_first_order_consistent() {
    let m = half_plane_numeric();
    let state = t(&[0.2, 1.3], &[0.7, -0.4]);
    let gamma = m.christoffel(&state.base).unwrap();
    let acc = -gamma.contract(&state.components, &state.components);
    let err = |dt: f64| {
        let out = m.geodesic_step(&state, dt).unwrap();
        let dq = out.base.coords() - (state.base.coords() + &state.components * dt);
        let dv = &out.components - (&state.components + &acc * dt);
        dq.norm().max(dv.norm())
    };
    let (e1, e2) = (err(1e-2), err(5e-3));
    assert!(e1 < 1e-3);
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn chart_exit_carries_last_valid_state() {
    let m = half_plane_numeric();
    let state = t(&[0.0, 0.1], &[0.0, -5.0]);
    match m.geodesic_step(&state, 1.0) {
        Err(GeoError::ChartExit { last_valid }) => assert_eq!(*last_valid, state),
        other => panic!("expected chart exit, got {other:?}"),
    }
}

#[test]
fn exp_of_zero_is_identity() {
    for m in [half_plane_numeric(), sphere_numeric(), make_chart(ChartPreset::PoincareDisk)] {
        let base = if m.coord_dim() == 3 { vec![0.0, 0.6, 0.8] } else { vec![0.1, 0.5] };
        let q = m.exp(&Tangent::zero(p(&base)), DEFAULT_TOL).unwrap();
        assert_eq!(q.as_slice(), base.as_slice());
    }
}

#[test]
fn sphere_quarter_great_circle() {
    for m in [sphere_numeric(), make_builtin(&BuiltinSpec::Sphere2).unwrap()] {
        let q = m.exp(&t(&[1.0, 0.0, 0.0], &[0.0, FRAC_PI_2, 0.0]), 1e-12).unwrap();
        assert_abs_diff_eq!(q.coords()[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.coords()[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.coords()[2], 0.0, epsilon = 1e-9);
    }
}

#[test]
fn half_plane_vertical_geodesic_is_exponential() {
    // y(s) = e^s along the vertical geodesic from (0, 1).
    let m = half_plane_numeric();
    let tol = 1e-10;
    let q = m.exp(&t(&[0.0, 1.0], &[0.0, 1.0]), tol).unwrap();
    assert_abs_diff_eq!(q.coords()[0], 0.0, epsilon = tol);
    assert!((q.coords()[1] - E).abs() < 10.0 * tol, "y = {}", q.coords()[1]);
}

#[test]
fn log_of_same_point_is_zero() {
    for m in [half_plane_numeric(), sphere_numeric()] {
        let base = if m.coord_dim() == 3 { vec![0.0, 0.6, 0.8] } else { vec![0.1, 0.5] };
        let v = m.log(&p(&base), &p(&base), DEFAULT_TOL).unwrap();
        assert!(v.is_zero());
    }
}

#[test]
fn sphere_log_between_orthogonal_unit_vectors() {
    for m in [sphere_numeric(), make_builtin(&BuiltinSpec::Sphere2).unwrap()] {
        let v = m.log(&p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0]), 1e-11).unwrap();
        assert_abs_diff_eq!(m.norm(&v).unwrap(), FRAC_PI_2, epsilon = 1e-8);
        assert_abs_diff_eq!(v.components[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v.components[2], 0.0, epsilon = 1e-8);
        assert!(v.components[1] > 0.0);
    }
}

#[test]
fn sphere_antipodes_violate_injectivity() {
    let m = make_builtin(&BuiltinSpec::Sphere2).unwrap();
    let err = m.log(&p(&[1.0, 0.0, 0.0]), &p(&[-1.0, 0.0, 0.0]), DEFAULT_TOL);
    assert!(matches!(err, Err(GeoError::InjectivityViolation { .. })));
    assert!(matches!(
        m.distance(&p(&[0.0, 0.0, 1.0]), &p(&[0.0, 0.0, -1.0])),
        Err(GeoError::InjectivityViolation { .. })
    ));
}

#[test]
fn torus_distance_wraps_around() {
    let m = make_builtin(&BuiltinSpec::Torus2 { periods: [2.0 * PI, 2.0 * PI] }).unwrap();
    let d = m.distance(&p(&[0.0, 0.0]), &p(&[1.5 * PI, 0.0])).unwrap();
    assert_abs_diff_eq!(d, FRAC_PI_2, epsilon = 1e-14);
    let dn = m.numeric().distance(&p(&[0.0, 0.0]), &p(&[1.5 * PI, 0.0])).unwrap();
    assert_abs_diff_eq!(dn, FRAC_PI_2, epsilon = 1e-9);
    // Distance at half the period reaches the injectivity radius.
    assert!(matches!(
        m.distance(&p(&[0.0, 0.0]), &p(&[PI, 0.0])),
        Err(GeoError::InjectivityViolation { .. })
    ));
}

#[test]
fn sphere_distance_matches_arccos_oracle() {
    let a = p(&[1.0, 0.0, 0.0]);
    let b = p(&[3f64.cos(), 3f64.sin(), 0.0]);
    let oracle = a.coords().dot(b.coords()).acos();
    assert_abs_diff_eq!(oracle, 3.0, epsilon = 1e-12);
    let m = make_builtin(&BuiltinSpec::Sphere2).unwrap();
    assert_abs_diff_eq!(m.distance(&a, &b).unwrap(), oracle, epsilon = 1e-12);
    assert_abs_diff_eq!(m.distance(&a, &a).unwrap(), 0.0);
}

#[test]
fn transport_to_own_base_is_identity() {
    for m in [half_plane_numeric(), make_builtin(&BuiltinSpec::Hyperbolic2).unwrap()] {
        let v = t(&[0.3, 0.9], &[1.0, -2.0]);
        let out = m.parallel_transport(&v, &v.base, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!((out.components - &v.components).amax(), 0.0, epsilon = 1e-14);
    }
}

#[test]
fn euclidean_transport_keeps_components() {
    let m = make_builtin(&BuiltinSpec::Euclidean { dim: 3 }).unwrap();
    for mm in [m.clone(), m.numeric()] {
        let v = t(&[0.0, 1.0, 2.0], &[0.3, -0.1, 0.5]);
        let out = mm.parallel_transport(&v, &p(&[4.0, -1.0, 0.5]), DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!((out.components - &v.components).amax(), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn sphere_transport_along_equator() {
    // Rotation about the z axis by π/2: [0,0,1] is fixed and the path
    // tangent [0,1,0] maps to the path tangent [-1,0,0].
    for m in [sphere_numeric(), make_builtin(&BuiltinSpec::Sphere2).unwrap()] {
        let to = p(&[0.0, 1.0, 0.0]);
        let normal = m
            .parallel_transport(&t(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]), &to, 1e-11)
            .unwrap();
        assert_abs_diff_eq!((normal.components - DVector::from_vec(vec![0.0, 0.0, 1.0])).amax(), 0.0, epsilon = 1e-8);
        let along = m
            .parallel_transport(&t(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), &to, 1e-11)
            .unwrap();
        assert_abs_diff_eq!((along.components - DVector::from_vec(vec![-1.0, 0.0, 0.0])).amax(), 0.0, epsilon = 1e-8);
    }
}

#[test]
fn sectional_curvature_of_constant_curvature_charts() {
    let e = make_builtin(&BuiltinSpec::Euclidean { dim: 3 }).unwrap();
    let k = e
        .sectional_curvature(&p(&[1.0, 2.0, 3.0]), &t(&[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0]), &t(&[1.0, 2.0, 3.0], &[0.3, 1.0, 0.2]))
        .unwrap();
    assert_abs_diff_eq!(k, 0.0, epsilon = 1e-12);

    let s = make_chart(ChartPreset::SphericalAngles);
    let q = [1.1, 0.3];
    let k = s.sectional_curvature(&p(&q), &t(&q, &[1.0, 0.2]), &t(&q, &[-0.4, 0.9])).unwrap();
    assert!((k - 1.0).abs() < 1e-4, "sphere chart K = {k}");

    let h = half_plane_numeric();
    let q = [0.4, 1.7];
    let k = h.sectional_curvature(&p(&q), &t(&q, &[1.0, 0.0]), &t(&q, &[0.5, 1.0])).unwrap();
    assert!((k + 1.0).abs() < 1e-4, "half-plane K = {k}");
}

#[test]
fn parallel_vectors_span_no_plane() {
    let h = half_plane_numeric();
    let q = [0.0, 1.0];
    let err = h.sectional_curvature(&p(&q), &t(&q, &[1.0, 2.0]), &t(&q, &[2.0, 4.0]));
    assert!(matches!(err, Err(GeoError::DegeneratePlane(_))));
}

#[test]
fn sphere_metric_is_identity_on_the_unit_sphere() {
    let g = SphereMetric.metric(&DVector::from_vec(vec![0.0, 0.6, 0.8]));
    assert_abs_diff_eq!((g - DMatrix::identity(3, 3)).amax(), 0.0, epsilon = 1e-15);
}

fn half_plane_point() -> impl Strategy<Value = [f64; 2]> {
    (-2.0f64..2.0, 0.3f64..3.0).prop_map(|(x, y)| [x, y])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn christoffel_is_exactly_symmetric(a in 0.1f64..2.0, b in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let m = Manifold::from_chart("warped", ChartMetric::new(2, move |q: &DVector<f64>| {
            let off = 0.3 * (b * q[0]).sin();
            DMatrix::from_row_slice(2, 2, &[1.0 + a * q[1] * q[1], off, off, 2.0 + (q[0] * q[1]).cos()])
        }));
        let gamma = m.christoffel(&p(&[x, y])).unwrap();
        for i in 0..2 { for j in 0..2 { for k in 0..2 {
            prop_assert_eq!(gamma.get(i, j, k), gamma.get(i, k, j));
        }}}
    }

    #[test]
    fn half_plane_log_inverts_exp(q in half_plane_point(), vx in -1.5f64..1.5, vy in -1.5f64..1.5) {
        let m = half_plane_numeric();
        let tol = 1e-10;
        let v = t(&q, &[vx, vy]);
        let end = m.exp(&v, tol).unwrap();
        let back = m.log(&v.base, &end, tol).unwrap();
        let err = (back.components - &v.components).amax();
        prop_assert!(err < 1e-6, "round trip error {}", err);
    }

    #[test]
    fn half_plane_transport_preserves_inner_products(q in half_plane_point(), r in half_plane_point(),
        a in prop::array::uniform2(-1.0f64..1.0), b in prop::array::uniform2(-1.0f64..1.0)) {
        let m = half_plane_numeric();
        let (from, to) = (p(&q), p(&r));
        let va = t(&q, &a);
        let vb = t(&q, &b);
        let before = m.inner(&from, &va.components, &vb.components).unwrap();
        let ta = m.parallel_transport(&va, &to, 1e-10).unwrap();
        let tb = m.parallel_transport(&vb, &to, 1e-10).unwrap();
        let after = m.inner(&to, &ta.components, &tb.components).unwrap();
        prop_assert!((before - after).abs() < 1e-6, "{} vs {}", before, after);
    }

    #[test]
    fn half_plane_distance_is_a_metric(a in half_plane_point(), b in half_plane_point(), c in half_plane_point()) {
        let m = half_plane_numeric();
        let (a, b, c) = (p(&a), p(&b), p(&c));
        let ab = m.distance(&a, &b).unwrap();
        let ba = m.distance(&b, &a).unwrap();
        let bc = m.distance(&b, &c).unwrap();
        let ac = m.distance(&a, &c).unwrap();
        prop_assert!((ab - ba).abs() < 1e-8);
        prop_assert!(ac <= ab + bc + 1e-8);
    }
}
