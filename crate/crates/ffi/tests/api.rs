use std::f64::consts::PI;
use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use geobs_ffi::*;

fn manifold(spec: &str) -> *mut GeobsManifold {
    let spec = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { geobs_manifold_from_json(spec.as_ptr(), &mut m) }, GeobsStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = geobs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn sphere_geometry_round_trip() {
    let m = manifold(r#"{"kind":"sphere2"}"#);
    unsafe {
        assert_eq!(geobs_manifold_dim(m), 2);
        assert_eq!(geobs_manifold_coord_dim(m), 3);
        let q = [1.0, 0.0, 0.0];
        let v = [0.0, PI / 2.0, 0.0];
        let mut p = [0.0; 3];
        assert_eq!(geobs_exp(m, q.as_ptr(), v.as_ptr(), 3, 1e-10, p.as_mut_ptr()), GeobsStatus::Ok);
        assert!((p[1] - 1.0).abs() < 1e-14 && p[0].abs() < 1e-14);

        let mut back = [0.0; 3];
        assert_eq!(geobs_log(m, q.as_ptr(), p.as_ptr(), 3, 1e-10, back.as_mut_ptr()), GeobsStatus::Ok);
        assert!((back[1] - PI / 2.0).abs() < 1e-12);

        let mut d = 0.0;
        assert_eq!(geobs_distance(m, q.as_ptr(), p.as_ptr(), 3, &mut d), GeobsStatus::Ok);
        assert!((d - PI / 2.0).abs() < 1e-14);

        let w = [0.0, 0.0, 1.0];
        let mut moved = [0.0; 3];
        assert_eq!(
            geobs_transport(m, q.as_ptr(), w.as_ptr(), p.as_ptr(), 3, 1e-10, moved.as_mut_ptr()),
            GeobsStatus::Ok
        );
        assert!((moved[2] - 1.0).abs() < 1e-12);

        let u = [0.0, 1.0, 0.0];
        let mut k = 0.0;
        assert_eq!(
            geobs_sectional_curvature(m, q.as_ptr(), u.as_ptr(), w.as_ptr(), 3, &mut k),
            GeobsStatus::Ok
        );
        assert!((k - 1.0).abs() < 1e-4, "K = {k}");
        geobs_manifold_free(m);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let bad = CString::new(r#"{"kind":"klein_bottle"}"#).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(geobs_manifold_from_json(bad.as_ptr(), &mut m), GeobsStatus::InvalidArgument);
        assert!(m.is_null());
        assert!(last_error().contains("manifold spec"));

        let m = manifold(r#"{"kind":"hyperbolic2"}"#);
        let q = [0.0, 1.0];
        let mut out = [0.0; 2];
        assert_eq!(
            geobs_exp(m, q.as_ptr(), q.as_ptr(), 3, 1e-10, out.as_mut_ptr()),
            GeobsStatus::DimensionMismatch
        );
        let below = [0.0, -1.0];
        assert_eq!(
            geobs_log(m, q.as_ptr(), below.as_ptr(), 2, 1e-10, out.as_mut_ptr()),
            GeobsStatus::OutsideDomain
        );
        assert_eq!(
            geobs_exp(ptr::null(), q.as_ptr(), q.as_ptr(), 2, 1e-10, out.as_mut_ptr()),
            GeobsStatus::NullPointer
        );
        assert_eq!(geobs_log(m, q.as_ptr(), q.as_ptr(), 2, 1e-10, out.as_mut_ptr()), GeobsStatus::Ok);
        assert!(geobs_last_error_message().is_null());
        geobs_manifold_free(m);
        geobs_manifold_free(ptr::null_mut());
        let s = CStr::from_ptr(geobs_status_str(GeobsStatus::OutsideDomain));
        assert_eq!(s.to_str().unwrap(), "outside domain");
    }
}

#[test]
fn observer_tracks_straight_line() {
    // On the plane the estimate converges to the true velocity.
    let m = manifold(r#"{"kind":"euclidean","dim":2}"#);
    let (lambda, h) = (0.5, 0.01);
    let qdot = [1.0, -0.5];
    let at = |t: f64| [qdot[0] * t, qdot[1] * t];
    unsafe {
        let mut obs = ptr::null_mut();
        let xi0 = [2.0, 1.0];
        assert_eq!(
            geobs_observer_new(m, at(0.0).as_ptr(), xi0.as_ptr(), 2, lambda, 1e-10, &mut obs),
            GeobsStatus::Ok
        );
        geobs_manifold_free(m);
        for k in 1..=1000 {
            let q = at(k as f64 * h);
            assert_eq!(geobs_observer_step(obs, q.as_ptr(), 2, h), GeobsStatus::Ok);
        }
        assert!((geobs_observer_time(obs) - 10.0).abs() < 1e-9);
        let mut v = [0.0; 2];
        assert_eq!(geobs_observer_velocity(obs, v.as_mut_ptr(), 2), GeobsStatus::Ok);
        assert!((v[0] - qdot[0]).abs() < 1e-6 && (v[1] - qdot[1]).abs() < 1e-6, "{v:?}");
        let mut xi = [0.0; 2];
        assert_eq!(geobs_observer_xi_hat(obs, xi.as_mut_ptr(), 2), GeobsStatus::Ok);
        let q = at(10.0);
        assert!((xi[0] - (q[0] - lambda * qdot[0])).abs() < 1e-6);
        assert_eq!(geobs_observer_step(obs, q.as_ptr(), 2, -1.0), GeobsStatus::InvalidArgument);
        assert!((geobs_observer_time(obs) - 10.0).abs() < 1e-9);
        geobs_observer_free(obs);
    }
}

#[test]
fn scenario_runs_from_json() {
    let scenario = CString::new(
        r#"{"name":"ffi","manifold":{"kind":"euclidean","dim":2},"mode":{"kind":"geodesic"},
            "q0":[0.0,0.0],"qdot0":[1.0,0.0],"xi_hat0":[1.0,1.0],"lambda":0.5,"dt":0.01,"t_end":10.0}"#,
    )
    .unwrap();
    unsafe {
        let mut json = ptr::null_mut();
        let mut code = -1;
        assert_eq!(geobs_run_scenario_json(scenario.as_ptr(), &mut json, &mut code), GeobsStatus::Ok);
        assert_eq!(code, 0);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        geobs_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["summary"]["converged"], true);
        assert!(v["report"].is_object());

        let broken = CString::new("{").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(
            geobs_run_scenario_json(broken.as_ptr(), &mut json, ptr::null_mut()),
            GeobsStatus::InvalidArgument
        );
        assert!(json.is_null());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/geobs.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["geobs_exp", "geobs_log", "geobs_observer_step", "geobs_run_scenario_json", "GEOBS_STATUS_OK"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(status.success());
}
