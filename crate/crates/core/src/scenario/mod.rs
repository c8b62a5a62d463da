//! Scenario runner: truth, measurements, observer, diagnostics and output.

mod config;
mod output;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    InitMarker, ManifoldSpec, Mode, NoiseConfig, NoiseDistribution, OutputTarget, ScenarioConfig,
    SweepConfig, SweepParameter, XiHatInit,
};
pub use output::{read_trace_diagnostics, write_outputs, write_sweep_summary, TRACE_COLUMNS_TAIL};

use crate::analysis::{
    check_contraction_bound, check_speed_bounds, check_trap_region, diagnose, BoundReport,
    BreachEvent, ConvergenceDiagnostics, Sample, MIN_TRACE_LEN, TRACE_ABS_FLOOR,
};
use crate::error::{GeoError, Result};
use crate::manifold::{Manifold, Point, Tangent};
use crate::observer::{
    advance, reference_state, JacobiManifold, MechanicalSystem, ObserverState, StepContext,
};

/// Retries when a noisy sample falls outside the chart domain.
const MAX_NOISE_REDRAWS: usize = 100;

/// One recorded sample.
///
/// `qdot_true` and `v_hat` are real-time velocities; `diagnostics` are in
/// the observer's geometry and clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub q_true: Point,
    pub qdot_true: Tangent,
    pub q_meas: Point,
    pub xi_hat: Point,
    pub v_hat: Tangent,
    pub xi_ref: Point,
    pub diagnostics: ConvergenceDiagnostics,
    /// Maupertuis time (equal to `t` outside mechanical mode).
    pub tau: f64,
    /// Euclidean norm of the noise added to the chart coordinates.
    pub noise_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Stopped early on an injectivity breach.
    Diverged,
}

/// `v̂` emitted after a zero-control window started at `ξ̂ = q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handoff {
    pub t: f64,
    pub tau: f64,
    pub v_hat: Vec<f64>,
    pub qdot_true: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: Option<String>,
    pub status: RunStatus,
    pub converged: bool,
    pub lambda: f64,
    pub dt: f64,
    pub initial_d_xi: f64,
    pub final_d_xi: f64,
    pub breach: Option<BreachEvent>,
    pub handoff: Option<Handoff>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<TraceRecord>,
    pub report: BoundReport,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn diagnostics(&self) -> Vec<ConvergenceDiagnostics> {
        self.records.iter().map(|r| r.diagnostics).collect()
    }

    /// Exit code for scripts: 0 success, 2 diverged or bound breach.
    pub fn exit_code(&self) -> i32 {
        if self.summary.status == RunStatus::Diverged || !self.report.all_satisfied() {
            2
        } else {
            0
        }
    }
}

/// Where the observer runs: the configuration manifold, or its Jacobi
/// metric for mechanical systems.
enum Plant {
    Free(Manifold),
    Mechanical(JacobiManifold),
}

impl Plant {
    fn observer_manifold(&self) -> &Manifold {
        match self {
            Plant::Free(m) => m,
            Plant::Mechanical(j) => j.manifold(),
        }
    }

    fn base(&self) -> &Manifold {
        match self {
            Plant::Free(m) => m,
            Plant::Mechanical(j) => j.system().manifold(),
        }
    }

    /// `dτ/dt` at `q`.
    fn rate(&self, q: &Point) -> Result<f64> {
        match self {
            Plant::Free(_) => Ok(1.0),
            Plant::Mechanical(j) => j.clock_rate(q),
        }
    }
}

fn build_plant(cfg: &ScenarioConfig) -> Result<Plant> {
    let m = cfg.manifold.build()?;
    Ok(match &cfg.mode {
        Mode::Mechanical { potential, energy } => {
            let sys = MechanicalSystem::new(m, potential.build()?, *energy)?;
            Plant::Mechanical(sys.jacobi())
        }
        _ => Plant::Free(m),
    })
}

fn initial_state(cfg: &ScenarioConfig, plant: &Plant) -> Result<Tangent> {
    let m = plant.base();
    let q0 = m.canonical(Point::from_slice(&cfg.q0));
    if q0.len() != m.coord_dim() {
        return Err(GeoError::DimensionMismatch {
            expected: m.coord_dim(),
            got: q0.len(),
        });
    }
    if matches!(cfg.mode, Mode::Stationary) {
        return Ok(Tangent::zero(q0));
    }
    let v = Tangent::new(q0, DVector::from_column_slice(&cfg.qdot0))?;
    let v = m.project(&v);
    match plant {
        Plant::Mechanical(j) => {
            let sys = j.system();
            let shell = sys.on_energy_shell(&v)?;
            let drift = (sys.total_energy(&v)? - sys.energy()).abs();
            if drift > 1e-12 {
                log::warn!("qdot0 rescaled onto the energy shell E = {}", sys.energy());
            }
            Ok(shell)
        }
        Plant::Free(_) => Ok(v),
    }
}

fn simulate_truth(cfg: &ScenarioConfig, plant: &Plant, steps: usize) -> Result<Vec<Tangent>> {
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = initial_state(cfg, plant)?;
    states.push(x.clone());
    for _ in 0..steps {
        x = match (&cfg.mode, plant) {
            (Mode::Stationary, _) => x,
            (Mode::Mechanical { .. }, Plant::Mechanical(j)) => j.system().true_dynamics_step(&x, cfg.dt)?,
            _ => plant.base().geodesic_flow(&x, cfg.dt)?,
        };
        states.push(x.clone());
    }
    Ok(states)
}

/// Noisy measurements at every step (with optional zero-order hold) and
/// the norm of each injected noise vector.
fn measure(cfg: &ScenarioConfig, m: &Manifold, truth: &[Tangent]) -> Result<Vec<(Point, f64)>> {
    let hold = cfg.measurement_hold.unwrap_or(1);
    if hold > 1 {
        log::warn!("measurement_hold is experimental");
    }
    let noise = cfg.noise.as_ref().filter(|n| n.fraction > 0.0);
    let Some(noise) = noise else {
        return Ok(truth
            .iter()
            .enumerate()
            .map(|(i, _)| (truth[i - i % hold].base.clone(), 0.0))
            .collect());
    };
    let peak = truth
        .iter()
        .map(|s| s.base.coords().amax())
        .fold(0.0, f64::max);
    let sigma = noise.fraction * peak;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let n = m.coord_dim();
    let mut out: Vec<(Point, f64)> = Vec::with_capacity(truth.len());
    for (i, s) in truth.iter().enumerate() {
        if i % hold != 0 {
            let held = out[i - i % hold].clone();
            out.push(held);
            continue;
        }
        let mut drawn = None;
        for _ in 0..MAX_NOISE_REDRAWS {
            let e = sample_noise(&mut rng, noise.distribution, sigma, n)?;
            let q = m.canonical(Point::new(s.base.coords() + &e));
            if m.in_domain(&q) {
                drawn = Some((q, e.norm()));
                break;
            }
        }
        out.push(drawn.ok_or_else(|| {
            GeoError::invalid("noisy measurement repeatedly left the chart domain")
        })?);
    }
    Ok(out)
}

fn sample_noise(rng: &mut ChaCha8Rng, dist: NoiseDistribution, sigma: f64, n: usize) -> Result<DVector<f64>> {
    if sigma == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let bad = |e: String| GeoError::invalid(format!("noise distribution: {e}"));
    Ok(match dist {
        NoiseDistribution::Gaussian => {
            let d = Normal::new(0.0, sigma).map_err(|e| bad(e.to_string()))?;
            DVector::from_fn(n, |_, _| d.sample(rng))
        }
        NoiseDistribution::Uniform => {
            let d = Uniform::new_inclusive(-sigma, sigma).map_err(|e| bad(e.to_string()))?;
            DVector::from_fn(n, |_, _| d.sample(rng))
        }
    })
}

fn initial_observer(cfg: &ScenarioConfig, plant: &Plant, x0: &Tangent, q_meas0: &Point) -> Result<Point> {
    let m = plant.observer_manifold();
    match &cfg.xi_hat0 {
        XiHatInit::Point(c) => {
            let p = m.canonical(Point::from_slice(c));
            if !m.in_domain(&p) {
                return Err(GeoError::OutsideDomain(c.clone()));
            }
            Ok(p)
        }
        XiHatInit::Marker(InitMarker::AtQ0) => Ok(q_meas0.clone()),
        XiHatInit::Marker(InitMarker::Reference) => {
            let v = observer_velocity(plant, x0)?;
            reference_state(m, &v, cfg.lambda, cfg.tol)
        }
    }
}

/// The true velocity in the observer's geometry and clock.
fn observer_velocity(plant: &Plant, x: &Tangent) -> Result<Tangent> {
    match plant {
        Plant::Free(_) => Ok(x.clone()),
        Plant::Mechanical(j) => j.to_maupertuis(x),
    }
}

fn is_breach(e: &GeoError) -> bool {
    matches!(e, GeoError::InjectivityViolation { .. })
}

/// Run one scenario without writing files.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    cfg.validate()?;
    let plant = build_plant(cfg)?;
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let truth = simulate_truth(cfg, &plant, steps)?;
    let meas = measure(cfg, plant.base(), &truth)?;
    let m = plant.observer_manifold();
    let lambda = cfg.lambda;
    let tol = cfg.tol;

    let xi0 = initial_observer(cfg, &plant, &truth[0], &meas[0].0)?;
    let mut obs = ObserverState::new(xi0, lambda)?;
    let mut log_q_xi = m.log(&meas[0].0, obs.xi_hat(), tol)?;
    let mut tau = 0.0;
    let mut records = Vec::with_capacity(steps / cfg.record_stride + 2);
    let mut breach = None;
    let mut handoff = None;
    let handoff_at = cfg.handoff_windows.map(|k| k * lambda);

    for i in 0..=steps {
        let t = i as f64 * cfg.dt;
        let x = &truth[i];
        let q_meas = &meas[i].0;
        // v̂ in observer time, then in real time.
        let v_obs = log_q_xi.scaled(-1.0 / lambda);
        let rate = plant.rate(q_meas)?;
        let v_real = v_obs.scaled(rate);
        if let (Some(at), None) = (handoff_at, &handoff) {
            if tau >= at {
                handoff = Some(Handoff {
                    t,
                    tau,
                    v_hat: v_real.components.as_slice().to_vec(),
                    qdot_true: x.components.as_slice().to_vec(),
                });
            }
        }
        if i % cfg.record_stride == 0 || i == steps {
            let qdot_obs = observer_velocity(&plant, x)?;
            let sample = Sample {
                t: tau,
                qdot_true: &qdot_obs,
                q_meas,
                xi_hat: obs.xi_hat(),
                v_hat: &v_obs,
            };
            match diagnose(m, &sample, lambda, tol) {
                Ok((diagnostics, xi_ref)) => records.push(TraceRecord {
                    t,
                    q_true: x.base.clone(),
                    qdot_true: x.clone(),
                    q_meas: q_meas.clone(),
                    xi_hat: obs.xi_hat().clone(),
                    v_hat: v_real,
                    xi_ref,
                    diagnostics,
                    tau,
                    noise_norm: meas[i].1,
                }),
                Err(e) if is_breach(&e) => {
                    breach = Some(BreachEvent {
                        t,
                        bound: "reference".into(),
                        value: distance_of(&e),
                    });
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if i == steps {
            break;
        }
        let h = match &plant {
            Plant::Free(_) => cfg.dt,
            Plant::Mechanical(j) => j.tau_increment(&meas[i].0, &meas[i + 1].0, cfg.dt)?,
        };
        let ctx = StepContext {
            scheme: cfg.scheme,
            tol,
            guess: Some(&log_q_xi.components),
        };
        match advance(m, &obs, &meas[i].0, &meas[i + 1].0, h, &ctx) {
            Ok(out) => {
                obs = out.state;
                log_q_xi = out.log_q_xi;
                tau += h;
            }
            Err(e) if is_breach(&e) => {
                breach = Some(BreachEvent {
                    t: (i + 1) as f64 * cfg.dt,
                    bound: "injectivity".into(),
                    value: distance_of(&e),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let report = build_report(cfg, m, &records, &plant)?;
    let initial_d_xi = records.first().map_or(f64::NAN, |r| r.diagnostics.d_xi);
    let final_d_xi = records.last().map_or(f64::NAN, |r| r.diagnostics.d_xi);
    let status = if breach.is_some() {
        RunStatus::Diverged
    } else {
        RunStatus::Completed
    };
    let converged = status == RunStatus::Completed
        && final_d_xi < cfg.convergence_threshold * initial_d_xi + TRACE_ABS_FLOOR;
    Ok(RunResult {
        records,
        report,
        summary: RunSummary {
            name: cfg.name.clone(),
            status,
            converged,
            lambda,
            dt: cfg.dt,
            initial_d_xi,
            final_d_xi,
            breach,
            handoff,
        },
    })
}

fn distance_of(e: &GeoError) -> f64 {
    match e {
        GeoError::InjectivityViolation { distance, .. } => *distance,
        _ => f64::NAN,
    }
}

fn build_report(cfg: &ScenarioConfig, m: &Manifold, records: &[TraceRecord], plant: &Plant) -> Result<BoundReport> {
    let diags: Vec<ConvergenceDiagnostics> = records.iter().map(|r| r.diagnostics).collect();
    let lambda = cfg.lambda;
    if diags.len() < MIN_TRACE_LEN {
        let mut r = BoundReport::new(lambda);
        r.notes.push(format!(
            "trace has {} samples; bounds need {MIN_TRACE_LEN}",
            diags.len()
        ));
        return Ok(r);
    }
    let mut report = check_contraction_bound(&diags, lambda)?;
    let noisy = cfg.noise_fraction() > 0.0;
    if noisy {
        report.bounds_satisfied.clear();
        report.breach_events.clear();
        report.notes.push("noisy run: trace bounds are not asserted".into());
        return Ok(report);
    }
    let a = m.curvature_upper_bound();
    match check_speed_bounds(&diags, lambda, a) {
        Ok(r) => report.merge(r),
        Err(GeoError::BoundInapplicable(why)) => report.notes.push(format!("speed bounds inapplicable: {why}")),
        Err(e) => return Err(e),
    }
    if a > 0.0 && a.is_finite() {
        let speed = match records.first() {
            Some(r) => m.norm(&observer_velocity(plant, &r.qdot_true)?)?,
            None => 0.0,
        };
        report.merge(check_trap_region(&diags, lambda, a, speed)?);
    }
    Ok(report)
}

/// One line of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub parameter: SweepParameter,
    pub value: f64,
    pub status: RunStatus,
    pub converged: bool,
    pub initial_d_xi: f64,
    pub final_d_xi: f64,
}

/// Run every sweep value in parallel.
///
/// Sweeps over `lambda` or `dt` run noise-free; each run's noise seed is
/// the base seed plus its index.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<(SweepRow, RunResult)>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| GeoError::invalid("scenario has no sweep section"))?;
    cfg.validate()?;
    let configs: Vec<ScenarioConfig> = sweep
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = cfg.with_parameter(sweep.parameter, v);
            if sweep.parameter != SweepParameter::NoiseFraction {
                c.noise = None;
            }
            if let Some(n) = c.noise.as_mut() {
                n.seed = n.seed.wrapping_add(i as u64);
            }
            c.name = Some(format!("{}_{i}", cfg.name.as_deref().unwrap_or("sweep")));
            c
        })
        .collect();
    let param = sweep.parameter;
    let values = sweep.values.clone();
    let results: Vec<Result<RunResult>> = configs.par_iter().map(run_scenario).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let r = r?;
            let row = SweepRow {
                index: i,
                parameter: param,
                value: values[i],
                status: r.summary.status,
                converged: r.summary.converged,
                initial_d_xi: r.summary.initial_d_xi,
                final_d_xi: r.summary.final_d_xi,
            };
            Ok((row, r))
        })
        .collect()
}
