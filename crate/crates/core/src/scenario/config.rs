use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::INTEGRATOR_TOL;
use crate::builtin::{make_builtin, make_chart, BuiltinSpec, ChartPreset};
use crate::error::{GeoError, Result};
use crate::manifold::Manifold;
use crate::observer::{PotentialSpec, StepScheme};

/// Manifold selection: a built-in (`{"kind": "sphere2"}`) or a chart preset
/// (`{"chart": "poincare_disk"}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManifoldSpec {
    Builtin(BuiltinSpec),
    Chart { chart: ChartPreset },
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<Manifold> {
        match self {
            ManifoldSpec::Builtin(spec) => make_builtin(spec),
            ManifoldSpec::Chart { chart } => Ok(make_chart(*chart)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Free motion along a geodesic.
    Geodesic,
    /// Fixed configuration; `qdot0` is ignored.
    Stationary,
    /// Conservative system with potential `U` at energy `E`; the observer
    /// runs on the Jacobi metric in Maupertuis time.
    Mechanical { potential: PotentialSpec, energy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMarker {
    /// `ξ̂(0) = q(0)`.
    AtQ0,
    /// `ξ̂(0) = exp_q(-λ q̇)`, the converged state.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XiHatInit {
    Point(Vec<f64>),
    Marker(InitMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Per-coordinate `N(0, σ²)`.
    #[default]
    Gaussian,
    /// Per-coordinate uniform on `[-σ, σ]`.
    Uniform,
}

/// Additive measurement noise with `σ = fraction * max |coordinate|` of
/// the true trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub fraction: f64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTarget {
    /// `trace.csv`, one row per record.
    TraceCsv,
    /// `report.json` (bound report) and `summary.json` (run status).
    ReportJson,
    /// Two-column CSVs: `plot_D_xi.csv`, `plot_speed_err.csv`, `plot_angle.csv`.
    PlotData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Dt,
    NoiseFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_t_end() -> f64 {
    20.0
}

fn default_threshold() -> f64 {
    0.01
}

fn default_stride() -> usize {
    1
}

fn default_tol() -> f64 {
    INTEGRATOR_TOL
}

fn default_outputs() -> Vec<OutputTarget> {
    vec![OutputTarget::TraceCsv, OutputTarget::ReportJson, OutputTarget::PlotData]
}

/// One scenario, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub manifold: ManifoldSpec,
    pub mode: Mode,
    pub q0: Vec<f64>,
    #[serde(default)]
    pub qdot0: Vec<f64>,
    pub xi_hat0: XiHatInit,
    pub lambda: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputTarget>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub scheme: StepScheme,
    /// Skip the `dt < λ/10` guard (a warning is logged instead).
    #[serde(default)]
    pub allow_large_dt: bool,
    /// Converged when `D(ξ̂, ξ)(t_end) < threshold * D(ξ̂, ξ)(0)`.
    #[serde(default = "default_threshold")]
    pub convergence_threshold: f64,
    /// Experimental: refresh the measurement every `k` steps and hold it in
    /// between.
    #[serde(default)]
    pub measurement_hold: Option<usize>,
    /// Record every `k`-th step (the last step is always recorded).
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Report `v̂` once the observer clock reaches `k * λ`, for a run
    /// started at `ξ̂(0) = q(0)`.
    #[serde(default)]
    pub handoff_windows: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| GeoError::invalid(format!("scenario JSON: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeoError::invalid(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    /// The sphere experiment: start on `[1, 0, 0]` moving along the
    /// equator at unit speed, `ξ̂(0) = [0, 1, 1] / √2`, `λ = π/4`, 20%
    /// Gaussian noise.
    pub fn sphere_preset() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            name: Some("paper_sphere".into()),
            manifold: ManifoldSpec::Builtin(BuiltinSpec::Sphere2),
            mode: Mode::Geodesic,
            q0: vec![1.0, 0.0, 0.0],
            qdot0: vec![0.0, 1.0, 0.0],
            xi_hat0: XiHatInit::Point(vec![0.0, s, s]),
            lambda: PI / 4.0,
            dt: default_dt(),
            t_end: default_t_end(),
            noise: Some(NoiseConfig {
                fraction: 0.2,
                distribution: NoiseDistribution::Gaussian,
                seed: 42,
            }),
            outputs: default_outputs(),
            sweep: None,
            scheme: StepScheme::Pursuit,
            allow_large_dt: false,
            convergence_threshold: default_threshold(),
            measurement_hold: None,
            record_stride: 1,
            handoff_windows: None,
            tol: default_tol(),
        }
    }

    pub fn noise_fraction(&self) -> f64 {
        self.noise.as_ref().map_or(0.0, |n| n.fraction)
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GeoError::invalid(msg));
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.dt > self.t_end {
            return bad(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end));
        }
        if self.dt >= self.lambda / 10.0 {
            if self.allow_large_dt {
                log::warn!(
                    "dt = {} is not below lambda/10 = {}; continuing because allow_large_dt is set",
                    self.dt,
                    self.lambda / 10.0
                );
            } else {
                return bad(format!(
                    "dt = {} must be below lambda/10 = {} (set allow_large_dt to override)",
                    self.dt,
                    self.lambda / 10.0
                ));
            }
        }
        if let Some(n) = &self.noise {
            if !(0.0..=1.0).contains(&n.fraction) {
                return bad(format!("noise fraction must lie in [0, 1], got {}", n.fraction));
            }
        }
        if !(self.convergence_threshold > 0.0) {
            return bad("convergence_threshold must be positive".into());
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if self.measurement_hold == Some(0) {
            return bad("measurement_hold must be at least 1".into());
        }
        if let Some(k) = self.handoff_windows {
            if !(k > 0.0) || !k.is_finite() {
                return bad(format!("handoff_windows must be positive, got {k}"));
            }
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive".into());
        }
        if let Mode::Mechanical { energy, .. } = &self.mode {
            if !energy.is_finite() {
                return bad("energy must be finite".into());
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep needs at least one value".into());
            }
            if s.parameter != SweepParameter::NoiseFraction && s.values.iter().any(|v| !(*v > 0.0)) {
                return bad("sweep values must be positive".into());
            }
        }
        Ok(())
    }

    /// A copy with the sweep parameter set to `value`.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Self {
        let mut c = self.clone();
        c.sweep = None;
        match parameter {
            SweepParameter::Lambda => c.lambda = value,
            SweepParameter::Dt => c.dt = value,
            SweepParameter::NoiseFraction => {
                let mut n = c.noise.take().unwrap_or(NoiseConfig {
                    fraction: 0.0,
                    distribution: NoiseDistribution::Gaussian,
                    seed: 0,
                });
                n.fraction = value;
                c.noise = Some(n);
            }
        }
        c
    }
}
