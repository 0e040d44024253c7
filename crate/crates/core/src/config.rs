//! Experiment configuration: a versioned JSON schema that fully determines
//! a simulation, plus a built-in default preset.
//!
//! Every module-level invariant is re-validated on load with field-precise
//! messages, and unknown keys are rejected, so a config file is a complete
//! and checkable record of an experiment.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::bernoulli::{BirthModel, DetectionPossibility, ExistenceTpm};
use crate::error::{Error, Result};
use crate::possibility::GaussianPossibility;
use crate::scenario::{self, Geometry, RadarParams, SensorParams, TargetState};
use crate::smc::{GaussianTransition, SmcControls, SupMode};

/// Schema version accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;

fn cfg_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Transmitter position `[x, y]` in meters.
    pub transmitter: [f64; 2],
    /// Receiver positions `[x, y]` in meters; one sensor per receiver.
    pub receivers: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    /// Carrier frequency (Hz).
    pub fc: f64,
    /// Propagation speed (m/s).
    pub c: f64,
    /// Maximum Doppler magnitude (Hz).
    pub f0: f64,
    /// Sampling interval (s).
    #[serde(rename = "T")]
    pub t: f64,
    /// Process-noise intensity.
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// Doppler possibility spread (Hz).
    pub sigma: f64,
    /// Mean clutter count per scan; must be positive (the filter's clutter
    /// ratios are undefined at exactly zero — use a tiny rate instead).
    pub lambda: f64,
    /// Non-detection possibility.
    pub d0: f64,
    /// Detection possibility.
    pub d1: f64,
    /// Simulator-only true-detection range scale (m).
    pub beta_true: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TpmConfig {
    pub t00: f64,
    pub t01: f64,
    pub t10: f64,
    pub t11: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthConfig {
    /// Birth mean `[x, ẋ, y, ẏ]`.
    pub mean: [f64; 4],
    /// Diagonal of the birth covariance.
    pub cov_diag: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub q0: f64,
    pub q1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    /// Initial target state `[x, ẋ, y, ẏ]`.
    pub x1: [f64; 4],
    /// Number of time steps, including the initial one.
    pub steps: usize,
    /// Whether the truth trajectory includes process noise.
    pub noisy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcConfig {
    pub particles: usize,
    /// Fraction of the particle budget drawn from the birth model during
    /// prediction (when both birth and survival are possible).
    pub birth_fraction: f64,
    /// Resample when N_eff falls below this fraction of the budget.
    pub resample_threshold: f64,
    pub sup_mode: SupMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub ospa_p: f64,
    pub ospa_c: f64,
    /// Track confirmed when `q1 − q0 ≥` this threshold.
    pub confirm_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunsConfig {
    pub runs: usize,
    pub base_seed: u64,
}

/// Complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub geometry: GeometryConfig,
    pub radar: RadarConfig,
    pub sensors: Vec<SensorConfig>,
    pub tpm: TpmConfig,
    pub birth: BirthConfig,
    pub initial: InitialConfig,
    pub truth: TruthConfig,
    pub smc: SmcConfig,
    pub eval: EvalConfig,
    pub runs: RunsConfig,
}

impl ScenarioConfig {
    /// Built-in preset: five-receiver Doppler scenario with the reference
    /// parameter set (900 MHz carrier, T = 2 s, q = 0.1, σ = 2.5 Hz,
    /// λ = 0.5, 70 steps, 10⁴ particles, detection interval [0.6, 1.0]).
    pub fn paper_default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometryConfig {
                transmitter: [0.0, 0.0],
                receivers: vec![
                    [-8000.0, 3000.0],
                    [-9000.0, 11_000.0],
                    [-2000.0, 2000.0],
                    [1000.0, 11_000.0],
                    [9000.0, 9000.0],
                ],
            },
            radar: RadarConfig {
                fc: 900e6,
                c: 2.997_924_58e8,
                f0: 200.0,
                t: 2.0,
                q: 0.1,
            },
            sensors: vec![
                SensorConfig {
                    sigma: 2.5,
                    lambda: 0.5,
                    d0: 0.4,
                    d1: 1.0,
                    beta_true: 12_000.0,
                };
                5
            ],
            tpm: TpmConfig {
                t00: 1.0,
                t01: 0.01,
                t10: 0.01,
                t11: 1.0,
            },
            birth: BirthConfig {
                mean: [0.0, 0.0, 0.0, 0.0],
                cov_diag: [16e6, 900.0, 16e6, 900.0],
            },
            initial: InitialConfig { q0: 1.0, q1: 1.0 },
            truth: TruthConfig {
                x1: [-4000.0, 30.0, 7000.0, -12.0],
                steps: 70,
                noisy: true,
            },
            smc: SmcConfig {
                particles: 10_000,
                birth_fraction: 0.1,
                resample_threshold: 0.5,
                sup_mode: SupMode::Ancestor,
            },
            eval: EvalConfig {
                ospa_p: 1.0,
                ospa_c: 1e4,
                confirm_threshold: 0.5,
            },
            runs: RunsConfig {
                runs: 100,
                base_seed: 42,
            },
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Re-validate every invariant, reporting the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.geometry_model()?;
        self.radar_params()?;
        let sensors = self.sensor_params()?;
        if sensors.len() != self.geometry.receivers.len() {
            return Err(cfg_err(
                "sensors",
                format!(
                    "{} sensor entries for {} receivers",
                    sensors.len(),
                    self.geometry.receivers.len()
                ),
            ));
        }
        self.existence_tpm()?;
        self.birth_model()?;
        for (name, v) in [
            ("initial.q0", self.initial.q0),
            ("initial.q1", self.initial.q1),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(cfg_err(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if self.initial.q0.max(self.initial.q1) != 1.0 {
            return Err(cfg_err("initial", "max(q0, q1) must be exactly 1"));
        }
        if !self.truth.x1.iter().all(|v| v.is_finite()) {
            return Err(cfg_err("truth.x1", "components must be finite"));
        }
        if self.truth.steps == 0 {
            return Err(cfg_err("truth.steps", "must be at least 1"));
        }
        if self.smc.particles == 0 {
            return Err(cfg_err("smc.particles", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.smc.birth_fraction) {
            return Err(cfg_err(
                "smc.birth_fraction",
                format!("must lie in [0, 1], got {}", self.smc.birth_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&self.smc.resample_threshold) {
            return Err(cfg_err(
                "smc.resample_threshold",
                format!("must lie in [0, 1], got {}", self.smc.resample_threshold),
            ));
        }
        if !(self.eval.ospa_p.is_finite() && self.eval.ospa_p >= 1.0) {
            return Err(cfg_err(
                "eval.ospa_p",
                format!("must be at least 1, got {}", self.eval.ospa_p),
            ));
        }
        if !(self.eval.ospa_c.is_finite() && self.eval.ospa_c > 0.0) {
            return Err(cfg_err(
                "eval.ospa_c",
                format!("must be positive, got {}", self.eval.ospa_c),
            ));
        }
        if !(0.0..=1.0).contains(&self.eval.confirm_threshold) {
            return Err(cfg_err(
                "eval.confirm_threshold",
                format!("must lie in [0, 1], got {}", self.eval.confirm_threshold),
            ));
        }
        if self.runs.runs == 0 {
            return Err(cfg_err("runs.runs", "must be at least 1"));
        }
        // Transition construction exercises the SPD check on Q.
        self.transition()?;
        Ok(())
    }

    pub fn geometry_model(&self) -> Result<Geometry> {
        Geometry::new(
            Vector2::from(self.geometry.transmitter),
            self.geometry
                .receivers
                .iter()
                .map(|&r| Vector2::from(r))
                .collect(),
        )
        .map_err(|e| cfg_err("geometry.receivers", e.to_string()))
    }

    pub fn radar_params(&self) -> Result<RadarParams> {
        RadarParams::new(
            self.radar.fc,
            self.radar.c,
            self.radar.f0,
            self.radar.t,
            self.radar.q,
        )
        .map_err(|e| cfg_err("radar", e.to_string()))
    }

    pub fn sensor_params(&self) -> Result<Vec<SensorParams>> {
        self.sensors
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if !(s.lambda.is_finite() && s.lambda > 0.0) {
                    return Err(cfg_err(
                        &format!("sensors[{i}].lambda"),
                        format!(
                            "must be positive for the filter's clutter ratios, got {}",
                            s.lambda
                        ),
                    ));
                }
                let det = DetectionPossibility::new(s.d0, s.d1)
                    .map_err(|e| cfg_err(&format!("sensors[{i}]"), e.to_string()))?;
                SensorParams::new(s.sigma, s.lambda, det, s.beta_true)
                    .map_err(|e| cfg_err(&format!("sensors[{i}]"), e.to_string()))
            })
            .collect()
    }

    pub fn existence_tpm(&self) -> Result<ExistenceTpm> {
        ExistenceTpm::new(self.tpm.t00, self.tpm.t01, self.tpm.t10, self.tpm.t11)
            .map_err(|e| cfg_err("tpm", e.to_string()))
    }

    pub fn birth_model(&self) -> Result<BirthModel> {
        for (i, &v) in self.birth.cov_diag.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(cfg_err(
                    &format!("birth.cov_diag[{i}]"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        let pi = GaussianPossibility::new(
            DVector::from_column_slice(&self.birth.mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(&self.birth.cov_diag)),
        )
        .map_err(|e| cfg_err("birth", e.to_string()))?;
        Ok(BirthModel::new(pi))
    }

    pub fn transition(&self) -> Result<GaussianTransition> {
        let (f, q) = scenario::cv_matrices(self.radar.t, self.radar.q)
            .map_err(|e| cfg_err("radar", e.to_string()))?;
        GaussianTransition::new(f, q).map_err(|e| cfg_err("radar.q", e.to_string()))
    }

    pub fn controls(&self) -> SmcControls {
        SmcControls {
            particles: self.smc.particles,
            birth_fraction: self.smc.birth_fraction,
            resample_threshold: self.smc.resample_threshold,
            sup_mode: self.smc.sup_mode,
        }
    }

    pub fn initial_target_state(&self) -> Result<TargetState> {
        TargetState::new(
            self.truth.x1[0],
            self.truth.x1[1],
            self.truth.x1[2],
            self.truth.x1[3],
        )
        .map_err(|e| cfg_err("truth.x1", e.to_string()))
    }
}

impl std::str::FromStr for ScenarioConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
