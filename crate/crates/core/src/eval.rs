//! Experiment drivers: OSPA position error, track confirmation, single
//! trials and Monte Carlo batches.
//!
//! Every trial derives all of its randomness from one seed through four
//! fixed substreams (truth, clutter, detection, particles), so runs are
//! reproducible bit-for-bit at any parallelism level and the variance
//! sources can be frozen independently when debugging.

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::Serialize;

use crate::bernoulli::{self, BernoulliState, SensorChannel};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::scenario::{self, ScanSet, TargetState};
use crate::smc::{self, RngStream};

/// Substream carrying the truth trajectory's process noise.
pub const STREAM_TRUTH: u64 = 0;
/// Substream carrying clutter counts and positions.
pub const STREAM_CLUTTER: u64 = 1;
/// Substream carrying detection coin flips and measurement noise.
pub const STREAM_DETECTION: u64 = 2;
/// Substream carrying particle sampling and resampling.
pub const STREAM_PARTICLES: u64 = 3;

/// A track counts as established once it stays confirmed for this many
/// consecutive steps.
pub const ESTABLISHMENT_RUN_LEN: usize = 5;

/// OSPA order and cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OspaParams {
    p: f64,
    c: f64,
}

impl OspaParams {
    pub fn new(p: f64, c: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "ospa_p",
                reason: format!("order must be at least 1, got {p}"),
            });
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "ospa_c",
                reason: format!("cutoff must be positive, got {c}"),
            });
        }
        Ok(Self { p, c })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

fn min_assignment_cost(
    small: &[Vector2<f64>],
    large: &[Vector2<f64>],
    used: &mut [bool],
    idx: usize,
    params: &OspaParams,
) -> f64 {
    if idx == small.len() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for j in 0..large.len() {
        if used[j] {
            continue;
        }
        let d = (small[idx] - large[j]).norm().min(params.c).powf(params.p);
        used[j] = true;
        let rest = min_assignment_cost(small, large, used, idx + 1, params);
        used[j] = false;
        best = best.min(d + rest);
    }
    best
}

/// OSPA metric between two finite sets of planar positions. For the sets
/// of size ≤ 1 produced here this reduces to: 0 when both are empty, the
/// cutoff `c` when exactly one is empty, and the cutoff-saturated distance
/// otherwise; the general assignment formula is implemented all the same.
pub fn ospa_position(est: &[Vector2<f64>], truth: &[Vector2<f64>], params: &OspaParams) -> f64 {
    let (small, large) = if est.len() <= truth.len() {
        (est, truth)
    } else {
        (truth, est)
    };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return 0.0;
    }
    let mut used = vec![false; n];
    let match_cost = min_assignment_cost(small, large, &mut used, 0, params);
    let cardinality_cost = params.c.powf(params.p) * (n - m) as f64;
    ((match_cost + cardinality_cost) / n as f64).powf(1.0 / params.p)
}

/// Track confirmation rule: presence minus absence possibility at least
/// `threshold` (equivalently, the implied presence probability interval
/// lies within `[threshold, 1]`).
pub fn confirm_track(q0: f64, q1: f64, threshold: f64) -> bool {
    q1 - q0 >= threshold
}

/// Per-step trace of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    pub truth: TargetState,
    pub scan: ScanSet,
    pub q0_pred: f64,
    pub q1_pred: f64,
    pub pred_max_weight: f64,
    pub q0: f64,
    pub q1: f64,
    pub max_weight: f64,
    pub confirmed: bool,
    /// Point estimate when confirmed and the spatial function is valid.
    pub estimate: Option<TargetState>,
    pub ospa: f64,
}

/// Full record of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

impl TrialRecord {
    /// First step at which an [`ESTABLISHMENT_RUN_LEN`]-long confirmed
    /// streak begins, if any.
    pub fn establishment_step(&self) -> Option<usize> {
        let mut streak = 0usize;
        for rec in &self.steps {
            if rec.confirmed {
                streak += 1;
                if streak == ESTABLISHMENT_RUN_LEN {
                    return Some(rec.step + 1 - ESTABLISHMENT_RUN_LEN);
                }
            } else {
                streak = 0;
            }
        }
        None
    }
}

/// One full run of the filter against a fresh synthetic truth.
pub fn run_trial(cfg: &ScenarioConfig, seed: u64) -> Result<TrialRecord> {
    let geometry = cfg.geometry_model()?;
    let radar = cfg.radar_params()?;
    let sensors = cfg.sensor_params()?;
    let tpm = cfg.existence_tpm()?;
    let birth = cfg.birth_model()?;
    let transition = cfg.transition()?;
    let controls = cfg.controls();
    let ospa = OspaParams::new(cfg.eval.ospa_p, cfg.eval.ospa_c)?;
    let channels: Vec<SensorChannel> = (0..sensors.len())
        .map(|i| scenario::sensor_channel(&geometry, &radar, i, &sensors[i]))
        .collect::<Result<_>>()?;
    let x1 = cfg.initial_target_state()?;

    let root = RngStream::new(seed);
    let mut truth_rng = root.substream(STREAM_TRUTH);
    let mut clutter_rng = root.substream(STREAM_CLUTTER);
    let mut det_rng = root.substream(STREAM_DETECTION);
    let mut particles_rng = root.substream(STREAM_PARTICLES);

    let (f, q) = scenario::cv_matrices(radar.t, radar.q)?;
    let truth = scenario::simulate_truth(
        &x1,
        cfg.truth.steps,
        &f,
        &q,
        cfg.truth.noisy,
        &mut truth_rng,
    )?;

    let spatial =
        smc::sample_from_possibility(&birth.possibility, controls.particles, &mut particles_rng)?;
    let mut state = BernoulliState::new(cfg.initial.q0, cfg.initial.q1, spatial)?;

    let mut steps = Vec::with_capacity(cfg.truth.steps);
    for (k, x_true) in truth.iter().enumerate() {
        let (q0_pred, q1_pred) = bernoulli::predict_existence(state.q0(), state.q1(), &tpm);
        let pred = match bernoulli::predict_spatial(
            &state,
            &tpm,
            &birth,
            &transition,
            &controls,
            &mut particles_rng,
        ) {
            Ok(spatial_pred) => {
                BernoulliState::with_validity(q0_pred, q1_pred, spatial_pred, true)?
            }
            // Presence impossible this step: keep the stale particle set
            // around, flagged invalid, until birth possibility recovers.
            Err(Error::AbsentTarget) => {
                BernoulliState::with_validity(q0_pred, q1_pred, state.spatial().clone(), false)?
            }
            Err(e) => return Err(e),
        };

        let scan = scenario::generate_scan(
            x_true,
            &geometry,
            &radar,
            &sensors,
            &mut det_rng,
            &mut clutter_rng,
        )?;

        let post = bernoulli::update(&pred, &scan, &channels)?;
        let confirmed = confirm_track(post.q0(), post.q1(), cfg.eval.confirm_threshold);
        let estimate = if confirmed && post.spatial_valid() {
            Some(TargetState::from_vector(&post.spatial().point_estimate())?)
        } else {
            None
        };
        let est_set: Vec<Vector2<f64>> = estimate.iter().map(|e| e.position()).collect();
        let ospa_val = ospa_position(&est_set, &[x_true.position()], &ospa);

        steps.push(StepRecord {
            step: k + 1,
            truth: *x_true,
            scan,
            q0_pred,
            q1_pred,
            pred_max_weight: pred.spatial().max_weight(),
            q0: post.q0(),
            q1: post.q1(),
            max_weight: post.spatial().max_weight(),
            confirmed,
            estimate,
            ospa: ospa_val,
        });

        state = if post.spatial_valid()
            && post.spatial().effective_size()
                < controls.resample_threshold * post.spatial().len() as f64
        {
            let resampled = smc::resample(post.spatial(), &mut particles_rng)?;
            post.replace_spatial(resampled)
        } else {
            post
        };
    }
    Ok(TrialRecord { seed, steps })
}

/// Aggregate report over a batch of runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub runs: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    /// Mean OSPA per step, averaged over runs.
    pub mean_ospa: Vec<f64>,
    /// Fraction of runs confirmed at each step.
    pub confirmed_fraction: Vec<f64>,
    /// Fraction of runs with an established track.
    pub establishment_rate: f64,
    pub established_runs: usize,
    /// Mean first step of the establishing streak, over established runs.
    pub mean_confirmation_step: Option<f64>,
}

impl McReport {
    pub fn from_trials(trials: &[TrialRecord], base_seed: u64) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "need at least one trial".into(),
            });
        }
        let steps = trials[0].steps.len();
        if trials.iter().any(|t| t.steps.len() != steps) {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "trials must have equal step counts".into(),
            });
        }
        let n = trials.len() as f64;
        let mut mean_ospa = vec![0.0; steps];
        let mut confirmed_fraction = vec![0.0; steps];
        for t in trials {
            for (k, rec) in t.steps.iter().enumerate() {
                mean_ospa[k] += rec.ospa;
                if rec.confirmed {
                    confirmed_fraction[k] += 1.0;
                }
            }
        }
        for k in 0..steps {
            mean_ospa[k] /= n;
            confirmed_fraction[k] /= n;
        }
        let establishment_steps: Vec<usize> = trials
            .iter()
            .filter_map(TrialRecord::establishment_step)
            .collect();
        let established_runs = establishment_steps.len();
        let mean_confirmation_step = if established_runs > 0 {
            Some(establishment_steps.iter().sum::<usize>() as f64 / established_runs as f64)
        } else {
            None
        };
        Ok(Self {
            runs: trials.len(),
            base_seed,
            seeds: trials.iter().map(|t| t.seed).collect(),
            mean_ospa,
            confirmed_fraction,
            establishment_rate: established_runs as f64 / trials.len() as f64,
            established_runs,
            mean_confirmation_step,
        })
    }
}

/// Run `runs` independent trials with seeds `base_seed + i`.
///
/// `threads`: 1 runs sequentially on the calling thread, 0 uses the global
/// thread pool, any other value builds a dedicated pool of that size. The
/// result is identical in all cases.
pub fn run_trials(
    cfg: &ScenarioConfig,
    runs: usize,
    base_seed: u64,
    threads: usize,
) -> Result<Vec<TrialRecord>> {
    if runs == 0 {
        return Err(Error::InvalidParameter {
            name: "runs",
            reason: "need at least one run".into(),
        });
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|i| base_seed + i).collect();
    match threads {
        1 => seeds.iter().map(|&s| run_trial(cfg, s)).collect(),
        0 => seeds.par_iter().map(|&s| run_trial(cfg, s)).collect(),
        t => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidParameter {
                    name: "threads",
                    reason: e.to_string(),
                })?;
            pool.install(|| seeds.par_iter().map(|&s| run_trial(cfg, s)).collect())
        }
    }
}

/// Monte Carlo batch: trials plus aggregation.
pub fn run_monte_carlo(
    cfg: &ScenarioConfig,
    runs: usize,
    base_seed: u64,
    threads: usize,
) -> Result<McReport> {
    let trials = run_trials(cfg, runs, base_seed, threads)?;
    McReport::from_trials(&trials, base_seed)
}
