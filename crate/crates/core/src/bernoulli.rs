//! The possibilistic Bernoulli recursion.
//!
//! The target state is a Bernoulli uncertain finite set: either empty
//! (target absent) or a singleton (target present somewhere). Its
//! description is the absence/presence possibility pair `(q⁰, q¹)` with
//! `max(q⁰, q¹) = 1`, plus a spatial possibility function `π` over the
//! state space, carried here as a [`ParticleSet`].
//!
//! Prediction mixes a birth term with survival through the transition:
//!
//! ```text
//! q⁰' = max(τ₀₀ q⁰, τ₁₀ q¹)
//! q¹' = max(τ₀₁ q⁰, τ₁₁ q¹)
//! π'(x) = (1/q¹') · max{ τ₀₁ q⁰ b(x), τ₁₁ q¹ sup_x' ρ(x|x') π(x') }
//! ```
//!
//! The multi-sensor update multiplies, per sensor `i`, a measurement-set
//! factor `L_i(Z|x)` into the spatial weights and a ratio `R_i(Z)` into the
//! existence odds:
//!
//! ```text
//! R_i(Z)   = max{ d⁰, d¹ · max_z [ κ(Z\z)/κ(Z) · sup_x g(z|x) π'(x) ] }
//! L_i(Z|x) = max{ d⁰, d¹ · max_z [ κ(Z\z)/κ(Z) · g(z|x) ] }
//! α = ∏ R_i,   q¹ ∝ α q¹',   q⁰ ∝ q⁰',   π ∝ π' · ∏ L_i/R_i
//! ```
//!
//! where `κ` is the clutter possibility of a scan. Clutter ratios are
//! evaluated symbolically (`ν(m−1)/ν(m) = m/λ` for Poisson cardinality, and
//! `1/μ(z)`), never as quotients of raw products, so large scans cannot
//! underflow them.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::possibility::{DiscretePossibility, GaussianPossibility};
use crate::smc::{self, GaussianTransition, ParticleSet, RngStream, SmcControls, SupMode};

/// Transitional possibility matrix for the presence variable.
///
/// `t_ij` is the possibility of moving from existence state `i` to `j`
/// (0 = absent, 1 = present). Each row must have maximum exactly 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExistenceTpm {
    t00: f64,
    t01: f64,
    t10: f64,
    t11: f64,
}

impl ExistenceTpm {
    pub fn new(t00: f64, t01: f64, t10: f64, t11: f64) -> Result<Self> {
        for (name, v) in [("t00", t00), ("t01", t01), ("t10", t10), ("t11", t11)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in [0, 1], got {v}"),
                });
            }
        }
        if t00.max(t01) != 1.0 || t10.max(t11) != 1.0 {
            return Err(Error::InvalidParameter {
                name: "tpm",
                reason: "each row must have maximum exactly 1".into(),
            });
        }
        Ok(Self { t00, t01, t10, t11 })
    }

    pub fn t00(&self) -> f64 {
        self.t00
    }

    pub fn t01(&self) -> f64 {
        self.t01
    }

    pub fn t10(&self) -> f64 {
        self.t10
    }

    pub fn t11(&self) -> f64 {
        self.t11
    }
}

/// Non-detection/detection possibility pair `(d⁰, d¹)` with
/// `max(d⁰, d¹) = 1`.
///
/// Encodes partial knowledge of the detection probability as the interval
/// `[1−d⁰, d¹]`; `d⁰ = d¹ = 1` is total ignorance, `d⁰ = 0, d¹ = 1` is a
/// perfect detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionPossibility {
    d0: f64,
    d1: f64,
}

impl DetectionPossibility {
    pub fn new(d0: f64, d1: f64) -> Result<Self> {
        for (name, v) in [("d0", d0), ("d1", d1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in [0, 1], got {v}"),
                });
            }
        }
        if d0.max(d1) != 1.0 {
            return Err(Error::InvalidParameter {
                name: "detection",
                reason: format!("max(d0, d1) must be exactly 1, got ({d0}, {d1})"),
            });
        }
        Ok(Self { d0, d1 })
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    /// Induced detection-probability interval `[1−d⁰, d¹]`.
    pub fn probability_interval(&self) -> (f64, f64) {
        (1.0 - self.d0, self.d1)
    }
}

/// Birth possibility over the state space.
#[derive(Clone, Debug)]
pub struct BirthModel {
    pub possibility: GaussianPossibility,
}

impl BirthModel {
    pub fn new(possibility: GaussianPossibility) -> Self {
        Self { possibility }
    }
}

/// Clutter model for one sensor: a cardinality possibility `ν` over the
/// number of false detections and a uniform spatial possibility `μ ≡ 1`
/// over the measurement interval.
#[derive(Clone, Debug)]
pub struct ClutterModel {
    cardinality: DiscretePossibility,
    lo: f64,
    hi: f64,
}

impl ClutterModel {
    pub fn new(cardinality: DiscretePossibility, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter {
                name: "measurement_space",
                reason: format!("need a finite interval lo < hi, got [{lo}, {hi}]"),
            });
        }
        Ok(Self {
            cardinality,
            lo,
            hi,
        })
    }

    /// Poisson cardinality possibility with rate `lambda`, uniform spatial
    /// possibility over `[lo, hi]`.
    pub fn poisson_uniform(lambda: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DiscretePossibility::poisson(lambda)?, lo, hi)
    }

    pub fn cardinality(&self) -> &DiscretePossibility {
        &self.cardinality
    }

    pub fn measurement_space(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Spatial clutter possibility `μ(z)`: 1 inside the measurement
    /// interval, error outside.
    pub fn spatial_eval(&self, z: f64) -> Result<f64> {
        if !z.is_finite() || z < self.lo || z > self.hi {
            return Err(Error::MeasurementOutOfRange {
                value: z,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(1.0)
    }

    /// Clutter possibility of a whole scan, `κ(Z) = ν(|Z|) · ∏ μ(z)`.
    pub fn possibility(&self, scan: &[f64]) -> Result<f64> {
        let mut prod = self.cardinality.eval(scan.len());
        for &z in scan {
            prod *= self.spatial_eval(z)?;
        }
        Ok(prod)
    }

    /// Removal ratio `κ(Z\{z})/κ(Z) = [ν(m−1)/ν(m)] / μ(z)` for a scan of
    /// size `m`, computed in ratio form.
    pub fn removal_ratio(&self, scan_len: usize, z: f64) -> Result<f64> {
        if scan_len == 0 {
            return Err(Error::InvalidParameter {
                name: "scan_len",
                reason: "removal ratio needs a non-empty scan".into(),
            });
        }
        let mu = self.spatial_eval(z)?;
        Ok(self.cardinality.prev_ratio(scan_len)? / mu)
    }
}

/// Measurement possibility `g(z | x)` for one sensor.
pub trait MeasurementPossibility: Send + Sync {
    fn eval(&self, z: f64, x: &DVector<f64>) -> f64;
}

impl<F> MeasurementPossibility for F
where
    F: Fn(f64, &DVector<f64>) -> f64 + Send + Sync,
{
    fn eval(&self, z: f64, x: &DVector<f64>) -> f64 {
        self(z, x)
    }
}

/// Everything the update step needs to know about one sensor. Deliberately
/// carries no ground-truth detection parameters: the filter side sees only
/// the `(d⁰, d¹)` interval.
pub struct SensorChannel {
    pub detection: DetectionPossibility,
    pub clutter: ClutterModel,
    pub likelihood: Box<dyn MeasurementPossibility>,
}

/// Bernoulli filter state: `(q⁰, q¹)` with `max = 1` plus the particle
/// representation of the spatial possibility.
///
/// `spatial_valid` is false while the presence possibility is zero; the
/// particle set is then retained untouched (and estimates suppressed) until
/// presence recovers through birth.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliState {
    q0: f64,
    q1: f64,
    spatial: ParticleSet,
    spatial_valid: bool,
}

impl BernoulliState {
    pub fn new(q0: f64, q1: f64, spatial: ParticleSet) -> Result<Self> {
        Self::with_validity(q0, q1, spatial, true)
    }

    /// Constructor that also sets the spatial-validity flag; used by the
    /// filter loop when presence collapses to zero.
    pub fn with_validity(
        q0: f64,
        q1: f64,
        spatial: ParticleSet,
        spatial_valid: bool,
    ) -> Result<Self> {
        for (name, v) in [("q0", q0), ("q1", q1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in [0, 1], got {v}"),
                });
            }
        }
        if q0.max(q1) != 1.0 {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: format!("max(q0, q1) must be exactly 1, got ({q0}, {q1})"),
            });
        }
        Ok(Self {
            q0,
            q1,
            spatial,
            spatial_valid,
        })
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn spatial(&self) -> &ParticleSet {
        &self.spatial
    }

    pub fn spatial_valid(&self) -> bool {
        self.spatial_valid
    }

    /// Same existence possibilities with a replacement particle set (e.g.
    /// after resampling).
    pub fn replace_spatial(&self, spatial: ParticleSet) -> Self {
        Self {
            q0: self.q0,
            q1: self.q1,
            spatial,
            spatial_valid: self.spatial_valid,
        }
    }
}

/// Existence prediction:
///
/// ```text
/// q⁰' = max(τ₀₀ q⁰, τ₁₀ q¹),   q¹' = max(τ₀₁ q⁰, τ₁₁ q¹)
/// ```
///
/// Given normalised inputs, `max(q⁰', q¹') = 1` exactly: the row maxima of
/// the TPM are 1, so the product `1·1` appears among the four candidates.
pub fn predict_existence(q0: f64, q1: f64, tpm: &ExistenceTpm) -> (f64, f64) {
    let q0_pred = (tpm.t00 * q0).max(tpm.t10 * q1);
    let q1_pred = (tpm.t01 * q0).max(tpm.t11 * q1);
    (q0_pred, q1_pred)
}

/// Spatial prediction by birth-mixing: a fraction of the particle budget is
/// drawn from the birth model, the rest propagates the survivors, and every
/// particle is weighted by
///
/// ```text
/// max{ τ₀₁ q⁰ b(x), τ₁₁ q¹ S(x) } / q¹'
/// ```
///
/// where `S` is the sup over ancestors, approximated per the chosen
/// [`SupMode`]. A branch with zero possibility gets no particles, so a dead
/// birth branch consumes the RNG exactly like plain propagation (and a dead
/// survival branch draws everything fresh from birth).
pub fn predict_spatial(
    state: &BernoulliState,
    tpm: &ExistenceTpm,
    birth: &BirthModel,
    transition: &GaussianTransition,
    controls: &SmcControls,
    rng: &mut RngStream,
) -> Result<ParticleSet> {
    let (_, q1_pred) = predict_existence(state.q0, state.q1, tpm);
    if q1_pred <= 0.0 {
        return Err(Error::AbsentTarget);
    }
    let birth_poss = tpm.t01 * state.q0;
    let surv_poss = if state.spatial_valid {
        tpm.t11 * state.q1
    } else {
        0.0
    };
    let n = controls.particles.max(1);
    let n_birth = if birth_poss == 0.0 {
        0
    } else if surv_poss == 0.0 {
        n
    } else {
        (((controls.birth_fraction) * n as f64).round() as usize).min(n)
    };
    let n_surv = n - n_birth;

    let prior = &state.spatial;
    let mut states: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut ancestor_weights: Vec<f64> = Vec::with_capacity(n_surv);
    for j in 0..n_surv {
        // Stride decimation spreads ancestor selection uniformly over the
        // prior support, so no contiguous block (e.g. a recent birth cohort)
        // is dropped wholesale when n_surv < len.
        let idx = (j * prior.len()) / n_surv;
        states.push(transition.sample(&prior.states()[idx], rng));
        ancestor_weights.push(prior.weights()[idx]);
    }
    for _ in 0..n_birth {
        states.push(birth.possibility.sample(rng));
    }

    // Survival sup values S(x_j) at every support point.
    let survival: Vec<f64> = if surv_poss == 0.0 {
        vec![0.0; n]
    } else {
        match controls.sup_mode {
            // Ancestor mode: the proposal possibility cancels against the
            // transition, leaving the ancestor's weight; fresh birth draws
            // have no ancestor, so their survival branch is unseen (0).
            SupMode::Ancestor => {
                let mut s = ancestor_weights;
                s.resize(n, 0.0);
                s
            }
            SupMode::Exact => smc::sup_values(&states, prior, transition),
        }
    };

    let weights: Vec<f64> = states
        .iter()
        .zip(&survival)
        .map(|(x, &s)| (birth_poss * birth.possibility.eval_raw(x)).max(surv_poss * s) / q1_pred)
        .collect();
    ParticleSet::new(states, weights)
}

/// Spatial prediction evaluated on a caller-supplied support (e.g. a frozen
/// grid): no sampling, exact sup over the prior particles.
pub fn predict_spatial_on_support(
    state: &BernoulliState,
    tpm: &ExistenceTpm,
    birth: &BirthModel,
    transition: &GaussianTransition,
    support: &[DVector<f64>],
) -> Result<ParticleSet> {
    let (_, q1_pred) = predict_existence(state.q0, state.q1, tpm);
    if q1_pred <= 0.0 {
        return Err(Error::AbsentTarget);
    }
    let birth_poss = tpm.t01 * state.q0;
    let surv_poss = if state.spatial_valid {
        tpm.t11 * state.q1
    } else {
        0.0
    };
    let survival = if surv_poss == 0.0 {
        vec![0.0; support.len()]
    } else {
        smc::sup_values(support, &state.spatial, transition)
    };
    let weights: Vec<f64> = support
        .iter()
        .zip(&survival)
        .map(|(x, &s)| (birth_poss * birth.possibility.eval_raw(x)).max(surv_poss * s) / q1_pred)
        .collect();
    ParticleSet::new(support.to_vec(), weights)
}

/// Per-particle measurement-set factor
///
/// ```text
/// L(Z|x) = max{ d⁰, d¹ · max_z [ κ(Z\z)/κ(Z) · g(z|x) ] }
/// ```
///
/// with the empty-scan convention `L(∅|x) = d⁰`.
pub fn likelihood_factor(
    scan: &[f64],
    x: &DVector<f64>,
    detection: &DetectionPossibility,
    likelihood: &dyn MeasurementPossibility,
    clutter: &ClutterModel,
) -> Result<f64> {
    let mut inner = f64::NEG_INFINITY;
    for &z in scan {
        let r = clutter.removal_ratio(scan.len(), z)?;
        inner = inner.max(r * likelihood.eval(z, x));
    }
    if scan.is_empty() {
        Ok(detection.d0)
    } else {
        Ok(detection.d0.max(detection.d1 * inner))
    }
}

/// Sensor-level update ratio
///
/// ```text
/// R(Z) = max{ d⁰, d¹ · max_z [ κ(Z\z)/κ(Z) · max_j g(z|x_j)·w_j ] }
/// ```
///
/// with `R(∅) = d⁰`. This is a ratio, not a possibility: the clutter term
/// can push it above 1, and no clamp is applied.
pub fn sensor_ratio(
    scan: &[f64],
    predicted: &ParticleSet,
    detection: &DetectionPossibility,
    likelihood: &dyn MeasurementPossibility,
    clutter: &ClutterModel,
) -> Result<f64> {
    let mut inner = f64::NEG_INFINITY;
    for &z in scan {
        let r = clutter.removal_ratio(scan.len(), z)?;
        let best = predicted
            .states()
            .iter()
            .zip(predicted.weights())
            .map(|(x, &w)| likelihood.eval(z, x) * w)
            .fold(0.0f64, f64::max);
        inner = inner.max(r * best);
    }
    if scan.is_empty() {
        Ok(detection.d0)
    } else {
        Ok(detection.d0.max(detection.d1 * inner))
    }
}

/// Multi-sensor Bernoulli update. See the module docs for the formulas.
///
/// Existence: `α = ∏ R_i`, then `(q⁰', α q¹')` renormalised by its maximum.
/// Spatial: weights multiplied by `∏ L_i/R_i` and renormalised; when the
/// combined factors underflow the linear domain, a log-domain pass
/// recovers them. If presence collapses to zero the particle set is
/// retained and flagged invalid.
pub fn update(
    pred: &BernoulliState,
    scans: &[Vec<f64>],
    sensors: &[SensorChannel],
) -> Result<BernoulliState> {
    if sensors.is_empty() || scans.len() != sensors.len() {
        return Err(Error::InvalidParameter {
            name: "scans",
            reason: format!(
                "need one scan per sensor: {} scans for {} sensors",
                scans.len(),
                sensors.len()
            ),
        });
    }
    let particles = pred.spatial.states();
    let weights = pred.spatial.weights();
    let n = particles.len();

    let mut alpha = 1.0f64;
    // Per-particle combined factor ∏ L_i/R_i, tracked in both linear and log
    // domain; the log track takes over if the linear one underflows.
    let mut factor = vec![1.0f64; n];
    let mut log_factor = vec![0.0f64; n];
    let mut alpha_zero = false;

    for (scan, sensor) in scans.iter().zip(sensors) {
        let d0 = sensor.detection.d0;
        let d1 = sensor.detection.d1;
        let m = scan.len();

        if m == 0 {
            // R = L = d⁰: existence scaled, spatial factors all equal (1),
            // unless d⁰ = 0, which certifies absence.
            if d0 == 0.0 {
                alpha_zero = true;
            } else {
                alpha *= d0;
            }
            continue;
        }

        // One pass per measurement: track max_j g·w (for R) and the
        // per-particle max_z ratio·g (for L).
        let mut r_inner = f64::NEG_INFINITY;
        let mut l_inner = vec![f64::NEG_INFINITY; n];
        for &z in scan {
            let ratio = sensor.clutter.removal_ratio(m, z)?;
            let mut best_gw = 0.0f64;
            for (j, (x, &w)) in particles.iter().zip(weights).enumerate() {
                let g = sensor.likelihood.eval(z, x);
                let rg = ratio * g;
                if rg > l_inner[j] {
                    l_inner[j] = rg;
                }
                let gw = g * w;
                if gw > best_gw {
                    best_gw = gw;
                }
            }
            r_inner = r_inner.max(ratio * best_gw);
        }
        let r = d0.max(d1 * r_inner);
        if r == 0.0 {
            alpha_zero = true;
            continue;
        }
        alpha *= r;
        for j in 0..n {
            let l = d0.max(d1 * l_inner[j]);
            factor[j] *= l / r;
            log_factor[j] += l.ln() - r.ln();
        }
    }
    if alpha_zero {
        alpha = 0.0;
    }

    // Existence update; the larger branch divides to exactly 1.
    let absent = pred.q0;
    let present = alpha * pred.q1;
    let denom = absent.max(present);
    if denom == 0.0 {
        return Err(Error::DegenerateNormalizer);
    }
    let q0_post = absent / denom;
    let q1_post = present / denom;

    if q1_post == 0.0 || !pred.spatial_valid {
        return BernoulliState::with_validity(q0_post, q1_post, pred.spatial.clone(), false);
    }

    let new_weights: Vec<f64> = weights.iter().zip(&factor).map(|(&w, &f)| w * f).collect();
    let max_linear = new_weights.iter().fold(0.0f64, |a, &w| a.max(w));
    let spatial = if max_linear > 1e-300 {
        ParticleSet::new(particles.to_vec(), new_weights)?
    } else {
        // Log-domain fallback: renormalise by the max log-weight.
        let lw: Vec<f64> = weights
            .iter()
            .zip(&log_factor)
            .map(|(&w, &lf)| w.ln() + lf)
            .collect();
        let max_lw = lw.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        if max_lw == f64::NEG_INFINITY {
            return Err(Error::FilterDivergence);
        }
        ParticleSet::new(
            particles.to_vec(),
            lw.iter().map(|&v| (v - max_lw).exp()).collect(),
        )?
    };
    BernoulliState::with_validity(q0_post, q1_post, spatial, true)
}
