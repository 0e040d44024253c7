//! Sequential Monte Carlo machinery for spatial possibility functions.
//!
//! Particles here are *support points* of a possibility function rather than
//! probability mass: each particle carries the possibility value at its
//! state, normalised so the maximum weight is exactly 1. The set behaves
//! like an adaptive grid — states are drawn from induced densities to place
//! support where it matters, and weights are function values combined with
//! `max` instead of sums.
//!
//! Prediction offers two sup approximations. `Ancestor` keeps each
//! particle's weight when the proposal equals the transition possibility
//! (the possibility analogue of the bootstrap filter, `O(N)`); `Exact`
//! evaluates the sup over every ancestor (`O(N²)`), which is what grid
//! oracles and consistency tests pin down.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::possibility::GaussianPossibility;

/// Deterministic random stream: a counter-based generator addressed by
/// `(seed, stream)`. Identical seeds yield identical sample sequences, and
/// substreams derived from the same seed are independent, which is what
/// keeps Monte Carlo runs reproducible at any parallelism level.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream derived from the same seed. Drawing from one
    /// substream does not affect any other.
    pub fn substream(&self, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Self {
            seed: self.seed,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// How the sup over ancestors is approximated during prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupMode {
    /// Each particle keeps its ancestor's weight: the proposal possibility
    /// cancels against the transition possibility. `O(N)`.
    Ancestor,
    /// Full `max_i ρ(x|x'_i)·w'_i` over every ancestor. `O(N²)`.
    Exact,
}

/// Knobs of the particle representation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmcControls {
    /// Particle budget per step.
    pub particles: usize,
    /// Fraction of the budget drawn from the birth model during prediction.
    pub birth_fraction: f64,
    /// Resample when `N_eff < resample_threshold · N`.
    pub resample_threshold: f64,
    /// Sup approximation used by prediction.
    pub sup_mode: SupMode,
}

/// Weighted support points of a spatial possibility function.
///
/// Invariants: at least one particle, all states share one dimension,
/// weights lie in `[0, 1]` with the maximum equal to 1 (enforced by
/// renormalising on construction).
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    states: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl ParticleSet {
    pub fn new(states: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyParticleSet);
        }
        if states.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: weights.len(),
            });
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: states
                    .iter()
                    .map(|s| s.len())
                    .find(|&l| l != dim)
                    .unwrap_or(dim),
            });
        }
        let mut max = 0.0f64;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights);
            }
            max = max.max(w);
        }
        if max <= 0.0 {
            return Err(Error::InvalidWeights);
        }
        let weights = weights.into_iter().map(|w| w / max).collect();
        Ok(Self { states, weights })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().fold(0.0f64, |a, &w| a.max(w))
    }

    /// Weighted mean `Σ wⱼ xⱼ / Σ wⱼ`.
    pub fn point_estimate(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        let mut wsum = 0.0;
        for (x, &w) in self.states.iter().zip(&self.weights) {
            acc.axpy(w, x, 1.0);
            wsum += w;
        }
        acc / wsum
    }

    /// Effective sample size `(Σw)² / Σw²`.
    pub fn effective_size(&self) -> f64 {
        let sum: f64 = self.weights.iter().sum();
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        sum * sum / sq
    }
}

/// Linear-Gaussian transition possibility `ρ(x | x') = N̄(x; F x', Q)`.
#[derive(Clone, Debug)]
pub struct GaussianTransition {
    f: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lower: DMatrix<f64>,
}

impl GaussianTransition {
    pub fn new(f: DMatrix<f64>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let dim = f.nrows();
        if f.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.ncols(),
            });
        }
        // Reuse the Gaussian validation (symmetry + SPD via Cholesky).
        let probe = GaussianPossibility::new(DVector::zeros(dim), noise_cov.clone())?;
        let lower = probe.cholesky_lower();
        let chol = Cholesky::new(noise_cov.clone()).ok_or(Error::NonSpdCovariance)?;
        Ok(Self {
            f,
            noise_cov,
            chol,
            lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn dynamics(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn noise_covariance(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// `ρ(x | x_prev)`.
    pub fn eval(&self, x: &DVector<f64>, x_prev: &DVector<f64>) -> f64 {
        let mut ws = TransitionWorkspace::new(self.dim());
        (-0.5 * self.sq_mahalanobis(x, x_prev, &mut ws)).exp()
    }

    /// Draw from the induced density `N(F x_prev, Q)`.
    pub fn sample<R: Rng + ?Sized>(&self, x_prev: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.f * x_prev + &self.lower * eps
    }

    /// `(x − F x_prev)ᵀ Q⁻¹ (x − F x_prev)` without allocation; `ws` is
    /// scratch reused across the `O(N²)` exact-mode loops.
    #[inline]
    fn sq_mahalanobis(
        &self,
        x: &DVector<f64>,
        x_prev: &DVector<f64>,
        ws: &mut TransitionWorkspace,
    ) -> f64 {
        ws.residual.gemv(1.0, &self.f, x_prev, 0.0);
        for i in 0..x.len() {
            ws.residual[i] = x[i] - ws.residual[i];
        }
        ws.solved.copy_from(&ws.residual);
        self.chol.solve_mut(&mut ws.solved);
        ws.residual.dot(&ws.solved).max(0.0)
    }
}

struct TransitionWorkspace {
    residual: DVector<f64>,
    solved: DVector<f64>,
}

impl TransitionWorkspace {
    fn new(dim: usize) -> Self {
        Self {
            residual: DVector::zeros(dim),
            solved: DVector::zeros(dim),
        }
    }
}

/// Draw `n` support points from the induced density of a Gaussian
/// possibility; weights are the possibility values at the drawn states,
/// renormalised so the maximum is 1.
pub fn sample_from_possibility(
    pi: &GaussianPossibility,
    n: usize,
    rng: &mut RngStream,
) -> Result<ParticleSet> {
    if n == 0 {
        return Err(Error::EmptyParticleSet);
    }
    let lower = pi.cholesky_lower();
    let dim = pi.dim();
    let mut states = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut eps = DVector::zeros(dim);
    for _ in 0..n {
        for i in 0..dim {
            eps[i] = rng.sample::<f64, _>(StandardNormal);
        }
        let x = pi.mean() + &lower * &eps;
        weights.push(pi.eval_raw(&x));
        states.push(x);
    }
    ParticleSet::new(states, weights)
}

/// Draw one successor per particle from the induced density of the
/// transition, in particle order. Shared by [`propagate`] and the Bernoulli
/// prediction so that equal inputs consume the RNG identically.
pub(crate) fn draw_successors(
    states: &[DVector<f64>],
    rho: &GaussianTransition,
    rng: &mut RngStream,
) -> Vec<DVector<f64>> {
    states.iter().map(|x| rho.sample(x, rng)).collect()
}

/// Raw exact-mode sup values `s_j = max_i ρ(support_j | x'_i) · w'_i`, not
/// renormalised. The max runs in the log domain so only one `exp` per
/// support point is paid.
pub(crate) fn sup_values(
    support: &[DVector<f64>],
    prior: &ParticleSet,
    rho: &GaussianTransition,
) -> Vec<f64> {
    let ln_w: Vec<f64> = prior.weights().iter().map(|w| w.ln()).collect();
    let mut ws = TransitionWorkspace::new(rho.dim());
    support
        .iter()
        .map(|x| {
            let mut best = f64::NEG_INFINITY;
            for (x_prev, &lw) in prior.states().iter().zip(&ln_w) {
                let s = lw - 0.5 * rho.sq_mahalanobis(x, x_prev, &mut ws);
                if s > best {
                    best = s;
                }
            }
            best.exp()
        })
        .collect()
}

/// One prediction step of the particle representation:
///
/// ```text
/// π_pred(x) = sup_x' ρ(x | x') π(x')
/// ```
///
/// New states are drawn from the induced density of `ρ(·|x'_j)`; weights
/// follow the chosen [`SupMode`], then the maximum is renormalised to 1.
pub fn propagate(
    p: &ParticleSet,
    rho: &GaussianTransition,
    mode: SupMode,
    rng: &mut RngStream,
) -> Result<ParticleSet> {
    let states = draw_successors(p.states(), rho, rng);
    let weights = match mode {
        // Proposal possibility equals ρ(x_j|x'_j), so the correction
        // ρ/ρ* cancels and the ancestor weight carries over.
        SupMode::Ancestor => p.weights().to_vec(),
        SupMode::Exact => sup_values(&states, p, rho),
    };
    ParticleSet::new(states, weights)
}

/// Exact-mode prediction evaluated on a caller-supplied support (e.g. a
/// frozen grid): `w_j = max_i ρ(support_j | x'_i) · w'_i`, renormalised.
pub fn sup_reweight(
    support: &[DVector<f64>],
    prior: &ParticleSet,
    rho: &GaussianTransition,
) -> Result<ParticleSet> {
    let weights = sup_values(support, prior, rho);
    ParticleSet::new(support.to_vec(), weights)
}

/// Multiply weights by a likelihood possibility and renormalise:
///
/// ```text
/// w_j ← g(x_j)·w_j / max_i g(x_i)·w_i
/// ```
pub fn bayes_style_update<G>(p: &ParticleSet, g: G) -> Result<ParticleSet>
where
    G: Fn(&DVector<f64>) -> f64,
{
    let weights: Vec<f64> = p
        .states()
        .iter()
        .zip(p.weights())
        .map(|(x, &w)| g(x) * w)
        .collect();
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::FilterDivergence);
    }
    ParticleSet::new(p.states().to_vec(), weights)
}

/// Multinomial resampling: `N` draws with replacement proportional to the
/// weights (the induced PDF); output weights are all reset to 1.
pub fn resample(p: &ParticleSet, rng: &mut RngStream) -> Result<ParticleSet> {
    let dist = WeightedIndex::new(p.weights()).map_err(|_| Error::InvalidWeights)?;
    let states: Vec<DVector<f64>> = (0..p.len())
        .map(|_| p.states()[dist.sample(rng)].clone())
        .collect();
    let n = states.len();
    ParticleSet::new(states, vec![1.0; n])
}
