//! Possibility-function primitives.
//!
//! A possibility function `π : X → [0, 1]` describes uncertain knowledge the
//! same way a density does, except that the supremum of `π` is 1 instead of
//! its integral, and combination/marginalisation use `max`/`sup` instead of
//! sums and integrals. The value `π(x)` is read as "how possible is `x`",
//! with `sup π = 1` meaning "something is certainly possible".
//!
//! The two workhorses here are the Gaussian possibility (a Gaussian bell
//! without the normalising constant, so it peaks at exactly 1) and a
//! discrete possibility over counts (used for clutter cardinality). The
//! module also provides the transforms between bounded densities and
//! possibility functions: rescale by the supremum in one direction, and
//! renormalise by the integral in the other.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Threshold below which the stored tail of a discrete possibility is cut
/// off and the closed-form tail rule takes over.
const DISCRETE_TAIL_CUTOFF: f64 = 1e-9;

/// One-dimensional Gaussian possibility value.
///
/// ```text
/// N̄(x; μ, σ²) = exp(−(x − μ)² / (2σ²))
/// ```
///
/// Equals 1 at `x = μ`; there is no normalising constant.
#[inline]
pub fn gauss_eval_1d(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    (-0.5 * r * r / variance).exp()
}

/// Multivariate Gaussian possibility `N̄(x; μ, P) = exp(−½ (x−μ)ᵀ P⁻¹ (x−μ))`.
///
/// The covariance is validated as symmetric positive-definite at
/// construction (via its Cholesky factorisation, which is then reused for
/// every evaluation). The possibility equals exactly 1 at the mean.
#[derive(Clone, Debug)]
pub struct GaussianPossibility {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianPossibility {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != covariance.ncols() || covariance.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: covariance.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) || covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gaussian",
                reason: "mean and covariance must be finite".into(),
            });
        }
        if !is_symmetric(&covariance) {
            return Err(Error::NonSpdCovariance);
        }
        let chol = Cholesky::new(covariance.clone()).ok_or(Error::NonSpdCovariance)?;
        Ok(Self {
            mean,
            covariance,
            chol,
        })
    }

    /// 1-D convenience constructor.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, variance),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Evaluate the possibility at `x`.
    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(self.eval_raw(x))
    }

    /// Evaluation without the dimension check, for hot loops where the
    /// dimension is known to match.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.mean;
        let mut y = r.clone();
        self.chol.solve_mut(&mut y);
        // The quadratic form is non-negative for an SPD covariance; clamp
        // away the occasional -1e-20 from floating-point round-off so the
        // result never exceeds 1.
        let quad = r.dot(&y).max(0.0);
        (-0.5 * quad).exp()
    }

    /// Draw one sample from the induced density, i.e. the Gaussian with the
    /// same mean and covariance.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let l = self.chol.l();
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + l * eps
    }

    /// Lower Cholesky factor of the covariance, for batched sampling.
    pub(crate) fn cholesky_lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Closed-form rule for values beyond the stored range of a
/// [`DiscretePossibility`].
#[derive(Clone, Debug)]
enum Tail {
    /// Values beyond the stored range are impossible.
    Zero,
    /// Continue the Poisson PMF recurrence `c(n+1) = c(n)·λ/(n+1)`.
    PoissonRecurrence { lambda: f64 },
}

/// Possibility function over counts `n ∈ ℕ₀`.
///
/// Values for small `n` are stored explicitly; beyond the stored range a
/// closed-form tail rule applies. The maximum over all `n` is exactly 1.
#[derive(Clone, Debug)]
pub struct DiscretePossibility {
    values: Vec<f64>,
    tail: Tail,
}

impl DiscretePossibility {
    /// Build from explicit values; they are rescaled so the maximum is
    /// exactly 1, and counts beyond the stored range get possibility 0.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "at least one value is required".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "values must be finite and non-negative".into(),
            });
        }
        let max = values.iter().fold(0.0f64, |a, v| a.max(*v));
        if max <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "at least one value must be positive".into(),
            });
        }
        Ok(Self {
            values: values.iter().map(|v| v / max).collect(),
            tail: Tail::Zero,
        })
    }

    /// Poisson possibility: the Poisson PMF rescaled by its value at the
    /// mode `⌊λ⌋`, so that
    ///
    /// ```text
    /// c(n) = (λⁿ e^{−λ} / n!) / (λ^⌊λ⌋ e^{−λ} / ⌊λ⌋!),   max_n c(n) = c(⌊λ⌋) = 1.
    /// ```
    ///
    /// Values are generated by the PMF ratio recurrence outwards from the
    /// mode, which keeps `c(⌊λ⌋) = 1` exact and the neighbour ratio
    /// `c(n−1)/c(n) = n/λ` exact in floating point.
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("Poisson rate must be positive and finite, got {lambda}"),
            });
        }
        let mode = lambda.floor() as usize;
        let mut values = vec![0.0; mode + 1];
        values[mode] = 1.0;
        for n in (1..=mode).rev() {
            values[n - 1] = values[n] * (n as f64) / lambda;
        }
        // March upwards until the tail drops below the cutoff.
        let mut n = mode;
        let mut c = 1.0f64;
        loop {
            let next = c * lambda / ((n + 1) as f64);
            if next < DISCRETE_TAIL_CUTOFF {
                break;
            }
            values.push(next);
            c = next;
            n += 1;
        }
        Ok(Self {
            values,
            tail: Tail::PoissonRecurrence { lambda },
        })
    }

    /// Possibility of the count `n`.
    pub fn eval(&self, n: usize) -> f64 {
        if n < self.values.len() {
            return self.values[n];
        }
        match self.tail {
            Tail::Zero => 0.0,
            Tail::PoissonRecurrence { lambda } => {
                let mut c = *self.values.last().expect("non-empty by construction");
                for k in self.values.len()..=n {
                    c *= lambda / k as f64;
                }
                c
            }
        }
    }

    /// Neighbour ratio `c(n−1)/c(n)`, in closed form where one exists.
    ///
    /// For the Poisson possibility this is exactly `n/λ` for every `n ≥ 1`,
    /// which is what keeps clutter ratios stable even where the raw
    /// possibilities underflow.
    pub fn prev_ratio(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "ratio c(n-1)/c(n) needs n >= 1".into(),
            });
        }
        match self.tail {
            Tail::PoissonRecurrence { lambda } => Ok(n as f64 / lambda),
            Tail::Zero => {
                let denom = self.eval(n);
                if denom <= 0.0 {
                    return Err(Error::ZeroClutterPossibility);
                }
                Ok(self.eval(n - 1) / denom)
            }
        }
    }

    /// Number of explicitly stored values.
    pub fn stored_len(&self) -> usize {
        self.values.len()
    }
}

/// Poisson possibility with rate `lambda`; see
/// [`DiscretePossibility::poisson`].
pub fn poisson_possibility(lambda: f64) -> Result<DiscretePossibility> {
    DiscretePossibility::poisson(lambda)
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A bounded probability density: either a multivariate Gaussian in closed
/// form, or a generic 1-D evaluator with known supremum over a finite
/// support interval.
#[derive(Clone)]
pub enum BoundedPdf {
    Gaussian {
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    },
    Scalar {
        density: ScalarFn,
        sup: f64,
        support: (f64, f64),
    },
}

/// A possibility function produced by [`pdf_to_possibility`], or fed to
/// [`possibility_to_pdf`].
#[derive(Clone)]
pub enum PossibilityFn {
    Gaussian(GaussianPossibility),
    Scalar { eval: ScalarFn, support: (f64, f64) },
}

impl PossibilityFn {
    /// Evaluate a 1-D possibility function.
    pub fn eval_scalar(&self, x: f64) -> Result<f64> {
        match self {
            PossibilityFn::Gaussian(g) => {
                if g.dim() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: g.dim(),
                    });
                }
                Ok(gauss_eval_1d(x, g.mean()[0], g.covariance()[(0, 0)]))
            }
            PossibilityFn::Scalar { eval, .. } => Ok(eval(x)),
        }
    }
}

/// A probability density produced by [`possibility_to_pdf`].
#[derive(Clone)]
pub enum PdfFn {
    Gaussian {
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    },
    Scalar {
        density: ScalarFn,
        support: (f64, f64),
    },
}

impl PdfFn {
    /// Evaluate a 1-D density.
    pub fn eval_scalar(&self, x: f64) -> Result<f64> {
        match self {
            PdfFn::Gaussian { mean, covariance } => {
                if mean.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: mean.len(),
                    });
                }
                let var = covariance[(0, 0)];
                Ok(gauss_eval_1d(x, mean[0], var) / (var * std::f64::consts::TAU).sqrt())
            }
            PdfFn::Scalar { density, .. } => Ok(density(x)),
        }
    }
}

/// Convert a bounded density into a possibility function by rescaling with
/// its supremum:
///
/// ```text
/// π(x) = p(x) / sup p
/// ```
///
/// A Gaussian density maps to the Gaussian possibility with the same mean
/// and covariance (the normalising constant cancels).
pub fn pdf_to_possibility(p: &BoundedPdf) -> Result<PossibilityFn> {
    match p {
        BoundedPdf::Gaussian { mean, covariance } => Ok(PossibilityFn::Gaussian(
            GaussianPossibility::new(mean.clone(), covariance.clone())?,
        )),
        BoundedPdf::Scalar {
            density,
            sup,
            support,
        } => {
            if !sup.is_finite() || *sup <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "sup",
                    reason: format!("supremum must be positive and finite, got {sup}"),
                });
            }
            let density = density.clone();
            let sup = *sup;
            Ok(PossibilityFn::Scalar {
                eval: Arc::new(move |x| density(x) / sup),
                support: *support,
            })
        }
    }
}

/// Convert a possibility function into a probability density by
/// renormalising with its integral:
///
/// ```text
/// p(x) = π(x) / ∫ π
/// ```
///
/// Gaussian possibilities convert in closed form; non-Gaussian functions are
/// integrated with adaptive quadrature and are supported in 1-D only.
pub fn possibility_to_pdf(pi: &PossibilityFn) -> Result<PdfFn> {
    match pi {
        PossibilityFn::Gaussian(g) => Ok(PdfFn::Gaussian {
            mean: g.mean().clone(),
            covariance: g.covariance().clone(),
        }),
        PossibilityFn::Scalar { eval, support } => {
            let (a, b) = *support;
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidParameter {
                    name: "support",
                    reason: format!("support must be a finite interval, got [{a}, {b}]"),
                });
            }
            let integral = adaptive_simpson(eval.as_ref(), a, b, 1e-10)?;
            if !integral.is_finite() || integral <= 0.0 {
                return Err(Error::NotIntegrable);
            }
            let eval = eval.clone();
            Ok(PdfFn::Scalar {
                density: Arc::new(move |x| eval(x) / integral),
                support: (a, b),
            })
        }
    }
}

/// Adaptive Simpson quadrature over `[a, b]`.
fn adaptive_simpson(
    f: &(dyn Fn(f64) -> f64 + Send + Sync),
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &(dyn Fn(f64) -> f64 + Send + Sync),
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        if !(flm.is_finite() && frm.is_finite()) {
            return Err(Error::NotIntegrable);
        }
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 {
            return Err(Error::NotIntegrable);
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }

    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::NotIntegrable);
    }
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dvec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn gauss_is_one_at_mean() {
        let g =
            GaussianPossibility::new(dvec(&[1.0, -2.0]), DMatrix::identity(2, 2) * 3.0).unwrap();
        assert_eq!(g.eval(&dvec(&[1.0, -2.0])).unwrap(), 1.0);
    }

    #[test]
    fn gauss_one_dim_one_sigma() {
        // Direct evaluation of exp(-0.5 (x-μ)²/σ²) at x = μ + σ.
        let g = GaussianPossibility::scalar(0.0, 1.0).unwrap();
        let v = g.eval(&dvec(&[1.0])).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn gauss_two_dim_identity() {
        let g = GaussianPossibility::new(dvec(&[0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let v = g.eval(&dvec(&[3.0, 4.0])).unwrap();
        assert!((v - (-12.5f64).exp()).abs() < 1e-18, "got {v}");
    }

    #[test]
    fn gauss_rejects_non_spd() {
        let err = GaussianPossibility::new(dvec(&[0.0]), DMatrix::from_element(1, 1, -1.0));
        assert!(matches!(err, Err(Error::NonSpdCovariance)));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        let err = GaussianPossibility::new(dvec(&[0.0, 0.0]), asym);
        assert!(matches!(err, Err(Error::NonSpdCovariance)));
    }

    #[test]
    fn gauss_rejects_dimension_mismatch() {
        let g = GaussianPossibility::new(dvec(&[0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            g.eval(&dvec(&[1.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn gauss_never_exceeds_one() {
        let g = GaussianPossibility::new(
            dvec(&[1.0, 2.0, 3.0]),
            DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]),
        )
        .unwrap();
        for k in 0..50 {
            let x = dvec(&[1.0 + 0.1 * k as f64, 2.0 - 0.2 * k as f64, 3.0]);
            let v = g.eval(&x).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn poisson_mode_is_exactly_one() {
        for lambda in [0.5, 1.0, 4.2, 10.0] {
            let c = DiscretePossibility::poisson(lambda).unwrap();
            assert_eq!(c.eval(lambda.floor() as usize), 1.0, "lambda = {lambda}");
        }
    }

    #[test]
    fn poisson_small_rate_values() {
        // λ = 0.5: mode 0, c(1) = λ/1 = 0.5, c(2) = c(1)·λ/2 = 0.125.
        let c = DiscretePossibility::poisson(0.5).unwrap();
        assert_eq!(c.eval(0), 1.0);
        assert!((c.eval(1) - 0.5).abs() < 1e-15);
        assert!((c.eval(2) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn poisson_fractional_rate_neighbours() {
        // λ = 4.2: c(3)/c(4) = 4/4.2 and c(5) = 4.2/5 = 0.84.
        let c = DiscretePossibility::poisson(4.2).unwrap();
        assert!((c.eval(3) - 4.0 / 4.2).abs() < 1e-15);
        assert!((c.eval(5) - 0.84).abs() < 1e-15);
    }

    #[test]
    fn poisson_tail_continues_recurrence() {
        let c = DiscretePossibility::poisson(0.5).unwrap();
        let n = c.stored_len() + 3;
        // Independent route: log-domain PMF ratio against the mode.
        let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        let expected = (n as f64 * 0.5f64.ln() - ln_fact).exp();
        assert!(
            (c.eval(n) - expected).abs() < 1e-12 * expected.max(1e-300),
            "n = {n}: got {} expected {expected}",
            c.eval(n)
        );
    }

    #[test]
    fn poisson_rejects_bad_rate() {
        assert!(DiscretePossibility::poisson(0.0).is_err());
        assert!(DiscretePossibility::poisson(-1.0).is_err());
        assert!(DiscretePossibility::poisson(f64::NAN).is_err());
    }

    #[test]
    fn from_values_normalises_max_to_one() {
        let c = DiscretePossibility::from_values(vec![0.2, 0.8, 0.4]).unwrap();
        assert_eq!(c.eval(1), 1.0);
        assert!((c.eval(0) - 0.25).abs() < 1e-15);
        assert_eq!(c.eval(7), 0.0);
    }

    #[test]
    fn prev_ratio_closed_form() {
        let c = DiscretePossibility::poisson(0.5).unwrap();
        assert_eq!(c.prev_ratio(1).unwrap(), 2.0);
        assert_eq!(c.prev_ratio(2).unwrap(), 4.0);
        let c = DiscretePossibility::poisson(4.2).unwrap();
        assert!((c.prev_ratio(4).unwrap() - 4.0 / 4.2).abs() < 1e-15);
        // Closed form stays valid far beyond the stored range.
        assert_eq!(c.prev_ratio(1000).unwrap(), 1000.0 / 4.2);
    }

    #[test]
    fn pdf_to_possibility_uniform_becomes_one() {
        let p = BoundedPdf::Scalar {
            density: Arc::new(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }),
            sup: 1.0,
            support: (0.0, 1.0),
        };
        let pi = pdf_to_possibility(&p).unwrap();
        assert_eq!(pi.eval_scalar(0.3).unwrap(), 1.0);
        assert_eq!(pi.eval_scalar(0.9).unwrap(), 1.0);
    }

    #[test]
    fn pdf_to_possibility_triangular_peak() {
        // Triangular density on [0, 1] peaking at 0.5 with height 2; at the
        // point where the density is 1 the possibility is 0.5.
        let p = BoundedPdf::Scalar {
            density: Arc::new(|x: f64| {
                if (0.0..=0.5).contains(&x) {
                    4.0 * x
                } else if x <= 1.0 {
                    4.0 * (1.0 - x)
                } else {
                    0.0
                }
            }),
            sup: 2.0,
            support: (0.0, 1.0),
        };
        let pi = pdf_to_possibility(&p).unwrap();
        assert!((pi.eval_scalar(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pi.eval_scalar(0.5).unwrap(), 1.0);
    }

    #[test]
    fn pdf_to_possibility_rejects_bad_sup() {
        let p = BoundedPdf::Scalar {
            density: Arc::new(|_| 1.0),
            sup: 0.0,
            support: (0.0, 1.0),
        };
        assert!(pdf_to_possibility(&p).is_err());
    }

    #[test]
    fn possibility_to_pdf_constant_one() {
        let pi = PossibilityFn::Scalar {
            eval: Arc::new(|_| 1.0),
            support: (0.0, 2.0),
        };
        let p = possibility_to_pdf(&pi).unwrap();
        assert!((p.eval_scalar(1.3).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn possibility_to_pdf_tent() {
        // Tent of half-width 1 and peak 1 has unit area, so the density at
        // the peak is 1.
        let pi = PossibilityFn::Scalar {
            eval: Arc::new(|x: f64| (1.0 - x.abs()).max(0.0)),
            support: (-1.0, 1.0),
        };
        let p = possibility_to_pdf(&pi).unwrap();
        assert!((p.eval_scalar(0.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn possibility_to_pdf_gaussian_closed_form() {
        let g = GaussianPossibility::scalar(2.0, 4.0).unwrap();
        let p = possibility_to_pdf(&PossibilityFn::Gaussian(g)).unwrap();
        // Density of N(2, 4) at its mean: 1/sqrt(2π·4).
        let expected = 1.0 / (4.0 * std::f64::consts::TAU).sqrt();
        assert!((p.eval_scalar(2.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn gaussian_round_trip_preserves_moments() {
        let mean = dvec(&[1.0, -3.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let pi =
            PossibilityFn::Gaussian(GaussianPossibility::new(mean.clone(), cov.clone()).unwrap());
        let pdf = possibility_to_pdf(&pi).unwrap();
        let PdfFn::Gaussian {
            mean: m2,
            covariance: c2,
        } = pdf
        else {
            panic!("expected Gaussian to stay Gaussian");
        };
        let back = pdf_to_possibility(&BoundedPdf::Gaussian {
            mean: m2,
            covariance: c2,
        })
        .unwrap();
        let PossibilityFn::Gaussian(g) = back else {
            panic!("expected Gaussian to stay Gaussian");
        };
        assert!((g.mean() - &mean).abs().max() < 1e-10);
        assert!((g.covariance() - &cov).abs().max() < 1e-10);
    }

    proptest! {
        /// Rotating state, mean and covariance together leaves the value
        /// unchanged.
        #[test]
        fn gauss_eval_rotation_invariant(
            angle in 0.0..std::f64::consts::TAU,
            mx in -5.0..5.0f64,
            my in -5.0..5.0f64,
            dx in -5.0..5.0f64,
            dy in -5.0..5.0f64,
            a in 0.5..3.0f64,
            b in -0.8..0.8f64,
            c in 0.5..3.0f64,
        ) {
            let mean = dvec(&[mx, my]);
            let cov = DMatrix::from_row_slice(2, 2, &[a, b * (a * c).sqrt(), b * (a * c).sqrt(), c]);
            let x = dvec(&[mx + dx, my + dy]);
            let g = GaussianPossibility::new(mean.clone(), cov.clone()).unwrap();
            let v = g.eval(&x).unwrap();

            let (s, co) = angle.sin_cos();
            let rot = DMatrix::from_row_slice(2, 2, &[co, -s, s, co]);
            let gr = GaussianPossibility::new(&rot * &mean, &rot * cov * rot.transpose()).unwrap();
            let vr = gr.eval(&(&rot * &x)).unwrap();
            prop_assert!((v - vr).abs() < 1e-12, "v = {v}, rotated = {vr}");
        }

        /// The Poisson neighbour ratio c(n−1)/c(n) = n/λ holds across rates.
        #[test]
        fn poisson_ratio_property(lambda in 0.05..20.0f64, n in 1usize..30) {
            let c = DiscretePossibility::poisson(lambda).unwrap();
            let lhs = c.eval(n - 1);
            let rhs = c.eval(n) * (n as f64) / lambda;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs).max(1e-300));
        }

        /// Possibility values stay in [0, 1] and the stored maximum is 1.
        #[test]
        fn poisson_bounded_and_normalised(lambda in 0.05..20.0f64) {
            let c = DiscretePossibility::poisson(lambda).unwrap();
            let mut max = 0.0f64;
            for n in 0..c.stored_len() + 10 {
                let v = c.eval(n);
                prop_assert!((0.0..=1.0).contains(&v));
                max = max.max(v);
            }
            prop_assert_eq!(max, 1.0);
        }
    }
}
