//! Multistatic Doppler tracking scenario: constant-velocity dynamics,
//! bistatic Doppler-shift measurements, a spatially varying true detection
//! probability, and synthetic scan generation.
//!
//! One transmitter illuminates the scene; each receiver measures the
//! bistatic Doppler shift of the target echo,
//!
//! ```text
//! h_i(x) = −ṗᵀ [ (p−r_i)/‖p−r_i‖ + (p−t)/‖p−t‖ ] · fc/c
//! ```
//!
//! with `p`/`ṗ` the target position/velocity, `t` the transmitter and
//! `r_i` the i-th receiver. The simulator detects the target with
//! probability `exp(−(d/β)⁴)` at range `d` from the receiver; the filter
//! side never sees `β` or that probability, only the detection-possibility
//! interval, which is enforced by keeping the true-detection parameters out
//! of [`SensorChannel`].

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, Uniform};

use crate::bernoulli::{ClutterModel, DetectionPossibility, MeasurementPossibility, SensorChannel};
use crate::error::{Error, Result};
use crate::possibility::gauss_eval_1d;
use crate::smc::RngStream;

/// Planar constant-velocity target state, ordered `[x, ẋ, y, ẏ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetState {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
}

impl TargetState {
    pub fn new(x: f64, vx: f64, y: f64, vy: f64) -> Result<Self> {
        if ![x, vx, y, vy].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "target_state",
                reason: "components must be finite".into(),
            });
        }
        Ok(Self { x, vx, y, vy })
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: v.len(),
            });
        }
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_column_slice(&[self.x, self.vx, self.y, self.vy])
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.vx, self.vy)
    }
}

/// Transmitter/receiver layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    transmitter: Vector2<f64>,
    receivers: Vec<Vector2<f64>>,
}

impl Geometry {
    pub fn new(transmitter: Vector2<f64>, receivers: Vec<Vector2<f64>>) -> Result<Self> {
        if receivers.is_empty() {
            return Err(Error::InvalidParameter {
                name: "receivers",
                reason: "need at least one receiver".into(),
            });
        }
        Ok(Self {
            transmitter,
            receivers,
        })
    }

    pub fn transmitter(&self) -> Vector2<f64> {
        self.transmitter
    }

    pub fn receivers(&self) -> &[Vector2<f64>] {
        &self.receivers
    }

    pub fn num_sensors(&self) -> usize {
        self.receivers.len()
    }
}

/// Radar-level constants shared by every sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarParams {
    /// Carrier frequency (Hz).
    pub fc: f64,
    /// Propagation speed (m/s).
    pub c: f64,
    /// Maximum Doppler magnitude (Hz); the measurement space is `[−f0, f0]`.
    pub f0: f64,
    /// Sampling interval (s).
    pub t: f64,
    /// Process-noise intensity.
    pub q: f64,
}

impl RadarParams {
    pub fn new(fc: f64, c: f64, f0: f64, t: f64, q: f64) -> Result<Self> {
        for (name, v) in [("fc", fc), ("c", c), ("f0", f0), ("T", t), ("q", q)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self { fc, c, f0, t, q })
    }
}

/// Per-sensor parameters. `beta_true` scales the simulator's detection
/// probability and is never read by the filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorParams {
    /// Doppler possibility spread (Hz).
    pub sigma: f64,
    /// Mean clutter count per scan.
    pub lambda: f64,
    /// Filter-side detection knowledge.
    pub det: DetectionPossibility,
    /// True-detection range scale (m), simulation side only.
    pub beta_true: f64,
}

impl SensorParams {
    pub fn new(sigma: f64, lambda: f64, det: DetectionPossibility, beta_true: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be positive, got {sigma}"),
            });
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be non-negative, got {lambda}"),
            });
        }
        if !(beta_true.is_finite() && beta_true > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta_true",
                reason: format!("must be positive, got {beta_true}"),
            });
        }
        Ok(Self {
            sigma,
            lambda,
            det,
            beta_true,
        })
    }
}

/// One scan per sensor; each scan is a finite set of Doppler shifts.
pub type ScanSet = Vec<Vec<f64>>;

/// Constant-velocity transition and process-noise matrices,
///
/// ```text
/// F = I₂ ⊗ [[1, T], [0, 1]],   Q = I₂ ⊗ q·[[T³/3, T²/2], [T²/2, T]]
/// ```
pub fn cv_matrices(t: f64, q: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(t.is_finite() && t > 0.0) || !(q.is_finite() && q > 0.0) {
        return Err(Error::InvalidParameter {
            name: "cv_matrices",
            reason: format!("T and q must be positive, got T={t}, q={q}"),
        });
    }
    let eye = Matrix2::<f64>::identity();
    let f_block = Matrix2::new(1.0, t, 0.0, 1.0);
    let q_block = Matrix2::new(t * t * t / 3.0, t * t / 2.0, t * t / 2.0, t) * q;
    let f = eye.kronecker(&f_block);
    let q_cov = eye.kronecker(&q_block);
    Ok((
        DMatrix::from_iterator(4, 4, f.iter().copied()),
        DMatrix::from_iterator(4, 4, q_cov.iter().copied()),
    ))
}

fn doppler_from_components(
    p: Vector2<f64>,
    v: Vector2<f64>,
    receiver: Vector2<f64>,
    transmitter: Vector2<f64>,
    fc: f64,
    c: f64,
) -> Result<f64> {
    let to_rx = p - receiver;
    let to_tx = p - transmitter;
    let (nr, nt) = (to_rx.norm(), to_tx.norm());
    if nr == 0.0 || nt == 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok(-v.dot(&(to_rx / nr + to_tx / nt)) * fc / c)
}

/// True bistatic Doppler shift seen by receiver `i`.
pub fn doppler_h(
    x: &TargetState,
    geometry: &Geometry,
    receiver: usize,
    fc: f64,
    c: f64,
) -> Result<f64> {
    let r = *geometry
        .receivers
        .get(receiver)
        .ok_or(Error::InvalidParameter {
            name: "receiver",
            reason: format!(
                "index {receiver} out of range for {} receivers",
                geometry.receivers.len()
            ),
        })?;
    doppler_from_components(x.position(), x.velocity(), r, geometry.transmitter, fc, c)
}

/// Measurement possibility of one Doppler sensor,
/// `g(z|x) = exp(−(z − h(x))²/(2σ²))`.
///
/// As a [`MeasurementPossibility`] it returns 0 for states with undefined
/// Doppler shift (particle sitting exactly on the transmitter or receiver).
#[derive(Clone, Debug)]
pub struct DopplerSensor {
    pub transmitter: Vector2<f64>,
    pub receiver: Vector2<f64>,
    pub fc: f64,
    pub c: f64,
    pub sigma: f64,
    pub f0: f64,
}

impl DopplerSensor {
    pub fn shift(&self, x: &TargetState) -> Result<f64> {
        doppler_from_components(
            x.position(),
            x.velocity(),
            self.receiver,
            self.transmitter,
            self.fc,
            self.c,
        )
    }
}

impl MeasurementPossibility for DopplerSensor {
    fn eval(&self, z: f64, x: &DVector<f64>) -> f64 {
        let p = Vector2::new(x[0], x[2]);
        let v = Vector2::new(x[1], x[3]);
        match doppler_from_components(p, v, self.receiver, self.transmitter, self.fc, self.c) {
            Ok(h) => gauss_eval_1d(z, h, self.sigma * self.sigma),
            Err(_) => 0.0,
        }
    }
}

/// Doppler measurement possibility with an explicit measurement-space
/// check: `z` must lie in `[−f0, f0]`.
pub fn doppler_likelihood(z: f64, x: &TargetState, sensor: &DopplerSensor) -> Result<f64> {
    if !z.is_finite() || z.abs() > sensor.f0 {
        return Err(Error::MeasurementOutOfRange {
            value: z,
            lo: -sensor.f0,
            hi: sensor.f0,
        });
    }
    let h = sensor.shift(x)?;
    Ok(gauss_eval_1d(z, h, sensor.sigma * sensor.sigma))
}

/// Simulator detection probability at range `d`: `exp(−(d/β)⁴)`. This is
/// ground truth only; the filter works from the `(d⁰, d¹)` interval.
pub fn true_detection_prob(d: f64, beta: f64) -> f64 {
    (-(d / beta).powi(4)).exp()
}

/// Everything the update step needs for sensor `i` of the scenario.
pub fn sensor_channel(
    geometry: &Geometry,
    radar: &RadarParams,
    receiver: usize,
    params: &SensorParams,
) -> Result<SensorChannel> {
    if receiver >= geometry.receivers.len() {
        return Err(Error::InvalidParameter {
            name: "receiver",
            reason: format!(
                "index {receiver} out of range for {} receivers",
                geometry.receivers.len()
            ),
        });
    }
    Ok(SensorChannel {
        detection: params.det,
        clutter: ClutterModel::poisson_uniform(params.lambda, -radar.f0, radar.f0)?,
        likelihood: Box::new(DopplerSensor {
            transmitter: geometry.transmitter,
            receiver: geometry.receivers[receiver],
            fc: radar.fc,
            c: radar.c,
            sigma: params.sigma,
            f0: radar.f0,
        }),
    })
}

/// Simulate `steps` states of the constant-velocity model starting from
/// `x1` (which is the first element of the returned trajectory). With
/// `noisy`, zero-mean Gaussian process noise with covariance `q` is added
/// at each transition.
pub fn simulate_truth(
    x1: &TargetState,
    steps: usize,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
    noisy: bool,
    rng: &mut RngStream,
) -> Result<Vec<TargetState>> {
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "need at least one step".into(),
        });
    }
    let lower = if noisy {
        Some(
            Cholesky::new(q.clone())
                .ok_or(Error::NonSpdCovariance)?
                .unpack(),
        )
    } else {
        None
    };
    let mut traj = Vec::with_capacity(steps);
    traj.push(*x1);
    let mut x = x1.to_vector();
    for _ in 1..steps {
        x = f * &x;
        if let Some(l) = &lower {
            let eps = DVector::from_fn(4, |_, _| rng.sample(StandardNormal));
            x += l * eps;
        }
        traj.push(TargetState::from_vector(&x)?);
    }
    Ok(traj)
}

/// Generate one scan per sensor for a true target state.
///
/// Per sensor: the target is detected with probability
/// `exp(−(‖p−r_i‖/β)⁴)`; a detection contributes `h_i(x)` plus Gaussian
/// noise of spread `σ_i`, rejection-resampled into `[−f0, f0]`; a
/// Poisson(`λ_i`) number of clutter points is drawn uniformly on the same
/// interval. Detection coin flips and measurement noise come from
/// `det_rng`, clutter from `clutter_rng`, so the two variance sources stay
/// independent under a fixed seed.
pub fn generate_scan(
    x_true: &TargetState,
    geometry: &Geometry,
    radar: &RadarParams,
    sensors: &[SensorParams],
    det_rng: &mut RngStream,
    clutter_rng: &mut RngStream,
) -> Result<ScanSet> {
    if sensors.len() != geometry.receivers.len() {
        return Err(Error::InvalidParameter {
            name: "sensors",
            reason: format!(
                "{} sensor parameter sets for {} receivers",
                sensors.len(),
                geometry.receivers.len()
            ),
        });
    }
    let uniform = Uniform::new_inclusive(-radar.f0, radar.f0);
    let mut scans = Vec::with_capacity(sensors.len());
    for (i, sensor) in sensors.iter().enumerate() {
        let mut scan = Vec::new();
        let range = (x_true.position() - geometry.receivers[i]).norm();
        let pd = true_detection_prob(range, sensor.beta_true);
        if det_rng.gen::<f64>() < pd {
            let h = doppler_h(x_true, geometry, i, radar.fc, radar.c)?;
            let mut z = h + sensor.sigma * det_rng.sample::<f64, _>(StandardNormal);
            let mut attempts = 0;
            while z.abs() > radar.f0 {
                attempts += 1;
                if attempts > 10_000 {
                    // Pathological σ relative to f0; keep the draw legal.
                    z = z.clamp(-radar.f0, radar.f0);
                    break;
                }
                z = h + sensor.sigma * det_rng.sample::<f64, _>(StandardNormal);
            }
            scan.push(z);
        }
        if sensor.lambda > 0.0 {
            let poisson = Poisson::new(sensor.lambda).map_err(|_| Error::InvalidParameter {
                name: "lambda",
                reason: format!("invalid Poisson rate {}", sensor.lambda),
            })?;
            let count = poisson.sample(clutter_rng) as usize;
            for _ in 0..count {
                scan.push(uniform.sample(clutter_rng));
            }
        }
        scans.push(scan);
    }
    Ok(scans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cv_matrices_paper_values() {
        let (f, q) = cv_matrices(2.0, 0.1).unwrap();
        let expected_f = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 2.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 2.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        );
        assert_eq!(f, expected_f);
        assert!((q[(0, 0)] - 0.8 / 3.0).abs() < 1e-15);
        assert!((q[(0, 1)] - 0.2).abs() < 1e-15);
        assert!((q[(1, 0)] - 0.2).abs() < 1e-15);
        assert!((q[(1, 1)] - 0.2).abs() < 1e-15);
        assert_eq!(q[(2, 2)], q[(0, 0)]);
        assert_eq!(q[(0, 2)], 0.0);
        assert_eq!(q[(1, 3)], 0.0);
    }

    #[test]
    fn cv_matrices_small_t_limit() {
        let (f, q) = cv_matrices(1e-12, 0.1).unwrap();
        assert!((&f - DMatrix::identity(4, 4)).amax() < 1e-11);
        assert!(q.amax() < 1e-12);
    }

    #[test]
    fn doppler_h_baseline_midpoint_is_zero() {
        let geom =
            Geometry::new(Vector2::new(0.0, 0.0), vec![Vector2::new(10_000.0, 0.0)]).unwrap();
        let x = TargetState::new(5000.0, 50.0, 0.0, 0.0).unwrap();
        let h = doppler_h(&x, &geom, 0, 900e6, 3e8).unwrap();
        assert!(h.abs() < 1e-12, "{h}");
    }

    #[test]
    fn doppler_h_collocated_example() {
        // fc/c = 3 Hz per (m/s); both unit vectors equal (1,0).
        let geom = Geometry::new(Vector2::new(0.0, 0.0), vec![Vector2::new(0.0, 0.0)]).unwrap();
        let x = TargetState::new(1000.0, 100.0, 0.0, 0.0).unwrap();
        let h = doppler_h(&x, &geom, 0, 900e6, 3e8).unwrap();
        assert!((h - (-600.0)).abs() < 1e-9, "{h}");
    }

    #[test]
    fn doppler_h_perpendicular_velocity_is_zero() {
        let geom = Geometry::new(Vector2::new(0.0, 0.0), vec![Vector2::new(2000.0, 0.0)]).unwrap();
        let x = TargetState::new(500.0, 0.0, 0.0, 77.0).unwrap();
        let h = doppler_h(&x, &geom, 0, 900e6, 2.99792458e8).unwrap();
        assert!(h.abs() < 1e-12, "{h}");
    }

    #[test]
    fn doppler_h_zero_range_is_an_error() {
        let geom = Geometry::new(Vector2::new(0.0, 0.0), vec![Vector2::new(2000.0, 0.0)]).unwrap();
        let on_tx = TargetState::new(0.0, 10.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            doppler_h(&on_tx, &geom, 0, 900e6, 3e8),
            Err(Error::DegenerateGeometry)
        ));
        let on_rx = TargetState::new(2000.0, 10.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            doppler_h(&on_rx, &geom, 0, 900e6, 3e8),
            Err(Error::DegenerateGeometry)
        ));
    }

    #[test]
    fn doppler_likelihood_examples() {
        let sensor = DopplerSensor {
            transmitter: Vector2::new(0.0, 0.0),
            receiver: Vector2::new(-8000.0, 3000.0),
            fc: 900e6,
            c: 2.99792458e8,
            sigma: 2.5,
            f0: 200.0,
        };
        let x = TargetState::new(-4000.0, 30.0, 7000.0, -12.0).unwrap();
        let h = sensor.shift(&x).unwrap();
        assert!(h.abs() <= 200.0, "example shift should be in band: {h}");
        assert_eq!(doppler_likelihood(h, &x, &sensor).unwrap(), 1.0);
        let v = doppler_likelihood(h + 2.5, &x, &sensor).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        let v = doppler_likelihood(h + 7.5, &x, &sensor).unwrap();
        assert!((v - (-4.5f64).exp()).abs() < 1e-12);
        assert!(matches!(
            doppler_likelihood(250.0, &x, &sensor),
            Err(Error::MeasurementOutOfRange { .. })
        ));
    }

    #[test]
    fn rigid_rotation_leaves_doppler_invariant() {
        let theta: f64 = 0.7;
        let rot = Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos());
        let t = Vector2::new(0.0, 0.0);
        let r = Vector2::new(-8000.0, 3000.0);
        let p = Vector2::new(-4000.0, 7000.0);
        let v = Vector2::new(30.0, -12.0);
        let x = TargetState::new(p.x, v.x, p.y, v.y).unwrap();
        let geom = Geometry::new(t, vec![r]).unwrap();
        let h = doppler_h(&x, &geom, 0, 900e6, 2.99792458e8).unwrap();

        let (tp, rp, pp, vp) = (rot * t, rot * r, rot * p, rot * v);
        let xp = TargetState::new(pp.x, vp.x, pp.y, vp.y).unwrap();
        let geom_p = Geometry::new(tp, vec![rp]).unwrap();
        let hp = doppler_h(&xp, &geom_p, 0, 900e6, 2.99792458e8).unwrap();
        assert!((h - hp).abs() <= 1e-9 * h.abs().max(1.0), "{h} vs {hp}");
    }

    #[test]
    fn true_detection_prob_values() {
        assert_eq!(true_detection_prob(0.0, 12_000.0), 1.0);
        assert!((true_detection_prob(12_000.0, 12_000.0) - (-1.0f64).exp()).abs() < 1e-15);
        let p = true_detection_prob(8320.0, 12_000.0);
        assert!((p - 0.7937).abs() < 1e-4, "{p}");
        assert!(true_detection_prob(5000.0, 12_000.0) > p);
    }

    #[test]
    fn simulate_truth_noiseless_step() {
        let (f, q) = cv_matrices(2.0, 0.1).unwrap();
        let x1 = TargetState::new(0.0, 30.0, 0.0, -12.0).unwrap();
        let mut rng = RngStream::new(0);
        let traj = simulate_truth(&x1, 2, &f, &q, false, &mut rng).unwrap();
        assert_eq!(traj[0], x1);
        assert_eq!(traj[1], TargetState::new(60.0, 30.0, -24.0, -12.0).unwrap());
    }

    #[test]
    fn simulate_truth_zero_velocity_is_constant() {
        let (f, q) = cv_matrices(2.0, 0.1).unwrap();
        let x1 = TargetState::new(4.0, 0.0, -7.0, 0.0).unwrap();
        let mut rng = RngStream::new(0);
        let traj = simulate_truth(&x1, 10, &f, &q, false, &mut rng).unwrap();
        assert!(traj.iter().all(|s| *s == x1));
    }

    #[test]
    fn simulate_truth_noisy_is_deterministic_per_seed() {
        let (f, q) = cv_matrices(2.0, 0.1).unwrap();
        let x1 = TargetState::new(-4000.0, 30.0, 7000.0, -12.0).unwrap();
        let a = simulate_truth(&x1, 30, &f, &q, true, &mut RngStream::new(9)).unwrap();
        let b = simulate_truth(&x1, 30, &f, &q, true, &mut RngStream::new(9)).unwrap();
        let c = simulate_truth(&x1, 30, &f, &q, true, &mut RngStream::new(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a[5], a[0]);
    }

    fn test_geometry() -> Geometry {
        Geometry::new(
            Vector2::new(0.0, 0.0),
            vec![Vector2::new(-8000.0, 3000.0), Vector2::new(9000.0, 9000.0)],
        )
        .unwrap()
    }

    fn test_radar() -> RadarParams {
        RadarParams::new(900e6, 2.99792458e8, 200.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn generate_scan_degenerate_noise_recovers_shift() {
        let geom = test_geometry();
        let radar = test_radar();
        let det = DetectionPossibility::new(0.0, 1.0).unwrap();
        // Huge β forces P_d ≈ 1; tiny σ pins the measurement at h_i.
        let sensors = vec![SensorParams::new(1e-9, 0.0, det, 1e12).unwrap(); 2];
        let x = TargetState::new(-4000.0, 30.0, 7000.0, -12.0).unwrap();
        let mut det_rng = RngStream::new(1).substream(2);
        let mut clutter_rng = RngStream::new(1).substream(1);
        let scans =
            generate_scan(&x, &geom, &radar, &sensors, &mut det_rng, &mut clutter_rng).unwrap();
        for (i, scan) in scans.iter().enumerate() {
            assert_eq!(scan.len(), 1);
            let h = doppler_h(&x, &geom, i, radar.fc, radar.c).unwrap();
            assert!((scan[0] - h).abs() < 1e-6, "{} vs {h}", scan[0]);
        }
    }

    #[test]
    fn generate_scan_undetectable_and_clutter_free_is_empty() {
        let geom = test_geometry();
        let radar = test_radar();
        let det = DetectionPossibility::new(1.0, 1.0).unwrap();
        // Tiny β forces P_d ≈ 0 at any nonzero range.
        let sensors = vec![SensorParams::new(2.5, 0.0, det, 1e-6).unwrap(); 2];
        let x = TargetState::new(-4000.0, 30.0, 7000.0, -12.0).unwrap();
        let mut det_rng = RngStream::new(3).substream(2);
        let mut clutter_rng = RngStream::new(3).substream(1);
        let scans =
            generate_scan(&x, &geom, &radar, &sensors, &mut det_rng, &mut clutter_rng).unwrap();
        assert!(scans.iter().all(Vec::is_empty));
    }

    #[test]
    fn generate_scan_clutter_count_matches_poisson_mean() {
        let geom = Geometry::new(Vector2::new(0.0, 0.0), vec![Vector2::new(5000.0, 0.0)]).unwrap();
        let radar = test_radar();
        let det = DetectionPossibility::new(1.0, 1.0).unwrap();
        let sensors = vec![SensorParams::new(2.5, 0.5, det, 1e-6).unwrap()];
        let x = TargetState::new(-4000.0, 30.0, 7000.0, -12.0).unwrap();
        let mut det_rng = RngStream::new(5).substream(2);
        let mut clutter_rng = RngStream::new(5).substream(1);
        let trials = 100_000usize;
        let mut total = 0usize;
        for _ in 0..trials {
            let scans =
                generate_scan(&x, &geom, &radar, &sensors, &mut det_rng, &mut clutter_rng).unwrap();
            total += scans[0].len();
        }
        let mean = total as f64 / trials as f64;
        let tol = 3.0 * (0.5f64 / trials as f64).sqrt();
        assert!((mean - 0.5).abs() < tol, "mean {mean}, tol {tol}");
    }

    #[test]
    fn generated_measurements_stay_in_band() {
        let geom = test_geometry();
        // σ comparable to f0 so rejection resampling actually engages.
        let radar = RadarParams::new(900e6, 2.99792458e8, 200.0, 2.0, 0.1).unwrap();
        let det = DetectionPossibility::new(0.0, 1.0).unwrap();
        let sensors = vec![SensorParams::new(150.0, 2.0, det, 1e12).unwrap(); 2];
        let x = TargetState::new(-4000.0, 160.0, 7000.0, -120.0).unwrap();
        let mut det_rng = RngStream::new(7).substream(2);
        let mut clutter_rng = RngStream::new(7).substream(1);
        for _ in 0..2000 {
            let scans =
                generate_scan(&x, &geom, &radar, &sensors, &mut det_rng, &mut clutter_rng).unwrap();
            for scan in &scans {
                assert!(scan.iter().all(|z| z.abs() <= radar.f0));
            }
        }
    }

    #[test]
    fn detection_rate_matches_formula_at_fixed_range() {
        let beta = 12_000.0;
        let range = 12_000.0;
        let geom =
            Geometry::new(Vector2::new(50_000.0, 0.0), vec![Vector2::new(0.0, 0.0)]).unwrap();
        let radar = test_radar();
        let det = DetectionPossibility::new(0.4, 1.0).unwrap();
        let sensors = vec![SensorParams::new(2.5, 0.0, det, beta).unwrap()];
        let x = TargetState::new(range, 30.0, 0.0, -12.0).unwrap();
        let mut det_rng = RngStream::new(11).substream(2);
        let mut clutter_rng = RngStream::new(11).substream(1);
        let trials = 10_000usize;
        let mut hits = 0usize;
        for _ in 0..trials {
            let scans =
                generate_scan(&x, &geom, &radar, &sensors, &mut det_rng, &mut clutter_rng).unwrap();
            hits += scans[0].len();
        }
        let p = true_detection_prob(range, beta);
        let rate = hits as f64 / trials as f64;
        let tol = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        assert!((rate - p).abs() < tol, "rate {rate}, p {p}, tol {tol}");
    }

    proptest! {
        /// Q from cv_matrices is SPD for any positive (T, q).
        #[test]
        fn cv_q_is_spd(t in 1e-3..50.0f64, q in 1e-6..10.0f64) {
            let (_, qc) = cv_matrices(t, q).unwrap();
            prop_assert!(Cholesky::new(qc).is_some());
        }

        /// Doppler shift is invariant under global rigid rotations.
        #[test]
        fn doppler_rotation_invariance(theta in 0.0..std::f64::consts::TAU) {
            let rot = Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos());
            let t = Vector2::new(1000.0, -2000.0);
            let r = Vector2::new(-8000.0, 3000.0);
            let p = Vector2::new(-4000.0, 7000.0);
            let v = Vector2::new(30.0, -12.0);
            let geom = Geometry::new(t, vec![r]).unwrap();
            let x = TargetState::new(p.x, v.x, p.y, v.y).unwrap();
            let h = doppler_h(&x, &geom, 0, 900e6, 2.99792458e8).unwrap();
            let (tp, rp, pp, vp) = (rot * t, rot * r, rot * p, rot * v);
            let geom_p = Geometry::new(tp, vec![rp]).unwrap();
            let xp = TargetState::new(pp.x, vp.x, pp.y, vp.y).unwrap();
            let hp = doppler_h(&xp, &geom_p, 0, 900e6, 2.99792458e8).unwrap();
            prop_assert!((h - hp).abs() <= 1e-9 * h.abs().max(1.0));
        }
    }
}
