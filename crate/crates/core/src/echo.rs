//! Range-compressed phase-history simulation and trajectory perturbation.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{sinc, C64};
use crate::error::{invalid, Error, Result};
use crate::geometry::{slant_range, Point, RadarParams, Scene, Trajectory};

/// The sinc envelope is evaluated out to this many lobes on either side of the peak.
pub const SINC_HALF_WIDTH_LOBES: f64 = 32.0;

/// A target delay must sit at least this many envelope lobes inside the gate.
pub const GATE_GUARD_LOBES: f64 = 2.0;

/// Default fast-time oversampling relative to the bandwidth.
pub const FAST_TIME_OVERSAMPLING: f64 = 1.2;

/// Range-compressed echoes, `[pulse × fast-time sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistory {
    pub data: Array2<C64>,
    pub fast_time_origin: f64,
    pub fast_time_spacing: f64,
    pub params: RadarParams,
}

impl PhaseHistory {
    pub fn zeros(params: &RadarParams, fast_time_origin: f64) -> Self {
        Self {
            data: Array2::zeros((params.pulse_count, params.fast_time_sample_count)),
            fast_time_origin,
            fast_time_spacing: params.fast_time_spacing,
            params: params.clone(),
        }
    }

    pub fn pulse_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.data.ncols()
    }

    /// Fast time of the last sample.
    pub fn fast_time_end(&self) -> f64 {
        self.fast_time_origin + (self.sample_count() - 1) as f64 * self.fast_time_spacing
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn energy(&self) -> f64 {
        crate::dsp::energy(&self.data)
    }

    fn check_gate(&self, delay: f64) -> Result<()> {
        let guard = GATE_GUARD_LOBES / self.params.bandwidth;
        let start = self.fast_time_origin + guard;
        let end = self.fast_time_end() - guard;
        if delay < start || delay > end {
            return Err(Error::OutsideRangeGate {
                delay_s: delay,
                start_s: start,
                end_s: end,
            });
        }
        Ok(())
    }
}

/// Fast-time origin that centers the gate on every APC–point delay in
/// `points` over all `trajectories`, or an error if the span does not fit.
pub fn fast_time_origin_covering(params: &RadarParams, trajectories: &[&Trajectory], points: &[Point]) -> Result<f64> {
    let c = params.propagation_speed;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for traj in trajectories {
        for apc in traj.positions() {
            for p in points {
                let d = 2.0 * slant_range(*apc, *p) / c;
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
    }
    let guard = GATE_GUARD_LOBES / params.bandwidth;
    let window = (params.fast_time_sample_count - 1) as f64 * params.fast_time_spacing;
    if hi - lo + 2.0 * guard > window {
        return Err(invalid(format!(
            "fast-time window of {:.3} m cannot cover the {:.3} m range span; increase fast_time_sample_count",
            window * c / 2.0,
            (hi - lo + 2.0 * guard) * c / 2.0
        )));
    }
    Ok(0.5 * (lo + hi) - window / 2.0)
}

/// Simulates the pulse-compressed echo of `scene` seen from `true_trajectory`:
/// each pulse holds `Σ_p ρ_p · sinc[B(τ − 2r_p/c)] · exp(−j·4π·f_c·r_p/c)`.
pub fn simulate_phase_history(
    params: &RadarParams,
    true_trajectory: &Trajectory,
    scene: &Scene,
    fast_time_origin: f64,
) -> Result<PhaseHistory> {
    params.validate()?;
    if true_trajectory.len() != params.pulse_count {
        return Err(invalid(format!(
            "trajectory has {} samples but pulse_count is {}",
            true_trajectory.len(),
            params.pulse_count
        )));
    }
    let mut ph = PhaseHistory::zeros(params, fast_time_origin);
    let c = params.propagation_speed;
    for apc in true_trajectory.positions() {
        for t in scene.targets() {
            ph.check_gate(2.0 * slant_range(*apc, t.position()) / c)?;
        }
    }

    let k_rc = params.k_rc();
    let bw = params.bandwidth;
    let dt = params.fast_time_spacing;
    let n = params.fast_time_sample_count;
    let fill = |(apc, mut row): (&Point, ndarray::ArrayViewMut1<C64>)| {
        for t in scene.targets() {
            let r = slant_range(*apc, t.position());
            let delay = 2.0 * r / c;
            let carrier = C64::from_polar(1.0, -k_rc * r) * t.reflectivity;
            let center = (delay - fast_time_origin) / dt;
            let reach = SINC_HALF_WIDTH_LOBES / (bw * dt);
            let first = (center - reach).ceil().max(0.0) as usize;
            let last = ((center + reach).floor() as isize).min(n as isize - 1);
            if last < first as isize {
                continue;
            }
            for k in first..=last as usize {
                let tau = fast_time_origin + k as f64 * dt;
                row[k] += carrier * sinc(bw * (tau - delay));
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use ndarray::parallel::prelude::*;
        true_trajectory
            .positions()
            .par_iter()
            .zip(ph.data.axis_iter_mut(Axis(0)).into_par_iter())
            .for_each(fill);
    }
    #[cfg(not(feature = "parallel"))]
    {
        true_trajectory
            .positions()
            .iter()
            .zip(ph.data.axis_iter_mut(Axis(0)))
            .for_each(fill);
    }
    Ok(ph)
}

/// Adds circular white Gaussian noise with per-component standard deviation
/// `sigma / √2`, deterministic for a fixed `seed`.
pub fn add_noise(ph: &mut PhaseHistory, sigma: f64, seed: u64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("noise sigma must be finite and non-negative"));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).map_err(|e| invalid(e.to_string()))?;
    for v in ph.data.iter_mut() {
        *v += C64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbAxis {
    Azimuth,
    #[default]
    Range,
}

/// Deviation of the true APC path from the nominal one.
///
/// Parametric kinds run on normalized slow time: sinusoids use `s ∈ [0, 1]`
/// across the aperture, polynomials use `u = 2s − 1 ∈ [−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    None,
    /// `a·sin(2π·n·s + φ)`; bounded by `|a|`.
    Sinusoidal {
        amplitude_m: f64,
        cycles: f64,
        #[serde(default)]
        phase_rad: f64,
        #[serde(default)]
        axis: PerturbAxis,
    },
    /// `Σ c_i·u^i`; bounded by `Σ |c_i|`.
    Polynomial {
        coefficients_m: Vec<f64>,
        #[serde(default)]
        axis: PerturbAxis,
    },
    /// Gaussian random walk starting at zero, rescaled to stay within
    /// `max_deviation_m`.
    RandomWalk {
        step_std_m: f64,
        max_deviation_m: f64,
        seed: u64,
        #[serde(default)]
        axis: PerturbAxis,
    },
    /// Per-pulse offsets; bounded by the largest sample.
    ExplicitSamples {
        dx_m: Vec<f64>,
        dy_m: Vec<f64>,
    },
}

impl PerturbationSpec {
    pub fn validate(&self, pulse_count: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            PerturbationSpec::None => Ok(()),
            PerturbationSpec::Sinusoidal {
                amplitude_m,
                cycles,
                phase_rad,
                ..
            } => {
                if finite(&[*amplitude_m, *cycles, *phase_rad]) {
                    Ok(())
                } else {
                    Err(invalid("sinusoidal perturbation parameters must be finite"))
                }
            }
            PerturbationSpec::Polynomial { coefficients_m, .. } => {
                if finite(coefficients_m) {
                    Ok(())
                } else {
                    Err(invalid("polynomial coefficients must be finite"))
                }
            }
            PerturbationSpec::RandomWalk {
                step_std_m,
                max_deviation_m,
                ..
            } => {
                if *step_std_m >= 0.0 && *max_deviation_m >= 0.0 && finite(&[*step_std_m, *max_deviation_m]) {
                    Ok(())
                } else {
                    Err(invalid("random-walk parameters must be finite and non-negative"))
                }
            }
            PerturbationSpec::ExplicitSamples { dx_m, dy_m } => {
                if dx_m.len() != pulse_count || dy_m.len() != pulse_count {
                    return Err(invalid(format!(
                        "explicit perturbation needs {pulse_count} samples per axis (got {} and {})",
                        dx_m.len(),
                        dy_m.len()
                    )));
                }
                if finite(dx_m) && finite(dy_m) {
                    Ok(())
                } else {
                    Err(invalid("explicit perturbation samples must be finite"))
                }
            }
        }
    }

    /// Declared bound on the position deviation.
    pub fn max_deviation(&self) -> f64 {
        let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        match self {
            PerturbationSpec::None => 0.0,
            PerturbationSpec::Sinusoidal { amplitude_m, .. } => amplitude_m.abs(),
            PerturbationSpec::Polynomial { coefficients_m, .. } => coefficients_m.iter().map(|c| c.abs()).sum(),
            PerturbationSpec::RandomWalk { max_deviation_m, .. } => *max_deviation_m,
            PerturbationSpec::ExplicitSamples { dx_m, dy_m } => max_abs(dx_m).hypot(max_abs(dy_m)),
        }
    }

    /// Per-pulse `(x_e, y_e)` offsets.
    pub fn offsets(&self, times: &[f64]) -> Result<Vec<(f64, f64)>> {
        let n = times.len();
        self.validate(n)?;
        let t0 = times[0];
        let span = times[n - 1] - t0;
        let s: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
        let place = |dev: Vec<f64>, axis: PerturbAxis| -> Vec<(f64, f64)> {
            dev.into_iter()
                .map(|d| match axis {
                    PerturbAxis::Azimuth => (d, 0.0),
                    PerturbAxis::Range => (0.0, d),
                })
                .collect()
        };
        Ok(match self {
            PerturbationSpec::None => vec![(0.0, 0.0); n],
            PerturbationSpec::Sinusoidal {
                amplitude_m,
                cycles,
                phase_rad,
                axis,
            } => {
                let dev = s
                    .iter()
                    .map(|s| amplitude_m * (2.0 * std::f64::consts::PI * cycles * s + phase_rad).sin())
                    .collect();
                place(dev, *axis)
            }
            PerturbationSpec::Polynomial { coefficients_m, axis } => {
                let dev = s
                    .iter()
                    .map(|s| crate::dsp::eval_polynomial(coefficients_m, 2.0 * s - 1.0))
                    .collect();
                place(dev, *axis)
            }
            PerturbationSpec::RandomWalk {
                step_std_m,
                max_deviation_m,
                seed,
                axis,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let normal = Normal::new(0.0, *step_std_m).map_err(|e| invalid(e.to_string()))?;
                let mut acc = 0.0;
                let mut dev: Vec<f64> = (0..n)
                    .map(|i| {
                        if i > 0 {
                            acc += normal.sample(&mut rng);
                        }
                        acc
                    })
                    .collect();
                let peak = dev.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
                if peak > *max_deviation_m && peak > 0.0 {
                    let k = max_deviation_m / peak;
                    dev.iter_mut().for_each(|d| *d *= k);
                }
                place(dev, *axis)
            }
            PerturbationSpec::ExplicitSamples { dx_m, dy_m } => {
                dx_m.iter().copied().zip(dy_m.iter().copied()).collect()
            }
        })
    }
}

/// Nominal path plus the perturbation, sample by sample.
pub fn perturb_trajectory(nominal: &Trajectory, spec: &PerturbationSpec) -> Result<Trajectory> {
    let offsets = spec.offsets(nominal.times())?;
    let positions = nominal
        .positions()
        .iter()
        .zip(offsets)
        .map(|(p, (dx, dy))| Point::new(p.x + dx, p.y + dy))
        .collect();
    nominal.with_positions(positions)
}

/// True minus nominal APC range to `target`, per pulse.
pub fn range_error(nominal: &Trajectory, true_traj: &Trajectory, target: Point) -> Result<Vec<f64>> {
    if !nominal.shares_time_axis(true_traj) {
        return Err(Error::TimeAxisMismatch);
    }
    Ok(nominal
        .positions()
        .iter()
        .zip(true_traj.positions())
        .map(|(n, t)| slant_range(*t, target) - slant_range(*n, target))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Target, SPEED_OF_LIGHT};

    fn setup(pulses: usize) -> (RadarParams, Trajectory) {
        let bw = SPEED_OF_LIGHT / 0.24;
        let params = RadarParams::new(10e9, bw, 256, 1.0 / (1.2 * bw), pulses, 0.03).unwrap();
        let traj = Trajectory::linear(pulses, 0.03, 120.0, 15_000.0).unwrap();
        (params, traj)
    }

    fn origin_for(params: &RadarParams, traj: &Trajectory) -> f64 {
        fast_time_origin_covering(params, &[traj], &[Point::new(-3.0, -3.0), Point::new(3.0, 3.0)]).unwrap()
    }

    #[test]
    fn zero_reflectivity_gives_zero_history() {
        let (params, traj) = setup(8);
        let scene = Scene::new(
            vec![Target {
                x: 0.0,
                y: 0.0,
                reflectivity: C64::new(0.0, 0.0),
            }],
            (5.0, 5.0),
        )
        .unwrap();
        let ph = simulate_phase_history(&params, &traj, &scene, origin_for(&params, &traj)).unwrap();
        assert!(ph.data.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn single_pulse_peak_bin_and_phase() {
        let (params, traj) = setup(4);
        let target = Point::new(0.7, -1.1);
        let scene = Scene::new(vec![Target::unit(target.x, target.y)], (5.0, 5.0)).unwrap();
        let ph = simulate_phase_history(&params, &traj, &scene, origin_for(&params, &traj)).unwrap();
        let apc = traj.positions()[0];
        let r = slant_range(apc, target);
        let delay = 2.0 * r / SPEED_OF_LIGHT;
        let row = ph.data.row(0);
        let peak = (0..row.len())
            .max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm()))
            .unwrap();
        let nearest = ((delay - ph.fast_time_origin) / ph.fast_time_spacing).round() as usize;
        assert_eq!(peak, nearest);
        // closed-form value of the envelope and carrier at that sample
        let tau = ph.fast_time_origin + peak as f64 * ph.fast_time_spacing;
        let expect = C64::from_polar(sinc(params.bandwidth * (tau - delay)), -params.k_rc() * r);
        assert!((row[peak] - expect).norm() < 1e-12);
        let carrier = crate::dsp::wrap_phase(-params.k_rc() * r);
        assert!(crate::dsp::wrap_phase(row[peak].arg() - carrier).abs() < 1e-9);
    }

    #[test]
    fn superposition_holds() {
        let (params, traj) = setup(16);
        let origin = origin_for(&params, &traj);
        let a = Target::unit(1.0, 0.5);
        let b = Target {
            x: -2.0,
            y: 1.5,
            reflectivity: C64::new(0.3, -0.8),
        };
        let both =
            simulate_phase_history(&params, &traj, &Scene::new(vec![a, b], (5.0, 5.0)).unwrap(), origin).unwrap();
        let pa = simulate_phase_history(&params, &traj, &Scene::new(vec![a], (5.0, 5.0)).unwrap(), origin).unwrap();
        let pb = simulate_phase_history(&params, &traj, &Scene::new(vec![b], (5.0, 5.0)).unwrap(), origin).unwrap();
        let scale = both.data.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        for ((x, y), z) in both.data.iter().zip(pa.data.iter()).zip(pb.data.iter()) {
            assert!((x - (y + z)).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn energy_scales_quadratically_with_reflectivity() {
        let (params, traj) = setup(8);
        let origin = origin_for(&params, &traj);
        let e = |amp: f64| {
            let scene = Scene::new(
                vec![Target {
                    x: 0.0,
                    y: 0.0,
                    reflectivity: C64::new(amp, 0.0),
                }],
                (5.0, 5.0),
            )
            .unwrap();
            simulate_phase_history(&params, &traj, &scene, origin).unwrap().energy()
        };
        assert!((e(3.0) / e(1.0) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn target_outside_gate_is_rejected() {
        let (params, traj) = setup(8);
        let scene = Scene::new(vec![Target::unit(0.0, 0.0)], (5.0, 5.0)).unwrap();
        let err = simulate_phase_history(&params, &traj, &scene, 0.0).unwrap_err();
        assert!(matches!(err, Error::OutsideRangeGate { .. }));
        assert!(err.to_string().contains("target outside range gate"));
    }

    #[test]
    fn zero_amplitude_perturbation_is_identity() {
        let (_, traj) = setup(32);
        let spec = PerturbationSpec::Sinusoidal {
            amplitude_m: 0.0,
            cycles: 3.0,
            phase_rad: 0.0,
            axis: PerturbAxis::Range,
        };
        assert_eq!(perturb_trajectory(&traj, &spec).unwrap(), traj);
        assert_eq!(perturb_trajectory(&traj, &PerturbationSpec::None).unwrap(), traj);
    }

    #[test]
    fn sinusoidal_perturbation_shape() {
        let (_, traj) = setup(4001);
        let (a, n) = (0.05, 3.0);
        let spec = PerturbationSpec::Sinusoidal {
            amplitude_m: a,
            cycles: n,
            phase_rad: 0.0,
            axis: PerturbAxis::Range,
        };
        let out = perturb_trajectory(&traj, &spec).unwrap();
        let dev: Vec<f64> = out.positions().iter().map(|p| p.y - 15_000.0).collect();
        let max = dev.iter().cloned().fold(f64::MIN, f64::max);
        let min = dev.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - a).abs() < 1e-6 && (min + a).abs() < 1e-6);
        let deriv: Vec<f64> = dev.windows(2).map(|w| w[1] - w[0]).collect();
        let changes = deriv.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        // one maximum and one minimum per cycle
        assert_eq!(changes, 2 * n as usize);
        assert!(dev.iter().all(|d| d.abs() <= spec.max_deviation() + 1e-12));
    }

    #[test]
    fn random_walk_is_deterministic_and_bounded() {
        let (_, traj) = setup(512);
        let spec = PerturbationSpec::RandomWalk {
            step_std_m: 0.01,
            max_deviation_m: 0.05,
            seed: 42,
            axis: PerturbAxis::Range,
        };
        let a = perturb_trajectory(&traj, &spec).unwrap();
        let b = perturb_trajectory(&traj, &spec).unwrap();
        for (p, q) in a.positions().iter().zip(b.positions()) {
            assert_eq!(p.x.to_bits(), q.x.to_bits());
            assert_eq!(p.y.to_bits(), q.y.to_bits());
        }
        assert!(a.positions().iter().all(|p| (p.y - 15_000.0).abs() <= 0.05 + 1e-12));
    }

    #[test]
    fn explicit_samples_length_checked() {
        let (_, traj) = setup(8);
        let spec = PerturbationSpec::ExplicitSamples {
            dx_m: vec![0.0; 7],
            dy_m: vec![0.0; 8],
        };
        assert!(perturb_trajectory(&traj, &spec).is_err());
    }

    #[test]
    fn range_error_cases() {
        let (_, traj) = setup(64);
        let zeros = range_error(&traj, &traj, Point::ORIGIN).unwrap();
        assert!(zeros.iter().all(|v| *v == 0.0));

        // displace every APC by d along its line of sight toward the target
        let d = 0.01;
        let target = Point::ORIGIN;
        let moved: Vec<Point> = traj
            .positions()
            .iter()
            .map(|p| {
                let r = slant_range(*p, target);
                Point::new(p.x - d * (p.x - target.x) / r, p.y - d * (p.y - target.y) / r)
            })
            .collect();
        let true_traj = Trajectory::new(traj.times().to_vec(), moved).unwrap();
        let re = range_error(&traj, &true_traj, target).unwrap();
        assert!(re.iter().all(|v| (v + d).abs() < 1e-9));

        let short = Trajectory::linear(32, 0.03, 120.0, 15_000.0).unwrap();
        assert!(matches!(
            range_error(&traj, &short, target),
            Err(Error::TimeAxisMismatch)
        ));
    }

    #[test]
    fn range_error_nearly_space_invariant_over_scene() {
        let (_, traj) = setup(256);
        let spec = PerturbationSpec::Sinusoidal {
            amplitude_m: 0.05,
            cycles: 2.0,
            phase_rad: 0.3,
            axis: PerturbAxis::Range,
        };
        let true_traj = perturb_trajectory(&traj, &spec).unwrap();
        let a = range_error(&traj, &true_traj, Point::new(-2.5, -2.5)).unwrap();
        let b = range_error(&traj, &true_traj, Point::new(2.5, 2.5)).unwrap();
        let worst = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(worst < 0.01 * 0.12, "worst {worst}");
    }

    #[test]
    fn noise_is_seeded() {
        let (params, traj) = setup(8);
        let mut a = PhaseHistory::zeros(&params, origin_for(&params, &traj));
        let mut b = a.clone();
        add_noise(&mut a, 0.1, 7).unwrap();
        add_noise(&mut b, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.energy() > 0.0);
    }
}
