//! Radar parameters, platform trajectories, point-target scenes and the
//! geometric/wavenumber mappings shared by the simulator and the analysis
//! tools.
//!
//! Coordinates are a 2-D slant plane: `x` is azimuth, `y` is range, and the
//! radar flies on the positive-`y` side of the scene. Aspect angles are
//! measured from the `+y` axis toward `+x`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A point in the slant plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    pub fast_time_sample_count: usize,
    pub fast_time_spacing: f64,
    pub pulse_count: usize,
    pub pulse_interval: f64,
    pub propagation_speed: f64,
}

impl RadarParams {
    pub fn new(
        carrier_frequency: f64,
        bandwidth: f64,
        fast_time_sample_count: usize,
        fast_time_spacing: f64,
        pulse_count: usize,
        pulse_interval: f64,
    ) -> Result<Self> {
        let params = Self {
            carrier_frequency,
            bandwidth,
            fast_time_sample_count,
            fast_time_spacing,
            pulse_count,
            pulse_interval,
            propagation_speed: SPEED_OF_LIGHT,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.carrier_frequency,
            self.bandwidth,
            self.fast_time_spacing,
            self.pulse_interval,
            self.propagation_speed,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("radar parameters must be finite"));
        }
        if !(self.bandwidth > 0.0 && self.carrier_frequency > self.bandwidth / 2.0) {
            return Err(invalid("need carrier_frequency > bandwidth / 2 > 0"));
        }
        if self.fast_time_sample_count < 2 || self.pulse_count < 2 {
            return Err(invalid("need at least 2 fast-time samples and 2 pulses"));
        }
        if self.fast_time_spacing <= 0.0 || self.pulse_interval <= 0.0 {
            return Err(invalid("sample spacing and pulse interval must be positive"));
        }
        if self.propagation_speed <= 0.0 {
            return Err(invalid("propagation speed must be positive"));
        }
        Ok(())
    }

    /// Center radial wavenumber `4π·f_c/c`, rad/m.
    pub fn k_rc(&self) -> f64 {
        4.0 * PI * self.carrier_frequency / self.propagation_speed
    }

    /// Radial wavenumber bandwidth `4π·B/c`, rad/m.
    pub fn delta_k_r(&self) -> f64 {
        4.0 * PI * self.bandwidth / self.propagation_speed
    }

    pub fn wavelength(&self) -> f64 {
        self.propagation_speed / self.carrier_frequency
    }

    /// Slant-range resolution `c / 2B`.
    pub fn range_resolution(&self) -> f64 {
        self.propagation_speed / (2.0 * self.bandwidth)
    }

    /// Range extent of one fast-time sample.
    pub fn range_bin_spacing(&self) -> f64 {
        self.fast_time_spacing * self.propagation_speed / 2.0
    }
}

/// Time-sampled antenna-phase-center positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    positions: Vec<Point>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, positions: Vec<Point>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(invalid("trajectory times and positions differ in length"));
        }
        if times.len() < 2 {
            return Err(invalid("trajectory needs at least two samples"));
        }
        let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(invalid("trajectory times must be strictly increasing"));
        }
        let span = (times[times.len() - 1] - times[0]).abs().max(step);
        for (i, t) in times.iter().enumerate() {
            let expect = times[0] + step * i as f64;
            if (t - expect).abs() > 1e-9 * span {
                return Err(invalid("trajectory times must be uniformly spaced"));
            }
            if i > 0 && *t <= times[i - 1] {
                return Err(invalid("trajectory times must be strictly increasing"));
            }
        }
        if let Some(p) = positions.iter().find(|p| !(p.y > 0.0) || !p.x.is_finite()) {
            return Err(invalid(format!(
                "APC must stay on the positive-range side of the scene (found y = {})",
                p.y
            )));
        }
        Ok(Self { times, positions })
    }

    /// Straight, uniformly sampled pass at constant `standoff`, centered on
    /// `x = 0` at `t = 0`.
    pub fn linear(pulse_count: usize, pulse_interval: f64, velocity: f64, standoff: f64) -> Result<Self> {
        let mid = (pulse_count as f64 - 1.0) / 2.0;
        let times: Vec<f64> = (0..pulse_count).map(|i| (i as f64 - mid) * pulse_interval).collect();
        let positions = times.iter().map(|t| Point::new(velocity * t, standoff)).collect();
        Self::new(times, positions)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `true` when both trajectories are sampled at the same instants.
    pub fn shares_time_axis(&self, other: &Trajectory) -> bool {
        self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }

    /// Range coordinate of the APC at the aperture center (`y_a(0)`).
    pub fn standoff(&self) -> f64 {
        let n = self.positions.len();
        if n % 2 == 1 {
            self.positions[n / 2].y
        } else {
            0.5 * (self.positions[n / 2 - 1].y + self.positions[n / 2].y)
        }
    }

    pub(crate) fn with_positions(&self, positions: Vec<Point>) -> Result<Self> {
        Self::new(self.times.clone(), positions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub x: f64,
    pub y: f64,
    pub reflectivity: Complex64,
}

impl Target {
    pub fn unit(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            reflectivity: Complex64::new(1.0, 0.0),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Point-target scene inside a rectangular extent centered on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    targets: Vec<Target>,
    half_extent: (f64, f64),
}

impl Scene {
    /// `half_extent` is the (azimuth, range) half-size of the declared scene.
    pub fn new(targets: Vec<Target>, half_extent: (f64, f64)) -> Result<Self> {
        if targets.is_empty() {
            return Err(invalid("scene needs at least one target"));
        }
        if !(half_extent.0 > 0.0 && half_extent.1 > 0.0) {
            return Err(invalid("scene extent must be positive"));
        }
        for t in &targets {
            if t.x.abs() > half_extent.0 || t.y.abs() > half_extent.1 {
                return Err(invalid(format!(
                    "target ({}, {}) lies outside the declared scene extent",
                    t.x, t.y
                )));
            }
            if !(t.reflectivity.re.is_finite() && t.reflectivity.im.is_finite()) {
                return Err(invalid("target reflectivity must be finite"));
            }
        }
        Ok(Self { targets, half_extent })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn half_extent(&self) -> (f64, f64) {
        self.half_extent
    }
}

/// Polar wavenumber region `[k_r_min, k_r_max] × [theta_start, theta_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarSupport {
    pub k_r_min: f64,
    pub k_r_max: f64,
    pub theta_start: f64,
    pub theta_end: f64,
}

impl PolarSupport {
    pub fn new(k_r_min: f64, k_r_max: f64, theta_start: f64, theta_end: f64) -> Result<Self> {
        let ok = k_r_min < k_r_max
            && theta_start < theta_end
            && (k_r_max - k_r_min).is_finite()
            && (theta_end - theta_start).is_finite()
            && k_r_min > 0.0;
        if !ok {
            return Err(invalid("polar support intervals must be finite, ordered and nonempty"));
        }
        Ok(Self {
            k_r_min,
            k_r_max,
            theta_start,
            theta_end,
        })
    }

    pub fn theta_span(&self) -> f64 {
        self.theta_end - self.theta_start
    }

    pub fn theta_center(&self) -> f64 {
        0.5 * (self.theta_start + self.theta_end)
    }

    pub fn contains(&self, k_x: f64, k_y: f64) -> bool {
        let kr = k_x.hypot(k_y);
        let th = k_x.atan2(k_y);
        kr >= self.k_r_min && kr <= self.k_r_max && th >= self.theta_start && th <= self.theta_end
    }

    /// `(min, max)` of `k_x` over the region.
    pub fn k_x_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for kr in [self.k_r_min, self.k_r_max] {
            for th in [self.theta_start, self.theta_end] {
                let kx = kr * th.sin();
                lo = lo.min(kx);
                hi = hi.max(kx);
            }
        }
        (lo, hi)
    }

    /// Interval of `k_y` inside the region at a fixed `k_x` (empty → `None`).
    pub fn k_y_interval(&self, k_x: f64) -> Option<(f64, f64)> {
        if k_x.abs() >= self.k_r_max {
            return None;
        }
        let mut lo = if k_x.abs() < self.k_r_min {
            (self.k_r_min * self.k_r_min - k_x * k_x).sqrt()
        } else {
            0.0
        };
        let mut hi = (self.k_r_max * self.k_r_max - k_x * k_x).sqrt();
        // k_x <= k_y·tan(theta_end)
        let te = self.theta_end.tan();
        if te > 0.0 {
            lo = lo.max(k_x / te);
        } else if te < 0.0 {
            hi = hi.min(k_x / te);
        } else if k_x > 0.0 {
            return None;
        }
        // k_x >= k_y·tan(theta_start)
        let ts = self.theta_start.tan();
        if ts > 0.0 {
            hi = hi.min(k_x / ts);
        } else if ts < 0.0 {
            lo = lo.max(k_x / ts);
        } else if k_x < 0.0 {
            return None;
        }
        (hi > lo).then_some((lo, hi))
    }
}

/// Euclidean APC–target distance.
pub fn slant_range(position: Point, target: Point) -> f64 {
    (position.x - target.x).hypot(position.y - target.y)
}

/// Aspect angle `atan((x_a - x_p) / (y_a - y_p))`.
pub fn aspect_angle(position: Point, target: Point) -> Result<f64> {
    let dy = position.y - target.y;
    if dy == 0.0 {
        return Err(Error::SingularGeometry);
    }
    Ok(((position.x - target.x) / dy).atan())
}

/// Wavenumber support of a target's image spectrum under FBP.
pub fn wavenumber_support(params: &RadarParams, trajectory: &Trajectory, target: Point) -> Result<PolarSupport> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in trajectory.positions() {
        let th = aspect_angle(*p, target)?;
        lo = lo.min(th);
        hi = hi.max(th);
    }
    let krc = params.k_rc();
    let dk = params.delta_k_r();
    PolarSupport::new(krc - dk / 2.0, krc + dk / 2.0, lo, hi)
}

/// Aspect-angle shift of an off-center target's spectrum support, `x_p / y_a(0)`.
pub fn support_shift(target_azimuth: f64, standoff: f64) -> Result<f64> {
    if !(standoff > 0.0) {
        return Err(invalid("standoff must be positive"));
    }
    Ok(target_azimuth / standoff)
}

/// Largest deviation over the aperture between the exact differential range
/// `r(t) - r_p(t)` and its planar approximation
/// `(x_p - x)·sin θ + (y_p - y)·cos θ`.
pub fn planar_range_residual(trajectory: &Trajectory, target: Point, pixel: Point) -> Result<f64> {
    let mut worst = 0.0_f64;
    for p in trajectory.positions() {
        let th = aspect_angle(*p, target)?;
        let exact = slant_range(*p, pixel) - slant_range(*p, target);
        let planar = (target.x - pixel.x) * th.sin() + (target.y - pixel.y) * th.cos();
        worst = worst.max((exact - planar).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_one() -> RadarParams {
        RadarParams::new(10e9, SPEED_OF_LIGHT / 0.24, 512, 1e-10, 64, 1e-3).unwrap()
    }

    #[test]
    fn slant_range_axis_aligned() {
        assert_eq!(slant_range(Point::new(0.0, 15000.0), Point::ORIGIN), 15000.0);
    }

    #[test]
    fn slant_range_matches_hypotenuse() {
        let a = Point::new(123.4, 14_987.0);
        let b = Point::new(-3.2, 2.5);
        let expect = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
        assert!((slant_range(a, b) - expect).abs() < 1e-9);
    }

    #[test]
    fn aspect_angle_cases() {
        assert_eq!(aspect_angle(Point::new(2.0, 100.0), Point::new(2.0, 0.0)).unwrap(), 0.0);
        let th = aspect_angle(Point::new(100.0, 100.0), Point::ORIGIN).unwrap();
        assert!((th - PI / 4.0).abs() < 1e-15);
        assert!(matches!(
            aspect_angle(Point::new(1.0, 5.0), Point::new(0.0, 5.0)),
            Err(Error::SingularGeometry)
        ));
    }

    #[test]
    fn aspect_angle_is_monotone_along_linear_pass() {
        let traj = Trajectory::linear(101, 0.1, 120.0, 15_000.0).unwrap();
        let th: Vec<f64> = traj
            .positions()
            .iter()
            .map(|p| aspect_angle(*p, Point::new(1.0, -2.0)).unwrap())
            .collect();
        assert!(th.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn table_one_center_wavenumber() {
        let krc = table_one().k_rc();
        assert!((krc - 419.169).abs() < 0.01, "k_rc = {krc}");
    }

    #[test]
    fn support_depends_on_azimuth_not_range() {
        let params = table_one();
        let traj = Trajectory::linear(256, 0.06, 120.0, 15_000.0).unwrap();
        let near = wavenumber_support(&params, &traj, Point::new(0.0, -3.0)).unwrap();
        let far = wavenumber_support(&params, &traj, Point::new(0.0, 3.0)).unwrap();
        assert!((near.theta_start - far.theta_start).abs() < 5e-5);
        assert!((near.theta_end - far.theta_end).abs() < 5e-5);
        assert_eq!(near.k_r_min, far.k_r_min);

        let center = wavenumber_support(&params, &traj, Point::ORIGIN).unwrap();
        let offset = wavenumber_support(&params, &traj, Point::new(3.0, 0.0)).unwrap();
        let predicted = support_shift(3.0, 15_000.0).unwrap();
        let measured = center.theta_center() - offset.theta_center();
        assert!(
            (measured - predicted).abs() < 0.02 * predicted,
            "{measured} vs {predicted}"
        );
    }

    #[test]
    fn support_shift_values() {
        assert_eq!(support_shift(0.0, 15_000.0).unwrap(), 0.0);
        assert!((support_shift(150.0, 15_000.0).unwrap() - 0.01).abs() < 1e-15);
        assert!(support_shift(1.0, 0.0).is_err());
    }

    #[test]
    fn far_field_supports_converge() {
        let params = table_one();
        let traj = Trajectory::linear(64, 0.2, 120.0, 15_000.0).unwrap();
        let spread = |scale: f64| {
            let a = wavenumber_support(&params, &traj, Point::new(-5.0 * scale, 0.0)).unwrap();
            let b = wavenumber_support(&params, &traj, Point::new(5.0 * scale, 0.0)).unwrap();
            (a.theta_center() - b.theta_center()).abs()
        };
        assert!(spread(0.01) < 0.02 * spread(1.0));
    }

    #[test]
    fn k_y_interval_lies_inside_support() {
        let s = PolarSupport::new(400.0, 440.0, -0.05, 0.07).unwrap();
        let (lo, hi) = s.k_x_bounds();
        for i in 1..50 {
            let kx = lo + (hi - lo) * i as f64 / 50.0;
            if let Some((a, b)) = s.k_y_interval(kx) {
                let mid = 0.5 * (a + b);
                assert!(s.contains(kx, mid));
                assert!(!s.contains(kx, a - 1e-6) || !s.contains(kx, b + 1e-6));
            }
        }
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        assert!(Trajectory::new(vec![0.0, 1.0, 3.0], vec![Point::new(0.0, 1.0); 3]).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![Point::new(0.0, -1.0); 2]).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![Point::new(0.0, 1.0); 3]).is_err());
    }

    #[test]
    fn planar_residual_is_small_near_center() {
        let traj = Trajectory::linear(128, 0.1, 120.0, 15_000.0).unwrap();
        let r = planar_range_residual(&traj, Point::ORIGIN, Point::new(0.5, 0.5)).unwrap();
        assert!(r < 1e-4);
    }

    proptest! {
        #[test]
        fn slant_range_symmetric_and_triangular(
            ax in -1e3f64..1e3, ay in -1e3f64..1e3,
            bx in -1e3f64..1e3, by in -1e3f64..1e3,
            cx in -1e3f64..1e3, cy in -1e3f64..1e3,
        ) {
            let (a, b, c) = (Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy));
            prop_assert!((slant_range(a, b) - slant_range(b, a)).abs() < 1e-9);
            prop_assert!(slant_range(a, c) <= slant_range(a, b) + slant_range(b, c) + 1e-9);
        }

        #[test]
        fn aspect_angle_mirror_antisymmetric(
            dx in -500f64..500.0, ya in 100f64..20_000.0, xp in -10f64..10.0, yp in -10f64..10.0,
        ) {
            let target = Point::new(xp, yp);
            let p = Point::new(xp + dx, ya);
            let mirrored = Point::new(xp - dx, ya);
            let a = aspect_angle(p, target).unwrap();
            let b = aspect_angle(mirrored, target).unwrap();
            prop_assert!((a + b).abs() < 1e-12);
            prop_assert!(a.abs() < PI / 2.0);
        }
    }
}
