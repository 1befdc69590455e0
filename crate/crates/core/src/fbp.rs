//! Filtered backprojection onto a scene-centered Cartesian grid, plus the
//! analytic band-limited reference image used as a focus oracle.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, SincTable, C64};
use crate::echo::PhaseHistory;
use crate::error::{invalid, Error, Result};
use crate::geometry::{slant_range, wavenumber_support, Point, PolarSupport, RadarParams, Scene, Trajectory};

/// Scene-centered Cartesian grid; `x` is azimuth, `y` is range.
///
/// Pixel `(i, j)` sits at `center + ((i − nx/2)·dx, (j − ny/2)·dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub center: Point,
    pub pixel_spacing: (f64, f64),
    pub dims: (usize, usize),
}

impl ImageGrid {
    pub fn new(center: Point, pixel_spacing: (f64, f64), dims: (usize, usize)) -> Result<Self> {
        let (dx, dy) = pixel_spacing;
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(invalid("pixel spacing must be positive"));
        }
        if dims.0 < 2 || dims.1 < 2 {
            return Err(invalid("grid needs at least 2 × 2 pixels"));
        }
        Ok(Self {
            center,
            pixel_spacing,
            dims,
        })
    }

    /// Checks that the pixel spacing samples the spectral support without
    /// aliasing: `dx ≤ 2π / span(k_x)` and `dy ≤ 2π / Δk_r`.
    pub fn check_nyquist(&self, params: &RadarParams, trajectory: &Trajectory) -> Result<()> {
        let support = wavenumber_support(params, trajectory, self.center)?;
        let (lo, hi) = support.k_x_bounds();
        let max_dx = 2.0 * PI / (hi - lo);
        let max_dy = 2.0 * PI / params.delta_k_r();
        let tol = 1.0 + 1e-9;
        if self.pixel_spacing.0 > max_dx * tol {
            return Err(Error::Nyquist(format!(
                "dx = {} m exceeds 2π/span(k_x) = {max_dx:.5} m",
                self.pixel_spacing.0
            )));
        }
        if self.pixel_spacing.1 > max_dy * tol {
            return Err(Error::Nyquist(format!(
                "dy = {} m exceeds 2π/Δk_r = {max_dy:.5} m",
                self.pixel_spacing.1
            )));
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        self.center.x + (i as f64 - (self.dims.0 / 2) as f64) * self.pixel_spacing.0
    }

    pub fn y(&self, j: usize) -> f64 {
        self.center.y + (j as f64 - (self.dims.1 / 2) as f64) * self.pixel_spacing.1
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.dims.0).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.dims.1).map(|j| self.y(j)).collect()
    }

    /// Fractional pixel coordinates of a physical point.
    pub fn index_of(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.center.x) / self.pixel_spacing.0 + (self.dims.0 / 2) as f64,
            (p.y - self.center.y) / self.pixel_spacing.1 + (self.dims.1 / 2) as f64,
        )
    }
}

/// Record of corrections applied to an image. Flags only ever go from unset
/// to set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub ambiguity_eliminated: bool,
    /// Range-wavenumber offset removed by ambiguity elimination.
    pub k_yc: Option<f64>,
    pub aligned: bool,
    pub standoff: Option<f64>,
    pub autofocused: bool,
    pub range_reduction: Option<usize>,
    pub clipped_samples: u64,
    pub warnings: Vec<String>,
}

impl Annotation {
    pub fn flag_bits(&self) -> u32 {
        (self.ambiguity_eliminated as u32)
            | (self.aligned as u32) << 1
            | (self.autofocused as u32) << 2
            | ((self.clipped_samples > 0) as u32) << 3
    }

    pub fn is_raw(&self) -> bool {
        !self.ambiguity_eliminated && !self.aligned && !self.autofocused
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }
}

/// Complex image on an [`ImageGrid`], `data[[ix, iy]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub data: Array2<C64>,
    pub grid: ImageGrid,
    pub annotation: Annotation,
}

impl ComplexImage {
    pub fn zeros(grid: ImageGrid) -> Self {
        Self {
            data: Array2::zeros(grid.dims),
            grid,
            annotation: Annotation::default(),
        }
    }

    pub fn from_data(data: Array2<C64>, grid: ImageGrid) -> Result<Self> {
        if data.dim() != grid.dims {
            return Err(Error::ShapeMismatch {
                expected: grid.dims,
                actual: data.dim(),
            });
        }
        Ok(Self {
            data,
            grid,
            annotation: Annotation::default(),
        })
    }

    pub fn energy(&self) -> f64 {
        dsp::energy(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Pixel index of the largest magnitude.
    pub fn peak_index(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_val = -1.0;
        for ((i, j), v) in self.data.indexed_iter() {
            let m = v.norm_sqr();
            if m > best_val {
                best_val = m;
                best = (i, j);
            }
        }
        best
    }

    pub fn peak_magnitude(&self) -> f64 {
        let (i, j) = self.peak_index();
        self.data[[i, j]].norm()
    }

    /// Copy in which only pixels within `half_width` (meters, per axis) of
    /// `center` are kept.
    pub fn gated(&self, center: Point, half_width: (f64, f64)) -> ComplexImage {
        let mut out = self.clone();
        for ((i, j), v) in out.data.indexed_iter_mut() {
            let dx = (self.grid.x(i) - center.x).abs();
            let dy = (self.grid.y(j) - center.y).abs();
            if dx > half_width.0 || dy > half_width.1 {
                *v = C64::new(0.0, 0.0);
            }
        }
        out
    }
}

/// Fast-time lookup used by [`backproject`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Nearest,
    Linear,
    #[default]
    Sinc8,
    /// Direct evaluation of each pulse's band-limited range spectrum at the
    /// exact delay. Costs one pass over the fast-time samples per pixel and
    /// pulse; meant for small reference runs.
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackprojectOptions {
    pub ramp_filter: bool,
    pub range_upsample: usize,
    pub interp: Interp,
}

impl Default for BackprojectOptions {
    fn default() -> Self {
        Self {
            ramp_filter: false,
            range_upsample: 8,
            interp: Interp::Sinc8,
        }
    }
}

/// Per-pulse data prepared for lookups.
enum Profiles {
    /// Upsampled range profiles with their fine sample spacing.
    Sampled { rows: Vec<Vec<C64>>, spacing: f64 },
    /// Range-spectrum coefficients and their baseband frequencies.
    Spectral { rows: Vec<Vec<C64>>, freqs: Vec<f64> },
}

fn baseband_freqs(n: usize, spacing: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let m = if m < n.div_ceil(2) {
                m as f64
            } else {
                m as f64 - n as f64
            };
            m / (n as f64 * spacing)
        })
        .collect()
}

fn prepare_profiles(ph: &PhaseHistory, options: &BackprojectOptions) -> Profiles {
    let n = ph.sample_count();
    let freqs = baseband_freqs(n, ph.fast_time_spacing);
    let k_rc = ph.params.k_rc();
    let c = ph.params.propagation_speed;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectral = options.interp == Interp::Fourier;
    let upsample = options.range_upsample.max(1);

    let rows = ph
        .data
        .axis_iter(Axis(0))
        .map(|row| {
            let mut buf = row.to_vec();
            if options.ramp_filter || spectral {
                fwd.process(&mut buf);
                let scale = 1.0 / n as f64;
                for (v, f) in buf.iter_mut().zip(&freqs) {
                    let weight = if options.ramp_filter {
                        // k_r measure, normalized to unity at band center
                        (k_rc + 4.0 * PI * f / c) / k_rc
                    } else {
                        1.0
                    };
                    *v *= weight * scale;
                }
                if spectral {
                    return buf;
                }
                inv.process(&mut buf);
            }
            dsp::fft_upsample(&buf, upsample, &mut planner)
        })
        .collect();

    if spectral {
        Profiles::Spectral { rows, freqs }
    } else {
        Profiles::Sampled {
            rows,
            spacing: ph.fast_time_spacing / upsample as f64,
        }
    }
}

/// Forms the (filtered) backprojection image of `ph` using the
/// `measured_trajectory` for range computation.
///
/// Each pixel accumulates `s(t, 2r/c) · exp(+j·4π·f_c·r/c)` over pulses and
/// is normalized by the pulse count, so a unit point target focuses to unit
/// magnitude. Pixel ranges outside the fast-time window contribute nothing
/// and are counted in `annotation.clipped_samples`.
pub fn backproject(
    ph: &PhaseHistory,
    measured_trajectory: &Trajectory,
    grid: &ImageGrid,
    options: &BackprojectOptions,
) -> Result<ComplexImage> {
    if ph.pulse_count() != measured_trajectory.len() {
        return Err(invalid(format!(
            "phase history has {} pulses but trajectory has {} samples",
            ph.pulse_count(),
            measured_trajectory.len()
        )));
    }
    if options.range_upsample == 0 {
        return Err(invalid("range_upsample must be at least 1"));
    }
    grid.check_nyquist(&ph.params, measured_trajectory)?;

    let profiles = prepare_profiles(ph, options);
    let table = SincTable::new(8, 2048);
    let k_rc = ph.params.k_rc();
    let c = ph.params.propagation_speed;
    let tau0 = ph.fast_time_origin;
    let n_samples = ph.sample_count();
    let window = (n_samples - 1) as f64 * ph.fast_time_spacing;
    let apcs = measured_trajectory.positions();
    let xs = grid.xs();
    let ys = grid.ys();
    let ny = grid.dims.1;
    let norm = 1.0 / ph.pulse_count() as f64;

    // Pulse-outer accumulation over a band of azimuth rows keeps each range
    // profile hot in cache; per-pixel pulse order stays fixed.
    const ROWS_PER_TILE: usize = 4;
    let tile = |(tile_idx, mut out): (usize, ndarray::ArrayViewMut2<C64>)| -> u64 {
        let first_row = tile_idx * ROWS_PER_TILE;
        let rows = out.nrows();
        let mut acc = vec![C64::new(0.0, 0.0); rows * ny];
        let mut clipped = 0u64;
        for (p, apc) in apcs.iter().enumerate() {
            for r in 0..rows {
                let x = xs[first_row + r];
                for (j, y) in ys.iter().enumerate() {
                    let range = slant_range(*apc, Point::new(x, *y));
                    let delay = 2.0 * range / c - tau0;
                    let sample = match &profiles {
                        Profiles::Sampled { rows: prof, spacing } => {
                            let prof = &prof[p];
                            let pos = delay / spacing;
                            match options.interp {
                                Interp::Nearest => {
                                    let k = pos.round();
                                    (k >= 0.0 && (k as usize) < prof.len()).then(|| prof[k as usize])
                                }
                                Interp::Linear => {
                                    let k = pos.floor();
                                    if k >= 0.0 && (k as usize) + 1 < prof.len() {
                                        let f = pos - k;
                                        let k = k as usize;
                                        Some(prof[k] * (1.0 - f) + prof[k + 1] * f)
                                    } else {
                                        None
                                    }
                                }
                                _ => table.interpolate(prof, pos),
                            }
                        }
                        Profiles::Spectral { rows: coeffs, freqs } => {
                            if (0.0..=window).contains(&delay) {
                                let mut s = C64::new(0.0, 0.0);
                                for (a, f) in coeffs[p].iter().zip(freqs) {
                                    s += a * C64::from_polar(1.0, 2.0 * PI * f * delay);
                                }
                                Some(s)
                            } else {
                                None
                            }
                        }
                    };
                    match sample {
                        Some(s) => acc[r * ny + j] += s * C64::from_polar(1.0, k_rc * range),
                        None => clipped += 1,
                    }
                }
            }
        }
        for (dst, src) in out.iter_mut().zip(&acc) {
            *dst = src * norm;
        }
        clipped
    };

    let mut image = ComplexImage::zeros(*grid);
    #[cfg(feature = "parallel")]
    let clipped: u64 = {
        use ndarray::parallel::prelude::*;
        image
            .data
            .axis_chunks_iter_mut(Axis(0), ROWS_PER_TILE)
            .into_par_iter()
            .enumerate()
            .map(tile)
            .sum()
    };
    #[cfg(not(feature = "parallel"))]
    let clipped: u64 = image
        .data
        .axis_chunks_iter_mut(Axis(0), ROWS_PER_TILE)
        .enumerate()
        .map(tile)
        .sum();

    image.annotation.clipped_samples = clipped;
    if clipped > 0 {
        image.annotation.warn(format!(
            "{clipped} pixel/pulse lookups fell outside the fast-time window"
        ));
    }
    Ok(image)
}

/// Band-limited point responses of `scene` evaluated from the wavenumber
/// integral over `support`, normalized so a unit target peaks at unit
/// magnitude.
pub fn ideal_reference_image(scene: &Scene, grid: &ImageGrid, support: &PolarSupport) -> ComplexImage {
    let (kx_lo, kx_hi) = support.k_x_bounds();
    let xs = grid.xs();
    let ys = grid.ys();
    let mut image = ComplexImage::zeros(*grid);

    for target in scene.targets() {
        let reach = xs.iter().map(|x| (x - target.x).abs()).fold(0.0_f64, f64::max).max(1.0);
        // keep the quadrature alias period at least 4× the largest offset
        let nodes = (((kx_hi - kx_lo) * 4.0 * reach / (2.0 * PI)).ceil() as usize).max(64);
        let step = (kx_hi - kx_lo) / nodes as f64;
        let columns: Vec<(f64, f64, f64)> = (0..nodes)
            .filter_map(|i| {
                let kx = kx_lo + (i as f64 + 0.5) * step;
                support.k_y_interval(kx).map(|(a, b)| (kx, a, b))
            })
            .collect();
        let area: f64 = columns.iter().map(|(_, a, b)| (b - a) * step).sum();
        if area <= 0.0 {
            continue;
        }
        let amp = target.reflectivity * (step / area);

        let fill = |(i, mut row): (usize, ndarray::ArrayViewMut1<C64>)| {
            let dx = xs[i] - target.x;
            for (j, v) in row.iter_mut().enumerate() {
                let dy = ys[j] - target.y;
                let mut acc = C64::new(0.0, 0.0);
                for &(kx, a, b) in &columns {
                    let width = b - a;
                    // ∫_a^b exp(−j·k_y·dy) dk_y in closed form
                    let ky_part = C64::from_polar(width * dsp::sinc(dy * width / (2.0 * PI)), -dy * 0.5 * (a + b));
                    acc += ky_part * C64::from_polar(1.0, -kx * dx);
                }
                *v += acc * amp;
            }
        };
        #[cfg(feature = "parallel")]
        {
            use ndarray::parallel::prelude::*;
            image
                .data
                .axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(fill);
        }
        #[cfg(not(feature = "parallel"))]
        image.data.axis_iter_mut(Axis(0)).enumerate().for_each(fill);
    }
    image
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{fast_time_origin_covering, simulate_phase_history};
    use crate::geometry::{Target, SPEED_OF_LIGHT};

    struct Setup {
        params: RadarParams,
        traj: Trajectory,
        grid: ImageGrid,
    }

    fn setup(pulses: usize, samples: usize, n: usize, spacing: f64) -> Setup {
        let bw = SPEED_OF_LIGHT / 0.24;
        let k_rc = 4.0 * PI * 10e9 / SPEED_OF_LIGHT;
        let half_angle = (PI / (0.12 * k_rc)).asin();
        let length = 2.0 * 15_000.0 * half_angle.tan();
        let pri = length / 120.0 / (pulses - 1) as f64;
        let params = RadarParams::new(10e9, bw, samples, 1.0 / (1.2 * bw), pulses, pri).unwrap();
        let traj = Trajectory::linear(pulses, pri, 120.0, 15_000.0).unwrap();
        let grid = ImageGrid::new(Point::ORIGIN, (spacing, spacing), (n, n)).unwrap();
        Setup { params, traj, grid }
    }

    fn simulate(s: &Setup, targets: Vec<Target>) -> PhaseHistory {
        let half = s.grid.dims.0 as f64 * s.grid.pixel_spacing.0 / 2.0;
        let corners = [
            Point::new(-half, -half),
            Point::new(half, half),
            Point::new(-half, half),
            Point::new(half, -half),
        ];
        let origin = fast_time_origin_covering(&s.params, &[&s.traj], &corners).unwrap();
        let scene = Scene::new(targets, (half, half)).unwrap();
        simulate_phase_history(&s.params, &s.traj, &scene, origin).unwrap()
    }

    #[test]
    fn zero_history_gives_zero_image() {
        let s = setup(32, 512, 16, 0.05);
        let ph = PhaseHistory::zeros(&s.params, 1e-4);
        let img = backproject(&ph, &s.traj, &s.grid, &BackprojectOptions::default()).unwrap();
        assert!(img.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn nyquist_violation_rejected() {
        let s = setup(32, 512, 16, 0.05);
        let coarse = ImageGrid::new(Point::ORIGIN, (0.2, 0.05), (16, 16)).unwrap();
        assert!(matches!(
            coarse.check_nyquist(&s.params, &s.traj),
            Err(Error::Nyquist(_))
        ));
        assert!(s.grid.check_nyquist(&s.params, &s.traj).is_ok());
    }

    #[test]
    fn focused_target_peaks_at_unit_magnitude_on_its_pixel() {
        let s = setup(128, 512, 32, 0.04);
        let ph = simulate(&s, vec![Target::unit(0.2, -0.12)]);
        let img = backproject(&ph, &s.traj, &s.grid, &BackprojectOptions::default()).unwrap();
        let (i, j) = img.peak_index();
        assert!((s.grid.x(i) - 0.2).abs() < 1e-9 && (s.grid.y(j) + 0.12).abs() < 1e-9);
        assert!((img.peak_magnitude() - 1.0).abs() < 2e-3, "{}", img.peak_magnitude());
        assert_eq!(img.annotation.clipped_samples, 0);
    }

    #[test]
    fn linearity() {
        let s = setup(64, 512, 16, 0.05);
        let a = simulate(&s, vec![Target::unit(0.1, 0.1)]);
        let b = simulate(&s, vec![Target::unit(-0.2, 0.15)]);
        let (wa, wb) = (C64::new(0.5, 0.2), C64::new(-1.1, 0.4));
        let mut mix = a.clone();
        mix.data = &a.data * wa + &b.data * wb;
        let opts = BackprojectOptions::default();
        let ia = backproject(&a, &s.traj, &s.grid, &opts).unwrap();
        let ib = backproject(&b, &s.traj, &s.grid, &opts).unwrap();
        let im = backproject(&mix, &s.traj, &s.grid, &opts).unwrap();
        for ((m, x), y) in im.data.iter().zip(ia.data.iter()).zip(ib.data.iter()) {
            assert!((m - (x * wa + y * wb)).norm() < 1e-12);
        }
    }

    #[test]
    fn ramp_filter_keeps_peak_location() {
        let s = setup(64, 512, 32, 0.04);
        let ph = simulate(&s, vec![Target::unit(-0.28, 0.16)]);
        let off = backproject(&ph, &s.traj, &s.grid, &BackprojectOptions::default()).unwrap();
        let on = backproject(
            &ph,
            &s.traj,
            &s.grid,
            &BackprojectOptions {
                ramp_filter: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(off.peak_index(), on.peak_index());
        assert!(off.data != on.data);
    }

    #[test]
    fn interpolation_modes_agree_at_the_peak() {
        let s = setup(32, 512, 16, 0.04);
        let ph = simulate(&s, vec![Target::unit(0.0, 0.0)]);
        let peak = |interp| {
            let img = backproject(
                &ph,
                &s.traj,
                &s.grid,
                &BackprojectOptions {
                    interp,
                    ..Default::default()
                },
            )
            .unwrap();
            img.data[[8, 8]]
        };
        let fourier = peak(Interp::Fourier);
        assert!((peak(Interp::Sinc8) - fourier).norm() < 2e-3);
        assert!((peak(Interp::Linear) - fourier).norm() < 2e-2);
        assert!((peak(Interp::Nearest) - fourier).norm() < 0.2);
    }

    #[test]
    fn reference_image_peaks_at_target_and_translates() {
        let grid = ImageGrid::new(Point::ORIGIN, (0.04, 0.04), (32, 32)).unwrap();
        let support = PolarSupport::new(393.0, 445.4, -0.0625, 0.0625).unwrap();
        let center = ideal_reference_image(
            &Scene::new(vec![Target::unit(0.0, 0.0)], (1.0, 1.0)).unwrap(),
            &grid,
            &support,
        );
        assert_eq!(center.peak_index(), (16, 16));
        assert!((center.peak_magnitude() - 1.0).abs() < 1e-9);
        let moved = ideal_reference_image(
            &Scene::new(vec![Target::unit(0.16, -0.08)], (1.0, 1.0)).unwrap(),
            &grid,
            &support,
        );
        assert_eq!(moved.peak_index(), (20, 14));
        for i in 0..24 {
            for j in 2..32 {
                let a = center.data[[i, j]];
                let b = moved.data[[i + 4, j - 2]];
                assert!((a - b).norm() < 1e-9);
            }
        }
    }
}
