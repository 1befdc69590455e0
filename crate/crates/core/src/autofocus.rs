//! Geometry-aided 2-D autofocus: estimate the 1-D azimuth phase error with
//! PGA on a range-collapsed copy of the preprocessed image, expand it into
//! the full 2-D spectrum-domain error through its known structure, and
//! correct the full-resolution spectrum.

use std::f64::consts::PI;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Direction, C64};
use crate::echo::range_error;
use crate::error::{invalid, Error, Result};
use crate::fbp::ComplexImage;
use crate::geometry::{aspect_angle, Point, Trajectory};
use crate::metrics;
use crate::spectrum::{self, PhaseCorrectable};

/// Estimated (or ground-truth) phase error along azimuth wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzimuthPhaseError {
    pub k_x_axis: Vec<f64>,
    pub phase: Vec<f64>,
    /// Constant and linear components removed over the whole axis.
    pub normalized: bool,
    /// Bins that carried scatterer energy during estimation.
    pub support: Vec<bool>,
    /// False when PGA stopped at its iteration cap above the RMS tolerance.
    pub converged: bool,
    pub subapertures: usize,
}

impl AzimuthPhaseError {
    pub fn new(k_x_axis: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        if k_x_axis.len() != phase.len() || k_x_axis.len() < 2 {
            return Err(invalid("APE axis and phase must have equal length ≥ 2"));
        }
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(invalid("APE contains non-finite values"));
        }
        let support = vec![true; phase.len()];
        Ok(Self {
            k_x_axis,
            phase,
            normalized: false,
            support,
            converged: true,
            subapertures: 1,
        })
    }

    /// Removes mean and best-fit slope over the whole axis.
    pub fn normalize(mut self) -> Self {
        dsp::remove_affine(&self.k_x_axis, &mut self.phase, None);
        self.normalized = true;
        self
    }

    pub fn rms(&self) -> f64 {
        dsp::rms(self.phase.iter().copied())
    }
}

/// Spectrum-domain phase error on `(k_x, k_y)` with `k_y` offset-restored.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseErrorField {
    pub k_x_axis: Vec<f64>,
    pub k_y_axis: Vec<f64>,
    pub phase: Array2<f64>,
    pub k_yc: f64,
    /// Samples whose scaled argument fell outside the APE axis and were
    /// edge-extrapolated.
    pub extrapolated: usize,
}

impl PhaseErrorField {
    pub fn zeros(k_x_axis: Vec<f64>, k_y_axis: Vec<f64>, k_yc: f64) -> Self {
        let phase = Array2::zeros((k_x_axis.len(), k_y_axis.len()));
        Self {
            k_x_axis,
            k_y_axis,
            phase,
            k_yc,
            extrapolated: 0,
        }
    }

    /// Field in which every `k_y` row equals the APE (a purely azimuth,
    /// range-independent correction).
    pub fn azimuth_only(ape: &AzimuthPhaseError, k_y_axis: &[f64], k_yc: f64) -> Self {
        let mut field = Self::zeros(ape.k_x_axis.clone(), k_y_axis.to_vec(), k_yc);
        for (mut col, p) in field.phase.axis_iter_mut(Axis(0)).zip(&ape.phase) {
            col.fill(*p);
        }
        field
    }

    /// Column index of `k_y = k_yc` when it lies on the axis.
    pub fn center_row(&self) -> Option<usize> {
        let step = (self.k_y_axis[1] - self.k_y_axis[0]).abs();
        self.k_y_axis
            .iter()
            .position(|k| (k - self.k_yc).abs() < 1e-9 * step.max(1.0))
    }

    /// `Φ(·, k_y)` at the axis sample nearest to `k_y`.
    pub fn row_near(&self, k_y: f64) -> Vec<f64> {
        let j = nearest_index(&self.k_y_axis, k_y);
        self.phase.column(j).to_vec()
    }

    pub fn add(&mut self, other: &PhaseErrorField) -> Result<()> {
        if other.phase.dim() != self.phase.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.phase.dim(),
                actual: other.phase.dim(),
            });
        }
        self.phase += &other.phase;
        Ok(())
    }
}

fn nearest_index(axis: &[f64], v: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutofocusConfig {
    pub max_iterations: usize,
    pub pga_iterations: usize,
    pub range_collapse_factor: usize,
    pub subaperture_count: usize,
    pub convergence_rms: f64,
}

impl Default for AutofocusConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2,
            pga_iterations: 6,
            range_collapse_factor: 4,
            subaperture_count: 1,
            convergence_rms: 0.05,
        }
    }
}

impl AutofocusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.pga_iterations == 0 || self.subaperture_count == 0 {
            return Err(invalid("autofocus iteration and subaperture counts must be positive"));
        }
        if !self.range_collapse_factor.is_power_of_two() {
            return Err(invalid("range_collapse_factor must be a power of two"));
        }
        if !(self.convergence_rms > 0.0) {
            return Err(invalid("convergence_rms must be positive"));
        }
        Ok(())
    }
}

/// Keeps the central `1/factor` of the range-wavenumber band, giving a
/// coarser range grid with `factor`× larger cells. Azimuth is untouched.
pub fn reduce_range_resolution(img: &ComplexImage, factor: usize) -> Result<ComplexImage> {
    let (nx, ny) = img.grid.dims;
    if factor == 0 || ny % factor != 0 || ny / factor < 2 {
        return Err(Error::NonDividingFactor { len: ny, factor });
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let m = ny / factor;
    let mut data = img.data.clone();
    dsp::transform_axis(&mut data, 1, Direction::ToSpectrum);
    let start = ny / 2 - m / 2;
    let mut kept = data.slice(s![.., start..start + m]).to_owned();
    dsp::transform_axis(&mut kept, 1, Direction::ToImage);
    let grid = crate::fbp::ImageGrid::new(
        img.grid.center,
        (img.grid.pixel_spacing.0, img.grid.pixel_spacing.1 * factor as f64),
        (nx, m),
    )?;
    let mut annotation = img.annotation.clone();
    annotation.range_reduction = Some(factor);
    Ok(ComplexImage {
        data: kept,
        grid,
        annotation,
    })
}

/// Fraction of the kept band's peak below which a range bin is ignored.
const BIN_ENERGY_FLOOR: f64 = 0.01;
/// Spectral bins below this fraction of the peak weight are outside the
/// scatterer support.
const SUPPORT_FLOOR: f64 = 0.1;
const WINDOW_ENERGY: f64 = 0.95;
const WINDOW_SHRINK: f64 = 0.7;
const MIN_WINDOW: usize = 16;
const AUTO_SUBAPERTURES: usize = 4;

struct PgaOutcome {
    phase: Vec<f64>,
    support: Vec<bool>,
    converged: bool,
    first_gradient_rms: f64,
}

fn transform_columns(data: &mut Array2<C64>, direction: Direction) {
    dsp::transform_axis(data, 0, direction);
}

/// Classic PGA over the columns of `data` (`[azimuth × range bin]`).
/// The returned phase lives on the centered `k_x` axis of length `nx`.
fn pga_core(data: &Array2<C64>, config: &AutofocusConfig) -> PgaOutcome {
    let (n, bins) = data.dim();
    let mut work = data.clone();
    let mut total = vec![0.0; n];
    let mut support = vec![true; n];
    let mut converged = false;
    let mut first_gradient_rms = 0.0;
    let mut initial_width = n;
    let idx: Vec<f64> = (0..n).map(|k| k as f64).collect();

    for iter in 0..config.pga_iterations {
        // center the brightest sample of every bin
        let mut centered = Array2::<C64>::zeros((n, bins));
        for (j, col) in work.axis_iter(Axis(1)).enumerate() {
            let peak = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            for i in 0..n {
                centered[[(i + n + n / 2 - peak) % n, j]] = col[i];
            }
        }

        if iter == 0 {
            let profile: Vec<f64> = centered
                .axis_iter(Axis(0))
                .map(|row| row.iter().map(|v| v.norm_sqr()).sum())
                .collect();
            let total_energy: f64 = profile.iter().sum();
            let c = n / 2;
            let mut acc = profile[c];
            let mut half = 0;
            while acc < WINDOW_ENERGY * total_energy && half < n / 2 {
                half += 1;
                if c >= half {
                    acc += profile[c - half];
                }
                if c + half < n {
                    acc += profile[c + half];
                }
            }
            initial_width = 2 * half + 1;
        }
        let width = ((initial_width as f64 * WINDOW_SHRINK.powi(iter as i32)) as usize)
            .max(MIN_WINDOW)
            .min(n);
        let lo = (n / 2).saturating_sub(width / 2);
        let hi = (lo + width).min(n);
        for (i, mut row) in centered.axis_iter_mut(Axis(0)).enumerate() {
            if i < lo || i >= hi {
                row.fill(C64::new(0.0, 0.0));
            }
        }
        transform_columns(&mut centered, Direction::ToSpectrum);

        let weight: Vec<f64> = centered
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|v| v.norm_sqr()).sum())
            .collect();
        let wmax = weight.iter().cloned().fold(0.0, f64::max);
        if wmax <= 0.0 {
            break;
        }
        let mask: Vec<bool> = weight.iter().map(|w| *w >= SUPPORT_FLOOR * wmax).collect();
        if iter == 0 {
            support = mask.clone();
        }
        let mut gradient = vec![0.0; n];
        for k in 1..n {
            if mask[k] && mask[k - 1] {
                let mut c = C64::new(0.0, 0.0);
                for j in 0..bins {
                    c += centered[[k, j]] * centered[[k - 1, j]].conj();
                }
                gradient[k] = c.arg();
            }
        }
        if iter == 0 {
            let g: Vec<f64> = (1..n)
                .filter(|&k| mask[k] && mask[k - 1])
                .map(|k| gradient[k])
                .collect();
            let mean = g.iter().sum::<f64>() / g.len().max(1) as f64;
            first_gradient_rms = dsp::rms(g.iter().map(|v| v - mean));
        }
        let mut phase = vec![0.0; n];
        for k in 1..n {
            phase[k] = phase[k - 1] + gradient[k];
        }
        let w: Vec<f64> = mask.iter().map(|&m| m as u8 as f64).collect();
        dsp::remove_affine(&idx, &mut phase, Some(&w));

        transform_columns(&mut work, Direction::ToSpectrum);
        for (mut row, p) in work.axis_iter_mut(Axis(0)).zip(&phase) {
            let c = C64::from_polar(1.0, -p);
            row.mapv_inplace(|v| v * c);
        }
        transform_columns(&mut work, Direction::ToImage);
        for (t, p) in total.iter_mut().zip(&phase) {
            *t += p;
        }
        let update = dsp::rms(phase.iter().zip(&mask).filter(|(_, m)| **m).map(|(p, _)| *p));
        if update < config.convergence_rms {
            converged = true;
            break;
        }
    }
    dsp::remove_affine(
        &idx,
        &mut total,
        Some(&support.iter().map(|&m| m as u8 as f64).collect::<Vec<_>>()),
    );
    PgaOutcome {
        phase: total,
        support,
        converged,
        first_gradient_rms,
    }
}

/// PGA over overlapping segments of the spectral support, stitched by
/// matching offset and slope on the overlaps.
fn pga_subapertures(data: &Array2<C64>, count: usize, config: &AutofocusConfig) -> PgaOutcome {
    let n = data.nrows();
    let mut spec = data.clone();
    transform_columns(&mut spec, Direction::ToSpectrum);
    let weight: Vec<f64> = spec
        .axis_iter(Axis(0))
        .map(|row| row.iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let wmax = weight.iter().cloned().fold(0.0, f64::max);
    let support: Vec<bool> = weight.iter().map(|w| *w >= SUPPORT_FLOOR * wmax).collect();
    let first = support.iter().position(|&m| m).unwrap_or(0);
    let last = support.iter().rposition(|&m| m).unwrap_or(n - 1);
    let span = last + 1 - first;
    let seg_len = (2 * span).div_ceil(count + 1).max(MIN_WINDOW).min(span);
    let step = (seg_len / 2).max(1);

    let mut stitched: Vec<Option<f64>> = vec![None; n];
    let mut converged = true;
    let mut first_gradient_rms: f64 = 0.0;
    let mut start = first;
    loop {
        let end = if start + seg_len > last || start + step > last {
            last + 1
        } else {
            start + seg_len
        };
        let mut seg = spec.slice(s![start..end, ..]).to_owned();
        transform_columns(&mut seg, Direction::ToImage);
        let out = pga_core(&seg, config);
        converged &= out.converged;
        first_gradient_rms = first_gradient_rms.max(out.first_gradient_rms);

        let mut phase = out.phase;
        let overlap: Vec<usize> = (0..phase.len()).filter(|&i| stitched[start + i].is_some()).collect();
        if !overlap.is_empty() {
            let x: Vec<f64> = overlap.iter().map(|&i| i as f64).collect();
            let d: Vec<f64> = overlap
                .iter()
                .map(|&i| stitched[start + i].unwrap() - phase[i])
                .collect();
            let (a, b) = if overlap.len() > 1 {
                dsp::fit_affine(&x, &d, None)
            } else {
                (d[0], 0.0)
            };
            for (i, p) in phase.iter_mut().enumerate() {
                *p += a + b * i as f64;
            }
        }
        for (i, p) in phase.iter().enumerate() {
            let slot = &mut stitched[start + i];
            *slot = Some(match *slot {
                Some(prev) => 0.5 * (prev + p),
                None => *p,
            });
        }
        if end == last + 1 {
            break;
        }
        start += step;
    }

    let mut phase = vec![0.0; n];
    for k in 0..n {
        phase[k] = match stitched[k] {
            Some(p) => p,
            None if k < first => stitched[first].unwrap_or(0.0),
            None => stitched[last].unwrap_or(0.0),
        };
    }
    PgaOutcome {
        phase,
        support,
        converged,
        first_gradient_rms,
    }
}

/// Estimates the azimuth phase error of a preprocessed (ambiguity-eliminated
/// and aligned) image with phase gradient autofocus.
pub fn estimate_ape_pga(img: &ComplexImage, config: &AutofocusConfig) -> Result<AzimuthPhaseError> {
    config.validate()?;
    if !img.annotation.ambiguity_eliminated {
        return Err(Error::AmbiguityNotEliminated);
    }
    if !img.annotation.aligned {
        return Err(Error::NotAligned);
    }
    let peaks: Vec<f64> = img
        .data
        .axis_iter(Axis(1))
        .map(|col| col.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max))
        .collect();
    let top = peaks.iter().cloned().fold(0.0, f64::max);
    let selected: Vec<usize> = (0..peaks.len())
        .filter(|&j| top > 0.0 && peaks[j] >= BIN_ENERGY_FLOOR * top)
        .collect();
    if selected.is_empty() {
        return Err(Error::InsufficientScatterers);
    }
    let data = img.data.select(Axis(1), &selected);

    let mut subapertures = config.subaperture_count;
    let mut outcome = if subapertures > 1 {
        pga_subapertures(&data, subapertures, config)
    } else {
        pga_core(&data, config)
    };
    if subapertures == 1 && outcome.first_gradient_rms > PI / 2.0 {
        subapertures = AUTO_SUBAPERTURES;
        outcome = pga_subapertures(&data, subapertures, config);
    }

    let (k_x_axis, _) = spectrum::k_axes(&img.grid);
    let mut ape = AzimuthPhaseError::new(k_x_axis, outcome.phase)?.normalize();
    ape.support = outcome.support;
    ape.converged = outcome.converged;
    ape.subapertures = subapertures;
    Ok(ape)
}

const RESAMPLE_HALF_WIDTH: usize = 16;
const RESAMPLE_BETA: f64 = 9.0;

/// Windowed-sinc evaluation of uniformly sampled `values` at fractional index
/// `pos`, holding edge samples for taps beyond the ends.
fn resample(values: &[f64], pos: f64) -> f64 {
    let n = values.len() as isize;
    let base = pos.floor();
    let frac = pos - base;
    let base = base as isize;
    if frac == 0.0 {
        return values[base.clamp(0, n - 1) as usize];
    }
    let hw = RESAMPLE_HALF_WIDTH as isize;
    let mut acc = 0.0;
    let mut norm = 0.0;
    for i in (base - hw + 1)..=(base + hw) {
        let w = dsp::kaiser_sinc(pos - i as f64, RESAMPLE_HALF_WIDTH as f64, RESAMPLE_BETA);
        acc += w * values[i.clamp(0, n - 1) as usize];
        norm += w;
    }
    acc / norm
}

/// Expands an APE into the 2-D spectrum-domain error:
/// `Φ(k_x, k_y) = (k_y/k_yc) · φ₀((k_yc/k_y) · k_x)`.
///
/// The APE is split into a least-squares quadratic, evaluated exactly at the
/// scaled arguments, and a residual resampled by windowed-sinc
/// interpolation, so linear and quadratic errors carry no interpolation
/// error.
pub fn synthesize_2d_phase(ape: &AzimuthPhaseError, k_y_axis: &[f64], k_yc: f64) -> Result<PhaseErrorField> {
    if let Some(bad) = k_y_axis.iter().chain(std::iter::once(&k_yc)).find(|k| !(**k > 0.0)) {
        return Err(Error::NonPositiveKy(*bad));
    }
    let kx = &ape.k_x_axis;
    let n = kx.len();
    let step = kx[1] - kx[0];
    let trend = dsp::fit_polynomial(kx, &ape.phase, 2);
    let residual: Vec<f64> = kx
        .iter()
        .zip(&ape.phase)
        .map(|(k, p)| p - dsp::eval_polynomial(&trend, *k))
        .collect();

    let mut field = PhaseErrorField::zeros(kx.clone(), k_y_axis.to_vec(), k_yc);
    let mut extrapolated = 0;
    for (j, &ky) in k_y_axis.iter().enumerate() {
        let ratio = k_yc / ky;
        for (i, &k) in kx.iter().enumerate() {
            let u = ratio * k;
            let pos = (u - kx[0]) / step;
            let res = if pos < 0.0 {
                extrapolated += 1;
                residual[0]
            } else if pos > (n - 1) as f64 {
                extrapolated += 1;
                residual[n - 1]
            } else if ky == k_yc {
                residual[i]
            } else {
                resample(&residual, pos)
            };
            field.phase[[i, j]] = (dsp::eval_polynomial(&trend, u) + res) / ratio;
        }
        if ky == k_yc {
            // exact at the generating row
            for (i, p) in ape.phase.iter().enumerate() {
                field.phase[[i, j]] = *p;
            }
        }
    }
    field.extrapolated = extrapolated;
    Ok(field)
}

/// First two Taylor terms of the field about `k_y = k_yc`: the APE `φ₀` and
/// the range-wavenumber slope `φ₁ = ∂Φ/∂k_y` (meters; the residual range
/// migration as a function of `k_x`).
pub fn taylor_terms(field: &PhaseErrorField) -> Result<(Vec<f64>, Vec<f64>)> {
    let j = field
        .center_row()
        .ok_or_else(|| invalid("k_yc is not a sample of the field's k_y axis"))?;
    if j == 0 || j + 1 >= field.k_y_axis.len() {
        return Err(invalid("k_yc row has no neighbors for differencing"));
    }
    let dk = field.k_y_axis[j + 1] - field.k_y_axis[j - 1];
    let phi0 = field.phase.column(j).to_vec();
    let phi1 = (0..field.k_x_axis.len())
        .map(|i| (field.phase[[i, j + 1]] - field.phase[[i, j - 1]]) / dk)
        .collect();
    Ok((phi0, phi1))
}

/// Ground-truth spectrum-domain error of a trajectory perturbation for a
/// point at `target`: each `(k_x, k_y)` maps to the pulse whose nominal
/// aspect angle equals `atan(k_x/k_y)`, giving `Φ = −k_r · r_e`.
pub fn geometric_phase_error(
    nominal: &Trajectory,
    true_traj: &Trajectory,
    target: Point,
    k_x_axis: &[f64],
    k_y_axis: &[f64],
    k_yc: f64,
) -> Result<PhaseErrorField> {
    let r_e = range_error(nominal, true_traj, target)?;
    let mut table: Vec<(f64, f64)> = nominal
        .positions()
        .iter()
        .zip(&r_e)
        .map(|(p, r)| Ok((aspect_angle(*p, target)?, *r)))
        .collect::<Result<_>>()?;
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lookup = |th: f64| -> f64 {
        let i = table.partition_point(|e| e.0 < th);
        if i == 0 {
            table[0].1
        } else if i >= table.len() {
            table[table.len() - 1].1
        } else {
            let (t0, r0) = table[i - 1];
            let (t1, r1) = table[i];
            r0 + (r1 - r0) * (th - t0) / (t1 - t0)
        }
    };
    let mut field = PhaseErrorField::zeros(k_x_axis.to_vec(), k_y_axis.to_vec(), k_yc);
    for (i, &kx) in k_x_axis.iter().enumerate() {
        for (j, &ky) in k_y_axis.iter().enumerate() {
            field.phase[[i, j]] = -kx.hypot(ky) * lookup(kx.atan2(ky));
        }
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusMetrics {
    pub contrast: f64,
    pub entropy: f64,
}

impl FocusMetrics {
    pub fn of(img: &ComplexImage) -> Result<Self> {
        Ok(Self {
            contrast: metrics::contrast(img)?,
            entropy: metrics::entropy(img)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusGeometry {
    pub k_yc: f64,
    pub standoff: f64,
}

#[derive(Debug, Clone)]
pub struct AutofocusResult {
    pub refocused: ComplexImage,
    /// Input after ambiguity elimination and alignment, before correction.
    pub preprocessed: ComplexImage,
    pub ape_history: Vec<AzimuthPhaseError>,
    pub field_history: Vec<PhaseErrorField>,
    /// Entry 0 is the preprocessed image; one entry per accepted iteration.
    pub metrics_history: Vec<FocusMetrics>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Entropy decrease below which iteration stops.
pub const ENTROPY_TOLERANCE: f64 = 1e-3;

/// Full geometry-aided autofocus of a raw backprojection image.
pub fn autofocus_pipeline(
    img: &ComplexImage,
    geometry: FocusGeometry,
    config: &AutofocusConfig,
) -> Result<AutofocusResult> {
    config.validate()?;
    if !img.annotation.is_raw() {
        return Err(Error::NotRawImage);
    }
    let preprocessed =
        spectrum::align_spectrum(&spectrum::eliminate_ambiguity(img, geometry.k_yc)?, geometry.standoff)?;
    let mut current = preprocessed.clone();
    let mut current_metrics = FocusMetrics::of(&current)?;
    let mut result = AutofocusResult {
        refocused: preprocessed.clone(),
        preprocessed,
        ape_history: Vec::new(),
        field_history: Vec::new(),
        metrics_history: vec![current_metrics],
        iterations: 0,
        warnings: Vec::new(),
    };

    for iteration in 0..config.max_iterations {
        let coarse = reduce_range_resolution(&current, config.range_collapse_factor)?;
        let ape = estimate_ape_pga(&coarse, config)?;
        if !ape.converged {
            result.warnings.push(format!(
                "iteration {}: PGA did not reach the RMS tolerance",
                iteration + 1
            ));
        }
        let spec = spectrum::to_spectrum(&current);
        let k_y = spec.physical_k_y_axis().ok_or(Error::AmbiguityNotEliminated)?;
        let field = synthesize_2d_phase(&ape, &k_y, geometry.k_yc)?;
        let candidate = spectrum::to_image(&spec.apply_phase(&field, -1.0)?);
        let candidate_metrics = FocusMetrics::of(&candidate)?;
        if candidate_metrics.entropy > current_metrics.entropy {
            result.warnings.push(format!(
                "iteration {}: entropy rose from {:.6} to {:.6}; rolled back",
                iteration + 1,
                current_metrics.entropy,
                candidate_metrics.entropy
            ));
            break;
        }
        let decrease = current_metrics.entropy - candidate_metrics.entropy;
        current = candidate;
        current_metrics = candidate_metrics;
        result.ape_history.push(ape);
        result.field_history.push(field);
        result.metrics_history.push(candidate_metrics);
        result.iterations += 1;
        if decrease < ENTROPY_TOLERANCE {
            break;
        }
    }

    current.annotation.autofocused = true;
    current.annotation.warnings.extend(result.warnings.iter().cloned());
    result.refocused = current;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbp::ImageGrid;
    use proptest::prelude::*;

    fn axis(n: usize, step: f64) -> Vec<f64> {
        dsp::centered_axis(n, step)
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = AutofocusConfig::default();
        assert_eq!(
            (
                c.max_iterations,
                c.pga_iterations,
                c.range_collapse_factor,
                c.subaperture_count
            ),
            (2, 6, 4, 1)
        );
        assert!(c.validate().is_ok());
        assert!(AutofocusConfig {
            range_collapse_factor: 3,
            ..c
        }
        .validate()
        .is_err());
        assert!(AutofocusConfig { max_iterations: 0, ..c }.validate().is_err());
    }

    #[test]
    fn normalized_ape_has_zero_mean_and_slope() {
        let kx = axis(64, 0.5);
        let phase: Vec<f64> = kx.iter().map(|k| 1.0 + 0.3 * k + 0.02 * k * k).collect();
        let ape = AzimuthPhaseError::new(kx.clone(), phase).unwrap().normalize();
        let (a, b) = dsp::fit_affine(&kx, &ape.phase, None);
        assert!(a.abs() < 1e-9 && b.abs() < 1e-9);
    }

    #[test]
    fn linear_ape_is_range_independent() {
        let kx = axis(64, 0.8);
        let ape = AzimuthPhaseError::new(kx.clone(), kx.iter().map(|k| 0.37 * k).collect()).unwrap();
        let k_yc = 419.0;
        let ky: Vec<f64> = axis(32, 1.6).iter().map(|k| k + k_yc).collect();
        let field = synthesize_2d_phase(&ape, &ky, k_yc).unwrap();
        for i in 0..64 {
            for j in 0..32 {
                assert!((field.phase[[i, j]] - 0.37 * kx[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_ape_scales_inversely_with_k_y() {
        let kx = axis(128, 0.4);
        let a = 0.03;
        let ape = AzimuthPhaseError::new(kx.clone(), kx.iter().map(|k| a * k * k).collect()).unwrap();
        let k_yc = 419.169;
        let ky: Vec<f64> = axis(64, 0.8).iter().map(|k| k + k_yc).collect();
        let field = synthesize_2d_phase(&ape, &ky, k_yc).unwrap();
        for (j, &k_y) in ky.iter().enumerate() {
            for (i, &k) in kx.iter().enumerate() {
                let expected = a * (k_yc / k_y) * k * k;
                assert!((field.phase[[i, j]] - expected).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn center_row_reproduces_ape_exactly() {
        let kx = axis(96, 0.5);
        let phase: Vec<f64> = kx.iter().map(|k| (0.2 * k).sin() * 3.0 + 0.01 * k * k * k).collect();
        let ape = AzimuthPhaseError::new(kx, phase.clone()).unwrap();
        let k_yc = 400.0;
        let ky: Vec<f64> = axis(16, 2.0).iter().map(|k| k + k_yc).collect();
        let field = synthesize_2d_phase(&ape, &ky, k_yc).unwrap();
        let j = field.center_row().unwrap();
        assert_eq!(field.phase.column(j).to_vec(), phase);
    }

    #[test]
    fn non_positive_k_y_rejected() {
        let ape = AzimuthPhaseError::new(axis(8, 1.0), vec![0.0; 8]).unwrap();
        assert!(matches!(
            synthesize_2d_phase(&ape, &[1.0, 0.0], 1.0),
            Err(Error::NonPositiveKy(_))
        ));
    }

    #[test]
    fn resampling_hits_band_limited_tones() {
        let n = 128;
        let values: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        for pos in [40.25, 63.5, 80.9] {
            let err = (resample(&values, pos) - (0.3 * pos).cos()).abs();
            assert!(err < 1e-4, "{pos}: {err}");
        }
    }

    #[test]
    fn range_reduction_identity_and_errors() {
        let grid = ImageGrid::new(Point::ORIGIN, (0.06, 0.06), (8, 12)).unwrap();
        let mut img = ComplexImage::zeros(grid);
        img.data[[3, 5]] = C64::new(1.0, 2.0);
        assert_eq!(reduce_range_resolution(&img, 1).unwrap().data, img.data);
        assert!(matches!(
            reduce_range_resolution(&img, 5),
            Err(Error::NonDividingFactor { .. })
        ));
        let coarse = reduce_range_resolution(&img, 4).unwrap();
        assert_eq!(coarse.grid.dims, (8, 3));
        assert!((coarse.grid.pixel_spacing.1 - 0.24).abs() < 1e-12);
    }

    #[test]
    fn pga_requires_preprocessing_and_scatterers() {
        let grid = ImageGrid::new(Point::ORIGIN, (0.06, 0.06), (32, 8)).unwrap();
        let img = ComplexImage::zeros(grid);
        let cfg = AutofocusConfig::default();
        assert!(matches!(
            estimate_ape_pga(&img, &cfg),
            Err(Error::AmbiguityNotEliminated)
        ));
        let mut pre = img.clone();
        pre.annotation.ambiguity_eliminated = true;
        pre.annotation.k_yc = Some(0.0);
        assert!(matches!(estimate_ape_pga(&pre, &cfg), Err(Error::NotAligned)));
        pre.annotation.aligned = true;
        let err = estimate_ape_pga(&pre, &cfg).unwrap_err();
        assert!(err.to_string().starts_with("insufficient scatterers"));
    }

    /// Image of point scatterers whose azimuth spectra carry `phase`.
    fn defocused(n: usize, bins: &[(usize, usize, C64)], phase: &[f64]) -> ComplexImage {
        let grid = ImageGrid::new(Point::ORIGIN, (0.06, 0.06), (n, 16)).unwrap();
        let mut img = ComplexImage::zeros(grid);
        for &(i, j, a) in bins {
            img.data[[i, j]] = a;
        }
        let mut spec = img.data.clone();
        dsp::transform_axis(&mut spec, 0, Direction::ToSpectrum);
        for (k, mut row) in spec.axis_iter_mut(Axis(0)).enumerate() {
            let band = (k as isize - n as isize / 2).abs() < n as isize / 4;
            let c = if band {
                C64::from_polar(1.0, phase[k])
            } else {
                C64::new(0.0, 0.0)
            };
            row.mapv_inplace(|v| v * c);
        }
        dsp::transform_axis(&mut spec, 0, Direction::ToImage);
        img.data = spec;
        img.annotation.ambiguity_eliminated = true;
        img.annotation.k_yc = Some(0.0);
        img.annotation.aligned = true;
        img
    }

    fn central_rms(a: &[f64], b: &[f64], kx: &[f64], lo: usize, hi: usize) -> f64 {
        let x = &kx[lo..hi];
        let mut d: Vec<f64> = (lo..hi).map(|k| a[k] - b[k]).collect();
        dsp::remove_affine(x, &mut d, None);
        dsp::rms(d)
    }

    #[test]
    fn pga_recovers_a_synthetic_quadratic() {
        let n = 128;
        let kx = axis(n, 0.8);
        let truth: Vec<f64> = (0..n)
            .map(|k| {
                let u = (k as f64 - 64.0) / 32.0;
                12.0 * u * u
            })
            .collect();
        let img = defocused(n, &[(60, 3, C64::new(1.0, 0.0)), (20, 9, C64::new(0.0, 0.7))], &truth);
        let ape = estimate_ape_pga(&img, &AutofocusConfig::default()).unwrap();
        assert!(central_rms(&ape.phase, &truth, &kx, 36, 92) < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn pga_invariances(global in -PI..PI, shift in 0usize..128, scale in 0.1f64..10.0) {
            let n = 128;
            let truth: Vec<f64> = (0..n)
                .map(|k| 4.0 * (2.0 * PI * (k as f64 - 32.0) / 64.0).sin())
                .collect();
            let img = defocused(n, &[(60, 3, C64::new(1.0, 0.0)), (90, 10, C64::new(0.5, 0.5))], &truth);
            let base = estimate_ape_pga(&img, &AutofocusConfig::default()).unwrap();
            let mut moved = img.clone();
            for i in 0..n {
                for j in 0..16 {
                    moved.data[[(i + shift) % n, j]] = img.data[[i, j]] * C64::from_polar(scale, global);
                }
            }
            let est = estimate_ape_pga(&moved, &AutofocusConfig::default()).unwrap();
            let kx = axis(n, 0.8);
            prop_assert!(central_rms(&base.phase, &est.phase, &kx, 36, 92) < 1e-6);
        }

        #[test]
        fn synthesis_reads_back_its_center_row(coeffs in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let kx = axis(64, 0.7);
            let phase: Vec<f64> = kx.iter().map(|k| {
                let u = k / 22.4;
                coeffs[0] * u + coeffs[1] * u * u * 10.0 + coeffs[2] * (3.0 * u).sin() * 5.0 + coeffs[3]
            }).collect();
            let ape = AzimuthPhaseError::new(kx, phase.clone()).unwrap();
            let k_yc = 419.169;
            let ky: Vec<f64> = axis(20, 2.6).iter().map(|k| k + k_yc).collect();
            let field = synthesize_2d_phase(&ape, &ky, k_yc).unwrap();
            prop_assert_eq!(field.phase.column(field.center_row().unwrap()).to_vec(), phase);
        }
    }
}
