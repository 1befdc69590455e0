//! Image ↔ wavenumber transforms and the two preprocessing corrections that
//! make the residual 2-D phase error space-invariant: down-conversion of the
//! range wavenumber to baseband and azimuth alignment of the spectrum
//! supports.

use std::f64::consts::PI;

use ndarray::{Array2, Axis, Zip};
use serde::Serialize;

use crate::autofocus::PhaseErrorField;
use crate::dsp::{self, Direction, C64};
use crate::error::{Error, Result};
use crate::fbp::{Annotation, ComplexImage, ImageGrid};

/// Default support threshold below the spectrum peak.
pub const DEFAULT_SUPPORT_THRESHOLD_DB: f64 = -6.0;

/// Centered 2-D spectrum of a [`ComplexImage`], `data[[i_kx, i_ky]]`.
///
/// `k_y_axis` is always the baseband axis of the transform. Once the image
/// has been down-converted, `k_y_offset` holds the removed carrier so that
/// physical range wavenumbers are `k_y_axis + k_y_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub data: Array2<C64>,
    pub k_x_axis: Vec<f64>,
    pub k_y_axis: Vec<f64>,
    pub k_y_offset: Option<f64>,
    pub source_grid: ImageGrid,
    pub annotation: Annotation,
}

impl Spectrum {
    /// True while the `k_y` axis is only known modulo the sampling span.
    pub fn is_ambiguous(&self) -> bool {
        self.k_y_offset.is_none()
    }

    /// Offset-restored `k_y` axis, available after ambiguity elimination.
    pub fn physical_k_y_axis(&self) -> Option<Vec<f64>> {
        self.k_y_offset
            .map(|off| self.k_y_axis.iter().map(|k| k + off).collect())
    }

    pub fn k_x_step(&self) -> f64 {
        2.0 * PI / (self.source_grid.dims.0 as f64 * self.source_grid.pixel_spacing.0)
    }

    pub fn k_y_step(&self) -> f64 {
        2.0 * PI / (self.source_grid.dims.1 as f64 * self.source_grid.pixel_spacing.1)
    }

    /// Width of the sampled `k_y` band, `2π/dy`.
    pub fn k_y_span(&self) -> f64 {
        2.0 * PI / self.source_grid.pixel_spacing.1
    }

    pub fn energy(&self) -> f64 {
        dsp::energy(&self.data)
    }
}

pub fn k_axes(grid: &ImageGrid) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = grid.dims;
    let (dx, dy) = grid.pixel_spacing;
    (
        dsp::centered_axis(nx, 2.0 * PI / (nx as f64 * dx)),
        dsp::centered_axis(ny, 2.0 * PI / (ny as f64 * dy)),
    )
}

/// Centered, unitary 2-D transform of the image. Phases are referenced to
/// the grid center.
pub fn to_spectrum(img: &ComplexImage) -> Spectrum {
    let mut data = img.data.clone();
    dsp::transform_2d(&mut data, Direction::ToSpectrum);
    let (k_x_axis, k_y_axis) = k_axes(&img.grid);
    Spectrum {
        data,
        k_x_axis,
        k_y_axis,
        k_y_offset: img.annotation.k_yc.filter(|_| img.annotation.ambiguity_eliminated),
        source_grid: img.grid,
        annotation: img.annotation.clone(),
    }
}

/// Inverse of [`to_spectrum`].
pub fn to_image(spec: &Spectrum) -> ComplexImage {
    let mut data = spec.data.clone();
    dsp::transform_2d(&mut data, Direction::ToImage);
    ComplexImage {
        data,
        grid: spec.source_grid,
        annotation: spec.annotation.clone(),
    }
}

/// Down-converts the range wavenumber: multiplies each pixel by
/// `exp(+j·y·k_yc)` with `y` the physical range coordinate.
pub fn eliminate_ambiguity(img: &ComplexImage, k_yc: f64) -> Result<ComplexImage> {
    if img.annotation.ambiguity_eliminated {
        return Err(Error::AlreadyBaseband);
    }
    let mut out = modulate_range(img, k_yc);
    out.annotation.ambiguity_eliminated = true;
    out.annotation.k_yc = Some(k_yc);
    Ok(out)
}

/// `img · exp(+j·y·k)` without touching the annotation.
pub fn modulate_range(img: &ComplexImage, k: f64) -> ComplexImage {
    let ramp: Vec<C64> = img.grid.ys().iter().map(|y| C64::from_polar(1.0, y * k)).collect();
    let mut out = img.clone();
    for mut row in out.data.axis_iter_mut(Axis(0)) {
        for (v, r) in row.iter_mut().zip(&ramp) {
            *v *= r;
        }
    }
    out
}

/// Removes the azimuth-dependent skew of the spectrum supports by
/// multiplying in the `(x, k_y)` domain with `exp(−j·k_y·x²/(2·standoff))`,
/// `k_y` offset-restored.
pub fn align_spectrum(img: &ComplexImage, standoff: f64) -> Result<ComplexImage> {
    let k_yc = match (img.annotation.ambiguity_eliminated, img.annotation.k_yc) {
        (true, Some(k)) => k,
        _ => return Err(Error::AmbiguityNotEliminated),
    };
    if !(standoff > 0.0) {
        return Err(crate::error::invalid("standoff must be positive"));
    }
    let mut data = img.data.clone();
    dsp::transform_axis(&mut data, 1, Direction::ToSpectrum);
    let (_, k_y) = k_axes(&img.grid);
    let xs = img.grid.xs();
    Zip::indexed(&mut data).for_each(|(i, j), v| {
        let k = k_y[j] + k_yc;
        *v *= C64::from_polar(1.0, -k * xs[i] * xs[i] / (2.0 * standoff));
    });
    dsp::transform_axis(&mut data, 1, Direction::ToImage);
    let mut out = img.clone();
    out.data = data;
    out.annotation.aligned = true;
    out.annotation.standoff = Some(standoff);
    Ok(out)
}

/// Support region of a spectrum and summary statistics over it.
#[derive(Debug, Clone, Serialize)]
pub struct SupportReport {
    #[serde(skip)]
    pub mask: Array2<bool>,
    pub bins: usize,
    /// Energy-weighted centroid on the baseband axes.
    pub centroid: (f64, f64),
    /// Energy-weighted `k_y` centroid treating the axis as periodic with the
    /// sampling span; unaffected by the wrap of an aliased support.
    pub circular_k_y_centroid: f64,
    pub k_x_extent: (f64, f64),
    /// `(min, max)` aspect angle over the mask; needs physical `k_y`.
    pub angular_extent: Option<(f64, f64)>,
    /// Orientation of the principal axis of the masked energy, measured from
    /// the `k_y` axis toward `k_x`.
    pub principal_axis_angle: f64,
}

impl SupportReport {
    pub fn angular_span(&self) -> Option<f64> {
        self.angular_extent.map(|(a, b)| b - a)
    }

    pub fn k_x_span(&self) -> f64 {
        self.k_x_extent.1 - self.k_x_extent.0
    }
}

/// Bins within `threshold_db` (negative or positive, taken as magnitude) of
/// the spectrum peak.
pub fn measure_support(spec: &Spectrum, threshold_db: f64) -> Result<SupportReport> {
    let power = spec.data.mapv(|v| v.norm_sqr());
    let peak = power.iter().cloned().fold(0.0_f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::EmptySupport(threshold_db));
    }
    let floor = peak * 10f64.powf(-threshold_db.abs() / 10.0);
    let mask = power.mapv(|p| p >= floor);

    let span = spec.k_y_span();
    let k_y_phys = spec.physical_k_y_axis();
    let mut w_sum = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    let mut circ = C64::new(0.0, 0.0);
    let mut kx_lo = f64::INFINITY;
    let mut kx_hi = f64::NEG_INFINITY;
    let mut th_lo = f64::INFINITY;
    let mut th_hi = f64::NEG_INFINITY;
    let mut bins = 0;
    for ((i, j), &m) in mask.indexed_iter() {
        if !m {
            continue;
        }
        bins += 1;
        let w = power[[i, j]];
        let (kx, ky) = (spec.k_x_axis[i], spec.k_y_axis[j]);
        w_sum += w;
        cx += w * kx;
        cy += w * ky;
        circ += C64::from_polar(w, 2.0 * PI * ky / span);
        kx_lo = kx_lo.min(kx);
        kx_hi = kx_hi.max(kx);
        if let Some(axis) = &k_y_phys {
            let th = kx.atan2(axis[j]);
            th_lo = th_lo.min(th);
            th_hi = th_hi.max(th);
        }
    }
    if bins == 0 {
        return Err(Error::EmptySupport(threshold_db));
    }
    cx /= w_sum;
    cy /= w_sum;

    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for ((i, j), &m) in mask.indexed_iter() {
        if m {
            let w = power[[i, j]];
            let dx = spec.k_x_axis[i] - cx;
            let dy = spec.k_y_axis[j] - cy;
            sxx += w * dx * dx;
            syy += w * dy * dy;
            sxy += w * dx * dy;
        }
    }
    let principal_axis_angle = 0.5 * (2.0 * sxy).atan2(syy - sxx);

    Ok(SupportReport {
        mask,
        bins,
        centroid: (cx, cy),
        circular_k_y_centroid: circ.arg() * span / (2.0 * PI),
        k_x_extent: (kx_lo, kx_hi),
        angular_extent: k_y_phys.map(|_| (th_lo, th_hi)),
        principal_axis_angle,
    })
}

/// `k` folded into `[−span/2, span/2)`.
pub fn alias(k: f64, span: f64) -> f64 {
    (k + span / 2.0).rem_euclid(span) - span / 2.0
}

/// Things a spectrum-domain phase field can be applied to.
pub trait PhaseCorrectable: Sized {
    fn apply_phase(&self, field: &PhaseErrorField, sign: f64) -> Result<Self>;
}

fn multiply_phase(data: &mut Array2<C64>, field: &PhaseErrorField, sign: f64) -> Result<()> {
    if field.phase.dim() != data.dim() {
        return Err(Error::ShapeMismatch {
            expected: data.dim(),
            actual: field.phase.dim(),
        });
    }
    Zip::from(data)
        .and(&field.phase)
        .for_each(|v, &p| *v *= C64::from_polar(1.0, sign * p));
    Ok(())
}

impl PhaseCorrectable for Spectrum {
    fn apply_phase(&self, field: &PhaseErrorField, sign: f64) -> Result<Self> {
        let mut out = self.clone();
        multiply_phase(&mut out.data, field, sign)?;
        Ok(out)
    }
}

impl PhaseCorrectable for ComplexImage {
    fn apply_phase(&self, field: &PhaseErrorField, sign: f64) -> Result<Self> {
        Ok(to_image(&to_spectrum(self).apply_phase(field, sign)?))
    }
}

/// Samplewise `exp(j·sign·Φ)` in the spectrum domain.
pub fn apply_phase<T: PhaseCorrectable>(target: &T, field: &PhaseErrorField, sign: f64) -> Result<T> {
    target.apply_phase(field, sign)
}
