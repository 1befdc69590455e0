//! Focus-quality measures and point-response geometry.
//!
//! Contrast and entropy are computed on pixel intensity `|I|²`.

use ndarray::Axis;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Direction, C64};
use crate::error::{Error, Result};
use crate::fbp::ComplexImage;
use crate::geometry::Point;

/// Peak-to-median ratio a point response must exceed.
pub const DOMINANT_PEAK_DB: f64 = 10.0;
/// Azimuth-spectrum rows below this level are ignored when tracking RCM.
pub const RCM_ROW_FLOOR_DB: f64 = -10.0;
const CUT_UPSAMPLE: usize = 16;

fn intensities(img: &ComplexImage) -> Result<Vec<f64>> {
    let p: Vec<f64> = img.data.iter().map(|v| v.norm_sqr()).collect();
    if p.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroImage);
    }
    Ok(p)
}

/// `std(|I|²) / mean(|I|²)`.
pub fn contrast(img: &ComplexImage) -> Result<f64> {
    let p = intensities(img)?;
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let var = p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// `−Σ p·ln p` over `p = |I|² / Σ|I|²`, in nats.
pub fn entropy(img: &ComplexImage) -> Result<f64> {
    let p = intensities(img)?;
    let total: f64 = p.iter().sum();
    Ok(p.iter()
        .filter(|v| **v > 0.0)
        .map(|v| {
            let q = v / total;
            -q * q.ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// `|⟨a, b⟩| / (‖a‖·‖b‖)` over the complex samples.
pub fn correlation(a: &ComplexImage, b: &ComplexImage) -> Result<f64> {
    if a.data.dim() != b.data.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.data.dim(),
            actual: b.data.dim(),
        });
    }
    let mut inner = C64::new(0.0, 0.0);
    for (x, y) in a.data.iter().zip(b.data.iter()) {
        inner += x * y.conj();
    }
    let norm = (a.energy() * b.energy()).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroImage);
    }
    Ok(inner.norm() / norm)
}

/// Normalized correlation of the magnitude images.
pub fn magnitude_correlation(a: &ComplexImage, b: &ComplexImage) -> Result<f64> {
    let mut ma = a.clone();
    ma.data.mapv_inplace(|v| C64::new(v.norm(), 0.0));
    let mut mb = b.clone();
    mb.data.mapv_inplace(|v| C64::new(v.norm(), 0.0));
    correlation(&ma, &mb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusReport {
    pub contrast: f64,
    pub entropy: f64,
    pub peak_position: (f64, f64),
    pub peak_magnitude: f64,
    /// Offset of the peak from the expected position, meters.
    pub peak_offset: (f64, f64),
    /// −3 dB widths along azimuth and range, meters.
    pub mainlobe_width: (f64, f64),
    /// Range excursion of the target's peak across its azimuth spectrum.
    pub measured_rcm: f64,
}

/// Vertex offset of a parabola through three samples, in `[-0.5, 0.5]`.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

/// Full width at half power of a cut through its sample `peak`, in samples.
fn half_power_width(cut: &[C64], peak: usize, planner: &mut FftPlanner<f64>) -> Option<f64> {
    let up = dsp::fft_upsample(cut, CUT_UPSAMPLE, planner);
    let p: Vec<f64> = up.iter().map(|v| v.norm_sqr()).collect();
    let m = p.len();
    let around = (peak * CUT_UPSAMPLE).saturating_sub(CUT_UPSAMPLE)..((peak + 1) * CUT_UPSAMPLE).min(m);
    let center = around.max_by(|a, b| p[*a].total_cmp(&p[*b]))?;
    let half = 0.5 * p[center];
    let mut right = None;
    for k in center..m - 1 {
        if p[k + 1] < half {
            right = Some(k as f64 + (p[k] - half) / (p[k] - p[k + 1]));
            break;
        }
    }
    let mut left = None;
    for k in (1..=center).rev() {
        if p[k - 1] < half {
            left = Some(k as f64 - (p[k] - half) / (p[k] - p[k - 1]));
            break;
        }
    }
    Some((right? - left?) / CUT_UPSAMPLE as f64)
}

/// Peak location, resolution and migration of the dominant point response.
pub fn point_response_report(img: &ComplexImage, expected: Point) -> Result<FocusReport> {
    let mut mags: Vec<f64> = img.data.iter().map(|v| v.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    let (pi, pj) = img.peak_index();
    let peak = img.data[[pi, pj]].norm();
    if peak == 0.0 {
        return Err(Error::ZeroImage);
    }
    let ratio_db = if median > 0.0 {
        20.0 * (peak / median).log10()
    } else {
        f64::INFINITY
    };
    if ratio_db < DOMINANT_PEAK_DB {
        return Err(Error::NoDominantPeak(ratio_db));
    }
    let (nx, ny) = img.grid.dims;
    let (dx, dy) = img.grid.pixel_spacing;
    let at = |i: usize, j: usize| img.data[[i % nx, j % ny]].norm_sqr();
    let ox = parabolic_offset(at(pi + nx - 1, pj), at(pi, pj), at(pi + 1, pj));
    let oy = parabolic_offset(at(pi, pj + ny - 1), at(pi, pj), at(pi, pj + 1));
    let peak_position = (img.grid.x(pi) + ox * dx, img.grid.y(pj) + oy * dy);

    let mut planner = FftPlanner::new();
    let row: Vec<C64> = img.data.column(pj).to_vec();
    let col: Vec<C64> = img.data.row(pi).to_vec();
    let wx = half_power_width(&row, pi, &mut planner).map_or(f64::NAN, |w| w * dx);
    let wy = half_power_width(&col, pj, &mut planner).map_or(f64::NAN, |w| w * dy);

    Ok(FocusReport {
        contrast: contrast(img)?,
        entropy: entropy(img)?,
        peak_position,
        peak_magnitude: peak,
        peak_offset: (peak_position.0 - expected.x, peak_position.1 - expected.y),
        mainlobe_width: (wx, wy),
        measured_rcm: measured_rcm(img),
    })
}

/// Range excursion (meters) of the per-row range peak in the azimuth
/// wavenumber / range view, over rows within 10 dB of the strongest row.
pub fn measured_rcm(img: &ComplexImage) -> f64 {
    let mut view = img.data.clone();
    dsp::transform_axis(&mut view, 0, Direction::ToSpectrum);
    let ny = img.grid.dims.1;
    let energies: Vec<f64> = view
        .axis_iter(Axis(0))
        .map(|r| r.iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let emax = energies.iter().cloned().fold(0.0, f64::max);
    let floor = emax * 10f64.powf(RCM_ROW_FLOOR_DB / 10.0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (row, e) in view.axis_iter(Axis(0)).zip(&energies) {
        if *e < floor || *e == 0.0 {
            continue;
        }
        let p: Vec<f64> = row.iter().map(|v| v.norm_sqr()).collect();
        let j = (0..ny).max_by(|a, b| p[*a].total_cmp(&p[*b])).unwrap_or(0);
        let off = parabolic_offset(p[(j + ny - 1) % ny], p[j], p[(j + 1) % ny]);
        let y = (j as f64 + off) * img.grid.pixel_spacing.1;
        lo = lo.min(y);
        hi = hi.max(y);
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbp::ImageGrid;
    use proptest::prelude::*;

    fn grid(n: usize) -> ImageGrid {
        ImageGrid::new(Point::ORIGIN, (0.04, 0.04), (n, n)).unwrap()
    }

    #[test]
    fn uniform_image_has_zero_contrast_and_max_entropy() {
        let mut img = ComplexImage::zeros(grid(8));
        img.data.fill(C64::new(0.0, 2.0));
        assert!(contrast(&img).unwrap().abs() < 1e-12);
        assert!((entropy(&img).unwrap() - 64f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_closed_forms() {
        let mut img = ComplexImage::zeros(grid(10));
        img.data[[3, 7]] = C64::new(1.5, -0.5);
        assert!((contrast(&img).unwrap() - 99f64.sqrt()).abs() < 1e-10);
        assert_eq!(entropy(&img).unwrap(), 0.0);
    }

    #[test]
    fn zero_image_errors() {
        let img = ComplexImage::zeros(grid(4));
        assert!(matches!(contrast(&img), Err(Error::ZeroImage)));
        assert!(matches!(entropy(&img), Err(Error::ZeroImage)));
    }

    #[test]
    fn flat_image_has_no_dominant_peak() {
        let mut img = ComplexImage::zeros(grid(8));
        img.data.fill(C64::new(1.0, 0.0));
        img.data[[2, 2]] = C64::new(2.0, 0.0);
        assert!(matches!(
            point_response_report(&img, Point::ORIGIN),
            Err(Error::NoDominantPeak(_))
        ));
    }

    #[test]
    fn sinc_response_width() {
        // separable sinc with 0.12 m resolution sampled at 0.03 m
        let g = ImageGrid::new(Point::ORIGIN, (0.03, 0.03), (64, 64)).unwrap();
        let mut img = ComplexImage::zeros(g);
        for ((i, j), v) in img.data.indexed_iter_mut() {
            *v = C64::new(dsp::sinc(g.x(i) / 0.12) * dsp::sinc(g.y(j) / 0.12), 0.0);
        }
        let r = point_response_report(&img, Point::ORIGIN).unwrap();
        assert!(r.peak_offset.0.abs() < 1e-9 && r.peak_offset.1.abs() < 1e-9);
        for w in [r.mainlobe_width.0, r.mainlobe_width.1] {
            assert!((w - 0.886 * 0.12).abs() < 0.003, "{w}");
        }
        assert!(r.measured_rcm < 0.03);
    }

    proptest! {
        #[test]
        fn metrics_ignore_phase_translation_and_scale(seed in any::<u64>(), rot in -3.0f64..3.0, scale in 0.01f64..100.0, shift in 0usize..8) {
            let mut img = ComplexImage::zeros(grid(8));
            let mut s = seed | 1;
            for v in img.data.iter_mut() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                *v = C64::new((s % 1000) as f64 / 1000.0, ((s >> 20) % 1000) as f64 / 1000.0);
            }
            let mut other = img.clone();
            for i in 0..8 {
                for j in 0..8 {
                    other.data[[(i + shift) % 8, (j + 3 * shift) % 8]] = img.data[[i, j]] * C64::from_polar(scale, rot);
                }
            }
            let (c0, c1) = (contrast(&img).unwrap(), contrast(&other).unwrap());
            let (e0, e1) = (entropy(&img).unwrap(), entropy(&other).unwrap());
            prop_assert!((c0 - c1).abs() < 1e-9 * c0.max(1.0));
            prop_assert!((e0 - e1).abs() < 1e-9 * e0.max(1.0));
            prop_assert!(c0 >= 0.0 && e0 >= 0.0);
        }
    }
}
