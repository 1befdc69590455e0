//! Shared signal-processing kernels: centered DFTs, band-limited interpolation
//! and a few small fitting utilities.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub type C64 = Complex64;

/// Which way a centered transform goes.
///
/// The wavenumber convention throughout the crate is
/// `f(x) = Σ_k S(k) · exp(-j·k·x)`, so the transform into the spectrum uses
/// the positive exponent and the transform back to the image the negative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToSpectrum,
    ToImage,
}

impl Direction {
    fn fft_direction(self) -> FftDirection {
        match self {
            Direction::ToSpectrum => FftDirection::Inverse,
            Direction::ToImage => FftDirection::Forward,
        }
    }
}

/// Unitary DFT with its origin at index `len / 2` on both sides.
#[derive(Clone)]
pub struct CenteredDft {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl CenteredDft {
    pub fn new(len: usize, direction: Direction) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft(len, direction.fft_direction());
        Self {
            len,
            fft,
            scale: 1.0 / (len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn process(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        let half = self.len / 2;
        buf.rotate_left(half);
        self.fft.process(buf);
        buf.rotate_right(half);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

/// One-shot centered transform of a slice.
pub fn centered_dft(buf: &mut [C64], direction: Direction) {
    CenteredDft::new(buf.len(), direction).process(buf);
}

/// Centered, unitary transform of every lane of `data` along `axis`.
pub fn transform_axis(data: &mut Array2<C64>, axis: usize, direction: Direction) {
    let len = data.len_of(Axis(axis));
    let dft = CenteredDft::new(len, direction);
    let other = 1 - axis;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let mut lanes: Vec<Vec<C64>> = data.axis_iter(Axis(other)).map(|lane| lane.to_vec()).collect();
        lanes.par_iter_mut().for_each(|lane| dft.process(lane));
        for (mut dst, src) in data.axis_iter_mut(Axis(other)).zip(lanes) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s;
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut buf = vec![C64::new(0.0, 0.0); len];
        for mut lane in data.axis_iter_mut(Axis(other)) {
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            dft.process(&mut buf);
            for (v, b) in lane.iter_mut().zip(buf.iter()) {
                *v = *b;
            }
        }
    }
}

/// Centered 2-D transform (both axes).
pub fn transform_2d(data: &mut Array2<C64>, direction: Direction) {
    transform_axis(data, 0, direction);
    transform_axis(data, 1, direction);
}

/// Axis of a centered transform: `(i - n/2) · step`.
pub fn centered_axis(n: usize, step: f64) -> Vec<f64> {
    let half = (n / 2) as f64;
    (0..n).map(|i| (i as f64 - half) * step).collect()
}

/// Normalized sinc, `sin(πx)/(πx)`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (series form).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc weight for a tap at offset `x` from the interpolation
/// point, with a window spanning `half_width` samples on either side.
pub fn kaiser_sinc(x: f64, half_width: f64, beta: f64) -> f64 {
    let r = x / half_width;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    sinc(x) * bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

/// Polyphase table for an even-tap windowed-sinc interpolator.
///
/// For a sample position `base + frac` the taps cover indices
/// `base - taps/2 + 1 ..= base + taps/2`.
#[derive(Debug, Clone)]
pub struct SincTable {
    taps: usize,
    phases: usize,
    weights: Vec<f64>,
}

impl SincTable {
    pub fn new(taps: usize, phases: usize) -> Self {
        assert!(taps >= 2 && taps.is_multiple_of(2));
        let half = (taps / 2) as f64;
        let mut weights = Vec::with_capacity((phases + 1) * taps);
        for p in 0..=phases {
            let frac = p as f64 / phases as f64;
            let row: Vec<f64> = (0..taps)
                .map(|i| {
                    let offset = i as f64 - (half - 1.0) - frac;
                    kaiser_sinc(offset, half, 5.0)
                })
                .collect();
            let norm: f64 = row.iter().sum();
            weights.extend(row.into_iter().map(|w| w / norm));
        }
        Self { taps, phases, weights }
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Interpolates `data` at fractional index `pos`; `None` when any tap
    /// falls outside the buffer.
    #[inline]
    pub fn interpolate(&self, data: &[C64], pos: f64) -> Option<C64> {
        let base = pos.floor();
        let frac = pos - base;
        let start = base as isize - (self.taps as isize / 2 - 1);
        if start < 0 || start as usize + self.taps > data.len() {
            return None;
        }
        let p = (frac * self.phases as f64).round() as usize;
        let w = &self.weights[p * self.taps..(p + 1) * self.taps];
        let s = &data[start as usize..start as usize + self.taps];
        let mut acc = C64::new(0.0, 0.0);
        for (v, wi) in s.iter().zip(w) {
            acc += v * wi;
        }
        Some(acc)
    }
}

/// FFT interpolation of a periodic band-limited sequence by an integer factor.
/// Output sample `m` sits at input position `m / factor`.
pub fn fft_upsample(input: &[C64], factor: usize, planner: &mut FftPlanner<f64>) -> Vec<C64> {
    let n = input.len();
    if factor == 1 {
        return input.to_vec();
    }
    let m = n * factor;
    let mut spec = input.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);
    let mut padded = vec![C64::new(0.0, 0.0); m];
    let pos = n.div_ceil(2);
    padded[..pos].copy_from_slice(&spec[..pos]);
    let neg = n / 2;
    padded[m - neg..].copy_from_slice(&spec[n - neg..]);
    if n.is_multiple_of(2) {
        // split the Nyquist bin between the positive and negative halves
        let nyq = spec[n / 2] * 0.5;
        padded[n / 2] = nyq;
        padded[m - n / 2] = nyq;
    }
    planner.plan_fft_inverse(m).process(&mut padded);
    let scale = 1.0 / n as f64;
    for v in padded.iter_mut() {
        *v *= scale;
    }
    padded
}

/// Least-squares fit of `a + b·x`, optionally weighted. Returns `(a, b)`.
pub fn fit_affine(x: &[f64], y: &[f64], w: Option<&[f64]>) -> (f64, f64) {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in 0..x.len() {
        let wi = w.map_or(1.0, |w| w[i]);
        sw += wi;
        sx += wi * x[i];
        sy += wi * y[i];
    }
    if sw == 0.0 {
        return (0.0, 0.0);
    }
    let mx = sx / sw;
    let my = sy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let wi = w.map_or(1.0, |w| w[i]);
        let dx = x[i] - mx;
        sxx += wi * dx * dx;
        sxy += wi * dx * (y[i] - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Removes the best-fit constant and slope in place.
pub fn remove_affine(x: &[f64], y: &mut [f64], w: Option<&[f64]>) {
    let (a, b) = fit_affine(x, y, w);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= a + b * xi;
    }
}

/// Least-squares polynomial fit (normal equations on a scaled abscissa).
/// Returns coefficients in the original abscissa, lowest order first.
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut ata = vec![vec![0.0; n]; n];
    let mut aty = vec![0.0; n];
    for (xi, yi) in x.iter().zip(y) {
        let u = xi / scale;
        let mut pows = vec![1.0; n];
        for k in 1..n {
            pows[k] = pows[k - 1] * u;
        }
        for r in 0..n {
            aty[r] += pows[r] * yi;
            for c in 0..n {
                ata[r][c] += pows[r] * pows[c];
            }
        }
    }
    let coeffs = solve_dense(ata, aty).unwrap_or_else(|| vec![0.0; n]);
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect()
}

pub fn eval_polynomial(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Wraps a phase into `(-π, π]`.
#[inline]
pub fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Sequential 1-D phase unwrapping.
pub fn unwrap(phase: &mut [f64]) {
    for i in 1..phase.len() {
        let d = wrap_phase(phase[i] - phase[i - 1]);
        phase[i] = phase[i - 1] + d;
    }
}

pub fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

pub fn energy(data: &Array2<C64>) -> f64 {
    data.iter().map(|v| v.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_centered(buf: &[C64], sign: f64) -> Vec<C64> {
        let n = buf.len();
        let h = (n / 2) as f64;
        (0..n)
            .map(|m| {
                let mut acc = C64::new(0.0, 0.0);
                for (i, v) in buf.iter().enumerate() {
                    let arg = sign * 2.0 * PI * (m as f64 - h) * (i as f64 - h) / n as f64;
                    acc += v * C64::from_polar(1.0, arg);
                }
                acc / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn centered_dft_matches_naive_for_even_and_odd_lengths() {
        for n in [8usize, 9, 16, 15] {
            let data: Vec<C64> = (0..n)
                .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let mut fast = data.clone();
            centered_dft(&mut fast, Direction::ToSpectrum);
            let slow = naive_centered(&data, 1.0);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12);
            }
            centered_dft(&mut fast, Direction::ToImage);
            for (a, b) in fast.iter().zip(&data) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn upsample_reproduces_band_limited_tone() {
        let n = 32;
        let f = 3.0 / n as f64;
        let x: Vec<C64> = (0..n).map(|i| C64::from_polar(1.0, 2.0 * PI * f * i as f64)).collect();
        let mut planner = FftPlanner::new();
        let up = fft_upsample(&x, 4, &mut planner);
        for (m, v) in up.iter().enumerate() {
            let expect = C64::from_polar(1.0, 2.0 * PI * f * m as f64 / 4.0);
            assert!((v - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn sinc_table_is_exact_on_grid_and_accurate_between() {
        let table = SincTable::new(8, 2048);
        let data: Vec<C64> = (0..64).map(|i| C64::from_polar(1.0, 0.3 * i as f64)).collect();
        assert!((table.interpolate(&data, 20.0).unwrap() - data[20]).norm() < 1e-12);
        let v = table.interpolate(&data, 20.5).unwrap();
        assert!((v - C64::from_polar(1.0, 0.3 * 20.5)).norm() < 2e-3);
        assert!(table.interpolate(&data, 1.0).is_none());
    }

    #[test]
    fn polynomial_fit_recovers_quadratic() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.3 - 7.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v + 0.04 * v * v).collect();
        let c = fit_polynomial(&x, &y, 2);
        assert!((c[0] - 1.5).abs() < 1e-10);
        assert!((c[1] + 0.25).abs() < 1e-10);
        assert!((c[2] - 0.04).abs() < 1e-10);
    }

    #[test]
    fn unwrap_restores_ramp() {
        let truth: Vec<f64> = (0..100).map(|i| 0.9 * i as f64).collect();
        let mut wrapped: Vec<f64> = truth.iter().map(|p| wrap_phase(*p)).collect();
        unwrap(&mut wrapped);
        for (a, b) in wrapped.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
