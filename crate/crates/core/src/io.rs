//! On-disk formats: phase-history and complex-image binaries, dB-scaled
//! grayscale pixmaps and CSV profiles.
//!
//! Binaries are little-endian. Complex samples are stored as interleaved
//! `f32` real/imaginary pairs, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::autofocus::{AzimuthPhaseError, PhaseErrorField};
use crate::dsp::C64;
use crate::echo::PhaseHistory;
use crate::error::{Error, Result};
use crate::fbp::{Annotation, ComplexImage, ImageGrid};
use crate::geometry::{Point, RadarParams};

pub const PHASE_HISTORY_MAGIC: [u8; 8] = *b"SARPH\x00\x01\x00";
pub const IMAGE_MAGIC: [u8; 8] = *b"SARIMG\x01\x00";
pub const DEFAULT_DB_RANGE: f64 = 50.0;

struct Cursor<R: Read> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|e| Error::Format(format!("truncated file: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn samples(&mut self, shape: (usize, usize)) -> Result<Array2<C64>> {
        let n = shape.0 * shape.1;
        let mut raw = vec![0u8; n * 8];
        self.inner
            .read_exact(&mut raw)
            .map_err(|e| Error::Format(format!("truncated sample block: {e}")))?;
        let values: Vec<C64> = raw
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                C64::new(re as f64, im as f64)
            })
            .collect();
        let mut rest = [0u8; 1];
        if self.inner.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after sample block".into()));
        }
        Array2::from_shape_vec(shape, values).map_err(|e| Error::Format(e.to_string()))
    }
}

fn put_samples(out: &mut Vec<u8>, data: &Array2<C64>) {
    for v in data.iter() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} exceeds u32")))
}

pub fn encode_phase_history(ph: &PhaseHistory) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(48 + ph.data.len() * 8);
    out.extend_from_slice(&PHASE_HISTORY_MAGIC);
    out.extend_from_slice(&dim_u32(ph.pulse_count())?.to_le_bytes());
    out.extend_from_slice(&dim_u32(ph.sample_count())?.to_le_bytes());
    for v in [
        ph.fast_time_origin,
        ph.fast_time_spacing,
        ph.params.carrier_frequency,
        ph.params.bandwidth,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_samples(&mut out, &ph.data);
    Ok(out)
}

/// Reads a phase history and checks its header against `params`.
pub fn decode_phase_history(reader: impl Read, params: &RadarParams) -> Result<PhaseHistory> {
    let mut c = Cursor { inner: reader };
    if c.bytes::<8>()? != PHASE_HISTORY_MAGIC {
        return Err(Error::Format("not a phase-history file (bad magic)".into()));
    }
    let pulses = c.u32()? as usize;
    let samples = c.u32()? as usize;
    let origin = c.f64()?;
    let spacing = c.f64()?;
    let carrier = c.f64()?;
    let bandwidth = c.f64()?;
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs();
    if pulses != params.pulse_count
        || samples != params.fast_time_sample_count
        || !same(spacing, params.fast_time_spacing)
        || !same(carrier, params.carrier_frequency)
        || !same(bandwidth, params.bandwidth)
    {
        return Err(Error::Format(format!(
            "phase-history header ({pulses} × {samples}, f_c {carrier}, B {bandwidth}) does not match the radar parameters"
        )));
    }
    let data = c.samples((pulses, samples))?;
    Ok(PhaseHistory {
        data,
        fast_time_origin: origin,
        fast_time_spacing: spacing,
        params: params.clone(),
    })
}

pub fn write_phase_history(path: impl AsRef<Path>, ph: &PhaseHistory) -> Result<()> {
    std::fs::write(path, encode_phase_history(ph)?)?;
    Ok(())
}

pub fn read_phase_history(path: impl AsRef<Path>, params: &RadarParams) -> Result<PhaseHistory> {
    decode_phase_history(BufReader::new(File::open(path)?), params)
}

fn opt_f64(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn from_opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

pub fn encode_image(img: &ComplexImage) -> Result<Vec<u8>> {
    let g = &img.grid;
    let a = &img.annotation;
    let mut out = Vec::with_capacity(80 + img.data.len() * 8);
    out.extend_from_slice(&IMAGE_MAGIC);
    out.extend_from_slice(&dim_u32(g.dims.0)?.to_le_bytes());
    out.extend_from_slice(&dim_u32(g.dims.1)?.to_le_bytes());
    for v in [g.center.x, g.center.y, g.pixel_spacing.0, g.pixel_spacing.1] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&a.flag_bits().to_le_bytes());
    out.extend_from_slice(&opt_f64(a.k_yc).to_le_bytes());
    out.extend_from_slice(&opt_f64(a.standoff).to_le_bytes());
    out.extend_from_slice(&dim_u32(a.range_reduction.unwrap_or(0))?.to_le_bytes());
    out.extend_from_slice(&a.clipped_samples.to_le_bytes());
    put_samples(&mut out, &img.data);
    Ok(out)
}

pub fn decode_image(reader: impl Read) -> Result<ComplexImage> {
    let mut c = Cursor { inner: reader };
    if c.bytes::<8>()? != IMAGE_MAGIC {
        return Err(Error::Format("not a complex-image file (bad magic)".into()));
    }
    let nx = c.u32()? as usize;
    let ny = c.u32()? as usize;
    let (cx, cy, dx, dy) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
    let flags = c.u32()?;
    let k_yc = from_opt(c.f64()?);
    let standoff = from_opt(c.f64()?);
    let reduction = c.u32()? as usize;
    let clipped = c.u64()?;
    let grid = ImageGrid::new(Point::new(cx, cy), (dx, dy), (nx, ny)).map_err(|e| Error::Format(e.to_string()))?;
    let data = c.samples((nx, ny))?;
    let annotation = Annotation {
        ambiguity_eliminated: flags & 1 != 0,
        k_yc,
        aligned: flags & 2 != 0,
        standoff,
        autofocused: flags & 4 != 0,
        range_reduction: (reduction > 0).then_some(reduction),
        clipped_samples: clipped,
        warnings: Vec::new(),
    };
    Ok(ComplexImage { data, grid, annotation })
}

pub fn write_image(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    std::fs::write(path, encode_image(img)?)?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ComplexImage> {
    decode_image(BufReader::new(File::open(path)?))
}

/// 8-bit binary PGM. `values[[col, row]]` in `[0, 1]`; row 0 is written at
/// the top.
pub fn encode_pgm(values: &Array2<f64>) -> Vec<u8> {
    let (w, h) = values.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for r in 0..h {
        for col in 0..w {
            out.push((values[[col, r]].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

/// Magnitude in dB relative to the peak, mapped so `-db_range` is black.
/// Range (`y`) increases upward on the page.
pub fn magnitude_pixmap(data: &Array2<C64>, db_range: f64) -> Array2<f64> {
    let peak = data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (w, h) = data.dim();
    Array2::from_shape_fn((w, h), |(i, r)| {
        let v = data[[i, h - 1 - r]].norm();
        if peak == 0.0 || v == 0.0 {
            return 0.0;
        }
        let db = 20.0 * (v / peak).log10();
        1.0 + db / db_range
    })
}

/// Linear min–max scaling of a real field.
pub fn field_pixmap(values: &Array2<f64>) -> Array2<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = values.dim();
    Array2::from_shape_fn((w, h), |(i, r)| (values[[i, h - 1 - r]] - lo) / span)
}

pub fn write_magnitude_pgm(path: impl AsRef<Path>, data: &Array2<C64>, db_range: f64) -> Result<()> {
    std::fs::write(path, encode_pgm(&magnitude_pixmap(data, db_range)))?;
    Ok(())
}

pub fn write_field_pgm(path: impl AsRef<Path>, field: &PhaseErrorField) -> Result<()> {
    std::fs::write(path, encode_pgm(&field_pixmap(&field.phase)))?;
    Ok(())
}

/// Column CSV with a header row. All columns must share a length.
pub fn write_csv(path: impl AsRef<Path>, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) || headers.len() != columns.len() {
        return Err(Error::Format(
            "CSV columns must have equal lengths and one header each".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", headers.join(","))?;
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| format!("{:.9e}", c[r])).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ape_csv(path: impl AsRef<Path>, ape: &AzimuthPhaseError) -> Result<()> {
    let support: Vec<f64> = ape.support.iter().map(|&s| s as u8 as f64).collect();
    write_csv(
        path,
        &["k_x_rad_per_m", "phase_rad", "in_support"],
        &[&ape.k_x_axis, &ape.phase, &support],
    )
}
