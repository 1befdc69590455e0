//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! The scene is a reduced copy of the bundled scenario (fewer pulses, a
//! smaller grid) so that a full simulate/image/autofocus round trip stays
//! interactive in a browser tab.

use sarfocus::autofocus::{
    autofocus_pipeline, estimate_ape_pga, reduce_range_resolution, FocusMetrics, PhaseErrorField,
};
use sarfocus::echo::{simulate_phase_history, PerturbAxis, PerturbationSpec};
use sarfocus::fbp::{backproject, ComplexImage};
use sarfocus::io::{field_pixmap, magnitude_pixmap};
use sarfocus::scenario::{Scenario, ScenarioFile, DEFAULT_SCENARIO};
use sarfocus::spectrum::{self, apply_phase};
use wasm_bindgen::prelude::*;

const DB_RANGE: f64 = 45.0;

fn js_err(e: sarfocus::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Grayscale pixmap in row-major order, top row first.
#[wasm_bindgen]
pub struct Pixmap {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

#[wasm_bindgen]
impl Pixmap {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }
    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }
    /// RGBA bytes ready for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|&v| [v, v, v, 255]).collect()
    }
}

impl Pixmap {
    // pixmaps from `io` are indexed [column, row] with values in [0, 1]
    fn from_unit(values: &ndarray::Array2<f64>) -> Self {
        let (width, height) = values.dim();
        let pixels = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| (values[[c, r]].clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Pixmap { width, height, pixels }
    }
}

pub fn demo_scenario(amplitude_m: f64, cycles: f64, along_range: bool) -> sarfocus::Result<Scenario> {
    let mut file = ScenarioFile::parse(DEFAULT_SCENARIO)?;
    file.id = "web-demo".into();
    file.radar.pulse_count = 256;
    file.radar.fast_time_sample_count = 512;
    file.grid.dims = [128, 64];
    file.grid.spacing_m = [0.08, 0.08];
    file.scene.half_extent_m = [4.0, 2.0];
    for t in &mut file.scene.targets {
        t.x_m *= 0.5;
        t.y_m *= 0.5;
    }
    file.perturbation = if amplitude_m == 0.0 {
        PerturbationSpec::None
    } else {
        PerturbationSpec::Sinusoidal {
            amplitude_m,
            cycles,
            phase_rad: 0.0,
            axis: if along_range {
                PerturbAxis::Range
            } else {
                PerturbAxis::Azimuth
            },
        }
    };
    Scenario::build(file, None)
}

/// One simulated collection with its images.
#[wasm_bindgen]
pub struct Demo {
    scenario: Scenario,
    defocused: ComplexImage,
    refocused: Option<ComplexImage>,
    one_d: Option<ComplexImage>,
    ape: Vec<f64>,
    field: Option<PhaseErrorField>,
    history: Vec<FocusMetrics>,
}

#[wasm_bindgen]
impl Demo {
    /// Simulates echoes along a path wobbling by `amplitude_m` and forms
    /// the image with the nominal path.
    #[wasm_bindgen(constructor)]
    pub fn new(amplitude_m: f64, cycles: f64, along_range: bool) -> Result<Demo, JsError> {
        Self::build(amplitude_m, cycles, along_range).map_err(js_err)
    }

    pub fn defocused(&self) -> Pixmap {
        Pixmap::from_unit(&magnitude_pixmap(&self.defocused.data, DB_RANGE))
    }

    /// Spectrum magnitude: 0 raw, 1 after ambiguity elimination,
    /// 2 after elimination and alignment.
    pub fn spectrum(&self, stage: u8) -> Result<Pixmap, JsError> {
        self.spectrum_view(stage).map(|v| Pixmap::from_unit(&v)).map_err(js_err)
    }

    /// Runs the 2-D autofocus and the azimuth-only baseline.
    pub fn autofocus(&mut self) -> Result<(), JsError> {
        self.run_autofocus().map_err(js_err)
    }

    pub fn refocused(&self) -> Option<Pixmap> {
        self.refocused
            .as_ref()
            .map(|i| Pixmap::from_unit(&magnitude_pixmap(&i.data, DB_RANGE)))
    }

    pub fn azimuth_only(&self) -> Option<Pixmap> {
        self.one_d
            .as_ref()
            .map(|i| Pixmap::from_unit(&magnitude_pixmap(&i.data, DB_RANGE)))
    }

    /// Accumulated 2-D phase error field, scaled to [0, 1].
    pub fn field(&self) -> Option<Pixmap> {
        self.field.as_ref().map(|f| Pixmap::from_unit(&field_pixmap(&f.phase)))
    }

    /// Total estimated azimuth phase error, radians, one value per k_x bin.
    pub fn ape(&self) -> Vec<f64> {
        self.ape.clone()
    }

    /// Contrast and entropy pairs: defocused, azimuth-only, then one pair
    /// per history entry of the 2-D run.
    pub fn metrics(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for img in [Some(&self.defocused), self.one_d.as_ref()].into_iter().flatten() {
            if let Ok(m) = FocusMetrics::of(img) {
                out.extend([m.contrast, m.entropy]);
            }
        }
        for m in &self.history {
            out.extend([m.contrast, m.entropy]);
        }
        out
    }
}

impl Demo {
    pub fn build(amplitude_m: f64, cycles: f64, along_range: bool) -> sarfocus::Result<Demo> {
        let scenario = demo_scenario(amplitude_m, cycles, along_range)?;
        let s = &scenario;
        let ph = simulate_phase_history(&s.params, &s.truth, &s.scene, s.fast_time_origin)?;
        let defocused = backproject(&ph, &s.nominal, &s.grid, &s.imaging)?;
        Ok(Demo {
            scenario,
            defocused,
            refocused: None,
            one_d: None,
            ape: Vec::new(),
            field: None,
            history: Vec::new(),
        })
    }

    pub fn spectrum_view(&self, stage: u8) -> sarfocus::Result<ndarray::Array2<f64>> {
        let g = self.scenario.focus_geometry();
        let img = match stage {
            0 => self.defocused.clone(),
            1 => spectrum::eliminate_ambiguity(&self.defocused, g.k_yc)?,
            _ => spectrum::align_spectrum(&spectrum::eliminate_ambiguity(&self.defocused, g.k_yc)?, g.standoff)?,
        };
        Ok(magnitude_pixmap(&spectrum::to_spectrum(&img).data, DB_RANGE))
    }

    pub fn run_autofocus(&mut self) -> sarfocus::Result<()> {
        let g = self.scenario.focus_geometry();
        let config = self.scenario.autofocus();
        let result = autofocus_pipeline(&self.defocused, g, &config)?;

        // baseline: one azimuth-only correction of the same preprocessed image
        let reduced = reduce_range_resolution(&result.preprocessed, config.range_collapse_factor)?;
        let ape = estimate_ape_pga(&reduced, &config)?;
        let spec = spectrum::to_spectrum(&result.preprocessed);
        let flat = PhaseErrorField::azimuth_only(&ape, &spec.k_y_axis, g.k_yc);
        self.one_d = Some(spectrum::to_image(&apply_phase(&spec, &flat, -1.0)?));

        let mut total = vec![0.0; spec.k_x_axis.len()];
        for a in &result.ape_history {
            for (t, p) in total.iter_mut().zip(&a.phase) {
                *t += p;
            }
        }
        let mut field: Option<PhaseErrorField> = None;
        for f in &result.field_history {
            match field.as_mut() {
                Some(acc) => acc.add(f)?,
                None => field = Some(f.clone()),
            }
        }
        self.ape = total;
        self.field = field;
        self.history = result.metrics_history;
        self.refocused = Some(result.refocused);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_round_trip_improves_focus() {
        let mut demo = Demo::build(0.04, 1.0, true).unwrap();
        let before = demo.defocused();
        assert_eq!((before.width, before.height), (128, 64));
        for stage in 0..3 {
            let v = demo.spectrum_view(stage).unwrap();
            assert_eq!(v.len(), 128 * 64);
        }
        demo.run_autofocus().unwrap();
        let m = demo.metrics();
        let (c_def, e_def) = (m[0], m[1]);
        let (c_fin, e_fin) = (m[m.len() - 2], m[m.len() - 1]);
        assert!(c_fin > c_def && e_fin < e_def, "{m:?}");
        assert_eq!(demo.ape().len(), 128);
        assert_eq!(demo.refocused().unwrap().rgba().len(), 4 * 128 * 64);
        assert!(demo.field().is_some());
    }

    #[test]
    fn unperturbed_demo_has_no_perturbation() {
        let s = demo_scenario(0.0, 1.0, true).unwrap();
        assert_eq!(s.file.perturbation, PerturbationSpec::None);
    }
}
