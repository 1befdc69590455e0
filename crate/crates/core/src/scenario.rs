//! Scenario files: a TOML description of radar, flight path, motion error,
//! scene, image grid and autofocus settings, with explicit units in the key
//! names.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autofocus::{AutofocusConfig, FocusGeometry};
use crate::echo::{fast_time_origin_covering, perturb_trajectory, PerturbationSpec, FAST_TIME_OVERSAMPLING};
use crate::error::{Error, Result};
use crate::fbp::{BackprojectOptions, ImageGrid, Interp};
use crate::geometry::{wavenumber_support, Point, RadarParams, Scene, Target, Trajectory, SPEED_OF_LIGHT};

/// The bundled default: X-band radar with 0.12 m resolution at 15 km, a
/// reduced aperture and a sinusoidal range-direction motion error.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSection {
    pub carrier_frequency_hz: f64,
    /// Give either the bandwidth or the range resolution `c/(2B)`.
    pub bandwidth_hz: Option<f64>,
    pub range_resolution_m: Option<f64>,
    pub fast_time_sample_count: usize,
    #[serde(default = "default_oversampling")]
    pub fast_time_oversampling: f64,
    pub pulse_count: usize,
    /// Give either the pulse interval or the azimuth resolution the
    /// aperture should deliver.
    pub pulse_interval_s: Option<f64>,
    pub azimuth_resolution_m: Option<f64>,
    #[serde(default = "default_speed")]
    pub propagation_speed_m_per_s: f64,
}

fn default_oversampling() -> f64 {
    FAST_TIME_OVERSAMPLING
}

fn default_speed() -> f64 {
    SPEED_OF_LIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub velocity_m_per_s: f64,
    pub standoff_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub half_extent_m: [f64; 2],
    pub targets: Vec<TargetSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub center_m: [f64; 2],
    pub spacing_m: [f64; 2],
    pub dims: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImagingSection {
    pub ramp_filter: bool,
    pub range_upsample: usize,
    pub interp: Interp,
}

impl Default for ImagingSection {
    fn default() -> Self {
        let o = BackprojectOptions::default();
        Self {
            ramp_filter: o.ramp_filter,
            range_upsample: o.range_upsample,
            interp: o.interp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSection {
    pub db_range: f64,
}

impl Default for ExportSection {
    fn default() -> Self {
        Self { db_range: 50.0 }
    }
}

/// Parsed scenario file, before cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub radar: RadarSection,
    pub trajectory: TrajectorySection,
    #[serde(default = "no_perturbation")]
    pub perturbation: PerturbationSpec,
    pub scene: SceneSection,
    pub grid: GridSection,
    #[serde(default)]
    pub imaging: ImagingSection,
    #[serde(default)]
    pub autofocus: AutofocusConfig,
    #[serde(default)]
    pub export: ExportSection,
}

fn default_id() -> String {
    "scenario".into()
}

fn no_perturbation() -> PerturbationSpec {
    PerturbationSpec::None
}

/// A validated scenario with every runtime object built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub params: RadarParams,
    pub nominal: Trajectory,
    pub truth: Trajectory,
    pub scene: Scene,
    pub grid: ImageGrid,
    pub fast_time_origin: f64,
    pub imaging: BackprojectOptions,
}

/// Line in `source` where `key` is first assigned, for anchoring messages.
fn line_of(source: Option<&str>, key: &str) -> Option<usize> {
    let source = source?;
    source
        .lines()
        .position(|l| {
            let t = l.trim_start();
            t.starts_with(key) && t[key.len()..].trim_start().starts_with('=')
                || t.starts_with('[') && t.trim_matches(|c| c == '[' || c == ']') == key
        })
        .map(|i| i + 1)
}

fn anchored(source: Option<&str>, key: &str, err: Error) -> Error {
    let msg = match err {
        Error::InvalidParameter(m) | Error::Nyquist(m) | Error::Scenario(m) => m,
        other => other.to_string(),
    };
    match line_of(source, key) {
        Some(line) => Error::Scenario(format!("line {line} ({key}): {msg}")),
        None => Error::Scenario(format!("{key}: {msg}")),
    }
}

fn either(a: Option<f64>, b: Option<f64>, names: (&str, &str)) -> Result<(Option<f64>, Option<f64>)> {
    match (a, b) {
        (Some(_), Some(_)) | (None, None) => Err(Error::Scenario(format!(
            "give exactly one of {} and {}",
            names.0, names.1
        ))),
        _ => Ok((a, b)),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string().trim_end().to_string()))
    }

    /// Canonical JSON used for hashing and manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON, hex.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        Self::build(ScenarioFile::parse(text)?, Some(text))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn default_scenario() -> Self {
        Self::parse(DEFAULT_SCENARIO).expect("bundled scenario is valid")
    }

    /// Cross-validates `file` and builds the runtime objects. `source` is the
    /// original text, used to attach line numbers to messages.
    pub fn build(file: ScenarioFile, source: Option<&str>) -> Result<Self> {
        let r = &file.radar;
        let c = r.propagation_speed_m_per_s;
        let (bw, res) = either(
            r.bandwidth_hz,
            r.range_resolution_m,
            ("bandwidth_hz", "range_resolution_m"),
        )
        .map_err(|e| anchored(source, "radar", e))?;
        let bandwidth = bw.unwrap_or_else(|| c / (2.0 * res.unwrap()));
        if !(r.fast_time_oversampling >= 1.0) {
            return Err(anchored(
                source,
                "fast_time_oversampling",
                Error::Scenario("must be at least 1".into()),
            ));
        }
        if !(file.trajectory.velocity_m_per_s > 0.0) {
            return Err(anchored(
                source,
                "velocity_m_per_s",
                Error::Scenario("must be positive".into()),
            ));
        }
        let (pri, az_res) = either(
            r.pulse_interval_s,
            r.azimuth_resolution_m,
            ("pulse_interval_s", "azimuth_resolution_m"),
        )
        .map_err(|e| anchored(source, "radar", e))?;
        let pulse_interval = match (pri, az_res) {
            (Some(p), _) => p,
            (None, Some(rho)) => {
                let k_rc = 4.0 * PI * r.carrier_frequency_hz / c;
                let s = PI / (rho * k_rc);
                if !(s > 0.0 && s < 1.0) || r.pulse_count < 2 {
                    return Err(anchored(
                        source,
                        "azimuth_resolution_m",
                        Error::Scenario("no aperture delivers this resolution".into()),
                    ));
                }
                let length = 2.0 * file.trajectory.standoff_m * s.asin().tan();
                length / file.trajectory.velocity_m_per_s / (r.pulse_count - 1) as f64
            }
            _ => unreachable!(),
        };
        let mut params = RadarParams::new(
            r.carrier_frequency_hz,
            bandwidth,
            r.fast_time_sample_count,
            1.0 / (r.fast_time_oversampling * bandwidth),
            r.pulse_count,
            pulse_interval,
        )
        .map_err(|e| anchored(source, "radar", e))?;
        params.propagation_speed = c;
        params
            .validate()
            .map_err(|e| anchored(source, "propagation_speed_m_per_s", e))?;

        let nominal = Trajectory::linear(
            r.pulse_count,
            pulse_interval,
            file.trajectory.velocity_m_per_s,
            file.trajectory.standoff_m,
        )
        .map_err(|e| anchored(source, "trajectory", e))?;
        let truth =
            perturb_trajectory(&nominal, &file.perturbation).map_err(|e| anchored(source, "perturbation", e))?;

        let targets = file
            .scene
            .targets
            .iter()
            .map(|t| Target {
                x: t.x_m,
                y: t.y_m,
                reflectivity: Complex64::from_polar(t.amplitude, t.phase_rad),
            })
            .collect();
        let scene = Scene::new(targets, (file.scene.half_extent_m[0], file.scene.half_extent_m[1]))
            .map_err(|e| anchored(source, "scene", e))?;

        let g = &file.grid;
        let grid = ImageGrid::new(
            Point::new(g.center_m[0], g.center_m[1]),
            (g.spacing_m[0], g.spacing_m[1]),
            (g.dims[0], g.dims[1]),
        )
        .map_err(|e| anchored(source, "grid", e))?;
        grid.check_nyquist(&params, &nominal)
            .map_err(|e| anchored(source, "spacing_m", e))?;

        let (nx, ny) = grid.dims;
        let corners = [
            Point::new(grid.x(0), grid.y(0)),
            Point::new(grid.x(nx - 1), grid.y(0)),
            Point::new(grid.x(0), grid.y(ny - 1)),
            Point::new(grid.x(nx - 1), grid.y(ny - 1)),
        ];
        let mut points: Vec<Point> = corners.to_vec();
        points.extend(scene.targets().iter().map(|t| t.position()));
        let fast_time_origin = fast_time_origin_covering(&params, &[&nominal, &truth], &points)
            .map_err(|e| anchored(source, "fast_time_sample_count", e))?;

        if file.imaging.range_upsample == 0 {
            return Err(anchored(
                source,
                "range_upsample",
                Error::Scenario("must be at least 1".into()),
            ));
        }
        file.autofocus
            .validate()
            .map_err(|e| anchored(source, "autofocus", e))?;
        if !(file.export.db_range > 0.0) {
            return Err(anchored(source, "db_range", Error::Scenario("must be positive".into())));
        }
        if !(file.noise_sigma >= 0.0) {
            return Err(anchored(
                source,
                "noise_sigma",
                Error::Scenario("must be non-negative".into()),
            ));
        }
        let imaging = BackprojectOptions {
            ramp_filter: file.imaging.ramp_filter,
            range_upsample: file.imaging.range_upsample,
            interp: file.imaging.interp,
        };
        Ok(Self {
            file,
            params,
            nominal,
            truth,
            scene,
            grid,
            fast_time_origin,
            imaging,
        })
    }

    /// Range wavenumber at the center of the grid-center target's support.
    pub fn k_yc(&self) -> f64 {
        wavenumber_support(&self.params, &self.nominal, self.grid.center)
            .map(|s| self.params.k_rc() * s.theta_center().cos())
            .unwrap_or_else(|_| self.params.k_rc())
    }

    /// Aperture-center range to the grid center.
    pub fn standoff(&self) -> f64 {
        self.nominal.standoff() - self.grid.center.y
    }

    pub fn focus_geometry(&self) -> FocusGeometry {
        FocusGeometry {
            k_yc: self.k_yc(),
            standoff: self.standoff(),
        }
    }

    pub fn autofocus(&self) -> AutofocusConfig {
        self.file.autofocus
    }
}
