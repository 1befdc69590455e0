//! Batch driver: executes experiment stages from a scenario and writes every
//! artifact to a run directory.
//!
//! Each stage reads its inputs from the run directory, so re-running a stage
//! reproduces its outputs byte for byte.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::autofocus::{autofocus_pipeline, FocusMetrics, PhaseErrorField};
use crate::echo::{add_noise, range_error, simulate_phase_history};
use crate::error::Error;
use crate::fbp::{backproject, ComplexImage};
use crate::io;
use crate::metrics;
use crate::scenario::{Scenario, ScenarioFile, DEFAULT_SCENARIO};
use crate::spectrum::{self, measure_support, DEFAULT_SUPPORT_THRESHOLD_DB};

pub const PHASE_HISTORY_FILE: &str = "phase_history.sph";
pub const DEFOCUSED_FILE: &str = "image_defocused.sci";
pub const REFOCUSED_FILE: &str = "image_refocused.sci";
pub const PREPROCESSED_FILE: &str = "image_preprocessed.sci";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENARIO_COPY: &str = "scenario.json";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Image,
    Spectrum,
    Autofocus,
    Metrics,
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Image => "image",
            Stage::Spectrum => "spectrum",
            Stage::Autofocus => "autofocus",
            Stage::Metrics => "metrics",
            Stage::All => "all",
        }
    }

    fn expand(self) -> Vec<Stage> {
        match self {
            Stage::All => vec![
                Stage::Simulate,
                Stage::Image,
                Stage::Spectrum,
                Stage::Autofocus,
                Stage::Metrics,
            ],
            s => vec![s],
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "simulate" => Stage::Simulate,
            "image" => Stage::Image,
            "spectrum" => Stage::Spectrum,
            "autofocus" => Stage::Autofocus,
            "metrics" => Stage::Metrics,
            "all" => Stage::All,
            other => return Err(format!("unknown stage '{other}'")),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub stage: Stage,
    /// `None` runs the bundled default scenario.
    pub scenario: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub no_ramp_filter: bool,
    pub export_db_range: Option<f64>,
}

impl RunOptions {
    pub fn new(stage: Stage, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            stage,
            scenario: None,
            out_dir: out_dir.into(),
            seed: None,
            iterations: None,
            no_ramp_filter: false,
            export_db_range: None,
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Scenario or option problem; nothing was run.
    Validation(String),
    /// A stage failed; earlier artifacts are kept and a FAILED marker written.
    Stage { stage: &'static str, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Stage { .. } => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "invalid scenario: {m}"),
            RunError::Stage { stage, message } => write!(f, "stage '{stage}' failed: {message}"),
        }
    }
}

impl std::error::Error for RunError {}

/// One structured metrics record.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    pub scenario: String,
    pub image: String,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ArtifactEntry {
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    scenario_id: String,
    seed: u64,
    config_hash: String,
    scenario_file: &'static str,
    stages: Vec<&'static str>,
    metric_weighting: &'static str,
    artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub stages: Vec<&'static str>,
    pub artifacts: Vec<PathBuf>,
    pub metrics: Vec<MetricRecord>,
    pub warnings: Vec<String>,
}

struct Context {
    scenario: Scenario,
    out: PathBuf,
    summary: RunSummary,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn record(&mut self, name: &str) {
        let p = self.path(name);
        if !self.summary.artifacts.contains(&p) {
            self.summary.artifacts.push(p);
        }
    }

    fn db_range(&self) -> f64 {
        self.scenario.file.export.db_range
    }

    fn load_image(&self, name: &str, producer: &str) -> Result<ComplexImage, Error> {
        let p = self.path(name);
        if !p.exists() {
            return Err(Error::Format(format!(
                "{} not found; run the '{producer}' stage first",
                p.display()
            )));
        }
        io::read_image(p)
    }

    fn write_image(&mut self, name: &str, img: &ComplexImage) -> Result<(), Error> {
        io::write_image(self.path(name), img)?;
        self.record(name);
        let pgm = name.replace(".sci", ".pgm");
        io::write_magnitude_pgm(self.path(&pgm), &img.data, self.db_range())?;
        self.record(&pgm);
        Ok(())
    }

    fn write_jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<(), Error> {
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
            text.push('\n');
        }
        fs::write(self.path(name), text)?;
        self.record(name);
        Ok(())
    }

    fn simulate(&mut self) -> Result<(), Error> {
        let s = self.scenario.clone();
        let mut ph = simulate_phase_history(&s.params, &s.truth, &s.scene, s.fast_time_origin)?;
        if s.file.noise_sigma > 0.0 {
            add_noise(&mut ph, s.file.noise_sigma, s.file.seed)?;
        }
        io::write_phase_history(self.path(PHASE_HISTORY_FILE), &ph)?;
        self.record(PHASE_HISTORY_FILE);

        let times = s.nominal.times().to_vec();
        let (nx, ny): (Vec<f64>, Vec<f64>) = s.nominal.positions().iter().map(|p| (p.x, p.y)).unzip();
        let (tx, ty): (Vec<f64>, Vec<f64>) = s.truth.positions().iter().map(|p| (p.x, p.y)).unzip();
        let r_e = range_error(&s.nominal, &s.truth, s.grid.center)?;
        io::write_csv(
            self.path("trajectory.csv"),
            &[
                "t_s",
                "nominal_x_m",
                "nominal_y_m",
                "true_x_m",
                "true_y_m",
                "range_error_m",
            ],
            &[&times, &nx, &ny, &tx, &ty, &r_e],
        )?;
        self.record("trajectory.csv");
        Ok(())
    }

    fn image(&mut self) -> Result<(), Error> {
        let s = self.scenario.clone();
        let p = self.path(PHASE_HISTORY_FILE);
        if !p.exists() {
            return Err(Error::Format(format!(
                "{} not found; run the 'simulate' stage first",
                p.display()
            )));
        }
        let ph = io::read_phase_history(p, &s.params)?;
        let img = backproject(&ph, &s.nominal, &s.grid, &s.imaging)?;
        self.summary.warnings.extend(img.annotation.warnings.iter().cloned());
        self.write_image(DEFOCUSED_FILE, &img)
    }

    fn spectrum(&mut self) -> Result<(), Error> {
        let img = self.load_image(DEFOCUSED_FILE, "image")?;
        let g = self.scenario.focus_geometry();
        let base = spectrum::eliminate_ambiguity(&img, g.k_yc)?;
        let aligned = spectrum::align_spectrum(&base, g.standoff)?;
        let mut reports = Vec::new();
        for (name, im) in [("ambiguous", &img), ("baseband", &base), ("aligned", &aligned)] {
            let spec = spectrum::to_spectrum(im);
            let file = format!("spectrum_{name}.pgm");
            io::write_magnitude_pgm(self.path(&file), &spec.data, self.db_range())?;
            self.record(&file);
            let report = measure_support(&spec, DEFAULT_SUPPORT_THRESHOLD_DB)?;
            reports.push(serde_json::json!({ "spectrum": name, "support": report }));

            // phase and magnitude cut along k_x at band center
            let j = spec.k_y_axis.len() / 2;
            let mag: Vec<f64> = spec.data.column(j).iter().map(|v| v.norm()).collect();
            let phase: Vec<f64> = spec.data.column(j).iter().map(|v| v.arg()).collect();
            let csv = format!("spectrum_{name}_center_row.csv");
            io::write_csv(
                self.path(&csv),
                &["k_x_rad_per_m", "magnitude", "phase_rad"],
                &[&spec.k_x_axis, &mag, &phase],
            )?;
            self.record(&csv);
        }
        self.write_jsonl("spectrum_support.jsonl", &reports)
    }

    fn autofocus(&mut self) -> Result<(), Error> {
        let img = self.load_image(DEFOCUSED_FILE, "image")?;
        let g = self.scenario.focus_geometry();
        let result = autofocus_pipeline(&img, g, &self.scenario.autofocus())?;
        self.write_image(PREPROCESSED_FILE, &result.preprocessed)?;
        self.write_image(REFOCUSED_FILE, &result.refocused)?;
        for (n, (ape, field)) in result.ape_history.iter().zip(&result.field_history).enumerate() {
            let csv = format!("ape_iter{}.csv", n + 1);
            io::write_ape_csv(self.path(&csv), ape)?;
            self.record(&csv);
            let pgm = format!("field_iter{}.pgm", n + 1);
            io::write_field_pgm(self.path(&pgm), field)?;
            self.record(&pgm);
            let csv = format!("field_iter{}_rows.csv", n + 1);
            write_field_rows(&self.path(&csv), field)?;
            self.record(&csv);
        }
        let id = self.scenario.file.id.clone();
        let records: Vec<serde_json::Value> = result
            .metrics_history
            .iter()
            .enumerate()
            .map(|(i, m)| serde_json::json!({ "scenario": id, "iteration": i, "contrast": m.contrast, "entropy": m.entropy }))
            .collect();
        self.summary.warnings.extend(result.warnings.iter().cloned());
        self.write_jsonl("autofocus_history.jsonl", &records)
    }

    fn metrics(&mut self) -> Result<(), Error> {
        let id = self.scenario.file.id.clone();
        let mut records = Vec::new();
        for (label, file) in [("defocused", DEFOCUSED_FILE), ("refocused", REFOCUSED_FILE)] {
            if !self.path(file).exists() {
                continue;
            }
            let img = io::read_image(self.path(file))?;
            let m = FocusMetrics::of(&img)?;
            for (name, value) in [
                ("contrast", m.contrast),
                ("entropy", m.entropy),
                ("peak_magnitude", img.peak_magnitude()),
            ] {
                records.push(MetricRecord {
                    scenario: id.clone(),
                    image: label.into(),
                    name: name.into(),
                    value,
                });
            }
            let center = self.scenario.grid.center;
            let gated = img.gated(center, (2.5, 1.0));
            if let Ok(report) = metrics::point_response_report(&gated, center) {
                records.push(MetricRecord {
                    scenario: id.clone(),
                    image: label.into(),
                    name: "center_rcm_m".into(),
                    value: report.measured_rcm,
                });
            }
        }
        if records.is_empty() {
            return Err(Error::Format("no images found; run the 'image' stage first".into()));
        }
        self.summary.metrics = records.clone();
        self.write_jsonl("metrics.jsonl", &records)
    }

    fn write_manifest(&mut self, stages: &[&'static str]) -> Result<(), Error> {
        let file = &self.scenario.file;
        let mut artifacts: Vec<ArtifactEntry> = Vec::new();
        let mut names: Vec<String> = fs::read_dir(&self.out)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST_FILE && n != FAILED_MARKER)
            .collect();
        names.sort();
        for name in names {
            let bytes = fs::read(self.path(&name))?;
            artifacts.push(ArtifactEntry {
                file: name,
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
        let manifest = Manifest {
            tool: "sarfocus",
            version: env!("CARGO_PKG_VERSION"),
            scenario_id: file.id.clone(),
            seed: file.seed,
            config_hash: file.config_hash(),
            scenario_file: SCENARIO_COPY,
            stages: stages.to_vec(),
            metric_weighting: "intensity",
            artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.path(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }
}

fn write_field_rows(path: &Path, field: &PhaseErrorField) -> Result<(), Error> {
    let n = field.k_y_axis.len();
    let rows = [n / 4, n / 2, 3 * n / 4];
    let cols: Vec<Vec<f64>> = rows.iter().map(|&j| field.phase.column(j).to_vec()).collect();
    let headers: Vec<String> = std::iter::once("k_x_rad_per_m".to_string())
        .chain(rows.iter().map(|&j| format!("phase_at_k_y_{:.3}", field.k_y_axis[j])))
        .collect();
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut columns: Vec<&[f64]> = vec![&field.k_x_axis];
    columns.extend(cols.iter().map(|c| c.as_slice()));
    io::write_csv(path, &header_refs, &columns)
}

/// Loads and validates the scenario with command-line overrides applied.
pub fn load_scenario(opts: &RunOptions) -> Result<Scenario, RunError> {
    let (text, origin) = match &opts.scenario {
        Some(p) => (
            fs::read_to_string(p).map_err(|e| RunError::Validation(format!("{}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (DEFAULT_SCENARIO.to_string(), "<bundled default>".to_string()),
    };
    let fail = |e: Error| RunError::Validation(format!("{origin}: {e}"));
    let mut file = ScenarioFile::parse(&text).map_err(fail)?;
    if let Some(seed) = opts.seed {
        file.seed = seed;
    }
    if let Some(n) = opts.iterations {
        file.autofocus.max_iterations = n;
    }
    if opts.no_ramp_filter {
        file.imaging.ramp_filter = false;
    }
    if let Some(db) = opts.export_db_range {
        file.export.db_range = db;
    }
    Scenario::build(file, Some(&text)).map_err(fail)
}

/// Runs the requested stage(s).
pub fn run(opts: &RunOptions) -> Result<RunSummary, RunError> {
    let scenario = load_scenario(opts)?;
    fs::create_dir_all(&opts.out_dir)
        .map_err(|e| RunError::Validation(format!("cannot create {}: {e}", opts.out_dir.display())))?;
    let mut ctx = Context {
        scenario,
        out: opts.out_dir.clone(),
        summary: RunSummary::default(),
    };
    let marker = ctx.path(FAILED_MARKER);
    if marker.exists() {
        let _ = fs::remove_file(&marker);
    }

    let copy = ctx.scenario.file.canonical_json();
    let stage_err = |stage: &'static str, e: Error| RunError::Stage {
        stage,
        message: e.to_string(),
    };
    fs::write(ctx.path(SCENARIO_COPY), copy + "\n").map_err(|e| stage_err("setup", e.into()))?;

    let mut done = Vec::new();
    for stage in opts.stage.expand() {
        let outcome = match stage {
            Stage::Simulate => ctx.simulate(),
            Stage::Image => ctx.image(),
            Stage::Spectrum => ctx.spectrum(),
            Stage::Autofocus => ctx.autofocus(),
            Stage::Metrics => ctx.metrics(),
            Stage::All => unreachable!(),
        };
        if let Err(e) = outcome {
            let err = stage_err(stage.name(), e);
            let _ = fs::write(&marker, format!("{err}\n"));
            let _ = ctx.write_manifest(&done);
            return Err(err);
        }
        done.push(stage.name());
    }
    ctx.write_manifest(&done).map_err(|e| stage_err("manifest", e))?;
    ctx.summary.stages = done;
    Ok(ctx.summary)
}
