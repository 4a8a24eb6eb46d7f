//! Config loading, layer derivation, full runs with artifact output, and
//! synthetic datasets.

pub mod config;
pub mod render;
pub mod synth;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ahp::{self, AhpEvaluation, PriorityVector, CR_THRESHOLD};
use crate::error::{Error, Result};
use crate::kriging::{self, empirical_variogram, fit_variogram, SamplePoint, VariogramModel};
use crate::mcda::{self, ConstraintLayer, ConstraintSet, Scenario, SensitivityRow, SrSource, SuitabilityResult};
use crate::raster::{format_value, Grid, GridHeader};
use crate::reclass::{grade_all, CriterionId, CriterionLayer};
use crate::spatial::{distance_transform, slope_aspect};

pub use config::{ConstraintConfig, CriterionConfig, Judgment, ScenarioConfig, SourceConfig};
pub use render::render_class_map;
pub use synth::{synth_dataset, write_dataset, SynthDataset, SynthSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Accept matrices whose consistency ratio exceeds the threshold.
    pub override_cr: bool,
    /// When set, every referenced file must resolve inside this directory.
    pub sandbox: Option<PathBuf>,
}

/// Notes on how a derived layer was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derivation {
    pub criterion: CriterionId,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variogram: Option<VariogramModel>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    /// Present when weights came from a pairwise matrix.
    pub ahp: Option<AhpEvaluation>,
    pub derivations: Vec<Derivation>,
    pub warnings: Vec<String>,
}

/// Resolves `rel` against `base`, enforcing the sandbox when given.
pub fn resolve_path(base: &Path, rel: &Path, sandbox: Option<&Path>) -> Result<PathBuf> {
    let joined = base.join(rel);
    let Some(root) = sandbox else { return Ok(joined) };
    let root = root.canonicalize().map_err(|e| Error::io(root, e))?;
    let full = joined.canonicalize().map_err(|e| Error::io(&joined, e))?;
    if full.starts_with(&root) {
        Ok(full)
    } else {
        Err(Error::Sandbox(rel.to_path_buf()))
    }
}

/// Parses and materializes a config file.
pub fn load_scenario(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let config = ScenarioConfig::from_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    build_scenario(config, base, opts)
}

/// Weights from the config, checking matrix consistency.
pub fn config_weights(config: &ScenarioConfig, override_cr: bool) -> Result<(PriorityVector, Option<AhpEvaluation>)> {
    config.check_structure()?;
    match &config.matrix {
        Some(rows) => {
            let eval = ahp::evaluate(&config::judgment_values(rows)?)?;
            if !eval.consistent {
                if !override_cr {
                    return Err(Error::Inconsistent {
                        cr: eval.cr,
                        threshold: CR_THRESHOLD,
                    });
                }
                log::warn!("proceeding with CR = {:.4} above {CR_THRESHOLD}", eval.cr);
            }
            Ok((PriorityVector::new(eval.weights.clone())?, Some(eval)))
        }
        None => {
            let w = config.criteria.iter().map(|c| c.weight.unwrap_or(0.0)).collect();
            Ok((PriorityVector::from_published(w)?, None))
        }
    }
}

/// Where a scenario's grids and sample points come from.
pub trait DataSource {
    fn grid(&mut self, rel: &Path) -> Result<Grid>;
    fn points(&mut self, rel: &Path) -> Result<Vec<SamplePoint>>;
}

/// Files relative to a base directory, optionally sandboxed. Each grid file
/// is read once.
pub struct FileSource<'a> {
    base: &'a Path,
    sandbox: Option<&'a Path>,
    cache: HashMap<PathBuf, Grid>,
}

impl<'a> FileSource<'a> {
    pub fn new(base: &'a Path, sandbox: Option<&'a Path>) -> Self {
        FileSource {
            base,
            sandbox,
            cache: HashMap::new(),
        }
    }
}

impl DataSource for FileSource<'_> {
    fn grid(&mut self, rel: &Path) -> Result<Grid> {
        let p = resolve_path(self.base, rel, self.sandbox)?;
        if let Some(g) = self.cache.get(&p) {
            return Ok(g.clone());
        }
        let g = Grid::read_file(&p)?;
        self.cache.insert(p, g.clone());
        Ok(g)
    }

    fn points(&mut self, rel: &Path) -> Result<Vec<SamplePoint>> {
        kriging::read_points_file(resolve_path(self.base, rel, self.sandbox)?)
    }
}

/// Reads every referenced file under `base`, derives layers, grades them and
/// assembles the scenario.
pub fn build_scenario(config: ScenarioConfig, base: &Path, opts: &LoadOptions) -> Result<LoadedScenario> {
    let mut source = FileSource::new(base, opts.sandbox.as_deref());
    build_scenario_from(config, &mut source, opts.override_cr)
}

/// Derives, grades and assembles the scenario from any data source.
pub fn build_scenario_from(
    config: ScenarioConfig,
    data: &mut dyn DataSource,
    override_cr: bool,
) -> Result<LoadedScenario> {
    let (weights, ahp) = config_weights(&config, override_cr)?;
    let template_path = config
        .criteria
        .iter()
        .find_map(|c| c.source.grid_path())
        .or_else(|| config.constraints.first().map(|c| c.mask.as_path()))
        .ok_or_else(|| Error::Config("no grid to define the scenario extent".into()))?
        .to_path_buf();
    let header = *data.grid(&template_path)?.header();

    let mut layers = Vec::with_capacity(config.criteria.len());
    let mut derivations = Vec::new();
    for c in &config.criteria {
        let (source, derivation) = match &c.source {
            SourceConfig::Grid { path } => (data.grid(path)?, None),
            SourceConfig::Slope { dem } => (slope_aspect(&data.grid(dem)?).slope_percent, None),
            SourceConfig::Aspect { dem } => (slope_aspect(&data.grid(dem)?).aspect_azimuth, None),
            SourceConfig::Distance { features } => {
                let d = distance_transform(&data.grid(features)?)?;
                (d.map_cells(|m| m / 1000.0), None)
            }
            SourceConfig::Kriged {
                points,
                variogram,
                bins,
                max_lag,
                model,
            } => {
                let pts = data.points(points)?;
                let model = match model {
                    Some(m) => *m,
                    None => {
                        let lag = max_lag.unwrap_or_else(|| default_max_lag(&pts));
                        let bins = empirical_variogram(&pts, *bins, lag)?;
                        fit_variogram(&bins, *variogram)?.model
                    }
                };
                let out = kriging::krige(&pts, &model, &header)?;
                let d = Derivation {
                    criterion: c.id,
                    method: "ordinary kriging".into(),
                    variogram: Some(model),
                    ill_conditioned: out.ill_conditioned,
                };
                (out.prediction, Some(d))
            }
        };
        header.check_aligned(source.header())?;
        derivations.extend(derivation);
        layers.push(CriterionLayer::new(c.id, source, c.rule()));
    }
    let (criteria, warnings) = grade_all(layers)?;

    let mut constraints = ConstraintSet::new(header);
    for c in config.constraints.iter().filter(|c| c.enabled) {
        constraints.push(ConstraintLayer {
            name: c.name.clone(),
            mask: data.grid(&c.mask)?,
            buffer: c.buffer_m,
        })?;
    }

    let scenario = Scenario {
        criteria,
        weights,
        constraints,
        breaks: config.class_breaks(),
        energy: config.energy,
    };
    scenario.validate()?;
    Ok(LoadedScenario {
        config,
        scenario,
        ahp,
        derivations,
        warnings,
    })
}

/// Half the largest separation between sample points.
pub fn default_max_lag(points: &[SamplePoint]) -> f64 {
    let mut max: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            max = max.max((a.x - b.x).hypot(a.y - b.y));
        }
    }
    max / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: u8,
    pub full_km2: f64,
    pub exploitable_km2: f64,
    pub full_pct: f64,
    pub exploitable_pct: f64,
    pub gp_full_twh: f64,
    pub gp_exploitable_twh: f64,
    pub sr_full: Option<f64>,
    pub sr_exploitable: Option<f64>,
    pub capacity_mw_per_km2: Option<f64>,
}

/// Scalar view of a run, shared by the CLI and the service.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub criteria: Vec<CriterionId>,
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ahp: Option<AhpEvaluation>,
    pub classes: Vec<ClassSummary>,
    pub cell_km2: f64,
    pub scored_km2: f64,
    pub exploitable_km2: f64,
    pub constrained_fraction: f64,
    pub capacity_mw_per_km2: Option<f64>,
    pub sr_source: SrSource,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: SuitabilityResult,
    pub sensitivity: Vec<SensitivityRow>,
    pub summary: RunSummary,
}

/// Evaluates a loaded scenario and its sensitivity table without touching
/// the file system.
pub fn execute(loaded: &LoadedScenario) -> Result<RunOutput> {
    let result = mcda::evaluate(&loaded.scenario)?;
    let sensitivity = mcda::sensitivity_table(&loaded.scenario, &result)?;
    let summary = summarize(loaded, &result);
    Ok(RunOutput {
        result,
        sensitivity,
        summary,
    })
}

fn summarize(loaded: &LoadedScenario, result: &SuitabilityResult) -> RunSummary {
    let areas = &result.areas;
    let classes = areas
        .rows
        .iter()
        .zip(&result.generation)
        .map(|(a, g)| ClassSummary {
            class: a.class,
            full_km2: a.full_km2,
            exploitable_km2: a.exploitable_km2,
            full_pct: a.full_pct,
            exploitable_pct: a.exploitable_pct,
            gp_full_twh: g.gp_full_twh,
            gp_exploitable_twh: g.gp_exploitable_twh,
            sr_full: g.sr_full,
            sr_exploitable: g.sr_exploitable,
            capacity_mw_per_km2: g.capacity_mw_per_km2,
        })
        .collect();
    let constrained = result.exclusion.values().iter().filter(|&&v| v == 1.0).count();
    RunSummary {
        criteria: loaded.scenario.criteria.iter().map(|c| c.id).collect(),
        weights: loaded.scenario.weights.as_slice().to_vec(),
        ahp: loaded.ahp.clone(),
        classes,
        cell_km2: areas.cell_km2,
        scored_km2: areas.scored_km2,
        exploitable_km2: areas.exploitable_km2,
        constrained_fraction: constrained as f64 / result.exclusion.values().len() as f64,
        capacity_mw_per_km2: result.capacity_mw_per_km2,
        sr_source: result.sr_source,
    }
}

pub const AREAS_HEADER: &str = "class,full_km2,exploit_km2,full_pct,exploit_pct,gp_full_twh,gp_exploit_twh";

pub fn areas_csv(summary: &RunSummary) -> String {
    let mut out = String::from(AREAS_HEADER);
    out.push('\n');
    for c in &summary.classes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.class,
            format_value(c.full_km2),
            format_value(c.exploitable_km2),
            format_value(c.full_pct),
            format_value(c.exploitable_pct),
            format_value(c.gp_full_twh),
            format_value(c.gp_exploitable_twh),
        );
    }
    out
}

/// One row per excluded criterion; empty cells where the baseline class
/// area is zero.
pub fn sensitivity_csv(rows: &[SensitivityRow], n_classes: usize) -> String {
    let mut out = String::from("excluded");
    for k in 1..=n_classes {
        let _ = write!(out, ",delta_pct_class_{k}");
    }
    out.push('\n');
    for r in rows {
        out.push_str(r.excluded.as_str());
        for d in &r.delta_pct {
            out.push(',');
            if let Some(d) = d {
                out.push_str(&format_value(*d));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub elapsed_ms: u128,
    pub grid: GridHeader,
    pub cell_area_km2: f64,
    pub area_method: &'static str,
    pub sr_source: SrSource,
    pub sr_note: String,
    pub derivations: Vec<Derivation>,
    pub warnings: Vec<String>,
    pub summary: RunSummary,
}

pub const ARTIFACTS: [&str; 7] = [
    "score.asc",
    "classes.asc",
    "classes_exploitable.asc",
    "areas.csv",
    "sensitivity.csv",
    "class_map.png",
    "metadata.json",
];

pub fn config_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.canonical_json()))
}

/// Evaluates the scenario and writes all artifacts to `out_dir`.
///
/// Files are staged in a sibling temporary directory and moved into place
/// only after every artifact has been written, so a failed run leaves no
/// partial outputs behind.
pub fn run(loaded: &LoadedScenario, out_dir: &Path) -> Result<RunOutput> {
    let started = Instant::now();
    let output = execute(loaded)?;
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".solarsite-staging-")
        .tempdir_in(parent)
        .map_err(|e| Error::io(parent, e))?;
    let dir = staging.path();
    let result = &output.result;
    let n_classes = loaded.scenario.breaks.n_classes();

    result.score.write_file(dir.join("score.asc"))?;
    result.classes.write_file(dir.join("classes.asc"))?;
    result
        .exploitable_classes
        .write_file(dir.join("classes_exploitable.asc"))?;
    write_bytes(&dir.join("areas.csv"), areas_csv(&output.summary).as_bytes())?;
    write_bytes(
        &dir.join("sensitivity.csv"),
        sensitivity_csv(&output.sensitivity, n_classes).as_bytes(),
    )?;
    write_bytes(
        &dir.join("class_map.png"),
        &render_class_map(&result.classes, n_classes)?,
    )?;

    let sr_note = match result.sr_source {
        SrSource::Fixed => format!(
            "fixed irradiation {} kWh/m2/day for every class",
            format_value(loaded.scenario.energy.sr_override.unwrap_or_default())
        ),
        SrSource::ClassMeanGhi => "mean GHI over each class's cells".into(),
    };
    let meta = RunMetadata {
        tool: "solarsite",
        version: VERSION,
        config_sha256: config_hash(&loaded.config),
        elapsed_ms: started.elapsed().as_millis(),
        grid: *loaded.scenario.header(),
        cell_area_km2: result.areas.cell_km2,
        area_method: "uniform square cells of cellsize metres; no per-cell projection correction",
        sr_source: result.sr_source,
        sr_note,
        derivations: loaded.derivations.clone(),
        warnings: loaded.warnings.clone(),
        summary: output.summary.clone(),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    write_bytes(&dir.join("metadata.json"), &json)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for name in ARTIFACTS {
        let to = out_dir.join(name);
        std::fs::rename(dir.join(name), &to).map_err(|e| Error::io(&to, e))?;
    }
    Ok(output)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dataset(dir: &Path) -> SynthDataset {
        let spec = SynthSpec {
            rows: 48,
            cols: 40,
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec).unwrap();
        write_dataset(&ds, dir).unwrap();
        ds
    }

    #[test]
    fn synthetic_run_writes_every_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        small_dataset(tmp.path());
        let loaded = load_scenario(tmp.path().join("approach1.toml"), &LoadOptions::default()).unwrap();
        let out = tmp.path().join("out");
        let output = run(&loaded, &out).unwrap();
        for name in ARTIFACTS {
            assert!(out.join(name).is_file(), "{name} missing");
        }
        let areas = std::fs::read_to_string(out.join("areas.csv")).unwrap();
        assert!(areas.starts_with(AREAS_HEADER));
        assert_eq!(areas.lines().count(), 5);
        assert_eq!(output.sensitivity.len(), 8);
        let leftovers: Vec<_> = std::fs::read_dir(tmp.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with(".solarsite-staging"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn failed_run_leaves_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        small_dataset(tmp.path());
        let mut loaded = load_scenario(tmp.path().join("approach1.toml"), &LoadOptions::default()).unwrap();
        loaded.scenario.energy.daylight_hours = -1.0;
        let out = tmp.path().join("out");
        assert!(run(&loaded, &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn disabled_constraints_make_exploitable_equal_full() {
        let tmp = tempfile::tempdir().unwrap();
        small_dataset(tmp.path());
        let mut cfg = ScenarioConfig::from_file(tmp.path().join("approach1.toml")).unwrap();
        for c in &mut cfg.constraints {
            c.enabled = false;
        }
        let loaded = build_scenario(cfg, tmp.path(), &LoadOptions::default()).unwrap();
        let out = execute(&loaded).unwrap();
        for c in &out.summary.classes {
            assert_eq!(c.full_km2, c.exploitable_km2);
            assert_eq!(c.gp_full_twh, c.gp_exploitable_twh);
        }
    }

    #[test]
    fn inconsistent_matrix_is_rejected_with_cr() {
        let tmp = tempfile::tempdir().unwrap();
        small_dataset(tmp.path());
        let mut cfg = ScenarioConfig::from_file(tmp.path().join("approach1.toml")).unwrap();
        cfg.criteria.truncate(3);
        for c in &mut cfg.criteria {
            c.weight = None;
        }
        let j = |s: &str| Judgment::Text(s.into());
        cfg.matrix = Some(vec![
            vec![j("1"), j("9"), j("1/9")],
            vec![j("1/9"), j("1"), j("9")],
            vec![j("9"), j("1/9"), j("1")],
        ]);
        let err = build_scenario(cfg.clone(), tmp.path(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Inconsistent { cr, .. } if cr > 0.05), "{err}");
        assert!(err.to_string().contains("CR ="));
        let opts = LoadOptions {
            override_cr: true,
            ..LoadOptions::default()
        };
        let loaded = build_scenario(cfg, tmp.path(), &opts).unwrap();
        assert!(!loaded.ahp.unwrap().consistent);
    }

    #[test]
    fn sandbox_rejects_escaping_paths() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("root");
        std::fs::create_dir(&root).unwrap();
        std::fs::write(tmp.path().join("outside.asc"), "x").unwrap();
        std::fs::write(root.join("inside.asc"), "x").unwrap();
        assert!(resolve_path(&root, Path::new("inside.asc"), Some(&root)).is_ok());
        let err = resolve_path(&root, Path::new("../outside.asc"), Some(&root)).unwrap_err();
        assert!(matches!(err, Error::Sandbox(_)));
    }

    #[test]
    fn missing_file_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        small_dataset(tmp.path());
        std::fs::remove_file(tmp.path().join("dem.asc")).unwrap();
        let err = load_scenario(tmp.path().join("approach1.toml"), &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("dem.asc"), "{err}");
    }
}
