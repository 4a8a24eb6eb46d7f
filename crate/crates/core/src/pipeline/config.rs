//! Scenario configuration files.
//!
//! A config lists criteria with their sources, optional grade rules and
//! weights (or one pairwise matrix for all of them), constraint masks,
//! energy parameters and class breaks. Paths are relative to the config
//! file's directory. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ahp::{parse_judgment, MatrixViolation, ViolationKind};
use crate::error::{Error, Result};
use crate::kriging::{VariogramKind, VariogramModel};
use crate::mcda::{ClassBreaks, EnergyParams};
use crate::reclass::{CriterionId, GradeRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Where `run` writes artifacts when no directory is given on the
    /// command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaks: Option<ClassBreaks>,
    /// Pairwise judgments over the criteria, in listed order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Judgment>>>,
    #[serde(default)]
    pub energy: EnergyParams,
    pub criteria: Vec<CriterionConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    pub id: CriterionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    pub source: SourceConfig,
    /// Defaults to the criterion's standard rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<GradeRule>,
}

impl CriterionConfig {
    pub fn rule(&self) -> GradeRule {
        self.rule.unwrap_or_else(|| self.id.default_rule())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// A grid file used as is.
    Grid { path: PathBuf },
    /// Sample points (`x,y,value` table) kriged onto the scenario grid.
    Kriged {
        points: PathBuf,
        #[serde(default)]
        variogram: VariogramKind,
        #[serde(default = "default_bins")]
        bins: usize,
        /// Defaults to half the largest point separation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_lag: Option<f64>,
        /// Skips fitting when given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<VariogramModel>,
    },
    /// Percent slope of a DEM.
    Slope { dem: PathBuf },
    /// Aspect azimuth of a DEM.
    Aspect { dem: PathBuf },
    /// Distance in km (map units are metres) to the 1-cells of a mask.
    Distance { features: PathBuf },
}

fn default_bins() -> usize {
    12
}

impl SourceConfig {
    /// The grid file this source reads, if any.
    pub fn grid_path(&self) -> Option<&Path> {
        match self {
            SourceConfig::Grid { path } => Some(path),
            SourceConfig::Slope { dem } | SourceConfig::Aspect { dem } => Some(dem),
            SourceConfig::Distance { features } => Some(features),
            SourceConfig::Kriged { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub name: String,
    pub mask: PathBuf,
    /// Exclusion radius around the mask, metres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_m: Option<f64>,
    #[serde(default = "enabled", skip_serializing_if = "is_enabled")]
    pub enabled: bool,
}

fn enabled() -> bool {
    true
}

fn is_enabled(b: &bool) -> bool {
    *b
}

/// A pairwise judgment: a number or a fraction string such as `"1/3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Judgment {
    Number(f64),
    Text(String),
}

impl Judgment {
    pub fn value(&self) -> Result<f64> {
        match self {
            Judgment::Number(x) => Ok(*x),
            Judgment::Text(s) => parse_judgment(s),
        }
    }
}

impl From<f64> for Judgment {
    fn from(x: f64) -> Self {
        Judgment::Number(x)
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Judgment::Number(x) => write!(f, "{x}"),
            Judgment::Text(s) => f.write_str(s),
        }
    }
}

/// Converts a judgment matrix to numbers, reporting every unparsable cell.
pub fn judgment_values(rows: &[Vec<Judgment>]) -> Result<Vec<Vec<f64>>> {
    let mut bad = Vec::new();
    let values = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, cell)| {
                    cell.value().unwrap_or_else(|_| {
                        bad.push(MatrixViolation {
                            row: i,
                            col: j,
                            kind: ViolationKind::Parse,
                            message: format!("invalid judgment '{cell}'"),
                        });
                        f64::NAN
                    })
                })
                .collect()
        })
        .collect();
    if bad.is_empty() {
        Ok(values)
    } else {
        Err(Error::Matrix(bad))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_structure()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_structure()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Canonical byte form used for hashing.
    pub fn canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("config serializes to JSON")
    }

    pub fn class_breaks(&self) -> ClassBreaks {
        self.breaks.clone().unwrap_or_default()
    }

    /// Checks that need no file access: unique ids, one weighting method,
    /// valid rules and energy parameters.
    pub fn check_structure(&self) -> Result<()> {
        if self.criteria.is_empty() {
            return Err(Error::Config("no criteria listed".into()));
        }
        for (i, c) in self.criteria.iter().enumerate() {
            if self.criteria[..i].iter().any(|d| d.id == c.id) {
                return Err(Error::Config(format!("criterion {} listed twice", c.id)));
            }
            c.rule().validate()?;
            if let SourceConfig::Kriged { bins, max_lag, .. } = &c.source {
                if *bins == 0 {
                    return Err(Error::Config(format!("criterion {}: bins must be >= 1", c.id)));
                }
                if let Some(l) = max_lag {
                    if !(*l > 0.0) {
                        return Err(Error::Config(format!("criterion {}: max_lag must be > 0", c.id)));
                    }
                }
            }
        }
        let weighted = self.criteria.iter().filter(|c| c.weight.is_some()).count();
        match (&self.matrix, weighted) {
            (Some(_), w) if w > 0 => {
                return Err(Error::Config(
                    "give either criterion weights or a matrix, not both".into(),
                ))
            }
            (Some(m), _) => {
                let n = self.criteria.len();
                if m.len() != n || m.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("matrix must be {n}x{n} to match the criteria")));
                }
            }
            (None, 0) => return Err(Error::Config("no weights: give criterion weights or a matrix".into())),
            (None, w) if w < self.criteria.len() => {
                let missing: Vec<String> = self
                    .criteria
                    .iter()
                    .filter(|c| c.weight.is_none())
                    .map(|c| c.id.to_string())
                    .collect();
                return Err(Error::Config(format!("missing weight for {}", missing.join(", "))));
            }
            _ => {}
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if self.constraints[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::Config(format!("constraint {} listed twice", c.name)));
            }
            if let Some(b) = c.buffer_m {
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(Error::Config(format!("constraint {}: buffer_m must be >= 0", c.name)));
                }
            }
        }
        self.energy.validate()
    }

    /// Every file the config refers to.
    pub fn referenced_paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = Vec::new();
        for c in &self.criteria {
            match &c.source {
                SourceConfig::Kriged { points, .. } => out.push(points),
                other => out.extend(other.grid_path()),
            }
        }
        out.extend(self.constraints.iter().map(|c| c.mask.as_path()));
        out
    }
}
