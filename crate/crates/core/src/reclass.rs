//! Grading of physical criterion layers onto the 1..9 suitability scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Grid;
use crate::spatial::FLAT_ASPECT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    #[serde(rename = "GHI")]
    Ghi,
    T,
    H,
    #[serde(rename = "DEM")]
    Dem,
    S,
    Az,
    Gp,
    Rp,
    Sp,
}

impl CriterionId {
    pub const ALL: [CriterionId; 9] = [
        CriterionId::Ghi,
        CriterionId::T,
        CriterionId::H,
        CriterionId::Dem,
        CriterionId::S,
        CriterionId::Az,
        CriterionId::Gp,
        CriterionId::Rp,
        CriterionId::Sp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::Ghi => "GHI",
            CriterionId::T => "T",
            CriterionId::H => "H",
            CriterionId::Dem => "DEM",
            CriterionId::S => "S",
            CriterionId::Az => "Az",
            CriterionId::Gp => "Gp",
            CriterionId::Rp => "Rp",
            CriterionId::Sp => "Sp",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            CriterionId::Ghi => "Global horizontal irradiation",
            CriterionId::T => "Temperature",
            CriterionId::H => "Relative humidity",
            CriterionId::Dem => "Elevation",
            CriterionId::S => "Slope",
            CriterionId::Az => "Aspect",
            CriterionId::Gp => "Power grid proximity",
            CriterionId::Rp => "Road proximity",
            CriterionId::Sp => "Settlement proximity",
        }
    }

    /// Default grading of the nine standard criteria.
    pub fn default_rule(self) -> GradeRule {
        match self {
            CriterionId::Ghi => GradeRule::AscendingBands {
                origin: 2.6,
                delta: 0.28,
            },
            CriterionId::T => GradeRule::DescendingBands {
                origin: 27.8,
                delta: 1.0,
            },
            CriterionId::H => GradeRule::DescendingBands {
                origin: 92.0,
                delta: 1.0,
            },
            CriterionId::Dem => GradeRule::DescendingBands {
                origin: 90.0,
                delta: 10.0,
            },
            CriterionId::S => GradeRule::DescendingBands {
                origin: 9.0,
                delta: 1.0,
            },
            CriterionId::Az => GradeRule::AzimuthClasses,
            CriterionId::Gp | CriterionId::Rp => GradeRule::ProximityBands {
                max: 10.0,
                delta: 1.1,
                buffer: 0.1,
            },
            CriterionId::Sp => GradeRule::ProximityBands {
                max: 10.0,
                delta: 1.055,
                buffer: 0.5,
            },
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownCriterion(s.to_string()))
    }
}

/// Outcome of grading one value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    Class(u8),
    Excluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GradeRule {
    /// Grade n covers `(origin + (n-1)Δ, origin + nΔ]`; higher is better.
    AscendingBands { origin: f64, delta: f64 },
    /// Grade n covers `[origin - nΔ, origin - (n-1)Δ)`; lower is better.
    DescendingBands { origin: f64, delta: f64 },
    /// N and S faces 9, diagonal faces 5, E and W 1, flat 9.
    AzimuthClasses,
    /// Distance at or inside `buffer` is excluded; grade n covers
    /// `(max - nΔ, max - (n-1)Δ]`, with grade 9 extended down to the buffer
    /// and anything beyond `max` graded 1.
    ProximityBands { max: f64, delta: f64, buffer: f64 },
}

impl GradeRule {
    pub fn validate(&self) -> Result<()> {
        let check_delta = |d: f64| {
            if d > 0.0 && d.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidRule(format!("delta must be > 0, got {d}")))
            }
        };
        match *self {
            GradeRule::AscendingBands { origin, delta } | GradeRule::DescendingBands { origin, delta } => {
                if !origin.is_finite() {
                    return Err(Error::InvalidRule(format!("origin must be finite, got {origin}")));
                }
                check_delta(delta)
            }
            GradeRule::AzimuthClasses => Ok(()),
            GradeRule::ProximityBands { max, delta, buffer } => {
                check_delta(delta)?;
                if !(buffer >= 0.0 && max > buffer && max.is_finite()) {
                    return Err(Error::InvalidRule(format!(
                        "proximity bands need 0 <= buffer < max, got buffer {buffer}, max {max}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Grade of a single finite value. Out-of-range values clamp to the
    /// nearest extreme grade.
    pub fn grade(&self, v: f64) -> Grade {
        match *self {
            GradeRule::AscendingBands { origin, delta } => {
                for n in 1..=8u8 {
                    if v <= origin + f64::from(n) * delta {
                        return Grade::Class(n);
                    }
                }
                Grade::Class(9)
            }
            GradeRule::DescendingBands { origin, delta } => {
                for n in 1..=8u8 {
                    if v >= origin - f64::from(n) * delta {
                        return Grade::Class(n);
                    }
                }
                Grade::Class(9)
            }
            GradeRule::AzimuthClasses => {
                if v == FLAT_ASPECT {
                    return Grade::Class(9);
                }
                let az = v.rem_euclid(360.0);
                // Upper-inclusive 45 degree sectors starting at N (0..22.5].
                let sector = if az <= 22.5 || az > 337.5 {
                    0
                } else {
                    ((az - 22.5) / 45.0).ceil() as u8
                };
                match sector {
                    0 | 4 => Grade::Class(9),
                    2 | 6 => Grade::Class(1),
                    _ => Grade::Class(5),
                }
            }
            GradeRule::ProximityBands { max, delta, buffer } => {
                if v <= buffer {
                    return Grade::Excluded;
                }
                for n in 1..=8u8 {
                    if v > max - f64::from(n) * delta {
                        return Grade::Class(n);
                    }
                }
                Grade::Class(9)
            }
        }
    }
}

/// Grades every valid cell. Excluded cells become nodata.
pub fn reclassify(source: &Grid, rule: &GradeRule) -> Result<Grid> {
    rule.validate()?;
    Ok(source.map_cells(|v| match rule.grade(v) {
        Grade::Class(n) => f64::from(n),
        Grade::Excluded => f64::NAN,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionLayer {
    pub id: CriterionId,
    pub source: Grid,
    pub rule: GradeRule,
    pub grade: Option<Grid>,
}

impl CriterionLayer {
    pub fn new(id: CriterionId, source: Grid, rule: GradeRule) -> Self {
        CriterionLayer {
            id,
            source,
            rule,
            grade: None,
        }
    }

    pub fn graded(&self) -> Option<&Grid> {
        self.grade.as_ref()
    }
}

/// Grades all layers in order. Returns a warning for each layer whose source
/// has no valid cells.
pub fn grade_all(mut layers: Vec<CriterionLayer>) -> Result<(Vec<CriterionLayer>, Vec<String>)> {
    if let Some(first) = layers.first() {
        let h = *first.source.header();
        for l in &layers[1..] {
            h.check_aligned(l.source.header())?;
        }
    }
    let mut warnings = Vec::new();
    for layer in &mut layers {
        if layer.source.count_valid() == 0 {
            let msg = format!("criterion {} has no valid cells", layer.id);
            log::warn!("{msg}");
            warnings.push(msg);
        }
        layer.grade = Some(reclassify(&layer.source, &layer.rule)?);
    }
    Ok((layers, warnings))
}
