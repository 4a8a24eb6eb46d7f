//! Constraint masking, weighted overlay, suitability classes, area and
//! energy accounting, and leave-one-criterion-out sensitivity.

use serde::{Deserialize, Serialize};

use crate::ahp::PriorityVector;
use crate::error::{Error, Result};
use crate::raster::{cell_area_km2, zip_cells, Grid, GridHeader};
use crate::reclass::{reclassify, CriterionId, CriterionLayer};
use crate::spatial::buffer_mask;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintLayer {
    pub name: String,
    /// 1 inside the constrained feature, 0 outside.
    pub mask: Grid,
    /// Extra exclusion radius around the feature, map units.
    pub buffer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    header: GridHeader,
    layers: Vec<ConstraintLayer>,
}

impl ConstraintSet {
    pub fn new(header: GridHeader) -> Self {
        ConstraintSet {
            header,
            layers: Vec::new(),
        }
    }

    pub fn push(&mut self, layer: ConstraintLayer) -> Result<()> {
        self.header.check_aligned(layer.mask.header())?;
        self.layers.push(layer);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, mask: Grid, buffer: Option<f64>) -> Result<Self> {
        self.push(ConstraintLayer {
            name: name.into(),
            mask,
            buffer,
        })?;
        Ok(self)
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn layers(&self) -> &[ConstraintLayer] {
        &self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Union of all constraint masks after buffering. Always finite 0/1.
pub fn constraint_union(cs: &ConstraintSet) -> Result<Grid> {
    let mut out = vec![0.0; cs.header.len()];
    for layer in &cs.layers {
        let has_source = layer
            .mask
            .values()
            .iter()
            .enumerate()
            .any(|(i, &v)| v == 1.0 && !layer.mask.is_nodata(i));
        let buffered;
        let mask = match layer.buffer {
            Some(r) if r > 0.0 && has_source => {
                buffered = buffer_mask(&layer.mask, r)?;
                &buffered
            }
            _ => &layer.mask,
        };
        for (i, (o, &v)) in out.iter_mut().zip(mask.values()).enumerate() {
            if v == 1.0 && !mask.is_nodata(i) {
                *o = 1.0;
            }
        }
    }
    Grid::new(cs.header, out)
}

/// Per-cell weighted sum of grades.
///
/// Layers with zero weight do not participate, so their nodata cells do not
/// remove cells from scoring. The result is clamped to the cell's
/// [min, max] participating grade, which absorbs rounding in the sum and keeps
/// the score a convex combination.
pub fn weighted_overlay(grades: &[&Grid], w: &PriorityVector) -> Result<Grid> {
    if grades.len() != w.len() {
        return Err(Error::Weights(format!(
            "{} criterion layers but {} weights",
            grades.len(),
            w.len()
        )));
    }
    let (layers, weights): (Vec<&Grid>, Vec<f64>) = grades
        .iter()
        .zip(w.as_slice())
        .filter(|(_, &x)| x > 0.0)
        .map(|(g, &x)| (*g, x))
        .unzip();
    zip_cells(&layers, |g| {
        let mut s = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, wi) in g.iter().zip(&weights) {
            s += wi * x;
            lo = lo.min(*x);
            hi = hi.max(*x);
        }
        s.clamp(lo, hi)
    })
}

/// Strictly increasing class boundaries. Class k covers `[b[k-1], b[k])`,
/// the last class also includes its upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassBreaks(Vec<f64>);

impl ClassBreaks {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.len() < 2 {
            return Err(Error::Breaks("need at least two breaks".into()));
        }
        if b.windows(2).any(|p| !(p[0] < p[1])) || b.iter().any(|x| !x.is_finite()) {
            return Err(Error::Breaks(format!(
                "breaks must be finite and strictly increasing: {b:?}"
            )));
        }
        if b[0] > 1.0 || *b.last().unwrap() < 9.0 {
            return Err(Error::Breaks(format!("breaks must span the grade range [1, 9]: {b:?}")));
        }
        Ok(ClassBreaks(b))
    }

    pub fn n_classes(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn class_of(&self, score: f64) -> Result<u8> {
        let b = &self.0;
        let last = *b.last().unwrap();
        if !(score >= b[0] && score <= last) {
            return Err(Error::ScoreOutOfRange(score));
        }
        if score == last {
            return Ok(self.n_classes() as u8);
        }
        let k = b.partition_point(|&x| x <= score);
        Ok(k as u8)
    }
}

impl Default for ClassBreaks {
    fn default() -> Self {
        ClassBreaks(vec![1.0, 3.0, 5.0, 7.0, 9.0])
    }
}

impl TryFrom<Vec<f64>> for ClassBreaks {
    type Error = Error;
    fn try_from(b: Vec<f64>) -> Result<Self> {
        ClassBreaks::new(b)
    }
}

impl From<ClassBreaks> for Vec<f64> {
    fn from(b: ClassBreaks) -> Self {
        b.0
    }
}

pub fn classify(score: &Grid, breaks: &ClassBreaks) -> Result<Grid> {
    let nd = score.nodata();
    let values = score
        .values()
        .iter()
        .map(|&s| {
            if s == nd {
                Ok(nd)
            } else {
                breaks.class_of(s).map(f64::from)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Grid::new(*score.header(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassArea {
    pub class: u8,
    pub full_cells: usize,
    pub exploitable_cells: usize,
    pub full_km2: f64,
    pub exploitable_km2: f64,
    /// Share of the total scored area, percent.
    pub full_pct: f64,
    /// Exploitable area as a share of the total scored area, percent.
    pub exploitable_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaTable {
    pub rows: Vec<ClassArea>,
    pub cell_km2: f64,
    pub scored_cells: usize,
    pub exploitable_cells: usize,
    pub scored_km2: f64,
    pub exploitable_km2: f64,
}

/// Full and exploitable (outside `exclusion`) area per class.
pub fn class_areas(classes: &Grid, exclusion: &Grid, n_classes: usize) -> Result<AreaTable> {
    classes.header().check_aligned(exclusion.header())?;
    let mut full = vec![0usize; n_classes];
    let mut expl = vec![0usize; n_classes];
    for (i, c) in classes.cells().enumerate() {
        let Some(c) = c else { continue };
        let k = c as usize;
        if c.fract() != 0.0 || k < 1 || k > n_classes {
            return Err(Error::InvalidGrid(format!(
                "cell {i} holds class {c}, expected 1..={n_classes}"
            )));
        }
        full[k - 1] += 1;
        if exclusion.values()[i] != 1.0 {
            expl[k - 1] += 1;
        }
    }
    let cell = cell_area_km2(classes.header());
    let scored: usize = full.iter().sum();
    let exploitable: usize = expl.iter().sum();
    let pct = |n: usize| {
        if scored == 0 {
            0.0
        } else {
            100.0 * n as f64 / scored as f64
        }
    };
    let rows = (0..n_classes)
        .map(|k| ClassArea {
            class: (k + 1) as u8,
            full_cells: full[k],
            exploitable_cells: expl[k],
            full_km2: full[k] as f64 * cell,
            exploitable_km2: expl[k] as f64 * cell,
            full_pct: pct(full[k]),
            exploitable_pct: pct(expl[k]),
        })
        .collect();
    Ok(AreaTable {
        rows,
        cell_km2: cell,
        scored_cells: scored,
        exploitable_cells: exploitable,
        scored_km2: scored as f64 * cell,
        exploitable_km2: exploitable as f64 * cell,
    })
}

/// Annual generation potential in TWh/year from irradiation `sr`
/// (kWh/m²/day), area `ca_km2`, shading factor and conversion efficiency.
pub fn generation_potential(sr: f64, ca_km2: f64, sf: f64, eta: f64) -> Result<f64> {
    if !(sr >= 0.0 && ca_km2 >= 0.0) {
        return Err(Error::Energy(format!(
            "irradiation and area must be >= 0, got {sr} and {ca_km2}"
        )));
    }
    check_fraction("shading factor", sf)?;
    check_fraction("efficiency", eta)?;
    let kwh_per_year = sr * (ca_km2 * 1e6) * sf * eta * 365.0;
    Ok(kwh_per_year / 1e9)
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Energy(format!("{name} must lie in (0, 1], got {v}")))
    }
}

/// Mean power per km² over the daylight hours, MW/km².
pub fn capacity_density(gp_twh: f64, ca_km2: f64, daylight_hours: f64) -> Result<f64> {
    if !(ca_km2 > 0.0) {
        return Err(Error::Energy(format!("area must be > 0, got {ca_km2}")));
    }
    if !(daylight_hours > 0.0 && daylight_hours <= 24.0) {
        return Err(Error::Energy(format!(
            "daylight hours must lie in (0, 24], got {daylight_hours}"
        )));
    }
    let wh_per_day_per_km2 = gp_twh * 1e12 / 365.0 / ca_km2;
    Ok(wh_per_day_per_km2 / daylight_hours / 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    #[serde(default = "default_sf")]
    pub sf: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_daylight")]
    pub daylight_hours: f64,
    /// Fixed irradiation for every class instead of the per-class mean.
    #[serde(default)]
    pub sr_override: Option<f64>,
}

fn default_sf() -> f64 {
    0.7
}
fn default_eta() -> f64 {
    0.16
}
fn default_daylight() -> f64 {
    12.0
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            sf: default_sf(),
            eta: default_eta(),
            daylight_hours: default_daylight(),
            sr_override: None,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        check_fraction("shading factor", self.sf)?;
        check_fraction("efficiency", self.eta)?;
        if !(self.daylight_hours > 0.0 && self.daylight_hours <= 24.0) {
            return Err(Error::Energy(format!(
                "daylight hours must lie in (0, 24], got {}",
                self.daylight_hours
            )));
        }
        if let Some(sr) = self.sr_override {
            if !(sr >= 0.0 && sr.is_finite()) {
                return Err(Error::Energy(format!("irradiation override must be >= 0, got {sr}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub criteria: Vec<CriterionLayer>,
    pub weights: PriorityVector,
    pub constraints: ConstraintSet,
    pub breaks: ClassBreaks,
    pub energy: EnergyParams,
}

impl Scenario {
    pub fn header(&self) -> &GridHeader {
        self.constraints.header()
    }

    pub fn criterion_index(&self, id: CriterionId) -> Option<usize> {
        self.criteria.iter().position(|c| c.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.criteria.len() != self.weights.len() {
            return Err(Error::Weights(format!(
                "{} criteria but {} weights",
                self.criteria.len(),
                self.weights.len()
            )));
        }
        for (i, c) in self.criteria.iter().enumerate() {
            if self.criteria[..i].iter().any(|d| d.id == c.id) {
                return Err(Error::Config(format!("criterion {} listed twice", c.id)));
            }
            self.header().check_aligned(c.source.header())?;
        }
        self.energy.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SrSource {
    ClassMeanGhi,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassGeneration {
    pub class: u8,
    pub sr_full: Option<f64>,
    pub sr_exploitable: Option<f64>,
    pub gp_full_twh: f64,
    pub gp_exploitable_twh: f64,
    /// Over the exploitable area of the class.
    pub capacity_mw_per_km2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuitabilityResult {
    pub score: Grid,
    pub classes: Grid,
    /// Classes with constrained cells set to nodata.
    pub exploitable_classes: Grid,
    pub exclusion: Grid,
    pub areas: AreaTable,
    pub generation: Vec<ClassGeneration>,
    /// Exploitable area of the highest class.
    pub capacity_mw_per_km2: Option<f64>,
    pub sr_source: SrSource,
}

fn layer_grade(layer: &CriterionLayer) -> Result<std::borrow::Cow<'_, Grid>> {
    match &layer.grade {
        Some(g) => Ok(std::borrow::Cow::Borrowed(g)),
        None => Ok(std::borrow::Cow::Owned(reclassify(&layer.source, &layer.rule)?)),
    }
}

/// Runs overlay, classification and accounting for a scenario.
pub fn evaluate(scenario: &Scenario) -> Result<SuitabilityResult> {
    scenario.validate()?;
    let exclusion = constraint_union(&scenario.constraints)?;
    evaluate_with_exclusion(scenario, exclusion)
}

fn evaluate_with_exclusion(scenario: &Scenario, exclusion: Grid) -> Result<SuitabilityResult> {
    let grades = scenario.criteria.iter().map(layer_grade).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Grid> = grades.iter().map(|g| g.as_ref()).collect();
    let score = weighted_overlay(&refs, &scenario.weights)?;
    let classes = classify(&score, &scenario.breaks)?;
    let n_classes = scenario.breaks.n_classes();
    let areas = class_areas(&classes, &exclusion, n_classes)?;
    let nd = classes.nodata();
    let exploitable_classes = zip_cells(&[&classes, &exclusion], |v| if v[1] == 1.0 { f64::NAN } else { v[0] })?;

    let energy = &scenario.energy;
    let ghi = scenario
        .criterion_index(CriterionId::Ghi)
        .map(|i| &scenario.criteria[i].source);
    let sr_source = if energy.sr_override.is_some() {
        SrSource::Fixed
    } else if ghi.is_some() {
        SrSource::ClassMeanGhi
    } else {
        return Err(Error::Energy("no GHI criterion and no irradiation override".into()));
    };

    // Per-class sums of GHI over full and exploitable cells.
    let mut sums = vec![(0.0, 0usize, 0.0, 0usize); n_classes];
    if let (SrSource::ClassMeanGhi, Some(ghi)) = (sr_source, ghi) {
        for (i, &c) in classes.values().iter().enumerate() {
            if c == nd || ghi.is_nodata(i) {
                continue;
            }
            let v = ghi.values()[i];
            let s = &mut sums[c as usize - 1];
            s.0 += v;
            s.1 += 1;
            if exclusion.values()[i] != 1.0 {
                s.2 += v;
                s.3 += 1;
            }
        }
    }
    let mean = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);

    let generation = areas
        .rows
        .iter()
        .zip(&sums)
        .map(|(row, s)| {
            let (sr_full, sr_expl) = match energy.sr_override {
                Some(sr) => (Some(sr), Some(sr)),
                None => (mean(s.0, s.1), mean(s.2, s.3)),
            };
            let gp_full = generation_potential(sr_full.unwrap_or(0.0), row.full_km2, energy.sf, energy.eta)?;
            let gp_expl = generation_potential(sr_expl.unwrap_or(0.0), row.exploitable_km2, energy.sf, energy.eta)?;
            let capacity = if row.exploitable_km2 > 0.0 {
                Some(capacity_density(gp_expl, row.exploitable_km2, energy.daylight_hours)?)
            } else {
                None
            };
            Ok(ClassGeneration {
                class: row.class,
                sr_full,
                sr_exploitable: sr_expl,
                gp_full_twh: gp_full,
                gp_exploitable_twh: gp_expl,
                capacity_mw_per_km2: capacity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let capacity_mw_per_km2 = generation.last().and_then(|g| g.capacity_mw_per_km2);

    Ok(SuitabilityResult {
        score,
        classes,
        exploitable_classes,
        exclusion,
        areas,
        generation,
        capacity_mw_per_km2,
        sr_source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub excluded: CriterionId,
    /// Percent change of each class's full area; `None` where the baseline
    /// class area is zero.
    pub delta_pct: Vec<Option<f64>>,
}

/// Percent change `(S_excluded - S_baseline) / S_baseline * 100`.
pub fn percent_change(excluded_area: f64, baseline_area: f64) -> Option<f64> {
    (baseline_area > 0.0).then(|| (excluded_area - baseline_area) / baseline_area * 100.0)
}

/// The scenario without `excluded`, remaining weights rescaled to keep their
/// ratios.
pub fn scenario_without(scenario: &Scenario, excluded: CriterionId) -> Result<Scenario> {
    if excluded == CriterionId::Ghi {
        return Err(Error::GhiExclusion(excluded.to_string()));
    }
    let idx = scenario
        .criterion_index(excluded)
        .ok_or_else(|| Error::UnknownCriterion(excluded.to_string()))?;
    let mut criteria = scenario.criteria.clone();
    criteria.remove(idx);
    Ok(Scenario {
        criteria,
        weights: scenario.weights.without(idx)?,
        constraints: scenario.constraints.clone(),
        breaks: scenario.breaks.clone(),
        energy: scenario.energy,
    })
}

/// Re-runs the overlay without one criterion and compares full class areas
/// with the baseline.
pub fn sensitivity(scenario: &Scenario, baseline: &SuitabilityResult, excluded: CriterionId) -> Result<SensitivityRow> {
    let reduced = scenario_without(scenario, excluded)?;
    let result = evaluate_with_exclusion(&reduced, baseline.exclusion.clone())?;
    let delta_pct = baseline
        .areas
        .rows
        .iter()
        .zip(&result.areas.rows)
        .map(|(b, r)| percent_change(r.full_km2, b.full_km2))
        .collect();
    Ok(SensitivityRow { excluded, delta_pct })
}

/// Sensitivity rows for every criterion except GHI, in scenario order.
pub fn sensitivity_table(scenario: &Scenario, baseline: &SuitabilityResult) -> Result<Vec<SensitivityRow>> {
    let ids: Vec<CriterionId> = scenario
        .criteria
        .iter()
        .map(|c| c.id)
        .filter(|&id| id != CriterionId::Ghi)
        .collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ids.par_iter().map(|&id| sensitivity(scenario, baseline, id)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ids.iter().map(|&id| sensitivity(scenario, baseline, id)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reclass::GradeRule;
    use proptest::prelude::*;

    fn header(nc: usize, nr: usize, cs: f64) -> GridHeader {
        GridHeader::new(nc, nr, 0.0, 0.0, cs, -9999.0).unwrap()
    }

    fn approach1() -> PriorityVector {
        PriorityVector::from_published(vec![0.250, 0.086, 0.019, 0.026, 0.052, 0.036, 0.272, 0.148, 0.111]).unwrap()
    }

    #[test]
    fn empty_constraint_set_is_all_zero() {
        let h = header(4, 3, 1.0);
        let u = constraint_union(&ConstraintSet::new(h)).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disjoint_masks_add_up() {
        let h = header(10, 10, 1.0);
        let a: Vec<f64> = (0..100).map(|i| if i < 10 { 1.0 } else { 0.0 }).collect();
        let b: Vec<f64> = (0..100)
            .map(|i| if (50..70).contains(&i) { 1.0 } else { 0.0 })
            .collect();
        let cs = ConstraintSet::new(h)
            .with("a", Grid::new(h, a).unwrap(), None)
            .unwrap()
            .with("b", Grid::new(h, b).unwrap(), Some(0.0))
            .unwrap();
        let u = constraint_union(&cs).unwrap();
        assert_eq!(u.values().iter().filter(|&&v| v == 1.0).count(), 30);
    }

    #[test]
    fn buffered_constraint_grows() {
        let h = header(5, 5, 100.0);
        let mut v = vec![0.0; 25];
        v[12] = 1.0;
        let cs = ConstraintSet::new(h)
            .with("settlement", Grid::new(h, v).unwrap(), Some(150.0))
            .unwrap();
        let u = constraint_union(&cs).unwrap();
        assert_eq!(u.values().iter().filter(|&&v| v == 1.0).count(), 9);
    }

    #[test]
    fn misaligned_constraint_rejected() {
        let cs = ConstraintSet::new(header(2, 2, 1.0));
        assert!(cs.with("x", Grid::filled(header(2, 2, 2.0), 0.0), None).is_err());
    }

    #[test]
    fn overlay_of_uniform_grades_is_exact() {
        let h = header(2, 2, 1.0);
        let w = approach1();
        for grade in [9.0, 5.0, 1.0] {
            let g: Vec<Grid> = (0..9).map(|_| Grid::filled(h, grade)).collect();
            let refs: Vec<&Grid> = g.iter().collect();
            let s = weighted_overlay(&refs, &w).unwrap();
            assert!(s.values().iter().all(|&v| v == grade));
        }
    }

    #[test]
    fn overlay_hand_example() {
        let h = header(1, 1, 1.0);
        let grades = [9.0, 5.0, 5.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0];
        let g: Vec<Grid> = grades.iter().map(|&x| Grid::filled(h, x)).collect();
        let refs: Vec<&Grid> = g.iter().collect();
        let s = weighted_overlay(&refs, &approach1()).unwrap();
        assert!((s.values()[0] - (9.0 - (0.086 + 0.019) * 4.0)).abs() < 1e-12);
        assert!((s.values()[0] - 8.58).abs() < 1e-12);
    }

    #[test]
    fn overlay_count_mismatch() {
        let h = header(1, 1, 1.0);
        let g = Grid::filled(h, 1.0);
        assert!(weighted_overlay(&[&g], &approach1()).is_err());
    }

    #[test]
    fn zero_weight_layer_does_not_drop_cells() {
        let h = header(2, 1, 1.0);
        let a = Grid::new(h, vec![3.0, 4.0]).unwrap();
        let b = Grid::new(h, vec![-9999.0, 9.0]).unwrap();
        let w = PriorityVector::new(vec![1.0, 0.0]).unwrap();
        let s = weighted_overlay(&[&a, &b], &w).unwrap();
        assert_eq!(s.values(), &[3.0, 4.0]);
        let w = PriorityVector::new(vec![0.5, 0.5]).unwrap();
        let s = weighted_overlay(&[&a, &b], &w).unwrap();
        assert_eq!(s.values(), &[-9999.0, 6.5]);
    }

    #[test]
    fn class_boundaries() {
        let b = ClassBreaks::default();
        assert_eq!(b.class_of(1.0).unwrap(), 1);
        assert_eq!(b.class_of(2.999).unwrap(), 1);
        assert_eq!(b.class_of(3.0).unwrap(), 2);
        assert_eq!(b.class_of(7.0).unwrap(), 4);
        assert_eq!(b.class_of(9.0).unwrap(), 4);
        assert!(b.class_of(9.01).is_err());
        assert!(b.class_of(0.5).is_err());
        assert!(ClassBreaks::new(vec![1.0, 5.0, 5.0, 9.0]).is_err());
        assert!(ClassBreaks::new(vec![2.0, 9.0]).is_err());
    }

    #[test]
    fn uniform_class_area() {
        let h = header(10, 10, 1000.0);
        let c = Grid::filled(h, 4.0);
        let t = class_areas(&c, &Grid::filled(h, 0.0), 4).unwrap();
        assert_eq!(t.rows[3].full_km2, 100.0);
        assert_eq!(t.rows[3].full_pct, 100.0);
        assert_eq!(t.rows[3].exploitable_km2, 100.0);
        assert_eq!(t.rows[0].full_km2, 0.0);
    }

    #[test]
    fn generation_examples() {
        assert_eq!(generation_potential(4.68, 0.0, 0.7, 0.16).unwrap(), 0.0);
        let gp = generation_potential(5.04, 1.0, 0.7, 0.16).unwrap();
        assert!((gp - 0.206_035_2).abs() < 1e-9);
        assert!(generation_potential(4.0, 1.0, 0.0, 0.16).is_err());
        assert!(generation_potential(4.0, 1.0, 0.7, 1.5).is_err());
    }

    #[test]
    fn capacity_examples() {
        let c = capacity_density(8.91, 46.60, 12.0).unwrap();
        assert!((c / 43.65 - 1.0).abs() < 0.01);
        assert!((capacity_density(2.0 * 8.91, 46.60, 12.0).unwrap() - 2.0 * c).abs() < 1e-9);
        assert!(capacity_density(1.0, 0.0, 12.0).is_err());
        assert!(capacity_density(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn percent_change_cases() {
        assert_eq!(percent_change(150.0, 100.0), Some(50.0));
        assert_eq!(percent_change(5.0, 0.0), None);
    }

    fn small_scenario() -> Scenario {
        let h = header(6, 5, 1000.0);
        let ghi = Grid::new(h, (0..30).map(|i| 2.6 + 0.08 * i as f64).collect()).unwrap();
        let slope = Grid::new(h, (0..30).map(|i| (i % 10) as f64).collect()).unwrap();
        let road = Grid::new(h, (0..30).map(|i| 0.05 + 0.35 * i as f64).collect()).unwrap();
        let criteria = vec![
            CriterionLayer::new(CriterionId::Ghi, ghi, CriterionId::Ghi.default_rule()),
            CriterionLayer::new(CriterionId::S, slope, CriterionId::S.default_rule()),
            CriterionLayer::new(CriterionId::Rp, road, CriterionId::Rp.default_rule()),
        ];
        let mask = Grid::new(h, (0..30).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect()).unwrap();
        Scenario {
            criteria,
            weights: PriorityVector::new(vec![0.5, 0.2, 0.3]).unwrap(),
            constraints: ConstraintSet::new(h).with("m", mask, None).unwrap(),
            breaks: ClassBreaks::default(),
            energy: EnergyParams::default(),
        }
    }

    #[test]
    fn evaluate_small_scenario() {
        let s = small_scenario();
        let r = evaluate(&s).unwrap();
        // road distance 0.05 km falls inside the buffer
        assert_eq!(r.score.values()[0], -9999.0);
        assert_eq!(r.areas.scored_cells, 29);
        let total: usize = r.areas.rows.iter().map(|x| x.full_cells).sum();
        assert_eq!(total, 29);
        assert!(r
            .generation
            .iter()
            .all(|g| g.gp_full_twh >= 0.0 && g.gp_exploitable_twh >= 0.0));
        assert_eq!(r.sr_source, SrSource::ClassMeanGhi);
        for (i, c) in r.exploitable_classes.cells().enumerate() {
            if r.exclusion.values()[i] == 1.0 {
                assert!(c.is_none());
            }
        }
    }

    #[test]
    fn ghi_cannot_be_excluded() {
        let s = small_scenario();
        let r = evaluate(&s).unwrap();
        assert!(matches!(
            sensitivity(&s, &r, CriterionId::Ghi),
            Err(Error::GhiExclusion(_))
        ));
        assert!(matches!(
            sensitivity(&s, &r, CriterionId::Az),
            Err(Error::UnknownCriterion(_))
        ));
    }

    #[test]
    fn zero_weight_exclusion_is_identity() {
        let mut s = small_scenario();
        s.weights = PriorityVector::new(vec![0.6, 0.0, 0.4]).unwrap();
        let r = evaluate(&s).unwrap();
        let row = sensitivity(&s, &r, CriterionId::S).unwrap();
        for d in row.delta_pct.into_iter().flatten() {
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn sensitivity_table_skips_ghi() {
        let s = small_scenario();
        let r = evaluate(&s).unwrap();
        let t = sensitivity_table(&s, &r).unwrap();
        assert_eq!(
            t.iter().map(|r| r.excluded).collect::<Vec<_>>(),
            vec![CriterionId::S, CriterionId::Rp]
        );
    }

    #[test]
    fn fixed_irradiation_override() {
        let mut s = small_scenario();
        s.energy.sr_override = Some(4.68);
        let r = evaluate(&s).unwrap();
        assert_eq!(r.sr_source, SrSource::Fixed);
        for (g, a) in r.generation.iter().zip(&r.areas.rows) {
            let expect = generation_potential(4.68, a.full_km2, 0.7, 0.16).unwrap();
            assert_eq!(g.gp_full_twh, expect);
        }
    }

    #[test]
    fn ungraded_layers_are_graded_on_the_fly() {
        let s = small_scenario();
        let mut graded = s.clone();
        for c in &mut graded.criteria {
            c.grade = Some(reclassify(&c.source, &c.rule).unwrap());
        }
        assert_eq!(evaluate(&s).unwrap().score, evaluate(&graded).unwrap().score);
        let _ = GradeRule::AzimuthClasses;
    }

    proptest! {
        #[test]
        fn generation_is_linear(sr in 0f64..6.0, ca in 0f64..1e3, k in 0.1f64..4.0) {
            let a = generation_potential(sr, ca, 0.7, 0.16).unwrap();
            let b = generation_potential(k * sr, ca, 0.7, 0.16).unwrap();
            let c = generation_potential(sr, k * ca, 0.7, 0.16).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-9 * b.abs().max(1.0));
            prop_assert!((c - k * a).abs() <= 1e-9 * c.abs().max(1.0));
        }
    }
}
