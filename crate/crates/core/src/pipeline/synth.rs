//! Deterministic synthetic provinces for desk-scale runs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kriging::{write_points, SamplePoint, VariogramKind};
use crate::mcda::{constraint_union, ConstraintLayer, ConstraintSet, EnergyParams};
use crate::presets;
use crate::raster::{Grid, GridHeader};
use crate::reclass::CriterionId;

use super::config::{ConstraintConfig, CriterionConfig, ScenarioConfig, SourceConfig};

pub const GHI_RANGE: (f64, f64) = (2.6, 5.04);
pub const TEMPERATURE_RANGE: (f64, f64) = (17.1, 27.8);
pub const HUMIDITY_RANGE: (f64, f64) = (82.0, 91.5);
pub const DEM_MAX: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Metres.
    pub cellsize: f64,
    /// Share of the province covered by the union of constraint layers.
    pub constraint_fraction: f64,
    pub settlements: usize,
    pub roads: usize,
    pub grid_lines: usize,
    pub humidity_points: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            rows: 256,
            cols: 256,
            cellsize: 1000.0,
            constraint_fraction: 0.6695,
            settlements: 24,
            roads: 12,
            grid_lines: 4,
            humidity_points: 130,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 8 || self.cols < 8 {
            return Err(Error::Config(format!(
                "synthetic grid must be at least 8x8, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.cellsize > 0.0 && self.cellsize.is_finite()) {
            return Err(Error::Config(format!("cellsize must be > 0, got {}", self.cellsize)));
        }
        if !(self.constraint_fraction > 0.0 && self.constraint_fraction < 1.0) {
            return Err(Error::Config(format!(
                "constraint fraction must lie in (0, 1), got {}",
                self.constraint_fraction
            )));
        }
        if self.settlements < 2 {
            return Err(Error::Config("need at least 2 settlements".into()));
        }
        if self.humidity_points < 3 || self.humidity_points > self.rows * self.cols {
            return Err(Error::Config(format!(
                "humidity points must lie in 3..={}, got {}",
                self.rows * self.cols,
                self.humidity_points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConstraint {
    pub name: String,
    pub file: String,
    pub mask: Grid,
    pub buffer_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    pub header: GridHeader,
    pub ghi: Grid,
    pub temperature: Grid,
    pub dem: Grid,
    pub humidity: Vec<SamplePoint>,
    pub roads: Grid,
    pub grid_lines: Grid,
    pub settlements: Grid,
    pub constraints: Vec<SynthConstraint>,
    /// Achieved share of constrained cells.
    pub constraint_fraction: f64,
}

pub const GHI_FILE: &str = "ghi.asc";
pub const TEMPERATURE_FILE: &str = "temperature.asc";
pub const DEM_FILE: &str = "dem.asc";
pub const HUMIDITY_FILE: &str = "humidity_points.csv";
pub const ROADS_FILE: &str = "roads.asc";
pub const GRID_LINES_FILE: &str = "grid_lines.asc";
pub const SETTLEMENTS_FILE: &str = "settlements.asc";

/// Independent stream per generated layer, so changing one feature count
/// leaves the other layers untouched.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear value noise on a random lattice with the given cell spacing.
fn value_noise(rng: &mut ChaCha8Rng, rows: usize, cols: usize, spacing: f64) -> Vec<f64> {
    let ly = (rows as f64 / spacing).ceil() as usize + 2;
    let lx = (cols as f64 / spacing).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..ly * lx).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let fy = r as f64 / spacing;
        let iy = fy.floor() as usize;
        let ty = smoothstep(fy - iy as f64);
        for c in 0..cols {
            let fx = c as f64 / spacing;
            let ix = fx.floor() as usize;
            let tx = smoothstep(fx - ix as f64);
            let at = |y: usize, x: usize| lattice[y * lx + x];
            let top = at(iy, ix) + (at(iy, ix + 1) - at(iy, ix)) * tx;
            let bottom = at(iy + 1, ix) + (at(iy + 1, ix + 1) - at(iy + 1, ix)) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    out
}

/// Several octaves of value noise, halving spacing and amplitude each time.
fn fractal_noise(rng: &mut ChaCha8Rng, rows: usize, cols: usize, octaves: usize) -> Vec<f64> {
    let mut spacing = rows.max(cols) as f64 / 4.0;
    let mut amp = 1.0;
    let mut out = vec![0.0; rows * cols];
    for _ in 0..octaves {
        let layer = value_noise(rng, rows, cols, spacing.max(1.0));
        for (o, v) in out.iter_mut().zip(layer) {
            *o += amp * v;
        }
        spacing /= 2.0;
        amp /= 2.0;
    }
    out
}

/// Affine map of `v` onto `[lo, hi]`, rounded to `decimals`.
fn rescale(v: &[f64], lo: f64, hi: f64, decimals: i32) -> Vec<f64> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let scale = 10f64.powi(decimals);
    v.iter()
        .map(|x| {
            let y = lo + (x - min) / span * (hi - lo);
            ((y * scale).round() / scale).clamp(lo, hi)
        })
        .collect()
}

fn normalize(v: &[f64]) -> Vec<f64> {
    rescale(v, 0.0, 1.0, 12)
}

struct Raster {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
}

impl Raster {
    fn new(rows: usize, cols: usize) -> Self {
        Raster {
            rows,
            cols,
            cells: vec![0.0; rows * cols],
        }
    }

    fn mark(&mut self, r: f64, c: f64) {
        let (r, c) = (r.round(), c.round());
        if r >= 0.0 && c >= 0.0 && (r as usize) < self.rows && (c as usize) < self.cols {
            self.cells[r as usize * self.cols + c as usize] = 1.0;
        }
    }

    /// Marks every cell a straight segment passes through, sampling at
    /// quarter-cell steps.
    fn segment(&mut self, a: (f64, f64), b: (f64, f64)) {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let steps = (len * 4.0).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            self.mark(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)]) {
        for w in pts.windows(2) {
            self.segment(w[0], w[1]);
        }
    }

    fn disc(&mut self, center: (f64, f64), radius: f64) {
        let r0 = (center.0 - radius).floor().max(0.0) as usize;
        let c0 = (center.1 - radius).floor().max(0.0) as usize;
        for r in r0..self.rows.min((center.0 + radius).ceil() as usize + 1) {
            for c in c0..self.cols.min((center.1 + radius).ceil() as usize + 1) {
                if (r as f64 - center.0).hypot(c as f64 - center.1) <= radius {
                    self.cells[r * self.cols + c] = 1.0;
                }
            }
        }
    }

    fn into_grid(self, header: GridHeader) -> Result<Grid> {
        Grid::new(header, self.cells)
    }
}

/// Indices of the `k` largest values, ties broken by lower index.
fn top_k(values: &[f64], candidates: impl Iterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = candidates.collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn mask_from(header: GridHeader, cells: impl IntoIterator<Item = usize>) -> Result<Grid> {
    let mut v = vec![0.0; header.len()];
    for i in cells {
        v[i] = 1.0;
    }
    Grid::new(header, v)
}

pub fn synth_dataset(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let n = rows * cols;
    let header = GridHeader::new(cols, rows, 200_000.0, 9_800_000.0, spec.cellsize, -9999.0)?;
    let seed = spec.seed;

    let dem_n = normalize(&fractal_noise(&mut stream(seed, 1), rows, cols, 5));
    let dem_vals: Vec<f64> = dem_n
        .iter()
        .map(|t| (DEM_MAX * t.powi(3) * 100.0).round() / 100.0)
        .collect();
    let dem = Grid::new(header, dem_vals)?;

    let mut ghi_raw = fractal_noise(&mut stream(seed, 2), rows, cols, 4);
    for (i, v) in ghi_raw.iter_mut().enumerate() {
        *v += 0.6 * (i % cols) as f64 / cols as f64;
    }
    let ghi = Grid::new(header, rescale(&ghi_raw, GHI_RANGE.0, GHI_RANGE.1, 3))?;

    let t_noise = fractal_noise(&mut stream(seed, 3), rows, cols, 4);
    let t_raw: Vec<f64> = t_noise.iter().zip(&dem_n).map(|(t, d)| 0.6 * t - d).collect();
    let temperature = Grid::new(header, rescale(&t_raw, TEMPERATURE_RANGE.0, TEMPERATURE_RANGE.1, 2))?;

    let h_field = fractal_noise(&mut stream(seed, 4), rows, cols, 3);
    let mut rng = stream(seed, 5);
    let mut taken = std::collections::BTreeSet::new();
    let mut locations = Vec::with_capacity(spec.humidity_points);
    while locations.len() < spec.humidity_points {
        let (r, c) = (rng.random_range(0..rows), rng.random_range(0..cols));
        if taken.insert((r, c)) {
            locations.push((r, c));
        }
    }
    let h_raw: Vec<f64> = locations.iter().map(|&(r, c)| h_field[r * cols + c]).collect();
    let h_vals = rescale(&h_raw, HUMIDITY_RANGE.0, HUMIDITY_RANGE.1, 2);
    let humidity = locations
        .iter()
        .zip(h_vals)
        .map(|(&(r, c), value)| {
            let (x, y) = header.cell_center(r, c);
            SamplePoint { x, y, value }
        })
        .collect();

    let mut rng = stream(seed, 6);
    let mut settle = Raster::new(rows, cols);
    let towns: Vec<(f64, f64)> = (0..spec.settlements)
        .map(|_| {
            let p = (rng.random_range(0..rows) as f64, rng.random_range(0..cols) as f64);
            let size = if rng.random::<f64>() < 0.25 { 1.5 } else { 0.0 };
            settle.disc(p, size);
            p
        })
        .collect();
    let settlements = settle.into_grid(header)?;

    let mut rng = stream(seed, 7);
    let mut road = Raster::new(rows, cols);
    for k in 0..spec.roads {
        let a = towns[k % towns.len()];
        let mut b = towns[rng.random_range(0..towns.len())];
        if b == a {
            b = towns[(k + 1) % towns.len()];
        }
        let jitter = rows.min(cols) as f64 / 10.0;
        let mid = (
            (a.0 + b.0) / 2.0 + rng.random_range(-jitter..jitter),
            (a.1 + b.1) / 2.0 + rng.random_range(-jitter..jitter),
        );
        road.polyline(&[a, mid, b]);
    }
    let roads = road.into_grid(header)?;

    let mut rng = stream(seed, 8);
    let mut lines = Raster::new(rows, cols);
    for k in 0..spec.grid_lines {
        let waypoints = 5;
        let pts: Vec<(f64, f64)> = (0..=waypoints)
            .map(|w| {
                let along = w as f64 / waypoints as f64;
                if k % 2 == 0 {
                    (rng.random_range(0.1..0.9) * rows as f64, along * (cols - 1) as f64)
                } else {
                    (along * (rows - 1) as f64, rng.random_range(0.1..0.9) * cols as f64)
                }
            })
            .collect();
        lines.polyline(&pts);
    }
    let grid_lines = lines.into_grid(header)?;

    // Fixed constraint layers first, then forest fills the union up to the
    // target share.
    let water = {
        let k = n * 3 / 100;
        mask_from(header, top_k(&dem_n.iter().map(|d| -d).collect::<Vec<_>>(), 0..n, k))?
    };
    let peat_noise = fractal_noise(&mut stream(seed, 9), rows, cols, 3);
    let peatland = mask_from(header, top_k(&peat_noise, (0..n).filter(|&i| dem_n[i] < 0.4), n / 10))?;
    let mut rng = stream(seed, 10);
    let mut reserve = Raster::new(rows, cols);
    for _ in 0..3 {
        let c = (rng.random_range(0..rows) as f64, rng.random_range(0..cols) as f64);
        reserve.disc(c, rows.min(cols) as f64 / 14.0);
    }
    let wildlife = reserve.into_grid(header)?;

    let mut constraints = vec![
        SynthConstraint {
            name: "water".into(),
            file: "constraint_water.asc".into(),
            mask: water,
            buffer_m: None,
        },
        SynthConstraint {
            name: "peatland".into(),
            file: "constraint_peatland.asc".into(),
            mask: peatland,
            buffer_m: None,
        },
        SynthConstraint {
            name: "wildlife".into(),
            file: "constraint_wildlife.asc".into(),
            mask: wildlife,
            buffer_m: None,
        },
        SynthConstraint {
            name: "settlements".into(),
            file: SETTLEMENTS_FILE.into(),
            mask: settlements.clone(),
            buffer_m: Some(2.0 * spec.cellsize),
        },
        SynthConstraint {
            name: "roads".into(),
            file: ROADS_FILE.into(),
            mask: roads.clone(),
            buffer_m: Some(100.0),
        },
    ];
    let fixed = constraint_union(&constraint_set(header, &constraints)?)?;
    let fixed_count = fixed.values().iter().filter(|&&v| v == 1.0).count();
    let target = (spec.constraint_fraction * n as f64).round() as usize;
    let forest_noise = fractal_noise(&mut stream(seed, 11), rows, cols, 4);
    let free = (0..n).filter(|&i| fixed.values()[i] != 1.0);
    let forest = mask_from(header, top_k(&forest_noise, free, target.saturating_sub(fixed_count)))?;
    constraints.insert(
        0,
        SynthConstraint {
            name: "forest".into(),
            file: "constraint_forest.asc".into(),
            mask: forest,
            buffer_m: None,
        },
    );
    let union = constraint_union(&constraint_set(header, &constraints)?)?;
    let constraint_fraction = union.values().iter().filter(|&&v| v == 1.0).count() as f64 / n as f64;

    Ok(SynthDataset {
        spec: spec.clone(),
        header,
        ghi,
        temperature,
        dem,
        humidity,
        roads,
        grid_lines,
        settlements,
        constraints,
        constraint_fraction,
    })
}

fn constraint_set(header: GridHeader, cs: &[SynthConstraint]) -> Result<ConstraintSet> {
    let mut set = ConstraintSet::new(header);
    for c in cs {
        set.push(ConstraintLayer {
            name: c.name.clone(),
            mask: c.mask.clone(),
            buffer: c.buffer_m,
        })?;
    }
    Ok(set)
}

impl super::DataSource for SynthDataset {
    fn grid(&mut self, rel: &Path) -> Result<Grid> {
        let name = rel.to_string_lossy();
        SynthDataset::grid(self, &name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("dataset has no grid {name}")))
    }

    fn points(&mut self, rel: &Path) -> Result<Vec<SamplePoint>> {
        if rel == Path::new(HUMIDITY_FILE) {
            Ok(self.humidity.clone())
        } else {
            Err(Error::Config(format!("dataset has no points file {}", rel.display())))
        }
    }
}

impl SynthDataset {
    /// Grid content for a dataset file name.
    pub fn grid(&self, file: &str) -> Option<&Grid> {
        match file {
            GHI_FILE => Some(&self.ghi),
            TEMPERATURE_FILE => Some(&self.temperature),
            DEM_FILE => Some(&self.dem),
            ROADS_FILE => Some(&self.roads),
            GRID_LINES_FILE => Some(&self.grid_lines),
            SETTLEMENTS_FILE => Some(&self.settlements),
            other => self.constraints.iter().find(|c| c.file == other).map(|c| &c.mask),
        }
    }

    /// Scenario config for the dataset weighted with published approach `k`.
    pub fn approach_config(&self, k: usize) -> Result<ScenarioConfig> {
        let w = presets::approach(k).ok_or_else(|| Error::Config(format!("no weighting approach {k}")))?;
        let source = |id: CriterionId| match id {
            CriterionId::Ghi => SourceConfig::Grid { path: GHI_FILE.into() },
            CriterionId::T => SourceConfig::Grid {
                path: TEMPERATURE_FILE.into(),
            },
            CriterionId::H => SourceConfig::Kriged {
                points: HUMIDITY_FILE.into(),
                variogram: VariogramKind::Spherical,
                bins: 12,
                max_lag: None,
                model: None,
            },
            CriterionId::Dem => SourceConfig::Grid { path: DEM_FILE.into() },
            CriterionId::S => SourceConfig::Slope { dem: DEM_FILE.into() },
            CriterionId::Az => SourceConfig::Aspect { dem: DEM_FILE.into() },
            CriterionId::Gp => SourceConfig::Distance {
                features: GRID_LINES_FILE.into(),
            },
            CriterionId::Rp => SourceConfig::Distance {
                features: ROADS_FILE.into(),
            },
            CriterionId::Sp => SourceConfig::Distance {
                features: SETTLEMENTS_FILE.into(),
            },
        };
        Ok(ScenarioConfig {
            name: Some(format!("approach {k}")),
            output_dir: Some(PathBuf::from(format!("out/approach{k}"))),
            breaks: None,
            matrix: None,
            energy: EnergyParams::default(),
            criteria: presets::ORDER
                .iter()
                .zip(w.as_slice())
                .map(|(&id, &weight)| CriterionConfig {
                    id,
                    weight: Some(weight),
                    source: source(id),
                    rule: None,
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintConfig {
                    name: c.name.clone(),
                    mask: c.file.clone().into(),
                    buffer_m: c.buffer_m,
                    enabled: true,
                })
                .collect(),
        })
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a SynthSpec,
    header: GridHeader,
    constraint_fraction: f64,
    ghi_range: Option<(f64, f64)>,
    temperature_range: Option<(f64, f64)>,
    dem_range: Option<(f64, f64)>,
    humidity_range: (f64, f64),
    files: Vec<String>,
}

/// Writes grids, sample points, approach configs and a manifest into `dir`.
pub fn write_dataset(ds: &SynthDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut grids: Vec<(&str, &Grid)> = vec![
        (GHI_FILE, &ds.ghi),
        (TEMPERATURE_FILE, &ds.temperature),
        (DEM_FILE, &ds.dem),
        (ROADS_FILE, &ds.roads),
        (GRID_LINES_FILE, &ds.grid_lines),
        (SETTLEMENTS_FILE, &ds.settlements),
    ];
    for c in &ds.constraints {
        if !grids.iter().any(|(f, _)| *f == c.file) {
            grids.push((c.file.as_str(), &c.mask));
        }
    }
    for (file, g) in &grids {
        let p = dir.join(file);
        g.write_file(&p)?;
        written.push(p);
    }

    let p = dir.join(HUMIDITY_FILE);
    let mut buf = Vec::new();
    write_points(&ds.humidity, &mut buf).map_err(|e| Error::io(&p, e))?;
    std::fs::write(&p, buf).map_err(|e| Error::io(&p, e))?;
    written.push(p);

    for k in 1..=3 {
        let p = dir.join(format!("approach{k}.toml"));
        let text = ds.approach_config(k)?.to_toml_string()?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }

    let h = ds.humidity.iter().map(|p| p.value);
    let manifest = Manifest {
        spec: &ds.spec,
        header: ds.header,
        constraint_fraction: ds.constraint_fraction,
        ghi_range: ds.ghi.min_max(),
        temperature_range: ds.temperature.min_max(),
        dem_range: ds.dem.min_max(),
        humidity_range: (
            h.clone().fold(f64::INFINITY, f64::min),
            h.fold(f64::NEG_INFINITY, f64::max),
        ),
        files: written
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    let p = dir.join("dataset.json");
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}
