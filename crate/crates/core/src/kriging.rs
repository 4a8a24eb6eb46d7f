//! Ordinary kriging with an isotropic variogram and a global neighborhood.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Grid, GridHeader};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariogramKind {
    #[default]
    Spherical,
    /// Practical range convention: reaches 95% of the partial sill at `range`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub kind: VariogramKind,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn new(kind: VariogramKind, nugget: f64, sill: f64, range: f64) -> Result<Self> {
        if !(nugget >= 0.0 && sill >= nugget && range > 0.0 && sill.is_finite() && range.is_finite()) {
            return Err(Error::Config(format!(
                "invalid variogram: nugget {nugget}, sill {sill}, range {range}"
            )));
        }
        Ok(VariogramModel {
            kind,
            nugget,
            sill,
            range,
        })
    }

    /// Semivariance at lag `h`; zero at the origin.
    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        self.nugget + (self.sill - self.nugget) * shape(self.kind, h / self.range)
    }
}

/// Unit-sill structure function of the model family.
fn shape(kind: VariogramKind, t: f64) -> f64 {
    match kind {
        VariogramKind::Spherical => {
            if t >= 1.0 {
                1.0
            } else {
                1.5 * t - 0.5 * t * t * t
            }
        }
        VariogramKind::Exponential => 1.0 - (-3.0 * t).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    /// Mean separation of the pairs in the bin (bin center when empty).
    pub lag: f64,
    pub semivariance: f64,
    pub pairs: usize,
}

impl VariogramBin {
    pub fn is_empty(&self) -> bool {
        self.pairs == 0
    }
}

/// Bin `b` (1-based) collects pairs at distance in `((b-1)Δ, bΔ]`.
pub fn empirical_variogram(points: &[SamplePoint], n_bins: usize, max_lag: f64) -> Result<Vec<VariogramBin>> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if n_bins == 0 || !(max_lag > 0.0) {
        return Err(Error::Config(format!(
            "variogram needs n_bins >= 1 and max_lag > 0, got {n_bins} and {max_lag}"
        )));
    }
    let width = max_lag / n_bins as f64;
    let mut sum_sv = vec![0.0; n_bins];
    let mut sum_lag = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a.x - b.x).hypot(a.y - b.y);
            if d <= 0.0 || d > max_lag {
                continue;
            }
            let bin = ((d / width).ceil() as usize).clamp(1, n_bins) - 1;
            let diff = a.value - b.value;
            sum_sv[bin] += 0.5 * diff * diff;
            sum_lag[bin] += d;
            count[bin] += 1;
        }
    }
    Ok((0..n_bins)
        .map(|b| {
            if count[b] == 0 {
                VariogramBin {
                    lag: (b as f64 + 0.5) * width,
                    semivariance: 0.0,
                    pairs: 0,
                }
            } else {
                VariogramBin {
                    lag: sum_lag[b] / count[b] as f64,
                    semivariance: sum_sv[b] / count[b] as f64,
                    pairs: count[b],
                }
            }
        })
        .collect())
}

/// Smallest sill reported for a field without spatial variance.
pub const SILL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Pair-count weighted sum of squared residuals.
    pub weighted_sse: f64,
    /// Set when every bin had zero semivariance.
    pub degenerate: bool,
}

/// Weighted least-squares fit of nugget, sill and range.
///
/// For a fixed range the model is linear in nugget and partial sill, so those
/// are solved in closed form (with the non-negativity bounds enforced). The
/// range is found by a coarse grid search over (0, 2·max_lag] followed by
/// shrinking-step coordinate refinement.
pub fn fit_variogram(bins: &[VariogramBin], kind: VariogramKind) -> Result<VariogramFit> {
    let used: Vec<&VariogramBin> = bins.iter().filter(|b| !b.is_empty()).collect();
    if used.len() < 3 {
        return Err(Error::TooFewBins(used.len()));
    }
    let max_lag = used.iter().map(|b| b.lag).fold(0.0, f64::max);
    if used.iter().all(|b| b.semivariance == 0.0) {
        return Ok(VariogramFit {
            model: VariogramModel {
                kind,
                nugget: 0.0,
                sill: SILL_FLOOR,
                range: max_lag,
            },
            weighted_sse: 0.0,
            degenerate: true,
        });
    }

    let upper = 2.0 * max_lag;
    let eval = |range: f64| fit_linear_part(&used, kind, range);

    let coarse = 200;
    let mut best_range = upper;
    let mut best = eval(upper);
    for k in 1..coarse {
        let r = upper * k as f64 / coarse as f64;
        let cand = eval(r);
        if cand.2 < best.2 {
            best = cand;
            best_range = r;
        }
    }
    let mut step = upper / coarse as f64;
    while step > upper * 1e-12 {
        let mut moved = false;
        for r in [best_range - step, best_range + step] {
            if r > 0.0 && r <= upper {
                let cand = eval(r);
                if cand.2 < best.2 {
                    best = cand;
                    best_range = r;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    let (nugget, partial, sse) = best;
    Ok(VariogramFit {
        model: VariogramModel {
            kind,
            nugget,
            sill: (nugget + partial).max(SILL_FLOOR),
            range: best_range,
        },
        weighted_sse: sse,
        degenerate: false,
    })
}

/// Best `(nugget, partial_sill, sse)` for a fixed range, both parameters >= 0.
fn fit_linear_part(bins: &[&VariogramBin], kind: VariogramKind, range: f64) -> (f64, f64, f64) {
    let sse = |n: f64, c: f64| {
        bins.iter()
            .map(|b| {
                let r = n + c * shape(kind, b.lag / range) - b.semivariance;
                b.pairs as f64 * r * r
            })
            .sum::<f64>()
    };
    let (mut sw, mut sf, mut sff, mut sy, mut sfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for b in bins {
        let w = b.pairs as f64;
        let f = shape(kind, b.lag / range);
        sw += w;
        sf += w * f;
        sff += w * f * f;
        sy += w * b.semivariance;
        sfy += w * f * b.semivariance;
    }
    let mut candidates = Vec::with_capacity(4);
    let det = sw * sff - sf * sf;
    if det.abs() > 1e-300 {
        let n = (sy * sff - sf * sfy) / det;
        let c = (sw * sfy - sf * sy) / det;
        if n >= 0.0 && c >= 0.0 {
            candidates.push((n, c));
        }
    }
    // Boundary solutions: pure structure, pure nugget.
    if sff > 0.0 {
        candidates.push((0.0, (sfy / sff).max(0.0)));
    }
    candidates.push(((sy / sw).max(0.0), 0.0));
    candidates
        .into_iter()
        .map(|(n, c)| (n, c, sse(n, c)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least one candidate")
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingOutput {
    pub prediction: Grid,
    pub variance: Grid,
    /// Largest to smallest pivot magnitude exceeded 1e12 during factorization.
    pub ill_conditioned: bool,
}

/// LU factorization (partial pivoting) of the ordinary kriging matrix,
/// shared by every target location.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    points: Vec<SamplePoint>,
    model: VariogramModel,
    lu: Vec<f64>,
    perm: Vec<usize>,
    dim: usize,
    pub ill_conditioned: bool,
}

const PIVOT_RATIO_WARN: f64 = 1e12;

impl KrigingSystem {
    pub fn new(points: &[SamplePoint], model: VariogramModel) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints(points.len()));
        }
        for (i, a) in points.iter().enumerate() {
            for (j, b) in points.iter().enumerate().skip(i + 1) {
                if a.x == b.x && a.y == b.y {
                    return Err(Error::DuplicatePoints {
                        first: i,
                        second: j,
                        x: a.x,
                        y: a.y,
                    });
                }
            }
        }
        let n = points.len();
        let dim = n + 1;
        let mut a = vec![0.0; dim * dim];
        for i in 0..n {
            for j in 0..n {
                let d = (points[i].x - points[j].x).hypot(points[i].y - points[j].y);
                a[i * dim + j] = model.gamma(d);
            }
            a[i * dim + n] = 1.0;
            a[n * dim + i] = 1.0;
        }
        let (perm, max_piv, min_piv) = lu_decompose(&mut a, dim)?;
        Ok(KrigingSystem {
            points: points.to_vec(),
            model,
            lu: a,
            perm,
            dim,
            ill_conditioned: max_piv / min_piv > PIVOT_RATIO_WARN,
        })
    }

    /// Kriging weights, then the Lagrange multiplier, at location (x, y).
    pub fn solve_at(&self, x: f64, y: f64) -> Vec<f64> {
        let n = self.points.len();
        let mut rhs = Vec::with_capacity(self.dim);
        rhs.extend(self.points.iter().map(|p| self.model.gamma((p.x - x).hypot(p.y - y))));
        rhs.push(1.0);
        debug_assert_eq!(rhs.len(), n + 1);
        lu_solve(&self.lu, &self.perm, self.dim, &rhs)
    }

    pub fn weights_at(&self, x: f64, y: f64) -> Vec<f64> {
        let mut sol = self.solve_at(x, y);
        sol.pop();
        sol
    }

    /// Prediction and kriging variance at (x, y).
    pub fn predict(&self, x: f64, y: f64) -> (f64, f64) {
        let n = self.points.len();
        let sol = self.solve_at(x, y);
        let mut pred = 0.0;
        let mut var = sol[n];
        for (p, &w) in self.points.iter().zip(&sol[..n]) {
            pred += w * p.value;
            var += w * self.model.gamma((p.x - x).hypot(p.y - y));
        }
        (pred, var.max(0.0))
    }
}

/// Ordinary kriging of `points` onto the cell centers of `target`.
pub fn krige(points: &[SamplePoint], model: &VariogramModel, target: &GridHeader) -> Result<KrigingOutput> {
    target.validate()?;
    let system = KrigingSystem::new(points, *model)?;
    if system.ill_conditioned {
        log::warn!("kriging system is ill-conditioned (pivot ratio above {PIVOT_RATIO_WARN:e})");
    }
    let nc = target.ncols;
    let row_values = |r: usize| -> Vec<(f64, f64)> {
        (0..nc)
            .map(|c| {
                let (x, y) = target.cell_center(r, c);
                system.predict(x, y)
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<(f64, f64)>> = {
        use rayon::prelude::*;
        (0..target.nrows).into_par_iter().map(row_values).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<(f64, f64)>> = (0..target.nrows).map(row_values).collect();

    let (pred, var): (Vec<f64>, Vec<f64>) = rows.into_iter().flatten().unzip();
    Ok(KrigingOutput {
        prediction: Grid::new(*target, pred)?,
        variance: Grid::new(*target, var)?,
        ill_conditioned: system.ill_conditioned,
    })
}

/// In-place LU with partial pivoting. Returns the row permutation and the
/// largest and smallest absolute pivots.
fn lu_decompose(a: &mut [f64], n: usize) -> Result<(Vec<usize>, f64, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let (mut max_piv, mut min_piv) = (0.0f64, f64::INFINITY);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .expect("non-empty range");
        let piv = a[p * n + k];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::Singular);
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        max_piv = max_piv.max(piv.abs());
        min_piv = min_piv.min(piv.abs());
        for i in k + 1..n {
            let f = a[i * n + k] / piv;
            a[i * n + k] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
    }
    Ok((perm, max_piv, min_piv))
}

fn lu_solve(lu: &[f64], perm: &[usize], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let mut s = x[i];
        for j in 0..i {
            s -= lu[i * n + j] * x[j];
        }
        x[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= lu[i * n + j] * x[j];
        }
        x[i] = s / lu[i * n + i];
    }
    x
}

/// Reads a sample file with header `x,y,value`.
pub fn read_points<R: BufRead>(reader: R) -> Result<Vec<SamplePoint>> {
    let mut out = Vec::new();
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => {
                return Err(Error::Parse {
                    line: 0,
                    message: "empty points file".into(),
                })
            }
            Some((i, l)) => {
                let l = l.map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if !l.trim().is_empty() {
                    break (i + 1, l);
                }
            }
        }
    };
    let cols: Vec<String> = header.1.split(',').map(|s| s.trim().to_ascii_lowercase()).collect();
    if cols != ["x", "y", "value"] {
        return Err(Error::Parse {
            line: header.0,
            message: format!("expected header 'x,y,value', found '{}'", header.1.trim()),
        });
    }
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0; 3];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("invalid number '{f}'"),
                })?;
        }
        out.push(SamplePoint {
            x: nums[0],
            y: nums[1],
            value: nums[2],
        });
    }
    Ok(out)
}

pub fn read_points_file(path: impl AsRef<Path>) -> Result<Vec<SamplePoint>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_points(std::io::BufReader::new(f))
}

pub fn write_points<W: std::io::Write>(points: &[SamplePoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,y,value")?;
    for p in points {
        writeln!(w, "{},{},{}", p.x, p.y, p.value)?;
    }
    Ok(())
}
