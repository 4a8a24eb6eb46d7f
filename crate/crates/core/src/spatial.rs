//! Terrain derivatives and proximity fields.

use crate::error::{Error, Result};
use crate::raster::Grid;

/// Aspect value for cells with zero gradient.
pub const FLAT_ASPECT: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainDerivatives {
    /// Rise over run times 100.
    pub slope_percent: Grid,
    /// Azimuth of steepest descent, degrees clockwise from north in [0, 360),
    /// or [`FLAT_ASPECT`].
    pub aspect_azimuth: Grid,
}

/// Slope and aspect from the 3x3 Horn kernel.
///
/// Cells on the grid edge or with any nodata neighbor get nodata.
pub fn slope_aspect(dem: &Grid) -> TerrainDerivatives {
    let h = *dem.header();
    let nd = h.nodata;
    let (nr, nc) = (h.nrows, h.ncols);
    let mut slope = vec![nd; h.len()];
    let mut aspect = vec![nd; h.len()];
    let spacing8 = 8.0 * h.cellsize;

    if nr >= 3 && nc >= 3 {
        for r in 1..nr - 1 {
            'cell: for c in 1..nc - 1 {
                let mut z = [0.0; 9];
                for (k, slot) in z.iter_mut().enumerate() {
                    let v = dem.get(r + k / 3 - 1, c + k % 3 - 1);
                    if v == nd {
                        continue 'cell;
                    }
                    *slot = v;
                }
                // a b c / d e f / g h i, row 0 north
                let [a, b, cc, d, _, f, g, hh, i] = z;
                let dz_east = ((cc + 2.0 * f + i) - (a + 2.0 * d + g)) / spacing8;
                let dz_north = ((a + 2.0 * b + cc) - (g + 2.0 * hh + i)) / spacing8;
                let idx = r * nc + c;
                slope[idx] = 100.0 * dz_east.hypot(dz_north);
                aspect[idx] = if dz_east == 0.0 && dz_north == 0.0 {
                    FLAT_ASPECT
                } else {
                    let mut az = (-dz_east).atan2(-dz_north).to_degrees();
                    if az < 0.0 {
                        az += 360.0;
                    }
                    if az >= 360.0 || az == 0.0 {
                        az = 0.0;
                    }
                    az
                };
            }
        }
    }

    TerrainDerivatives {
        slope_percent: Grid::new(h, slope).expect("finite by construction"),
        aspect_azimuth: Grid::new(h, aspect).expect("finite by construction"),
    }
}

/// Exact Euclidean distance (map units, center to center) from every cell to
/// the nearest cell whose mask value is 1. Nodata mask cells stay nodata.
///
/// Two-pass separable algorithm on squared distances with integer
/// arithmetic: a column scan followed by a per-row lower envelope of
/// parabolas.
pub fn distance_transform(sources: &Grid) -> Result<Grid> {
    let sq = squared_cell_distances(sources)?;
    let h = *sources.header();
    let values = sq
        .iter()
        .enumerate()
        .map(|(i, &d2)| {
            if sources.is_nodata(i) {
                h.nodata
            } else {
                (d2 as f64).sqrt() * h.cellsize
            }
        })
        .collect();
    Grid::new(h, values)
}

/// Squared distances in cell units to the nearest source.
pub fn squared_cell_distances(sources: &Grid) -> Result<Vec<u64>> {
    let h = sources.header();
    let (m, n) = (h.nrows, h.ncols);
    let is_source = |i: usize| sources.values()[i] == 1.0 && !sources.is_nodata(i);
    if !(0..h.len()).any(is_source) {
        return Err(Error::EmptySources);
    }
    let inf = (m + n) as i64;

    // Pass 1: per column, vertical distance to nearest source.
    let mut g = vec![0i64; m * n];
    for c in 0..n {
        g[c] = if is_source(c) { 0 } else { inf };
        for r in 1..m {
            let i = r * n + c;
            g[i] = if is_source(i) { 0 } else { (g[i - n] + 1).min(inf) };
        }
        for r in (0..m.saturating_sub(1)).rev() {
            let i = r * n + c;
            if g[i + n] < g[i] {
                g[i] = g[i + n] + 1;
            }
        }
    }

    // Pass 2: per row, lower envelope of parabolas (x - u)^2 + g(u)^2.
    let mut out = vec![0u64; m * n];
    let mut s = vec![0i64; n];
    let mut t = vec![0i64; n];
    for r in 0..m {
        let row = &g[r * n..(r + 1) * n];
        let f = |x: i64, i: i64| (x - i) * (x - i) + row[i as usize] * row[i as usize];
        let sep = |i: i64, u: i64| {
            let gu = row[u as usize];
            let gi = row[i as usize];
            (u * u - i * i + gu * gu - gi * gi).div_euclid(2 * (u - i))
        };
        let mut q: usize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..n as i64 {
            while f(t[q], s[q]) > f(t[q], u) {
                if q == 0 {
                    break;
                }
                q -= 1;
            }
            if q == 0 && f(t[0], s[0]) > f(t[0], u) {
                s[0] = u;
                continue;
            }
            let w = 1 + sep(s[q], u);
            if w < n as i64 {
                q += 1;
                s[q] = u;
                t[q] = w;
            }
        }
        for x in (0..n as i64).rev() {
            out[r * n + x as usize] = f(x, s[q]) as u64;
            if x == t[q] && q > 0 {
                q -= 1;
            }
        }
    }
    Ok(out)
}

/// Cells within `radius` map units of a source become 1, others 0.
pub fn buffer_mask(sources: &Grid, radius: f64) -> Result<Grid> {
    if !(radius >= 0.0) {
        return Err(Error::InvalidGrid(format!("buffer radius must be >= 0, got {radius}")));
    }
    let dist = distance_transform(sources)?;
    Ok(dist.map_cells(|d| if d <= radius { 1.0 } else { 0.0 }))
}
