//! Single-band rasters with a nodata sentinel and plain-text ASCII grid I/O.
//!
//! Row 0 is the northern edge. Every cell holds either a finite value or the
//! exact nodata sentinel from the header.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    /// Lower-left corner, map units.
    pub xll: f64,
    pub yll: f64,
    /// Square cell edge length in map units (meters for area accounting).
    pub cellsize: f64,
    pub nodata: f64,
}

impl GridHeader {
    pub fn new(ncols: usize, nrows: usize, xll: f64, yll: f64, cellsize: f64, nodata: f64) -> Result<Self> {
        let h = GridHeader {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {}x{}",
                self.ncols, self.nrows
            )));
        }
        if !(self.cellsize.is_finite() && self.cellsize > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cellsize must be > 0, got {}",
                self.cellsize
            )));
        }
        if !self.xll.is_finite() || !self.yll.is_finite() || !self.nodata.is_finite() {
            return Err(Error::InvalidGrid("origin and nodata must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that all six header fields match, naming the first that differs.
    pub fn check_aligned(&self, other: &GridHeader) -> Result<()> {
        let fields: [(&'static str, f64, f64); 6] = [
            ("ncols", self.ncols as f64, other.ncols as f64),
            ("nrows", self.nrows as f64, other.nrows as f64),
            ("xllcorner", self.xll, other.xll),
            ("yllcorner", self.yll, other.yll),
            ("cellsize", self.cellsize, other.cellsize),
            ("NODATA_value", self.nodata, other.nodata),
        ];
        for (field, a, b) in fields {
            if a != b {
                return Err(Error::Alignment {
                    field,
                    left: a.to_string(),
                    right: b.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn is_aligned(&self, other: &GridHeader) -> bool {
        self.check_aligned(other).is_ok()
    }

    /// Map coordinates of the center of cell (row, col).
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = self.xll + (col as f64 + 0.5) * self.cellsize;
        let y = self.yll + ((self.nrows - row) as f64 - 0.5) * self.cellsize;
        (x, y)
    }
}

/// Area of one cell in km², assuming the cellsize is in meters.
pub fn cell_area_km2(header: &GridHeader) -> f64 {
    let side_km = header.cellsize / 1000.0;
    side_km * side_km
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    header: GridHeader,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(header: GridHeader, values: Vec<f64>) -> Result<Self> {
        header.validate()?;
        if values.len() != header.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} cells, found {}",
                header.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell {i} is not finite")));
        }
        Ok(Grid { header, values })
    }

    pub fn filled(header: GridHeader, value: f64) -> Self {
        Grid {
            header,
            values: vec![value; header.len()],
        }
    }

    pub fn nodata_like(header: GridHeader) -> Self {
        Self::filled(header, header.nodata)
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ncols(&self) -> usize {
        self.header.ncols
    }

    pub fn nrows(&self) -> usize {
        self.header.nrows
    }

    pub fn nodata(&self) -> f64 {
        self.header.nodata
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.header.ncols + col
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.index(row, col)]
    }

    /// The cell value, or `None` for nodata.
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.get(row, col);
        (v != self.header.nodata).then_some(v)
    }

    pub fn is_nodata(&self, idx: usize) -> bool {
        self.values[idx] == self.header.nodata
    }

    /// Iterator over cells as `Option<f64>`, nodata mapped to `None`.
    pub fn cells(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        let nd = self.header.nodata;
        self.values.iter().map(move |&v| (v != nd).then_some(v))
    }

    pub fn count_valid(&self) -> usize {
        self.cells().filter(Option::is_some).count()
    }

    /// Min and max over valid cells.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.cells().flatten().fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Applies `f` to every valid cell. A non-finite result becomes nodata.
    pub fn map_cells<F: Fn(f64) -> f64>(&self, f: F) -> Grid {
        let nd = self.header.nodata;
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v == nd {
                    nd
                } else {
                    let out = f(v);
                    if out.is_finite() {
                        out
                    } else {
                        nd
                    }
                }
            })
            .collect();
        Grid {
            header: self.header,
            values,
        }
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Grid> {
        read_grid(reader)
    }

    pub fn write<W: Write>(&self, writer: W) -> std::io::Result<()> {
        write_grid(self, writer)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Grid> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        read_grid(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        write_grid(self, &mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_ascii_string(&self) -> String {
        let mut buf = Vec::new();
        write_grid(self, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("grid output is ASCII")
    }
}

/// Combines aligned grids cell by cell. The output is nodata wherever any
/// input is nodata; elsewhere `f` receives the input values in order.
pub fn zip_cells<F>(grids: &[&Grid], f: F) -> Result<Grid>
where
    F: Fn(&[f64]) -> f64,
{
    let first = grids
        .first()
        .ok_or_else(|| Error::InvalidGrid("zip_cells needs at least one grid".into()))?;
    let header = first.header;
    for g in &grids[1..] {
        header.check_aligned(&g.header)?;
    }
    let nd = header.nodata;
    let mut scratch = vec![0.0; grids.len()];
    let values = (0..header.len())
        .map(|i| {
            for (slot, g) in scratch.iter_mut().zip(grids) {
                let v = g.values[i];
                if v == nd {
                    return nd;
                }
                *slot = v;
            }
            let out = f(&scratch);
            if out.is_finite() {
                out
            } else {
                nd
            }
        })
        .collect();
    Ok(Grid { header, values })
}

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

pub fn read_grid<R: BufRead>(reader: R) -> Result<Grid> {
    let mut header_vals: [Option<f64>; 6] = [None; 6];
    let mut seen = 0;
    let mut values = Vec::new();
    let mut expected = 0usize;
    let mut nodata = 0.0;
    let mut last_line = 0;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if seen < 6 {
            let mut parts = trimmed.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            let slot = HEADER_KEYS.iter().position(|k| *k == key).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("unknown header keyword '{key}'"),
            })?;
            if header_vals[slot].is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("duplicate header keyword '{key}'"),
                });
            }
            let raw = parts.next().ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("missing value for '{key}'"),
            })?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("trailing tokens after '{key}'"),
                });
            }
            let v = parse_number(raw, lineno)?;
            header_vals[slot] = Some(v);
            seen += 1;
            if seen == 6 {
                let h = header_from(&header_vals, lineno)?;
                expected = h.len();
                nodata = h.nodata;
                values.reserve(expected);
            }
            continue;
        }
        for tok in trimmed.split_whitespace() {
            let v = parse_number(tok, lineno)?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite value '{tok}'"),
                });
            }
            if values.len() == expected {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {expected} cells, found more"),
                });
            }
            values.push(v);
        }
    }
    if seen < 6 {
        let missing: Vec<_> = HEADER_KEYS
            .iter()
            .zip(&header_vals)
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        return Err(Error::Parse {
            line: last_line,
            message: format!("incomplete header, missing {}", missing.join(", ")),
        });
    }
    if values.len() != expected {
        return Err(Error::Parse {
            line: last_line,
            message: format!("expected {expected} cells, found {}", values.len()),
        });
    }
    let header = header_from(&header_vals, last_line)?;
    debug_assert_eq!(header.nodata, nodata);
    Grid::new(header, values)
}

fn header_from(vals: &[Option<f64>; 6], line: usize) -> Result<GridHeader> {
    let get = |i: usize| vals[i].expect("all header fields present");
    let count = |i: usize| -> Result<usize> {
        let v = get(i);
        if v.fract() != 0.0 || v < 1.0 {
            return Err(Error::Parse {
                line,
                message: format!("{} must be a positive integer, got {v}", HEADER_KEYS[i]),
            });
        }
        Ok(v as usize)
    };
    let h = GridHeader {
        ncols: count(0)?,
        nrows: count(1)?,
        xll: get(2),
        yll: get(3),
        cellsize: get(4),
        nodata: get(5),
    };
    h.validate().map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    Ok(h)
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("non-numeric token '{tok}'"),
    })
}

/// Shortest decimal string that parses back to exactly `v`.
pub fn format_value(v: f64) -> String {
    // Display for f64 already emits the shortest round-trip digits.
    if v == 0.0 {
        "0".to_string()
    } else {
        v.to_string()
    }
}

pub fn write_grid<W: Write>(grid: &Grid, mut w: W) -> std::io::Result<()> {
    let h = &grid.header;
    writeln!(w, "ncols {}", h.ncols)?;
    writeln!(w, "nrows {}", h.nrows)?;
    writeln!(w, "xllcorner {}", format_value(h.xll))?;
    writeln!(w, "yllcorner {}", format_value(h.yll))?;
    writeln!(w, "cellsize {}", format_value(h.cellsize))?;
    writeln!(w, "NODATA_value {}", format_value(h.nodata))?;
    let nodata_str = format_value(h.nodata);
    let mut line = String::new();
    for row in grid.values.chunks(h.ncols) {
        line.clear();
        for (i, &v) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            if v == h.nodata {
                line.push_str(&nodata_str);
            } else {
                let _ = write!(line, "{}", format_value(v));
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(ncols: usize, nrows: usize, cellsize: f64) -> GridHeader {
        GridHeader::new(ncols, nrows, 0.0, 0.0, cellsize, -9999.0).unwrap()
    }

    #[test]
    fn parses_small_grid() {
        let src = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 30\nNODATA_value -9999\n1 2\n3 4\n";
        let g = read_grid(src.as_bytes()).unwrap();
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.nodata(), -9999.0);
    }

    #[test]
    fn header_keys_are_case_insensitive() {
        let src = "NCOLS 1\nNROWS 1\nXLLCORNER 5\nYLLCORNER 6\nCELLSIZE 1\nnodata_value -1\n7\n";
        let g = read_grid(src.as_bytes()).unwrap();
        assert_eq!(g.header().xll, 5.0);
        assert_eq!(g.get(0, 0), 7.0);
    }

    #[test]
    fn short_data_block_is_rejected() {
        let src = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3\n";
        let err = read_grid(src.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("expected 4 cells, found 3"), "{err}");
    }

    #[test]
    fn bad_keyword_reports_line() {
        let src = "ncols 2\nnrows 2\nxllcenter 0\n";
        match read_grid(src.as_bytes()).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("xllcenter"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn non_numeric_token_reports_line() {
        let src = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 abc\n";
        match read_grid(src.as_bytes()).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("abc"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn all_nodata_writes_sentinel() {
        let g = Grid::nodata_like(header(3, 2, 1.0));
        let text = g.to_ascii_string();
        let data: Vec<&str> = text.lines().skip(6).flat_map(|l| l.split_whitespace()).collect();
        assert_eq!(data, vec!["-9999"; 6]);
    }

    #[test]
    fn single_cell_canonical_format() {
        let g = Grid::new(header(1, 1, 1.0), vec![4.58]).unwrap();
        let text = g.to_ascii_string();
        assert_eq!(text.lines().nth(6), Some("4.58"));
        assert!(text.starts_with("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n"));
    }

    #[test]
    fn map_cells_passes_nodata_through() {
        let g = Grid::new(header(2, 1, 1.0), vec![1.0, -9999.0]).unwrap();
        assert_eq!(g.map_cells(|x| x + 1.0).values(), &[2.0, -9999.0]);
        assert_eq!(g.map_cells(|x| x), g);
        let big = Grid::new(header(1, 1, 1.0), vec![12.0]).unwrap();
        assert_eq!(big.map_cells(|x| x.clamp(1.0, 9.0)).values(), &[9.0]);
    }

    #[test]
    fn zip_cells_sums_and_propagates_nodata() {
        let a = Grid::new(header(2, 1, 1.0), vec![2.0, 1.0]).unwrap();
        let b = Grid::new(header(2, 1, 1.0), vec![3.0, -9999.0]).unwrap();
        let s = zip_cells(&[&a, &b], |v| v.iter().sum()).unwrap();
        assert_eq!(s.values(), &[5.0, -9999.0]);
    }

    #[test]
    fn zip_cells_names_misaligned_field() {
        let a = Grid::filled(header(2, 2, 30.0), 1.0);
        let b = Grid::filled(header(2, 2, 90.0), 1.0);
        match zip_cells(&[&a, &b], |v| v[0]).unwrap_err() {
            Error::Alignment { field, .. } => assert_eq!(field, "cellsize"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn cell_areas() {
        assert_eq!(cell_area_km2(&header(1, 1, 1000.0)), 1.0);
        assert!((cell_area_km2(&header(1, 1, 30.0)) - 0.0009).abs() < 1e-15);
        assert_eq!(cell_area_km2(&header(1, 1, 500.0)), 0.25);
    }

    #[test]
    fn rejects_non_finite_cells() {
        assert!(Grid::new(header(1, 1, 1.0), vec![f64::NAN]).is_err());
    }

    fn arb_grid() -> impl Strategy<Value = Grid> {
        (1usize..=16, 1usize..=16, -1e6f64..1e6, -1e6f64..1e6, 0.001f64..1e4).prop_flat_map(|(nc, nr, x, y, cs)| {
            let h = GridHeader::new(nc, nr, x, y, cs, -9999.0).unwrap();
            proptest::collection::vec(
                prop_oneof![4 => -1e9f64..1e9, 1 => Just(-9999.0), 1 => (-100i32..100).prop_map(f64::from)],
                nc * nr,
            )
            .prop_map(move |v| Grid::new(h, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn write_then_read_round_trips(g in arb_grid()) {
            let text = g.to_ascii_string();
            let back = read_grid(text.as_bytes()).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(back.to_ascii_string(), text);
        }

        #[test]
        fn map_never_revives_nodata(g in arb_grid()) {
            let out = g.map_cells(|x| x * 2.0 + 1.0);
            for (a, b) in g.cells().zip(out.cells()) {
                prop_assert_eq!(a.is_none(), b.is_none());
            }
        }
    }
}
