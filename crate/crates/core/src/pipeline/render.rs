use crate::error::{Error, Result};
use crate::raster::Grid;

/// Least to most suitable.
const FOUR_CLASS: [[u8; 4]; 4] = [
    [215, 25, 28, 255],
    [253, 174, 97, 255],
    [166, 217, 106, 255],
    [26, 150, 65, 255],
];

pub const NODATA_RGBA: [u8; 4] = [0, 0, 0, 0];

/// Color of class `k` (1-based) out of `n`.
pub fn class_color(k: usize, n: usize) -> [u8; 4] {
    if n == 4 {
        return FOUR_CLASS[k - 1];
    }
    let t = if n <= 1 { 1.0 } else { (k - 1) as f64 / (n - 1) as f64 };
    let lerp = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
    let (lo, hi) = (FOUR_CLASS[0], FOUR_CLASS[3]);
    [lerp(lo[0], hi[0]), lerp(lo[1], hi[1]), lerp(lo[2], hi[2]), 255]
}

/// One RGBA pixel per cell, row 0 first. Cells outside `1..=n_classes`
/// render as nodata.
pub fn class_map_rgba(classes: &Grid, n_classes: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(classes.values().len() * 4);
    for c in classes.cells() {
        let px = match c {
            Some(c) if c.fract() == 0.0 && c >= 1.0 && c <= n_classes as f64 => class_color(c as usize, n_classes),
            _ => NODATA_RGBA,
        };
        out.extend_from_slice(&px);
    }
    out
}

/// PNG image of a class grid.
pub fn render_class_map(classes: &Grid, n_classes: usize) -> Result<Vec<u8>> {
    let rgba = class_map_rgba(classes, n_classes);
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, classes.ncols() as u32, classes.nrows() as u32);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
        w.write_image_data(&rgba).map_err(|e| Error::Png(e.to_string()))?;
        w.finish().map_err(|e| Error::Png(e.to_string()))?;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridHeader;

    fn decode(bytes: &[u8]) -> (png::OutputInfo, Vec<u8>) {
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info, buf)
    }

    fn distinct_pixels(rgba: &[u8]) -> Vec<[u8; 4]> {
        let mut px: Vec<[u8; 4]> = rgba.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        px.sort();
        px.dedup();
        px
    }

    #[test]
    fn uniform_class_is_single_color() {
        let h = GridHeader::new(5, 3, 0.0, 0.0, 1.0, -9999.0).unwrap();
        let g = Grid::filled(h, 4.0);
        let (info, px) = decode(&render_class_map(&g, 4).unwrap());
        assert_eq!((info.width, info.height), (5, 3));
        assert_eq!(px.len() / 4, 15);
        assert_eq!(distinct_pixels(&px), vec![FOUR_CLASS[3]]);
    }

    #[test]
    fn checkerboard_has_two_colors_in_place() {
        let h = GridHeader::new(4, 4, 0.0, 0.0, 1.0, -9999.0).unwrap();
        let vals = (0..16)
            .map(|i| if (i / 4 + i % 4) % 2 == 0 { 1.0 } else { 4.0 })
            .collect();
        let g = Grid::new(h, vals).unwrap();
        let (_, px) = decode(&render_class_map(&g, 4).unwrap());
        assert_eq!(distinct_pixels(&px).len(), 2);
        assert_eq!(&px[0..4], &FOUR_CLASS[0]);
        assert_eq!(&px[4..8], &FOUR_CLASS[3]);
    }

    #[test]
    fn nodata_is_transparent() {
        let h = GridHeader::new(2, 1, 0.0, 0.0, 1.0, -9999.0).unwrap();
        let g = Grid::new(h, vec![-9999.0, 2.0]).unwrap();
        let rgba = class_map_rgba(&g, 4);
        assert_eq!(&rgba[0..4], &NODATA_RGBA);
        assert_eq!(&rgba[4..8], &FOUR_CLASS[1]);
    }

    #[test]
    fn other_class_counts_interpolate() {
        assert_eq!(class_color(1, 3), FOUR_CLASS[0]);
        assert_eq!(class_color(3, 3), FOUR_CLASS[3]);
    }
}
