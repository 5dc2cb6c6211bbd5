//! Deterministic PNG heatmaps with a diverging blue–white–red colormap.

use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::simulate::write_atomic;

/// Anchors of a cool–warm diverging map at `t = 0, ¼, ½, ¾, 1`.
const ANCHORS: [[f64; 3]; 5] = [
    [59.0, 76.0, 192.0],
    [141.0, 176.0, 254.0],
    [221.0, 221.0, 221.0],
    [244.0, 154.0, 123.0],
    [180.0, 4.0, 38.0],
];

pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.5 } else { t.clamp(0.0, 1.0) };
    let s = t * (ANCHORS.len() - 1) as f64;
    let k = (s.floor() as usize).min(ANCHORS.len() - 2);
    let f = s - k as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = (ANCHORS[k][c] + f * (ANCHORS[k + 1][c] - ANCHORS[k][c])).round() as u8;
    }
    out
}

/// `(lo, hi)` symmetric about zero from the sup-norm; `(−1, 1)` for a zero field.
pub fn symmetric_range(field: &Field2D) -> (f64, f64) {
    let m = field.data.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    if m > 0.0 {
        (-m, m)
    } else {
        (-1.0, 1.0)
    }
}

/// PNG bytes of the real part; `y` grows upwards.
pub fn encode_heatmap(field: &Field2D, range: Option<(f64, f64)>) -> Result<Vec<u8>> {
    if field.data.iter().any(|z| !z.re.is_finite()) {
        return Err(Error::Param("heatmap of a non-finite field".into()));
    }
    let (lo, hi) = range.unwrap_or_else(|| symmetric_range(field));
    if !(hi > lo) {
        return Err(Error::Param(format!("empty colour range [{lo}, {hi}]")));
    }
    let n = field.n();
    let mut px = Vec::with_capacity(3 * n * n);
    for row in 0..n {
        let iy = n - 1 - row;
        for ix in 0..n {
            px.extend_from_slice(&colormap((field.get(ix, iy).re - lo) / (hi - lo)));
        }
    }
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&px, n as u32, n as u32, ExtendedColorType::Rgb8)
        .map_err(|e| Error::Format(format!("png encoding: {e}")))?;
    Ok(out)
}

pub fn render_heatmap(field: &Field2D, path: impl AsRef<Path>, range: Option<(f64, f64)>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_heatmap(field, range)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn decode(bytes: &[u8]) -> image::RgbImage {
        image::load_from_memory(bytes).unwrap().to_rgb8()
    }

    #[test]
    fn zero_field_is_mid_colour() {
        let f = Field2D::zeros(8, 1.0).unwrap();
        let img = decode(&encode_heatmap(&f, None).unwrap());
        assert!(img.pixels().all(|p| p.0 == [221, 221, 221]));
    }

    #[test]
    fn two_lobes_hit_the_ends() {
        let f = Field2D::from_fn(32, 4.0, |x, y| {
            C::new((-(x - 2.0).powi(2) - y * y).exp() - (-(x + 2.0).powi(2) - y * y).exp(), 0.0)
        })
        .unwrap();
        let img = decode(&encode_heatmap(&f, None).unwrap());
        let px: Vec<[u8; 3]> = img.pixels().map(|p| p.0).collect();
        assert!(px.contains(&[180, 4, 38]));
        assert!(px.contains(&[59, 76, 192]));
        // Positive lobe on the right, image row 0 at the top.
        assert_eq!(img.get_pixel(24, 31 - 16).0, [180, 4, 38]);
        assert_eq!(img.get_pixel(8, 31 - 16).0, [59, 76, 192]);
    }

    #[test]
    fn deterministic_and_flipped() {
        let f = Field2D::from_fn(16, 2.0, |_, y| C::new(y, 0.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        render_heatmap(&f, &a, Some((-2.0, 2.0))).unwrap();
        render_heatmap(&f, &b, Some((-2.0, 2.0))).unwrap();
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(ba, bb);
        let img = decode(&ba);
        // Top row holds the largest y.
        assert!(img.get_pixel(0, 0).0[0] > img.get_pixel(0, 15).0[0]);
        assert!(render_heatmap(&f, "/nonexistent/dir/x.png", None).is_err());
        assert!(encode_heatmap(&f, Some((1.0, 1.0))).is_err());
    }
}
