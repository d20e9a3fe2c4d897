use crate::image::{Rgb, RgbImage};
use crate::segmentation::SegmentMap;

/// Keeps the `highlighted` segments as they are and dims every other pixel
/// to 30% brightness.
pub fn render_overlay(image: &RgbImage, map: &SegmentMap, highlighted: &[usize]) -> RgbImage {
    let mut keep = vec![false; map.n_segments()];
    for &s in highlighted {
        if let Some(k) = keep.get_mut(s) {
            *k = true;
        }
    }
    let mut out = image.clone();
    for (i, &label) in map.labels().iter().enumerate() {
        if !keep[label as usize] {
            let Rgb(c) = image.pixel(i);
            out.set_pixel(i, Rgb(c.map(|v| (f64::from(v) * 0.3).round() as u8)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::grid_segment;

    #[test]
    fn all_segments_kept_is_identity() {
        let img = RgbImage::from_fn(4, 4, |x, y| Rgb([(x * 50) as u8, (y * 50) as u8, 200])).unwrap();
        let map = grid_segment(&img, 2, 2).unwrap();
        assert_eq!(render_overlay(&img, &map, &[0, 1, 2, 3]), img);
    }

    #[test]
    fn dims_unselected() {
        let img = RgbImage::filled(2, 1, Rgb([100, 200, 255])).unwrap();
        let map = grid_segment(&img, 1, 2).unwrap();
        let out = render_overlay(&img, &map, &[1]);
        assert_eq!(out.pixel(0), Rgb([30, 60, 77]));
        assert_eq!(out.pixel(1), Rgb([100, 200, 255]));
    }
}
