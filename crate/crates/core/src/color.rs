//! RGB images and BT.601 full-range luma.

use alloc::borrow::Cow;
use alloc::vec::Vec;

use crate::tensor::ImagePlane;
use crate::{round_div, Error, Result};

/// Interleaved 8-bit RGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::ShapeMismatch {
                channels: 3,
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Interleave three equally sized planes.
    pub fn from_planes(planes: [&ImagePlane; 3]) -> Result<Self> {
        let [r, g, b] = planes;
        for p in [g, b] {
            if (p.width(), p.height()) != (r.width(), r.height()) {
                return Err(Error::DimensionMismatch(r.width(), r.height(), p.width(), p.height()));
            }
        }
        let data = r
            .values()
            .iter()
            .zip(g.values())
            .zip(b.values())
            .flat_map(|((&r, &g), &b)| [r, g, b])
            .collect();
        Ok(Self {
            width: r.width(),
            height: r.height(),
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Channel `c` (0 = R, 1 = G, 2 = B) as a plane.
    pub fn plane(&self, c: usize) -> ImagePlane {
        let values = self.data.iter().skip(c).step_by(3).copied().collect();
        ImagePlane::new(self.width, self.height, values).expect("plane size matches")
    }

    pub fn planes(&self) -> [ImagePlane; 3] {
        [self.plane(0), self.plane(1), self.plane(2)]
    }
}

/// Either a grayscale or an RGB image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Image {
    Gray(ImagePlane),
    Rgb(RgbImage),
}

impl Image {
    pub fn width(&self) -> usize {
        match self {
            Image::Gray(p) => p.width(),
            Image::Rgb(p) => p.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Image::Gray(p) => p.height(),
            Image::Rgb(p) => p.height(),
        }
    }

    pub fn is_rgb(&self) -> bool {
        matches!(self, Image::Rgb(_))
    }
}

/// `round(0.299 R + 0.587 G + 0.114 B)`, computed exactly in integers.
#[inline]
pub fn luma(px: [u8; 3]) -> u8 {
    let [r, g, b] = px.map(i64::from);
    round_div(299 * r + 587 * g + 114 * b, 1000).clamp(0, 255) as u8
}

pub fn rgb_to_y(img: &RgbImage) -> ImagePlane {
    let values = img.data.chunks_exact(3).map(|c| luma([c[0], c[1], c[2]])).collect();
    ImagePlane::new(img.width, img.height, values).expect("plane size matches")
}

/// Anything that has a Y plane.
pub trait ToLuma {
    fn to_luma(&self) -> Cow<'_, ImagePlane>;
}

impl ToLuma for ImagePlane {
    fn to_luma(&self) -> Cow<'_, ImagePlane> {
        Cow::Borrowed(self)
    }
}

impl ToLuma for RgbImage {
    fn to_luma(&self) -> Cow<'_, ImagePlane> {
        Cow::Owned(rgb_to_y(self))
    }
}

impl ToLuma for Image {
    fn to_luma(&self) -> Cow<'_, ImagePlane> {
        match self {
            Image::Gray(p) => p.to_luma(),
            Image::Rgb(p) => p.to_luma(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_examples() {
        assert_eq!(luma([255, 255, 255]), 255);
        assert_eq!(luma([255, 0, 0]), 76);
        assert_eq!(luma([0, 255, 0]), 150);
        assert_eq!(luma([0, 0, 255]), 29);
        for g in 0..=255u8 {
            assert_eq!(luma([g, g, g]), g);
        }
    }

    #[test]
    fn luma_matches_float_rounding() {
        for r in (0..=255u16).step_by(5) {
            for g in (0..=255u16).step_by(7) {
                for b in (0..=255u16).step_by(3) {
                    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
                    let exact = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
                    if exact % 1000 == 500 {
                        continue;
                    }
                    assert_eq!(luma([r as u8, g as u8, b as u8]) as f64, libm::round(y));
                }
            }
        }
    }

    #[test]
    fn planes_round_trip() {
        let img = RgbImage::from_fn(5, 3, |x, y| [x as u8, y as u8, (x * y) as u8]);
        let [r, g, b] = img.planes();
        assert_eq!(r.get(4, 2), 4);
        assert_eq!(g.get(4, 2), 2);
        assert_eq!(b.get(4, 2), 8);
        assert_eq!(RgbImage::from_planes([&r, &g, &b]).unwrap(), img);
        assert!(RgbImage::new(2, 2, alloc::vec![0; 11]).is_err());
    }
}
