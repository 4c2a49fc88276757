//! 8-bit grayscale and RGB PNG files.

use std::path::Path;

use image::{ColorType, DynamicImage, GrayImage, ImageFormat};
use lutsr_core::color::{Image, RgbImage};
use lutsr_core::tensor::ImagePlane;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Codec {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: unsupported color type {color:?}; expected 8-bit grayscale or RGB")]
    Unsupported { path: String, color: ColorType },
}

pub fn load_image(path: &Path) -> Result<Image, ImageIoError> {
    let codec = |source| ImageIoError::Codec {
        path: path.display().to_string(),
        source,
    };
    let img = image::ImageReader::open(path)
        .map_err(|e| codec(e.into()))?
        .with_guessed_format()
        .map_err(|e| codec(e.into()))?
        .decode()
        .map_err(codec)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => Ok(Image::Gray(ImagePlane::new(w, h, g.into_raw()).expect("decoder size"))),
        DynamicImage::ImageRgb8(c) => Ok(Image::Rgb(RgbImage::new(w, h, c.into_raw()).expect("decoder size"))),
        other => Err(ImageIoError::Unsupported {
            path: path.display().to_string(),
            color: other.color(),
        }),
    }
}

pub fn save_image(img: &Image, path: &Path) -> Result<(), ImageIoError> {
    let dynamic = match img {
        Image::Gray(p) => DynamicImage::ImageLuma8(
            GrayImage::from_raw(p.width() as u32, p.height() as u32, p.values().to_vec()).expect("plane size"),
        ),
        Image::Rgb(p) => DynamicImage::ImageRgb8(
            image::RgbImage::from_raw(p.width() as u32, p.height() as u32, p.data().to_vec()).expect("image size"),
        ),
    };
    dynamic
        .save_with_format(path, ImageFormat::Png)
        .map_err(|source| ImageIoError::Codec {
            path: path.display().to_string(),
            source,
        })
}
