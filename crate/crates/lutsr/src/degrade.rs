//! Synthetic degradations for building test pairs.

use lutsr_core::color::{Image, RgbImage};
use lutsr_core::round_half_away;
use lutsr_core::tensor::ImagePlane;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Cubic convolution parameter.
pub const BICUBIC_A: f64 = -0.5;

#[derive(Debug, Error, PartialEq)]
pub enum DegradeError {
    #[error("{width}x{height} is not divisible by factor {factor}")]
    NotDivisible { width: usize, height: usize, factor: usize },
    #[error("downsampling factor must be at least 1")]
    ZeroFactor,
    #[error("noise sigma must be finite and non-negative, got {0}")]
    BadSigma(f64),
}

pub fn cubic(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Normalized taps `(source index, weight)` for every output sample along an
/// axis of length `len` reduced by `r`. The kernel is stretched by `r` so the
/// reduction is antialiased; out-of-range taps replicate the edge sample.
pub fn bicubic_taps(len: usize, r: usize) -> Vec<Vec<(usize, f64)>> {
    let rf = r as f64;
    (0..len / r)
        .map(|o| {
            let center = (o as f64 + 0.5) * rf - 0.5;
            let lo = (center - 2.0 * rf).floor() as isize;
            let hi = (center + 2.0 * rf).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            for i in lo..=hi {
                let w = cubic((center - i as f64) / rf);
                if w == 0.0 {
                    continue;
                }
                let src = i.clamp(0, len as isize - 1) as usize;
                match taps.iter_mut().find(|(s, _)| *s == src) {
                    Some((_, acc)) => *acc += w,
                    None => taps.push((src, w)),
                }
            }
            let sum: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= sum);
            taps
        })
        .collect()
}

pub fn bicubic_downsample(img: &ImagePlane, r: usize) -> Result<ImagePlane, DegradeError> {
    if r == 0 {
        return Err(DegradeError::ZeroFactor);
    }
    let (w, h) = (img.width(), img.height());
    if w % r != 0 || h % r != 0 {
        return Err(DegradeError::NotDivisible {
            width: w,
            height: h,
            factor: r,
        });
    }
    if r == 1 {
        return Ok(img.clone());
    }
    let (ow, oh) = (w / r, h / r);
    let tx = bicubic_taps(w, r);
    let ty = bicubic_taps(h, r);
    let mut rows = vec![0.0f64; ow * h];
    for y in 0..h {
        for (ox, taps) in tx.iter().enumerate() {
            rows[y * ow + ox] = taps.iter().map(|&(s, wt)| wt * img.get(s, y) as f64).sum();
        }
    }
    Ok(ImagePlane::from_fn(ow, oh, |ox, oy| {
        let v: f64 = ty[oy].iter().map(|&(s, wt)| wt * rows[s * ow + ox]).sum();
        round_half_away(v).clamp(0.0, 255.0) as u8
    }))
}

/// Adds independent `N(0, sigma^2)` noise to every sample, drawn in raster
/// order from a ChaCha8 stream seeded with `seed`.
pub fn add_gaussian_noise_samples(values: &[u8], sigma: f64, seed: u64) -> Result<Vec<u8>, DegradeError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(DegradeError::BadSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values
        .iter()
        .map(|&v| round_half_away(v as f64 + normal.sample(&mut rng)).clamp(0.0, 255.0) as u8)
        .collect())
}

pub fn add_gaussian_noise(img: &ImagePlane, sigma: f64, seed: u64) -> Result<ImagePlane, DegradeError> {
    let values = add_gaussian_noise_samples(img.values(), sigma, seed)?;
    Ok(ImagePlane::new(img.width(), img.height(), values).expect("same size"))
}

/// A degradation selected on the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Degradation {
    Bicubic(usize),
    Gauss(f64),
}

impl std::str::FromStr for Degradation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("expected bicubic:<factor> or gauss:<sigma>, got {s:?}"))?;
        match kind {
            "bicubic" => arg
                .parse()
                .map(Degradation::Bicubic)
                .map_err(|e| format!("bad factor {arg:?}: {e}")),
            "gauss" => arg
                .parse()
                .map(Degradation::Gauss)
                .map_err(|e| format!("bad sigma {arg:?}: {e}")),
            _ => Err(format!("unknown degradation {kind:?}")),
        }
    }
}

/// Apply to each channel of an image. RGB noise is drawn over interleaved samples.
pub fn degrade(img: &Image, d: Degradation, seed: u64) -> Result<Image, DegradeError> {
    match (img, d) {
        (Image::Gray(p), Degradation::Bicubic(r)) => bicubic_downsample(p, r).map(Image::Gray),
        (Image::Gray(p), Degradation::Gauss(s)) => add_gaussian_noise(p, s, seed).map(Image::Gray),
        (Image::Rgb(p), Degradation::Bicubic(r)) => {
            let [a, b, c] = p.planes();
            let planes = [
                bicubic_downsample(&a, r)?,
                bicubic_downsample(&b, r)?,
                bicubic_downsample(&c, r)?,
            ];
            Ok(Image::Rgb(
                RgbImage::from_planes([&planes[0], &planes[1], &planes[2]]).expect("same size"),
            ))
        }
        (Image::Rgb(p), Degradation::Gauss(s)) => {
            let data = add_gaussian_noise_samples(p.data(), s, seed)?;
            Ok(Image::Rgb(
                RgbImage::new(p.width(), p.height(), data).expect("same size"),
            ))
        }
    }
}
