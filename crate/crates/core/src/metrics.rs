//! Image quality metrics, receptive field and storage accounting.
//!
//! Metrics run on the Y plane; RGB inputs go through [`crate::color::rgb_to_y`]
//! first. A perfect reconstruction has PSNR `f64::INFINITY`.

use alloc::vec::Vec;

use crate::color::ToLuma;
use crate::engine::{Lut1D, LutPack, TableSlot};
use crate::model::ModelDescriptor;
use crate::tensor::ImagePlane;
use crate::{Error, Result};

/// Peak intensity.
pub const PEAK: f64 = 255.0;
/// SSIM window side.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Block grid used by PSNR-B.
pub const BLOCK: usize = 8;
/// Bytes of a serialized table record before its entries.
pub const TABLE_RECORD_HEADER_BYTES: usize = 12;

fn same_size(a: &ImagePlane, b: &ImagePlane) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    if a.is_empty() {
        return Err(Error::EmptyImage);
    }
    Ok(())
}

fn mse_planes(a: &ImagePlane, b: &ImagePlane) -> f64 {
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    sum / a.values().len() as f64
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * libm::log10(PEAK * PEAK / mse)
    }
}

/// Mean squared error on Y.
pub fn mse<A: ToLuma + ?Sized, B: ToLuma + ?Sized>(a: &A, b: &B) -> Result<f64> {
    let (a, b) = (a.to_luma(), b.to_luma());
    same_size(&a, &b)?;
    Ok(mse_planes(&a, &b))
}

/// `10 log10(255^2 / MSE)` on Y.
pub fn psnr_y<A: ToLuma + ?Sized, B: ToLuma + ?Sized>(a: &A, b: &B) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut g1 = [0.0; SSIM_WINDOW];
    for (i, g) in g1.iter_mut().enumerate() {
        let d = i as f64 - half;
        *g = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let sum: f64 = g1.iter().sum();
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            w[y * SSIM_WINDOW + x] = g1[y] * g1[x] / (sum * sum);
        }
    }
    w
}

/// Mean single-scale SSIM over all fully contained 11x11 windows.
pub fn ssim<A: ToLuma + ?Sized, B: ToLuma + ?Sized>(a: &A, b: &B) -> Result<f64> {
    let (a, b) = (a.to_luma(), b.to_luma());
    same_size(&a, &b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(SSIM_WINDOW));
    }
    let c1 = (SSIM_K1 * PEAK) * (SSIM_K1 * PEAK);
    let c2 = (SSIM_K2 * PEAK) * (SSIM_K2 * PEAK);
    let win = gaussian_window();
    let av: Vec<f64> = a.values().iter().map(|&v| v as f64).collect();
    let bv: Vec<f64> = b.values().iter().map(|&v| v as f64).collect();

    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                let row = (y0 + dy) * w + x0;
                for dx in 0..SSIM_WINDOW {
                    let k = win[dy * SSIM_WINDOW + dx];
                    let (p, q) = (av[row + dx], bv[row + dx]);
                    ma += k * p;
                    mb += k * q;
                    saa += k * (p * p);
                    sbb += k * (q * q);
                    sab += k * (p * q);
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Blocking effect factor of `img` on the 8-pixel grid.
///
/// Squared differences across block boundaries (between columns `8k-1` and
/// `8k`, and likewise for rows) are averaged into `D_B`, all other adjacent
/// pairs into `D_Bc`. The factor is `log2(8) / log2(min(W, H)) * (D_B - D_Bc)`
/// when positive and zero otherwise. Images with a side below 2 have none.
pub fn bef(img: &ImagePlane) -> f64 {
    let (w, h) = (img.width(), img.height());
    if w.min(h) < 2 {
        return 0.0;
    }
    let (mut db, mut nb, mut dc, mut nc) = (0.0, 0usize, 0.0, 0usize);
    let mut pair = |p: u8, q: u8, boundary: bool| {
        let d = p as f64 - q as f64;
        if boundary {
            db += d * d;
            nb += 1;
        } else {
            dc += d * d;
            nc += 1;
        }
    };
    for y in 0..h {
        for x in 0..w - 1 {
            pair(img.get(x, y), img.get(x + 1, y), (x + 1) % BLOCK == 0);
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            pair(img.get(x, y), img.get(x, y + 1), (y + 1) % BLOCK == 0);
        }
    }
    if nb == 0 {
        return 0.0;
    }
    let db = db / nb as f64;
    let dc = if nc == 0 { 0.0 } else { dc / nc as f64 };
    if db <= dc {
        return 0.0;
    }
    let eta = libm::log2(BLOCK as f64) / libm::log2(w.min(h) as f64);
    eta * (db - dc)
}

/// PSNR on `MSE + BEF(distorted)`. Not symmetric. Identical inputs give
/// `f64::INFINITY`.
pub fn psnr_b<A: ToLuma + ?Sized, B: ToLuma + ?Sized>(reference: &A, distorted: &B) -> Result<f64> {
    let (r, d) = (reference.to_luma(), distorted.to_luma());
    same_size(&r, &d)?;
    let m = mse_planes(&r, &d);
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(psnr_from_mse(m + bef(&d)))
}

/// Each shift block adds 4 pixels of one-sided reach to a base of 4.
pub const BASE_REACH: usize = 4;
pub const BLOCK_REACH: usize = 4;

/// Square side of the input region that influences one output pixel.
pub fn receptive_field(desc: &ModelDescriptor) -> (usize, usize) {
    let side = 2 * (BASE_REACH + BLOCK_REACH * desc.n_blocks as usize) + 1;
    (side, side)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableStorage {
    pub slot: TableSlot,
    pub stride: u32,
    pub entries: usize,
    pub dense_entries: usize,
}

impl TableStorage {
    pub fn bytes(&self) -> usize {
        TABLE_RECORD_HEADER_BYTES + self.entries
    }

    pub fn dense_bytes(&self) -> usize {
        TABLE_RECORD_HEADER_BYTES + self.dense_entries
    }
}

/// Byte accounting for a pack: one byte per entry plus a fixed record header.
#[derive(Clone, Debug, PartialEq)]
pub struct StorageReport {
    pub tables: Vec<TableStorage>,
}

impl StorageReport {
    pub fn entry_bytes(&self) -> usize {
        self.tables.iter().map(|t| t.entries).sum()
    }

    pub fn dense_entry_bytes(&self) -> usize {
        self.tables.iter().map(|t| t.dense_entries).sum()
    }

    pub fn total_bytes(&self) -> usize {
        self.tables.iter().map(TableStorage::bytes).sum()
    }

    pub fn dense_total_bytes(&self) -> usize {
        self.tables.iter().map(TableStorage::dense_bytes).sum()
    }

    /// Total bytes relative to the same pack at stride 1.
    pub fn ratio(&self) -> f64 {
        self.total_bytes() as f64 / self.dense_total_bytes() as f64
    }

    /// Count of tables at each stride, ascending by stride.
    pub fn stride_histogram(&self) -> Vec<(u32, usize)> {
        let mut h: Vec<(u32, usize)> = Vec::new();
        for t in &self.tables {
            match h.iter_mut().find(|(s, _)| *s == t.stride) {
                Some((_, n)) => *n += 1,
                None => h.push((t.stride, 1)),
            }
        }
        h.sort_unstable();
        h
    }
}

pub fn table_storage(t: &Lut1D) -> TableStorage {
    TableStorage {
        slot: t.slot(),
        stride: t.stride(),
        entries: t.entries().len(),
        dense_entries: t.domain(),
    }
}

pub fn storage_report(pack: &LutPack) -> StorageReport {
    StorageReport {
        tables: pack.tables().iter().map(table_storage).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::RgbImage;
    use crate::eas::resample_uniform;
    use crate::engine::LayerRole;
    use crate::model::Variant;
    use crate::reference::ReferenceNet;
    use crate::transfer::transfer_model;

    fn ramp(w: usize, h: usize, k: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, |x, y| ((x * 13 + y * 7 + k) % 256) as u8)
    }

    #[test]
    fn psnr_off_by_one() {
        let a = ImagePlane::filled(9, 4, 100);
        let b = ImagePlane::filled(9, 4, 101);
        let p = psnr_y(&a, &b).unwrap();
        assert!((p - 20.0 * libm::log10(255.0)).abs() < 1e-12);
        assert!((p - 48.1308).abs() < 1e-3);
        assert_eq!(psnr_y(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(psnr_y(&b, &a).unwrap(), p);
    }

    #[test]
    fn psnr_errors() {
        let a = ImagePlane::filled(4, 4, 0);
        let b = ImagePlane::filled(4, 5, 0);
        assert_eq!(psnr_y(&a, &b), Err(Error::DimensionMismatch(4, 4, 4, 5)));
        assert_eq!(
            psnr_y(&ImagePlane::filled(0, 0, 0), &ImagePlane::filled(0, 0, 0)),
            Err(Error::EmptyImage)
        );
    }

    #[test]
    fn psnr_rgb_uses_luma() {
        let a = RgbImage::from_fn(4, 4, |x, _| [x as u8 * 10, 0, 0]);
        let b = RgbImage::from_fn(4, 4, |x, _| [x as u8 * 10, 0, 0]);
        assert_eq!(psnr_y(&a, &b).unwrap(), f64::INFINITY);
        let y = crate::color::rgb_to_y(&a);
        assert_eq!(psnr_y(&a, &ramp(4, 4, 0)).unwrap(), psnr_y(&y, &ramp(4, 4, 0)).unwrap());
    }

    #[test]
    fn ssim_identity_and_sign() {
        for k in 0..5 {
            let a = ramp(13 + k, 17, k * 31);
            assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        }
        let a = ImagePlane::from_fn(11, 11, |x, y| if (x + y) % 2 == 0 { 228 } else { 28 });
        let b = ImagePlane::from_fn(11, 11, |x, y| if (x + y) % 2 == 0 { 28 } else { 228 });
        assert!(ssim(&a, &b).unwrap() < 0.0);
        assert_eq!(ssim(&ramp(10, 20, 0), &ramp(10, 20, 0)), Err(Error::ImageTooSmall(11)));
    }

    #[test]
    fn window_is_normalized() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w[0], w[120]);
        assert!(w[60] > w[59]);
    }

    #[test]
    fn bef_cases() {
        assert_eq!(bef(&ImagePlane::filled(16, 16, 9)), 0.0);
        let blocky = ImagePlane::from_fn(16, 16, |x, y| ((x / 8) * 40 + (y / 8) * 80) as u8);
        // Every boundary pair differs, no other pair does.
        let b = bef(&blocky);
        let db = (16.0 * 1600.0 + 16.0 * 6400.0) / 32.0;
        assert!((b - 3.0 / 4.0 * db).abs() < 1e-12);
        let smooth = ImagePlane::filled(16, 16, 60);
        let pb = psnr_b(&smooth, &blocky).unwrap();
        let expect = 10.0 * libm::log10(255.0 * 255.0 / (mse(&smooth, &blocky).unwrap() + b));
        assert!((pb - expect).abs() < 1e-12);
        assert!(psnr_b(&blocky, &smooth).unwrap() > pb);
        assert_eq!(psnr_b(&blocky, &blocky).unwrap(), f64::INFINITY);
        assert_eq!(psnr_b(&blocky, &smooth).unwrap(), psnr_y(&blocky, &smooth).unwrap());
    }

    #[test]
    fn rf_values() {
        for (v, side) in [(Variant::S, 9), (Variant::M, 17), (Variant::L, 65)] {
            let d = ModelDescriptor::preset(v).unwrap();
            assert_eq!(receptive_field(&d), (side, side));
        }
    }

    #[test]
    fn storage_of_identity_pack() {
        let d = ModelDescriptor::new(Variant::M, 2, 2).unwrap();
        let pack = transfer_model(&ReferenceNet::identity(d).unwrap()).unwrap();
        let r = storage_report(&pack);
        assert_eq!(r.entry_bytes(), r.dense_entry_bytes());
        assert_eq!(r.ratio(), 1.0);
        assert_eq!(r.total_bytes(), r.entry_bytes() + 12 * pack.tables().len());

        let half = storage_report(&resample_uniform(&pack, 2).unwrap());
        assert_eq!(half.entry_bytes(), r.entry_bytes() / 2 + pack.tables().len());
        assert_eq!(half.stride_histogram(), alloc::vec![(2, pack.tables().len())]);

        let lsb = r
            .tables
            .iter()
            .find(|t| t.slot.role == LayerRole::Conv3x3 && t.slot.in_bits == 2)
            .unwrap();
        assert_eq!(lsb.entries, 4);
    }
}
