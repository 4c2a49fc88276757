//! Integer image and feature containers plus the spatial operators shared by
//! the reference model and the table engine.
//!
//! All spatial operators use replicate (edge) padding: a coordinate that falls
//! outside the grid is clamped to the nearest valid row or column.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Largest absolute per-channel shift, in pixels.
pub const MAX_SHIFT: i8 = 2;

/// A single 8-bit intensity plane, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                channels: 1,
                width,
                height,
                len: values.len(),
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self { width, height, values }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Partition of the 8 intensity bits into a high and a low part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitSplit {
    msb_bits: u8,
    lsb_bits: u8,
}

impl BitSplit {
    pub fn new(msb_bits: u8, lsb_bits: u8) -> Result<Self> {
        if msb_bits == 0 || lsb_bits == 0 || msb_bits as u16 + lsb_bits as u16 != 8 {
            return Err(Error::InvalidBitSplit {
                msb: msb_bits,
                lsb: lsb_bits,
            });
        }
        Ok(Self { msb_bits, lsb_bits })
    }

    #[inline]
    pub fn msb_bits(self) -> u8 {
        self.msb_bits
    }

    #[inline]
    pub fn lsb_bits(self) -> u8 {
        self.lsb_bits
    }

    #[inline]
    pub fn split(self, v: u8) -> (u8, u8) {
        (v >> self.lsb_bits, v & ((1u8 << self.lsb_bits) - 1))
    }

    #[inline]
    pub fn merge(self, msb: u8, lsb: u8) -> u8 {
        (msb << self.lsb_bits) | lsb
    }
}

impl Default for BitSplit {
    fn default() -> Self {
        Self {
            msb_bits: 6,
            lsb_bits: 2,
        }
    }
}

/// Multi-channel plane of signed wide integers, row-major per channel.
///
/// `index_bits` is `Some(b)` once every value is known to lie in `[0, 2^b - 1]`
/// and may be used to index a `b`-bit table.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureMap {
    channels: usize,
    width: usize,
    height: usize,
    values: Vec<i32>,
    index_bits: Option<u8>,
}

impl FeatureMap {
    pub fn new(channels: usize, width: usize, height: usize, values: Vec<i32>) -> Result<Self> {
        if values.len() != channels * width * height {
            return Err(Error::ShapeMismatch {
                channels,
                width,
                height,
                len: values.len(),
            });
        }
        Ok(Self {
            channels,
            width,
            height,
            values,
            index_bits: None,
        })
    }

    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Self {
            channels,
            width,
            height,
            values: vec![0; channels * width * height],
            index_bits: None,
        }
    }

    /// Single-channel map holding a plane's intensities, tagged as `index_bits` wide.
    pub(crate) fn from_indices(plane: &ImagePlane, index_bits: u8) -> Self {
        Self {
            channels: 1,
            width: plane.width,
            height: plane.height,
            values: plane.values.iter().map(|&v| i32::from(v)).collect(),
            index_bits: Some(index_bits),
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn index_bits(&self) -> Option<u8> {
        self.index_bits
    }

    #[inline]
    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [i32] {
        self.index_bits = None;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<i32> {
        self.values
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[i32] {
        let n = self.plane_len();
        &self.values[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> i32 {
        self.values[(c * self.height + y) * self.width + x]
    }
}

/// Frozen per-channel integer offsets of one shift block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ShiftTable {
    offsets: Vec<(i8, i8)>,
}

impl ShiftTable {
    pub fn new(offsets: Vec<(i8, i8)>) -> Result<Self> {
        for &(dx, dy) in &offsets {
            if dx.unsigned_abs() > MAX_SHIFT as u8 || dy.unsigned_abs() > MAX_SHIFT as u8 {
                return Err(Error::ShiftOutOfRange { dx, dy });
            }
        }
        Ok(Self { offsets })
    }

    pub fn zeros(channels: usize) -> Self {
        Self {
            offsets: vec![(0, 0); channels],
        }
    }

    #[inline]
    pub fn offsets(&self) -> &[(i8, i8)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Decompose every pixel into its high and low bit planes.
pub fn split_bits(img: &ImagePlane, split: BitSplit) -> (ImagePlane, ImagePlane) {
    let (msb, lsb): (Vec<u8>, Vec<u8>) = img.values.iter().map(|&v| split.split(v)).unzip();
    (
        ImagePlane {
            width: img.width,
            height: img.height,
            values: msb,
        },
        ImagePlane {
            width: img.width,
            height: img.height,
            values: lsb,
        },
    )
}

/// Inverse of [`split_bits`].
pub fn merge_bits(msb: &ImagePlane, lsb: &ImagePlane, split: BitSplit) -> Result<ImagePlane> {
    if msb.width != lsb.width || msb.height != lsb.height {
        return Err(Error::DimensionMismatch(msb.width, msb.height, lsb.width, lsb.height));
    }
    let values = msb
        .values
        .iter()
        .zip(&lsb.values)
        .map(|(&m, &l)| split.merge(m, l))
        .collect();
    ImagePlane::new(msb.width, msb.height, values)
}

/// Clamp every value into `[0, 2^bits - 1]` and tag the map as indexable.
pub fn quantize_index(fm: &FeatureMap, bits: u8) -> FeatureMap {
    let mut out = fm.clone();
    quantize_in_place(&mut out, bits);
    out
}

pub(crate) fn quantize_in_place(fm: &mut FeatureMap, bits: u8) {
    debug_assert!((1..=16).contains(&bits));
    let max = (1i32 << bits) - 1;
    for v in &mut fm.values {
        *v = (*v).clamp(0, max);
    }
    fm.index_bits = Some(bits);
}

#[inline]
pub(crate) fn clamp_coord(v: isize, len: usize) -> usize {
    v.clamp(0, len as isize - 1) as usize
}

/// Translate channel `c` by `shifts[c]`: `out(x, y) = in(x - dx, y - dy)`,
/// replicate-padded. Quantization state is preserved since the value set
/// can only shrink.
pub fn shift_channels(fm: &FeatureMap, shifts: &ShiftTable) -> Result<FeatureMap> {
    if shifts.len() != fm.channels {
        return Err(Error::ChannelMismatch {
            expected: fm.channels,
            found: shifts.len(),
        });
    }
    let (w, h) = (fm.width, fm.height);
    let mut values = Vec::with_capacity(fm.values.len());
    for (c, &(dx, dy)) in shifts.offsets.iter().enumerate() {
        let src = fm.channel(c);
        if dx == 0 && dy == 0 {
            values.extend_from_slice(src);
            continue;
        }
        for y in 0..h {
            let sy = clamp_coord(y as isize - dy as isize, h);
            let row = &src[sy * w..(sy + 1) * w];
            for x in 0..w {
                values.push(row[clamp_coord(x as isize - dx as isize, w)]);
            }
        }
    }
    Ok(FeatureMap {
        channels: fm.channels,
        width: w,
        height: h,
        values,
        index_bits: fm.index_bits,
    })
}

/// Rearrange `r * r` channels into one plane `r` times larger:
/// `out(x * r + j, y * r + i) = channel(i * r + j)(x, y)`.
pub fn pixel_shuffle(fm: &FeatureMap, r: usize) -> Result<FeatureMap> {
    if r == 0 || fm.channels != r * r {
        return Err(Error::ChannelMismatch {
            expected: r * r,
            found: fm.channels,
        });
    }
    let (w, h) = (fm.width, fm.height);
    let ow = w * r;
    let mut values = vec![0i32; fm.values.len()];
    for i in 0..r {
        for j in 0..r {
            let src = fm.channel(i * r + j);
            for y in 0..h {
                let out_row = (y * r + i) * ow;
                for x in 0..w {
                    values[out_row + x * r + j] = src[y * w + x];
                }
            }
        }
    }
    Ok(FeatureMap {
        channels: 1,
        width: ow,
        height: h * r,
        values,
        index_bits: None,
    })
}

/// Rotate a row-major `width x height` grid by `k` quarter turns.
///
/// One turn maps `[[1, 2], [3, 4]]` to `[[3, 1], [4, 2]]`. Returns the new
/// `(width, height)` and values.
pub fn rotate_grid<T: Copy>(width: usize, height: usize, values: &[T], k: u8) -> (usize, usize, Vec<T>) {
    debug_assert_eq!(values.len(), width * height);
    let at = |x: usize, y: usize| values[y * width + x];
    match k % 4 {
        0 => (width, height, values.to_vec()),
        1 => {
            let (nw, nh) = (height, width);
            let mut out = Vec::with_capacity(values.len());
            for y in 0..nh {
                for x in 0..nw {
                    out.push(at(y, height - 1 - x));
                }
            }
            (nw, nh, out)
        }
        2 => {
            let mut out = values.to_vec();
            out.reverse();
            (width, height, out)
        }
        _ => {
            let (nw, nh) = (height, width);
            let mut out = Vec::with_capacity(values.len());
            for y in 0..nh {
                for x in 0..nw {
                    out.push(at(width - 1 - y, x));
                }
            }
            (nw, nh, out)
        }
    }
}

/// Spatial rotation by quarter turns, applied per channel.
pub trait Rotate: Sized {
    fn rotated(&self, k: u8) -> Self;
}

impl Rotate for ImagePlane {
    fn rotated(&self, k: u8) -> Self {
        let (width, height, values) = rotate_grid(self.width, self.height, &self.values, k);
        Self { width, height, values }
    }
}

impl Rotate for FeatureMap {
    fn rotated(&self, k: u8) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        let (mut width, mut height) = (self.width, self.height);
        for c in 0..self.channels {
            let (w, h, v) = rotate_grid(self.width, self.height, self.channel(c), k);
            width = w;
            height = h;
            values.extend(v);
        }
        Self {
            channels: self.channels,
            width,
            height,
            values,
            index_bits: self.index_bits,
        }
    }
}

/// Rotate by `k` quarter turns; `k` must be in `0..=3`.
pub fn rotate<P: Rotate>(p: &P, k: u8) -> Result<P> {
    if k > 3 {
        return Err(Error::InvalidRotation(k));
    }
    Ok(p.rotated(k))
}
