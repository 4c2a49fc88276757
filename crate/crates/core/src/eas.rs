//! Error-bounded adaptive sampling.
//!
//! Offline, each stride-1 table independently gets the largest power-of-two
//! stride whose weighted interpolation error stays strictly below a
//! tolerance. Online, every subsampled table is expanded once into a dense
//! [`QueryBuffer`], so the pixel loop does a single read per lookup instead of
//! interpolating.

use alloc::vec::Vec;

use crate::engine::{run_pipeline, Lookup, Lut1D, LutPack, OpCost, Stage, StageObserver, MAX_STRIDE_LOG2};
use crate::tensor::ImagePlane;
use crate::{Error, Result};

/// Tolerance used when none is given.
pub const DEFAULT_EPSILON: f64 = 0.4;

/// Power-of-two strides `1, 2, ..., 2^max_log2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StrideCandidates {
    max_log2: u8,
}

impl StrideCandidates {
    /// Largest candidate set for a table of `in_bits` index bits.
    pub fn for_bits(in_bits: u8) -> Self {
        Self {
            max_log2: in_bits.min(MAX_STRIDE_LOG2),
        }
    }

    pub fn with_max_log2(max_log2: u8) -> Result<Self> {
        if max_log2 > MAX_STRIDE_LOG2 {
            return Err(Error::InvalidStride(1 << max_log2.min(31)));
        }
        Ok(Self { max_log2 })
    }

    pub fn max_log2(self) -> u8 {
        self.max_log2
    }

    pub fn max_stride(self) -> u32 {
        1 << self.max_log2
    }

    pub fn contains(self, s: u32) -> bool {
        s.is_power_of_two() && s.trailing_zeros() <= self.max_log2 as u32
    }

    /// Candidates in increasing order.
    pub fn iter(self) -> impl DoubleEndedIterator<Item = u32> {
        (0..=self.max_log2).map(|k| 1u32 << k)
    }
}

fn check_stride(lut: &Lut1D, s: u32) -> Result<()> {
    if lut.stride() != 1 {
        return Err(Error::NotDense(lut.stride()));
    }
    if !StrideCandidates::for_bits(lut.in_bits()).contains(s) {
        return Err(Error::InvalidStride(s));
    }
    Ok(())
}

/// Keep the entries at `0, s, 2s, ...` and the top index of a stride-1 table.
pub fn subsample(lut: &Lut1D, s: u32) -> Result<Lut1D> {
    check_stride(lut, s)?;
    if s == 1 {
        return Ok(lut.clone());
    }
    let domain = lut.domain();
    let src = lut.entries();
    let mut entries: Vec<i8> = src.iter().step_by(s as usize).copied().collect();
    entries.push(src[domain - 1]);
    Lut1D::new(lut.slot(), s, entries)
}

/// Weighted mean absolute interpolation error of sampling `lut` at stride `s`:
/// `s / (s - 1) * mean_i |query_s(i) - lut[i]|`, with the mean taken uniformly
/// over the whole index domain. Zero at `s = 1`.
pub fn interp_error(lut: &Lut1D, s: u32) -> Result<f64> {
    check_stride(lut, s)?;
    if s == 1 {
        return Ok(0.0);
    }
    let sparse = subsample(lut, s)?;
    let total: u64 = lut
        .entries()
        .iter()
        .enumerate()
        .map(|(i, &e)| (sparse.query(i) - i32::from(e)).unsigned_abs() as u64)
        .sum();
    let mean = total as f64 / lut.domain() as f64;
    Ok(s as f64 / (s - 1) as f64 * mean)
}

/// Largest stride in `1..=2^max_log2` whose error is strictly below `epsilon`.
/// Stride 1 always qualifies.
pub fn search_stride(lut: &Lut1D, epsilon: f64, max_log2: u8) -> Result<u32> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidTolerance);
    }
    if lut.stride() != 1 {
        return Err(Error::NotDense(lut.stride()));
    }
    let cap = max_log2.min(StrideCandidates::for_bits(lut.in_bits()).max_log2());
    for s in StrideCandidates::with_max_log2(cap)?.iter().rev() {
        if interp_error(lut, s)? < epsilon {
            return Ok(s);
        }
    }
    Ok(1)
}

/// Replace every table by its subsample at its own searched stride and
/// record `epsilon` in the pack.
pub fn compress_pack(pack: &LutPack, epsilon: f64) -> Result<LutPack> {
    let tables = pack
        .tables()
        .iter()
        .map(|t| {
            let s = search_stride(t, epsilon, MAX_STRIDE_LOG2)?;
            subsample(t, s)
        })
        .collect::<Result<Vec<_>>>()?;
    LutPack::new(pack.descriptor().clone(), tables, Some(epsilon as f32))
}

/// Subsample every table at one fixed stride, capped per table at its own
/// largest candidate.
pub fn resample_uniform(pack: &LutPack, stride: u32) -> Result<LutPack> {
    if !stride.is_power_of_two() || stride.trailing_zeros() > MAX_STRIDE_LOG2 as u32 {
        return Err(Error::InvalidStride(stride));
    }
    let tables = pack
        .tables()
        .iter()
        .map(|t| subsample(t, stride.min(StrideCandidates::for_bits(t.in_bits()).max_stride())))
        .collect::<Result<Vec<_>>>()?;
    LutPack::new(pack.descriptor().clone(), tables, pack.eas_epsilon())
}

/// Dense cache of a table's interpolated outputs over its whole domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryBuffer {
    values: Vec<i32>,
}

impl QueryBuffer {
    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Lookup for QueryBuffer {
    #[inline]
    fn query(&self, index: usize) -> i32 {
        self.values[index]
    }

    fn cost(&self) -> OpCost {
        OpCost { reads: 1, arith: 0 }
    }
}

/// `buffer[i] = lut_query(lut, i)` for every index of the domain.
pub fn build_buffer(lut: &Lut1D) -> QueryBuffer {
    QueryBuffer {
        values: (0..lut.domain()).map(|i| lut.query(i)).collect(),
    }
}

/// Buffers for every table of a pack, in canonical order.
pub fn build_buffers(pack: &LutPack) -> Vec<QueryBuffer> {
    pack.tables().iter().map(build_buffer).collect()
}

/// Same result as [`crate::engine::forward`], reading every table through a
/// prebuilt buffer.
pub fn cached_forward(pack: &LutPack, lq: &ImagePlane) -> Result<ImagePlane> {
    cached_forward_observed(pack, lq, &mut ())
}

pub fn cached_forward_observed(pack: &LutPack, lq: &ImagePlane, obs: &mut dyn StageObserver) -> Result<ImagePlane> {
    obs.enter(Stage::BufferBuild);
    let buffers = build_buffers(pack);
    run_pipeline(pack.descriptor(), &buffers, lq, obs)
}
