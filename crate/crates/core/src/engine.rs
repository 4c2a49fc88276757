//! Integer-only inference over a table pack.
//!
//! Each layer evaluates one 1D table per (output channel, input channel,
//! kernel position), sums the looked-up `i8` entries in wide integers and
//! divides once by the fan-in, rounding half away from zero. Feature maps are
//! clamped into the next layer's index range before every lookup.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::model::{LayerSpec, ModelDescriptor};
use crate::num::round_div;
use crate::tensor::{
    pixel_shuffle, quantize_in_place, shift_channels, split_bits, FeatureMap, ImagePlane, Rotate, ShiftTable,
};
use crate::{Error, Result};

pub use crate::model::{LayerRole, TableSlot};

/// Largest supported stride exponent; strides are stored in one byte.
pub const MAX_STRIDE_LOG2: u8 = 7;

/// Arithmetic operations charged to one interpolated query at stride > 1:
/// shift, mask, complement weight, two products, sum, rounded division.
pub const INTERP_ARITH_OPS: u32 = 7;

/// One-dimensional lookup table, possibly subsampled.
///
/// At stride `s > 1` the table holds samples at indices `0, s, 2s, ...` plus
/// the top index `2^in_bits - 1`, for `2^in_bits / s + 1` entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lut1D {
    slot: TableSlot,
    stride: u32,
    entries: Vec<i8>,
}

impl Lut1D {
    pub fn new(slot: TableSlot, stride: u32, entries: Vec<i8>) -> Result<Self> {
        if slot.in_bits == 0 || slot.in_bits > 16 {
            return Err(Error::InvalidDescriptor("table index bits must be in 1..=16"));
        }
        if !stride.is_power_of_two()
            || stride.trailing_zeros() > MAX_STRIDE_LOG2 as u32
            || stride.trailing_zeros() > slot.in_bits as u32
        {
            return Err(Error::InvalidStride(stride));
        }
        let expected = Self::entry_count(slot.in_bits, stride);
        if entries.len() != expected {
            return Err(Error::EntryCount {
                expected,
                found: entries.len(),
            });
        }
        Ok(Self { slot, stride, entries })
    }

    /// Entry count of a `bits`-wide table sampled at `stride`.
    pub fn entry_count(bits: u8, stride: u32) -> usize {
        let domain = 1usize << bits;
        if stride == 1 {
            domain
        } else {
            domain / stride as usize + 1
        }
    }

    #[inline]
    pub fn slot(&self) -> TableSlot {
        self.slot
    }

    #[inline]
    pub fn role(&self) -> LayerRole {
        self.slot.role
    }

    #[inline]
    pub fn in_bits(&self) -> u8 {
        self.slot.in_bits
    }

    #[inline]
    pub fn stride(&self) -> u32 {
        self.stride
    }

    #[inline]
    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Size of the index domain, `2^in_bits`.
    #[inline]
    pub fn domain(&self) -> usize {
        1 << self.slot.in_bits
    }

    /// Index in the full domain of stored entry `k`.
    #[inline]
    pub fn node(&self, k: usize) -> usize {
        if k + 1 == self.entries.len() {
            self.domain() - 1
        } else {
            k * self.stride as usize
        }
    }

    /// Linear interpolation between the two stored samples around `i`.
    ///
    /// The last cell spans from the final grid sample to the top index, so it
    /// is one narrower than the others; its weights use the true cell width.
    #[inline]
    fn interpolate(&self, i: usize) -> i32 {
        if self.stride == 1 {
            return i32::from(self.entries[i]);
        }
        let shift = self.stride.trailing_zeros();
        let last = self.entries.len() - 2;
        let q = (i >> shift).min(last);
        let left = q << shift;
        let right = if q == last {
            self.domain() - 1
        } else {
            left + self.stride as usize
        };
        let width = (right - left) as i64;
        let w = (i - left) as i64;
        let o0 = i64::from(self.entries[q]);
        let o1 = i64::from(self.entries[q + 1]);
        round_div((width - w) * o0 + w * o1, width) as i32
    }
}

/// Query `lut` at index `i` of its full domain.
pub fn lut_query(lut: &Lut1D, i: i64) -> Result<i32> {
    if i < 0 || i >= lut.domain() as i64 {
        return Err(Error::IndexOutOfRange {
            index: i,
            bits: lut.in_bits(),
        });
    }
    Ok(lut.interpolate(i as usize))
}

/// Cost of one query, in memory reads and arithmetic operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCost {
    pub reads: u32,
    pub arith: u32,
}

/// Running totals of table traffic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub queries: u64,
    pub reads: u64,
    pub arith: u64,
}

/// Anything that maps a table index to a wide output value.
pub trait Lookup {
    fn query(&self, index: usize) -> i32;

    /// Operations spent by one call to [`Lookup::query`].
    fn cost(&self) -> OpCost;
}

impl Lookup for Lut1D {
    #[inline]
    fn query(&self, index: usize) -> i32 {
        self.interpolate(index)
    }

    fn cost(&self) -> OpCost {
        if self.stride == 1 {
            OpCost { reads: 1, arith: 0 }
        } else {
            OpCost {
                reads: 2,
                arith: INTERP_ARITH_OPS,
            }
        }
    }
}

/// Wraps a [`Lookup`] and tallies every query into a shared counter.
pub struct Counted<'a, L> {
    inner: &'a L,
    counts: &'a Cell<OpCounts>,
    cost: OpCost,
}

impl<'a, L: Lookup> Counted<'a, L> {
    pub fn new(inner: &'a L, counts: &'a Cell<OpCounts>) -> Self {
        Self {
            inner,
            counts,
            cost: inner.cost(),
        }
    }

    /// Wrap every table of a slice.
    pub fn wrap_all(tables: &'a [L], counts: &'a Cell<OpCounts>) -> Vec<Self> {
        tables.iter().map(|t| Self::new(t, counts)).collect()
    }
}

impl<L: Lookup> Lookup for Counted<'_, L> {
    #[inline]
    fn query(&self, index: usize) -> i32 {
        let mut c = self.counts.get();
        c.queries += 1;
        c.reads += u64::from(self.cost.reads);
        c.arith += u64::from(self.cost.arith);
        self.counts.set(c);
        self.inner.query(index)
    }

    fn cost(&self) -> OpCost {
        self.cost
    }
}

/// A model: descriptor plus one table per slot, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct LutPack {
    descriptor: ModelDescriptor,
    tables: Vec<Lut1D>,
    eas_epsilon: Option<f32>,
}

impl LutPack {
    pub fn new(descriptor: ModelDescriptor, tables: Vec<Lut1D>, eas_epsilon: Option<f32>) -> Result<Self> {
        descriptor.validate()?;
        let slots = descriptor.slots();
        if slots.len() != tables.len() {
            return Err(Error::InvalidDescriptor("table count does not match the descriptor"));
        }
        for (index, (slot, table)) in slots.iter().zip(&tables).enumerate() {
            if *slot != table.slot {
                return Err(Error::TableSlot {
                    index,
                    reason: "role, position, channels or index bits differ from the layout",
                });
            }
        }
        Ok(Self {
            descriptor,
            tables,
            eas_epsilon,
        })
    }

    #[inline]
    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    #[inline]
    pub fn tables(&self) -> &[Lut1D] {
        &self.tables
    }

    #[inline]
    pub fn eas_epsilon(&self) -> Option<f32> {
        self.eas_epsilon
    }

    pub fn into_parts(self) -> (ModelDescriptor, Vec<Lut1D>, Option<f32>) {
        (self.descriptor, self.tables, self.eas_epsilon)
    }

    /// Layer `i` with its tables.
    pub fn layer(&self, i: usize) -> LayerRef<'_> {
        let spec = self.descriptor.layers()[i];
        LayerRef {
            spec,
            tables: &self.tables[spec.table_offset..spec.table_offset + spec.table_count()],
        }
    }

    /// Shift block `b`: its offsets, pointwise layer and depthwise layer.
    pub fn block(&self, b: usize) -> BlockRef<'_> {
        BlockRef {
            shifts: &self.descriptor.shift_tables[b],
            pointwise: self.layer(2 + 2 * b),
            depthwise: self.layer(3 + 2 * b),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LayerRef<'a> {
    pub spec: LayerSpec,
    pub tables: &'a [Lut1D],
}

#[derive(Clone, Copy, Debug)]
pub struct BlockRef<'a> {
    pub shifts: &'a ShiftTable,
    pub pointwise: LayerRef<'a>,
    pub depthwise: LayerRef<'a>,
}

fn check_layer_input(spec: &LayerSpec, tables: &[Lut1D], fm: &FeatureMap) -> Result<()> {
    if fm.index_bits() != Some(spec.in_bits) {
        return Err(Error::Unquantized { expected: spec.in_bits });
    }
    if fm.channels() != spec.in_channels {
        return Err(Error::ChannelMismatch {
            expected: spec.in_channels,
            found: fm.channels(),
        });
    }
    if tables.len() != spec.table_count() {
        return Err(Error::TableCount {
            role: spec.role,
            expected: spec.table_count(),
            found: tables.len(),
        });
    }
    for (index, (slot, t)) in spec.slots().zip(tables).enumerate() {
        if slot != t.slot {
            return Err(Error::TableSlot {
                index,
                reason: "table does not belong to this layer",
            });
        }
    }
    Ok(())
}

/// Mean of the table responses of one layer, in wide integers.
///
/// Residual connections and the rectifier are not applied here.
pub fn sms_layer_forward(spec: &LayerSpec, tables: &[Lut1D], fm: &FeatureMap) -> Result<FeatureMap> {
    check_layer_input(spec, tables, fm)?;
    Ok(aggregate(spec, tables, fm))
}

/// Replicate-pad one channel by a one-pixel border.
fn pad1(src: &[i32], w: usize, h: usize) -> Vec<i32> {
    let pw = w + 2;
    let mut out = Vec::with_capacity(pw * (h + 2));
    for py in 0..h + 2 {
        let y = py.saturating_sub(1).min(h - 1);
        let row = &src[y * w..(y + 1) * w];
        out.push(row[0]);
        out.extend_from_slice(row);
        out.push(row[w - 1]);
    }
    out
}

pub(crate) fn aggregate<L: Lookup>(spec: &LayerSpec, tables: &[L], input: &FeatureMap) -> FeatureMap {
    let (w, h) = (input.width(), input.height());
    let n = w * h;
    let mut out = vec![0i32; spec.out_channels * n];
    match spec.role {
        LayerRole::Pointwise => {
            for (co, acc) in out.chunks_exact_mut(n).enumerate() {
                for ci in 0..spec.in_channels {
                    let t = &tables[spec.table_index(co, ci, 0)];
                    for (a, &v) in acc.iter_mut().zip(input.channel(ci)) {
                        *a += t.query(v as usize);
                    }
                }
            }
        }
        LayerRole::Conv3x3 | LayerRole::Depthwise => {
            let padded: Vec<Vec<i32>> = (0..input.channels()).map(|c| pad1(input.channel(c), w, h)).collect();
            let pw = w + 2;
            for (co, acc) in out.chunks_exact_mut(n).enumerate() {
                for k in 0..spec.fan_in_channels() {
                    let ci = if spec.role == LayerRole::Depthwise { co } else { k };
                    let src = &padded[ci];
                    for p in 0..9 {
                        let (kx, ky) = (p % 3, p / 3);
                        let t = &tables[spec.table_index(co, ci, p)];
                        for (y, acc_row) in acc.chunks_exact_mut(w).enumerate() {
                            let start = (y + ky) * pw + kx;
                            for (a, &v) in acc_row.iter_mut().zip(&src[start..start + w]) {
                                *a += t.query(v as usize);
                            }
                        }
                    }
                }
            }
        }
    }
    let fan_in = spec.fan_in() as i64;
    for v in &mut out {
        *v = round_div(i64::from(*v), fan_in) as i32;
    }
    FeatureMap::new(spec.out_channels, w, h, out).expect("shape derived from input")
}

/// Residual addition of the layer input, then the rectifier.
fn finish(spec: &LayerSpec, input: &FeatureMap, out: &mut FeatureMap) {
    let vals = out.values_mut();
    if spec.residual {
        for (o, &i) in vals.iter_mut().zip(input.values()) {
            *o += i;
        }
    }
    if spec.rectify {
        for o in vals.iter_mut() {
            *o = (*o).max(0);
        }
    }
}

fn layer<L: Lookup>(spec: &LayerSpec, tables: &[L], input: &FeatureMap) -> FeatureMap {
    let mut out = aggregate(
        spec,
        &tables[spec.table_offset..spec.table_offset + spec.table_count()],
        input,
    );
    finish(spec, input, &mut out);
    out
}

fn block<L: Lookup>(pw: &LayerSpec, dw: &LayerSpec, shifts: &ShiftTable, tables: &[L], x: &FeatureMap) -> FeatureMap {
    let mut shifted = shift_channels(x, shifts).expect("descriptor validated");
    quantize_in_place(&mut shifted, pw.in_bits);
    let mut mid = layer(pw, tables, &shifted);
    quantize_in_place(&mut mid, dw.in_bits);
    layer(dw, tables, &mid)
}

/// One shift block: shift, quantize, pointwise, quantize, depthwise.
///
/// The returned map is wide (not quantized).
pub fn shift_block_forward(block_ref: &BlockRef<'_>, fm: &FeatureMap) -> Result<FeatureMap> {
    let pw = block_ref.pointwise.spec;
    let dw = block_ref.depthwise.spec;
    if fm.channels() != pw.in_channels || block_ref.shifts.len() != pw.in_channels {
        return Err(Error::ChannelMismatch {
            expected: pw.in_channels,
            found: fm.channels(),
        });
    }
    let probe = quantize_for(fm, pw.in_bits);
    check_layer_input(&pw, block_ref.pointwise.tables, &probe)?;
    let mut dw_probe = FeatureMap::zeros(dw.in_channels, 1, 1);
    quantize_in_place(&mut dw_probe, dw.in_bits);
    check_layer_input(&dw, block_ref.depthwise.tables, &dw_probe)?;

    // re-base the specs so they index the block-local table slices
    let mut tables: Vec<&Lut1D> = block_ref.pointwise.tables.iter().collect();
    tables.extend(block_ref.depthwise.tables);
    let pw_local = LayerSpec { table_offset: 0, ..pw };
    let dw_local = LayerSpec {
        table_offset: pw.table_count(),
        ..dw
    };
    Ok(block(&pw_local, &dw_local, block_ref.shifts, &tables, fm))
}

fn quantize_for(fm: &FeatureMap, bits: u8) -> FeatureMap {
    let mut q = fm.clone();
    quantize_in_place(&mut q, bits);
    q
}

impl<L: Lookup> Lookup for &L {
    #[inline]
    fn query(&self, index: usize) -> i32 {
        (**self).query(index)
    }

    fn cost(&self) -> OpCost {
        (**self).cost()
    }
}

/// Pipeline stages reported to a [`StageObserver`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    BufferBuild,
    BitSplit,
    FeatureExtraction,
    ShiftBlock(u8),
    FinalPointwise,
    PixelShuffle,
    Ensemble,
    Done,
}

/// Receives a notification as each stage begins.
pub trait StageObserver {
    fn enter(&mut self, stage: Stage);
}

impl StageObserver for () {
    fn enter(&mut self, _stage: Stage) {}
}

/// One un-rotated pass, returning the wide pixel-shuffled output.
fn single_pass<L: Lookup>(
    desc: &ModelDescriptor,
    layers: &[LayerSpec],
    tables: &[L],
    lq: &ImagePlane,
    obs: &mut dyn StageObserver,
) -> FeatureMap {
    obs.enter(Stage::BitSplit);
    let (msb, lsb) = split_bits(lq, desc.bit_split);
    let msb = FeatureMap::from_indices(&msb, desc.bit_split.msb_bits());
    let lsb = FeatureMap::from_indices(&lsb, desc.bit_split.lsb_bits());

    obs.enter(Stage::FeatureExtraction);
    let hi = layer(&layers[0], tables, &msb);
    let lo = layer(&layers[1], tables, &lsb);
    let mut x = hi;
    for (a, &b) in x.values_mut().iter_mut().zip(lo.values()) {
        *a += b;
    }

    let n = desc.n_blocks as usize;
    for b in 0..n {
        obs.enter(Stage::ShiftBlock(b as u8));
        x = block(
            &layers[2 + 2 * b],
            &layers[3 + 2 * b],
            &desc.shift_tables[b],
            tables,
            &x,
        );
    }

    obs.enter(Stage::FinalPointwise);
    let last = &layers[2 + 2 * n];
    quantize_in_place(&mut x, last.in_bits);
    let out = layer(last, tables, &x);

    obs.enter(Stage::PixelShuffle);
    pixel_shuffle(&out, desc.scale as usize).expect("final layer has scale^2 channels")
}

/// Full rotation-ensemble inference with any table source laid out in
/// canonical order (`tables.len() == desc.table_count()`).
pub fn run_pipeline<L: Lookup>(
    desc: &ModelDescriptor,
    tables: &[L],
    lq: &ImagePlane,
    obs: &mut dyn StageObserver,
) -> Result<ImagePlane> {
    if lq.is_empty() {
        return Err(Error::EmptyImage);
    }
    if tables.len() != desc.table_count() {
        return Err(Error::InvalidDescriptor("table count does not match the descriptor"));
    }
    let layers = desc.layers();
    let r = desc.scale as usize;
    let (ow, oh) = (lq.width() * r, lq.height() * r);
    let mut sum = vec![0i64; ow * oh];
    for k in 0..4u8 {
        let rotated = lq.rotated(k);
        let out = single_pass(desc, &layers, tables, &rotated, obs);
        obs.enter(Stage::Ensemble);
        let back = out.rotated((4 - k) % 4);
        debug_assert_eq!((back.width(), back.height()), (ow, oh));
        for (s, &v) in sum.iter_mut().zip(back.values()) {
            *s += i64::from(v);
        }
    }
    let values = sum.into_iter().map(|s| round_div(s, 4).clamp(0, 255) as u8).collect();
    obs.enter(Stage::Done);
    ImagePlane::new(ow, oh, values)
}

/// Restore `lq` with the pack, interpolating subsampled tables per query.
pub fn forward(pack: &LutPack, lq: &ImagePlane) -> Result<ImagePlane> {
    run_pipeline(pack.descriptor(), pack.tables(), lq, &mut ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use crate::tensor::quantize_index;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slot(bits: u8) -> TableSlot {
        TableSlot {
            role: LayerRole::Pointwise,
            position: 0,
            in_channel: 0,
            out_channel: 0,
            in_bits: bits,
        }
    }

    fn pack_with(desc: ModelDescriptor, mut f: impl FnMut(TableSlot) -> Vec<i8>) -> LutPack {
        let tables = desc
            .slots()
            .into_iter()
            .map(|s| Lut1D::new(s, 1, f(s)).unwrap())
            .collect();
        LutPack::new(desc, tables, None).unwrap()
    }

    fn identity_entries(s: TableSlot) -> Vec<i8> {
        (0..1usize << s.in_bits).map(|i| i.min(127) as i8).collect()
    }

    #[test]
    fn query_stride_one() {
        let mut e = vec![0i8; 64];
        e[5] = 42;
        let t = Lut1D::new(slot(6), 1, e).unwrap();
        assert_eq!(lut_query(&t, 5).unwrap(), 42);
        assert!(lut_query(&t, 64).is_err());
        assert!(lut_query(&t, -1).is_err());
    }

    #[test]
    fn query_midpoint() {
        // 2-bit domain at stride 2 keeps indices 0, 2 and 3
        let t = Lut1D::new(slot(2), 2, vec![10, 20, 30]).unwrap();
        assert_eq!(lut_query(&t, 1).unwrap(), 15);
        assert_eq!(lut_query(&t, 2).unwrap(), 20);
        assert_eq!(lut_query(&t, 3).unwrap(), 30);
    }

    #[test]
    fn linear_tables_interpolate_exactly() {
        for log in 0..=6u32 {
            let s = 1u32 << log;
            let n = Lut1D::entry_count(6, s);
            let entries: Vec<i8> = (0..n)
                .map(|k| if k + 1 == n { 63 } else { (k as u32 * s) as i8 })
                .collect();
            let t = Lut1D::new(slot(6), s, entries).unwrap();
            for i in 0..64 {
                assert_eq!(lut_query(&t, i).unwrap(), i as i32, "stride {s} index {i}");
            }
        }
    }

    #[test]
    fn entry_count_rules() {
        assert_eq!(Lut1D::entry_count(6, 1), 64);
        assert_eq!(Lut1D::entry_count(6, 4), 17);
        assert_eq!(Lut1D::entry_count(6, 64), 2);
        assert_eq!(Lut1D::entry_count(2, 2), 3);
        assert!(Lut1D::new(slot(6), 4, vec![0; 16]).is_err());
        assert!(Lut1D::new(slot(6), 3, vec![0; 22]).is_err());
        assert!(Lut1D::new(slot(2), 8, vec![0; 2]).is_err());
        assert!(Lut1D::new(slot(8), 256, vec![0; 2]).is_err());
    }

    fn single_layer(role: LayerRole, c_in: usize, c_out: usize) -> LayerSpec {
        LayerSpec {
            role,
            in_channels: c_in,
            out_channels: c_out,
            in_bits: 6,
            residual: false,
            rectify: false,
            table_offset: 0,
        }
    }

    fn tables_for(spec: &LayerSpec, mut f: impl FnMut(TableSlot) -> Vec<i8>) -> Vec<Lut1D> {
        spec.slots().map(|s| Lut1D::new(s, 1, f(s)).unwrap()).collect()
    }

    #[test]
    fn pointwise_identity_and_zero() {
        let spec = single_layer(LayerRole::Pointwise, 1, 1);
        let fm = quantize_index(&FeatureMap::new(1, 3, 2, vec![0, 5, 63, 7, 8, 9]).unwrap(), 6);
        let id = tables_for(&spec, identity_entries);
        assert_eq!(sms_layer_forward(&spec, &id, &fm).unwrap().values(), fm.values());
        let zero = tables_for(&spec, |_| vec![0; 64]);
        assert!(sms_layer_forward(&spec, &zero, &fm)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0));
    }

    #[test]
    fn layer_rejects_unquantized_input() {
        let spec = single_layer(LayerRole::Pointwise, 1, 1);
        let fm = FeatureMap::new(1, 1, 1, vec![3]).unwrap();
        let id = tables_for(&spec, identity_entries);
        assert_eq!(
            sms_layer_forward(&spec, &id, &fm),
            Err(Error::Unquantized { expected: 6 })
        );
    }

    #[test]
    fn depthwise_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = single_layer(LayerRole::Depthwise, 2, 2);
        let tables = tables_for(&spec, |_| (0..64).map(|_| rng.random_range(-128..=127)).collect());
        let values = (0..50).map(|_| rng.random_range(0..64)).collect();
        let fm = quantize_index(&FeatureMap::new(2, 5, 5, values).unwrap(), 6);
        let out = sms_layer_forward(&spec, &tables, &fm).unwrap();
        for c in 0..2 {
            for y in 0..5i32 {
                for x in 0..5i32 {
                    let mut sum = 0i64;
                    for p in 0..9i32 {
                        let sx = (x + p % 3 - 1).clamp(0, 4) as usize;
                        let sy = (y + p / 3 - 1).clamp(0, 4) as usize;
                        let t = &tables[c * 9 + p as usize];
                        sum += t.entries()[fm.get(c, sx, sy) as usize] as i64;
                    }
                    let expect = libm::round(sum as f64 / 9.0) as i32;
                    assert_eq!(out.get(c, x as usize, y as usize), expect);
                }
            }
        }
    }

    #[test]
    fn shift_block_identity_and_zero_residual() {
        let desc = ModelDescriptor::new(Variant::M, 1, 1).unwrap();
        let fm = FeatureMap::new(1, 4, 3, (0..12).map(|v| v * 7 - 10).collect()).unwrap();
        let quantized = quantize_index(&fm, 6);

        // identity depthwise tables average the neighbourhood, so only a
        // constant map passes through unchanged
        let mut no_res = desc.clone();
        no_res.residual_flags = 0;
        let pack = pack_with(no_res, identity_entries);
        let flat = FeatureMap::new(1, 4, 3, vec![37; 12]).unwrap();
        let out = shift_block_forward(&pack.block(0), &flat).unwrap();
        assert_eq!(out.values(), flat.values());

        let pack = pack_with(desc, |s| vec![0; 1 << s.in_bits]);
        let out = shift_block_forward(&pack.block(0), &fm).unwrap();
        assert_eq!(out.values(), quantized.values());
    }

    #[test]
    fn forward_identity_constant() {
        let desc = ModelDescriptor::new(Variant::M, 3, 2).unwrap();
        let pack = pack_with(desc, identity_entries);
        for v in [0u8, 1, 77, 201, 255] {
            let out = forward(&pack, &ImagePlane::filled(3, 2, v)).unwrap();
            // identity chain: msb + lsb, clamped to the 6-bit range, doubled by
            // the residual of both block layers and clamped again before the
            // final layer
            let (m, l) = (v >> 2, v & 3);
            let fused = (m as i32 + l as i32).min(63);
            let after_pw = (fused + fused).min(63);
            let after_dw = (after_pw + after_pw).min(63);
            assert_eq!((out.width(), out.height()), (6, 4));
            assert!(out.values().iter().all(|&o| o as i32 == after_dw), "v={v}");
        }
    }

    #[test]
    fn forward_zero_final_layer() {
        let desc = ModelDescriptor::new(Variant::S, 2, 2).unwrap();
        let pack = pack_with(desc, |s| {
            if s.role == LayerRole::Pointwise {
                vec![0; 64]
            } else {
                identity_entries(s)
            }
        });
        let img = ImagePlane::from_fn(5, 4, |x, y| (x * 40 + y * 9) as u8);
        assert!(forward(&pack, &img).unwrap().values().iter().all(|&v| v == 0));
    }

    #[test]
    fn forward_rejects_empty() {
        let pack = pack_with(ModelDescriptor::new(Variant::S, 1, 1).unwrap(), identity_entries);
        assert_eq!(
            forward(&pack, &ImagePlane::new(0, 0, vec![]).unwrap()),
            Err(Error::EmptyImage)
        );
    }

    #[test]
    fn counted_tallies_queries() {
        let counts = Cell::new(OpCounts::default());
        let t = Lut1D::new(slot(2), 2, vec![1, 2, 3]).unwrap();
        let c = Counted::new(&t, &counts);
        c.query(1);
        c.query(3);
        assert_eq!(
            counts.get(),
            OpCounts {
                queries: 2,
                reads: 4,
                arith: 2 * INTERP_ARITH_OPS as u64
            }
        );
    }

    #[test]
    fn pack_rejects_misordered_tables() {
        let desc = ModelDescriptor::new(Variant::S, 2, 1).unwrap();
        let mut tables: Vec<Lut1D> = desc
            .slots()
            .into_iter()
            .map(|s| Lut1D::new(s, 1, identity_entries(s)).unwrap())
            .collect();
        tables.swap(0, 1);
        assert!(matches!(
            LutPack::new(desc, tables, None),
            Err(Error::TableSlot { index: 0, .. })
        ));
    }
}
