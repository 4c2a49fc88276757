//! Seedable floating-point reference model.
//!
//! The model has the same layer layout as a table pack, but every table slot
//! holds a scalar [`UnitFunction`] instead. Because each layer output is a
//! mean of single-scalar function evaluations, enumerating each function over
//! its integer domain reproduces the model exactly, so the reference doubles
//! as the correctness oracle for the integer engine.
//!
//! Two evaluation modes share one per-pixel pipeline:
//!
//! - float: activations stay real-valued and are only clamped (not rounded)
//!   into the index range before each layer;
//! - quantized: every unit response is rounded and saturated to `i8`, and each
//!   mean is an exact integer division, matching the engine's arithmetic.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Add;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::engine::LutPack;
use crate::model::{LayerRole, LayerSpec, ModelDescriptor, TableSlot};
use crate::num::round_div;
use crate::tensor::{clamp_coord, rotate_grid, BitSplit, ImagePlane, ShiftTable};
use crate::{Error, Result};

/// Scalar map from one table index to one output value.
#[derive(Clone, Debug, PartialEq)]
pub enum UnitFunction {
    Identity,
    Affine {
        a: f64,
        b: f64,
    },
    /// Polynomial in the index (coefficients from degree 0 upward), clamped to `[-128, 127]`.
    ClampedPoly(Vec<f64>),
    /// Samples at indices `0..=255`, linearly interpolated in between.
    Tabulated(Box<[f64; 256]>),
}

impl UnitFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UnitFunction::Identity => x,
            UnitFunction::Affine { a, b } => a * x + b,
            UnitFunction::ClampedPoly(c) => c.iter().rev().fold(0.0, |acc, &k| acc * x + k).clamp(-128.0, 127.0),
            UnitFunction::Tabulated(t) => {
                let x = x.clamp(0.0, 255.0);
                let i = libm::floor(x) as usize;
                if i >= 255 {
                    return t[255];
                }
                let f = x - i as f64;
                t[i] * (1.0 - f) + t[i + 1] * f
            }
        }
    }

    fn hash_into(&self, h: &mut Sha256) {
        match self {
            UnitFunction::Identity => h.update([0u8]),
            UnitFunction::Affine { a, b } => {
                h.update([1u8]);
                h.update(a.to_le_bytes());
                h.update(b.to_le_bytes());
            }
            UnitFunction::ClampedPoly(c) => {
                h.update([2u8]);
                h.update((c.len() as u32).to_le_bytes());
                for k in c {
                    h.update(k.to_le_bytes());
                }
            }
            UnitFunction::Tabulated(t) => {
                h.update([3u8]);
                for k in t.iter() {
                    h.update(k.to_le_bytes());
                }
            }
        }
    }
}

/// The fixed table quantization rule: round half away from zero, saturate to `i8`.
#[inline]
pub fn quantize_entry(y: f64) -> i8 {
    libm::round(y).clamp(-128.0, 127.0) as i8
}

/// One layer of unit functions, in canonical slot order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceLayer {
    pub spec: LayerSpec,
    pub units: Vec<UnitFunction>,
}

/// Context handed to unit-function builders.
#[derive(Clone, Copy, Debug)]
pub struct UnitSite<'a> {
    pub layer: usize,
    pub spec: &'a LayerSpec,
    pub slot: TableSlot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceNet {
    descriptor: ModelDescriptor,
    layers: Vec<ReferenceLayer>,
    /// Diagnostic copy of the shift-block stack applied to the low-bit branch
    /// alone (pointwise/depthwise pairs); empty for the normal asymmetric model.
    lsb_mirror: Vec<ReferenceLayer>,
}

/// Real-valued output plane.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatPlane {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl FloatPlane {
    /// Round half away from zero and clamp to 8 bits.
    pub fn to_image(&self) -> ImagePlane {
        let values = self
            .values
            .iter()
            .map(|&v| libm::round(v).clamp(0.0, 255.0) as u8)
            .collect();
        ImagePlane::new(self.width, self.height, values).expect("shape preserved")
    }
}

/// Which bit plane a probe follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Msb,
    Lsb,
}

impl ReferenceNet {
    /// Build a net by asking `f` for every unit function.
    pub fn from_fn(descriptor: ModelDescriptor, mut f: impl FnMut(UnitSite<'_>) -> UnitFunction) -> Result<Self> {
        descriptor.validate()?;
        let layers = descriptor
            .layers()
            .into_iter()
            .enumerate()
            .map(|(i, spec)| ReferenceLayer {
                units: spec
                    .slots()
                    .map(|slot| {
                        f(UnitSite {
                            layer: i,
                            spec: &spec,
                            slot,
                        })
                    })
                    .collect(),
                spec,
            })
            .collect();
        Ok(Self {
            descriptor,
            layers,
            lsb_mirror: Vec::new(),
        })
    }

    /// Every unit function is `x -> x`.
    pub fn identity(descriptor: ModelDescriptor) -> Result<Self> {
        Self::from_fn(descriptor, |_| UnitFunction::Identity)
    }

    /// Build a net from explicit layers; shapes must match the descriptor.
    pub fn from_layers(descriptor: ModelDescriptor, layers: Vec<ReferenceLayer>) -> Result<Self> {
        descriptor.validate()?;
        let specs = descriptor.layers();
        if specs.len() != layers.len() {
            return Err(Error::InvalidDescriptor("layer count does not match"));
        }
        for (spec, layer) in specs.iter().zip(&layers) {
            if *spec != layer.spec || layer.units.len() != spec.table_count() {
                return Err(Error::InvalidDescriptor("layer shape does not match"));
            }
        }
        Ok(Self {
            descriptor,
            layers,
            lsb_mirror: Vec::new(),
        })
    }

    /// Tabulated net whose unit functions are the (stride-1) tables of `pack`.
    pub fn from_pack(pack: &LutPack) -> Result<Self> {
        let mut tables = pack.tables().iter();
        let mut bad = None;
        let net = Self::from_fn(pack.descriptor().clone(), |_| {
            let t = tables.next().expect("slot count matches");
            if t.stride() != 1 {
                bad = Some(t.stride());
            }
            let mut samples = [0.0f64; 256];
            for (i, &e) in t.entries().iter().enumerate().take(256) {
                samples[i] = f64::from(e);
            }
            UnitFunction::Tabulated(Box::new(samples))
        })?;
        if let Some(stride) = bad {
            return Err(Error::NotDense(stride));
        }
        Ok(net)
    }

    /// Attach a low-bit copy of the block stack so both branches have equal
    /// depth. Only [`sparsity_probe`] looks at it.
    pub fn with_lsb_mirror(mut self, mut f: impl FnMut(UnitSite<'_>) -> UnitFunction) -> Self {
        self.lsb_mirror = self.layers[2..2 + 2 * self.descriptor.n_blocks as usize]
            .iter()
            .enumerate()
            .map(|(k, l)| ReferenceLayer {
                spec: l.spec,
                units: l
                    .spec
                    .slots()
                    .map(|slot| {
                        f(UnitSite {
                            layer: 2 + k,
                            spec: &l.spec,
                            slot,
                        })
                    })
                    .collect(),
            })
            .collect();
        self
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn layers(&self) -> &[ReferenceLayer] {
        &self.layers
    }

    pub fn lsb_mirror(&self) -> &[ReferenceLayer] {
        &self.lsb_mirror
    }

    /// First 8 bytes (little endian) of a SHA-256 over every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h = Sha256::new();
        for layer in self.layers.iter().chain(&self.lsb_mirror) {
            for u in &layer.units {
                u.hash_into(&mut h);
            }
        }
        let digest = h.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(head)
    }
}

/// Deterministic random net: smooth, bounded unit functions that never
/// saturate the `i8` range on their index domain.
pub fn make_reference_net(descriptor: &ModelDescriptor, seed: u64) -> Result<ReferenceNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ReferenceNet::from_fn(descriptor.clone(), |site| random_unit(&mut rng, site))
}

fn random_unit(rng: &mut ChaCha8Rng, site: UnitSite<'_>) -> UnitFunction {
    let m = ((1u32 << site.slot.in_bits) - 1) as f64;
    let gain = if m > 63.0 { 63.0 / m } else { 1.0 };
    // layers with a residual path learn a correction around zero
    let a = if site.spec.residual {
        rng.random_range(-0.6..0.4) * gain
    } else {
        rng.random_range(0.5..1.5) * gain
    };
    let b = rng.random_range(-8.0..8.0);
    let wiggle = rng.random_range(-4.0..4.0);
    match rng.random_range(0..3u8) {
        0 => UnitFunction::Affine { a, b },
        1 => {
            let c2 = 4.0 * wiggle / (m * m);
            UnitFunction::ClampedPoly(vec![b, a - c2 * m, c2])
        }
        _ => {
            let omega = rng.random_range(0.05..0.3);
            let phase = rng.random_range(0.0..core::f64::consts::TAU);
            let mut t = [0.0f64; 256];
            for (i, v) in t.iter_mut().enumerate() {
                let x = i as f64;
                *v = a * x + b + wiggle * libm::sin(omega * x + phase);
            }
            UnitFunction::Tabulated(Box::new(t))
        }
    }
}

trait Mode {
    type V: Copy + Add<Output = Self::V> + PartialOrd;
    const ZERO: Self::V;
    fn index(v: u8) -> Self::V;
    fn unit(f: &UnitFunction, x: Self::V) -> Self::V;
    fn mean(sum: Self::V, n: usize) -> Self::V;
    fn clamp_index(v: Self::V, bits: u8) -> Self::V;
}

struct Float;

impl Mode for Float {
    type V = f64;
    const ZERO: f64 = 0.0;

    fn index(v: u8) -> f64 {
        f64::from(v)
    }

    fn unit(f: &UnitFunction, x: f64) -> f64 {
        f.eval(x)
    }

    fn mean(sum: f64, n: usize) -> f64 {
        sum / n as f64
    }

    fn clamp_index(v: f64, bits: u8) -> f64 {
        v.clamp(0.0, ((1u32 << bits) - 1) as f64)
    }
}

struct Quantized;

impl Mode for Quantized {
    type V = i64;
    const ZERO: i64 = 0;

    fn index(v: u8) -> i64 {
        i64::from(v)
    }

    fn unit(f: &UnitFunction, x: i64) -> i64 {
        i64::from(quantize_entry(f.eval(x as f64)))
    }

    fn mean(sum: i64, n: usize) -> i64 {
        round_div(sum, n as i64)
    }

    fn clamp_index(v: i64, bits: u8) -> i64 {
        v.clamp(0, (1i64 << bits) - 1)
    }
}

#[derive(Clone)]
struct Grid<V> {
    c: usize,
    w: usize,
    h: usize,
    v: Vec<V>,
}

impl<V: Copy> Grid<V> {
    #[inline]
    fn at(&self, c: usize, x: usize, y: usize) -> V {
        self.v[(c * self.h + y) * self.w + x]
    }

    fn map(&self, f: impl Fn(V) -> V) -> Self {
        Grid {
            c: self.c,
            w: self.w,
            h: self.h,
            v: self.v.iter().map(|&x| f(x)).collect(),
        }
    }
}

fn eval_layer<M: Mode>(spec: &LayerSpec, units: &[UnitFunction], input: &Grid<M::V>) -> Grid<M::V> {
    let (w, h) = (input.w, input.h);
    let mut v = Vec::with_capacity(spec.out_channels * w * h);
    for co in 0..spec.out_channels {
        for y in 0..h {
            for x in 0..w {
                let mut sum = M::ZERO;
                for k in 0..spec.fan_in_channels() {
                    let ci = if spec.role == LayerRole::Depthwise { co } else { k };
                    for p in 0..spec.role.positions() {
                        let (dx, dy) = match spec.role {
                            LayerRole::Pointwise => (0, 0),
                            _ => ((p % 3) as isize - 1, (p / 3) as isize - 1),
                        };
                        let sx = clamp_coord(x as isize + dx, w);
                        let sy = clamp_coord(y as isize + dy, h);
                        let f = &units[spec.table_index(co, ci, p)];
                        sum = sum + M::unit(f, input.at(ci, sx, sy));
                    }
                }
                let mut out = M::mean(sum, spec.fan_in());
                if spec.residual {
                    out = out + input.at(co, x, y);
                }
                if spec.rectify && out < M::ZERO {
                    out = M::ZERO;
                }
                v.push(out);
            }
        }
    }
    Grid {
        c: spec.out_channels,
        w,
        h,
        v,
    }
}

fn shift_grid<V: Copy>(g: &Grid<V>, shifts: &ShiftTable) -> Grid<V> {
    let mut v = Vec::with_capacity(g.v.len());
    for (c, &(dx, dy)) in shifts.offsets().iter().enumerate() {
        for y in 0..g.h {
            for x in 0..g.w {
                let sx = clamp_coord(x as isize - dx as isize, g.w);
                let sy = clamp_coord(y as isize - dy as isize, g.h);
                v.push(g.at(c, sx, sy));
            }
        }
    }
    Grid { v, ..g.clone() }
}

fn bit_plane<M: Mode>(lq: &ImagePlane, split: BitSplit, high: bool) -> Grid<M::V> {
    Grid {
        c: 1,
        w: lq.width(),
        h: lq.height(),
        v: lq
            .values()
            .iter()
            .map(|&p| {
                let (m, l) = split.split(p);
                M::index(if high { m } else { l })
            })
            .collect(),
    }
}

fn run_block<M: Mode>(
    pw: &ReferenceLayer,
    dw: &ReferenceLayer,
    shifts: &ShiftTable,
    x: &Grid<M::V>,
    mut tap: impl FnMut(&Grid<M::V>),
) -> Grid<M::V> {
    let shifted = shift_grid(x, shifts).map(|v| M::clamp_index(v, pw.spec.in_bits));
    let mid = eval_layer::<M>(&pw.spec, &pw.units, &shifted);
    tap(&mid);
    let mid = mid.map(|v| M::clamp_index(v, dw.spec.in_bits));
    let out = eval_layer::<M>(&dw.spec, &dw.units, &mid);
    tap(&out);
    out
}

/// One un-rotated pass; returns the `rW x rH` pixel-shuffled output.
fn pass<M: Mode>(net: &ReferenceNet, lq: &ImagePlane) -> Grid<M::V> {
    let d = &net.descriptor;
    let msb = bit_plane::<M>(lq, d.bit_split, true);
    let lsb = bit_plane::<M>(lq, d.bit_split, false);
    let hi = eval_layer::<M>(&net.layers[0].spec, &net.layers[0].units, &msb);
    let lo = eval_layer::<M>(&net.layers[1].spec, &net.layers[1].units, &lsb);
    let mut x = Grid {
        v: hi.v.iter().zip(&lo.v).map(|(&a, &b)| a + b).collect(),
        ..hi
    };
    let n = d.n_blocks as usize;
    for b in 0..n {
        x = run_block::<M>(
            &net.layers[2 + 2 * b],
            &net.layers[3 + 2 * b],
            &d.shift_tables[b],
            &x,
            |_| {},
        );
    }
    let last = &net.layers[2 + 2 * n];
    let x = x.map(|v| M::clamp_index(v, last.spec.in_bits));
    let out = eval_layer::<M>(&last.spec, &last.units, &x);

    let r = d.scale as usize;
    let (w, h) = (out.w, out.h);
    let mut v = Vec::with_capacity(out.v.len());
    for oy in 0..h * r {
        for ox in 0..w * r {
            let c = (oy % r) * r + ox % r;
            v.push(out.at(c, ox / r, oy / r));
        }
    }
    Grid {
        c: 1,
        w: w * r,
        h: h * r,
        v,
    }
}

/// Output width, height and the four rotated passes.
type Passes<V> = (usize, usize, Vec<Vec<V>>);

fn ensemble<M: Mode>(net: &ReferenceNet, lq: &ImagePlane) -> Result<Passes<M::V>> {
    if lq.is_empty() {
        return Err(Error::EmptyImage);
    }
    let mut outs = Vec::with_capacity(4);
    let mut dims = (0, 0);
    for k in 0..4u8 {
        let (w, h, v) = rotate_grid(lq.width(), lq.height(), lq.values(), k);
        let rotated = ImagePlane::new(w, h, v)?;
        let g = pass::<M>(net, &rotated);
        let (bw, bh, back) = rotate_grid(g.w, g.h, &g.v, (4 - k) % 4);
        dims = (bw, bh);
        outs.push(back);
    }
    Ok((dims.0, dims.1, outs))
}

/// Float pipeline averaged over four rotations; the result is not clamped.
pub fn ref_forward(net: &ReferenceNet, lq: &ImagePlane) -> Result<FloatPlane> {
    let (width, height, outs) = ensemble::<Float>(net, lq)?;
    let values = (0..width * height)
        .map(|i| outs.iter().map(|o| o[i]).sum::<f64>() / 4.0)
        .collect();
    Ok(FloatPlane { width, height, values })
}

/// The reference pipeline with the engine's quantization chain: `i8` unit
/// responses, integer means, one rounded division by four over rotations.
pub fn ref_forward_quantized(net: &ReferenceNet, lq: &ImagePlane) -> Result<ImagePlane> {
    let (width, height, outs) = ensemble::<Quantized>(net, lq)?;
    let values = (0..width * height)
        .map(|i| round_div(outs.iter().map(|o| o[i]).sum(), 4).clamp(0, 255) as u8)
        .collect();
    ImagePlane::new(width, height, values)
}

/// Fraction of exactly-zero post-rectifier activations after each layer of
/// one branch, run un-rotated in float mode on the branch alone.
///
/// The high-bit branch is its feature layer followed by the model's block
/// stack; the low-bit branch is its feature layer followed by the mirror
/// stack, which must exist whenever the model has blocks.
pub fn sparsity_probe(net: &ReferenceNet, lq: &ImagePlane, branch: Branch) -> Result<Vec<f64>> {
    if lq.is_empty() {
        return Err(Error::EmptyImage);
    }
    let d = &net.descriptor;
    let n = d.n_blocks as usize;
    let (first, stack) = match branch {
        Branch::Msb => (&net.layers[0], &net.layers[2..2 + 2 * n]),
        Branch::Lsb => {
            if net.lsb_mirror.len() != 2 * n {
                return Err(Error::BranchNotMaterialized);
            }
            (&net.layers[1], &net.lsb_mirror[..])
        }
    };
    let zero_fraction = |g: &Grid<f64>| g.v.iter().filter(|&&v| v == 0.0).count() as f64 / g.v.len() as f64;

    let input = bit_plane::<Float>(lq, d.bit_split, branch == Branch::Msb);
    let mut x = eval_layer::<Float>(&first.spec, &first.units, &input);
    let mut fractions = vec![zero_fraction(&x)];
    for b in 0..n {
        x = run_block::<Float>(&stack[2 * b], &stack[2 * b + 1], &d.shift_tables[b], &x, |g| {
            fractions.push(zero_fraction(g))
        });
    }
    Ok(fractions)
}
