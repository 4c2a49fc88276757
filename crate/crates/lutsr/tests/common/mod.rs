#![allow(dead_code)]

use std::process::{Command, Output};

use lutsr_core::engine::{Lut1D, LutPack};
use lutsr_core::model::{ModelDescriptor, Variant, MAX_BLOCKS};
use lutsr_core::tensor::{BitSplit, ImagePlane, ShiftTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lutsr(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lutsr"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("spawn lutsr")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Random shifts and residual flags on top of a fresh descriptor.
pub fn randomize(rng: &mut ChaCha8Rng, desc: &mut ModelDescriptor) {
    for st in &mut desc.shift_tables {
        let offsets = (0..st.len())
            .map(|_| (rng.random_range(-2..=2i8), rng.random_range(-2..=2i8)))
            .collect();
        *st = ShiftTable::new(offsets).unwrap();
    }
    let layers = desc.layers();
    for (i, l) in layers.iter().enumerate() {
        if l.in_channels == l.out_channels && rng.random_bool(0.5) {
            desc.residual_flags ^= 1 << i;
        }
    }
    desc.validate().unwrap();
}

pub fn random_descriptor(rng: &mut ChaCha8Rng, max_channels: u16, max_scale: u8) -> ModelDescriptor {
    let variant = [Variant::S, Variant::M, Variant::L, Variant::Custom][rng.random_range(0..4)];
    let blocks = variant
        .block_count()
        .unwrap_or_else(|| rng.random_range(0..=MAX_BLOCKS.min(4)));
    let mut d = ModelDescriptor::custom(
        variant,
        blocks,
        rng.random_range(1..=max_channels),
        rng.random_range(1..=max_scale),
    )
    .unwrap();
    let msb = rng.random_range(1..=7u8);
    d.bit_split = BitSplit::new(msb, 8 - msb).unwrap();
    d.index_bits = rng.random_range(1..=8);
    randomize(rng, &mut d);
    d
}

/// Tables with random strides and entries for every slot of `desc`.
pub fn random_tables(rng: &mut ChaCha8Rng, desc: &ModelDescriptor) -> Vec<Lut1D> {
    desc.slots()
        .into_iter()
        .map(|slot| {
            let stride = 1u32 << rng.random_range(0..=slot.in_bits.min(7) as u32);
            let n = Lut1D::entry_count(slot.in_bits, stride);
            Lut1D::new(slot, stride, (0..n).map(|_| rng.random()).collect()).unwrap()
        })
        .collect()
}

pub fn random_pack(rng: &mut ChaCha8Rng, max_channels: u16, max_scale: u8) -> LutPack {
    let desc = random_descriptor(rng, max_channels, max_scale);
    let tables = random_tables(rng, &desc);
    let eps = rng.random_bool(0.5).then(|| rng.random_range(0.01..4.0f32));
    LutPack::new(desc, tables, eps).unwrap()
}

pub fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
    ImagePlane::from_fn(w, h, |_, _| rng.random())
}
