//! Model descriptors and the canonical layer/table layout.
//!
//! A model is a fixed sequence of table layers:
//!
//! | index        | layer                   | role       | in -> out   | index bits |
//! |--------------|-------------------------|------------|-------------|------------|
//! | 0            | high-bit feature layer  | conv3x3    | 1 -> C      | msb bits   |
//! | 1            | low-bit feature layer   | conv3x3    | 1 -> C      | lsb bits   |
//! | 2 + 2b       | block `b` pointwise     | pointwise  | C -> C      | index bits |
//! | 3 + 2b       | block `b` depthwise     | depthwise  | C -> C      | index bits |
//! | 2 + 2n       | final pointwise         | pointwise  | C -> r*r    | index bits |
//!
//! Inside a layer, tables are ordered by output channel, then input channel,
//! then kernel position (`position = ky * 3 + kx`). Depthwise layers have one
//! input per output channel, so they are ordered by channel then position.

use alloc::vec::Vec;

use crate::tensor::{BitSplit, ShiftTable};
use crate::{Error, Result};

/// Largest number of shift blocks; keeps the layer count within the 32-bit
/// residual mask.
pub const MAX_BLOCKS: u8 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    S,
    M,
    L,
    Custom,
}

impl Variant {
    /// Number of shift blocks a named variant carries.
    pub fn block_count(self) -> Option<u8> {
        match self {
            Variant::S => Some(0),
            Variant::M => Some(1),
            Variant::L => Some(7),
            Variant::Custom => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Variant::S => 0,
            Variant::M => 1,
            Variant::L => 2,
            Variant::Custom => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::S),
            1 => Some(Variant::M),
            2 => Some(Variant::L),
            3 => Some(Variant::Custom),
            _ => None,
        }
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Variant::S),
            "M" | "m" => Ok(Variant::M),
            "L" | "l" => Ok(Variant::L),
            "custom" | "Custom" => Ok(Variant::Custom),
            _ => Err(Error::InvalidDescriptor("unknown variant")),
        }
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match self {
            Variant::S => "S",
            Variant::M => "M",
            Variant::L => "L",
            Variant::Custom => "custom",
        };
        f.write_str(name)
    }
}

/// How a layer combines its tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerRole {
    /// 3x3 kernel over every input channel.
    Conv3x3,
    /// 3x3 kernel, one input channel per output channel.
    Depthwise,
    /// 1x1 kernel over every input channel.
    Pointwise,
}

impl LayerRole {
    pub fn code(self) -> u8 {
        match self {
            LayerRole::Conv3x3 => 0,
            LayerRole::Depthwise => 1,
            LayerRole::Pointwise => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LayerRole::Conv3x3),
            1 => Some(LayerRole::Depthwise),
            2 => Some(LayerRole::Pointwise),
            _ => None,
        }
    }

    pub fn positions(self) -> usize {
        match self {
            LayerRole::Conv3x3 | LayerRole::Depthwise => 9,
            LayerRole::Pointwise => 1,
        }
    }
}

/// Identity of one table (or one unit function) within a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TableSlot {
    pub role: LayerRole,
    pub position: u8,
    pub in_channel: u16,
    pub out_channel: u16,
    pub in_bits: u8,
}

/// Shape and behaviour of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub role: LayerRole,
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_bits: u8,
    /// Add the layer's (quantized) input to its output.
    pub residual: bool,
    /// Apply the rectifier to the output.
    pub rectify: bool,
    /// Offset of the layer's first table in the flat table list.
    pub table_offset: usize,
}

impl LayerSpec {
    /// Number of input channels each output channel reads.
    pub fn fan_in_channels(&self) -> usize {
        match self.role {
            LayerRole::Depthwise => 1,
            _ => self.in_channels,
        }
    }

    pub fn table_count(&self) -> usize {
        self.out_channels * self.fan_in_channels() * self.role.positions()
    }

    /// Number of lookups averaged into one output value.
    pub fn fan_in(&self) -> usize {
        self.fan_in_channels() * self.role.positions()
    }

    /// Local index of the table for `(out, in, position)`; `in` is ignored for depthwise layers.
    #[inline]
    pub fn table_index(&self, out_channel: usize, in_channel: usize, position: usize) -> usize {
        let ci = match self.role {
            LayerRole::Depthwise => 0,
            _ => in_channel,
        };
        (out_channel * self.fan_in_channels() + ci) * self.role.positions() + position
    }

    /// Slots of this layer's tables in canonical order.
    pub fn slots(&self) -> impl Iterator<Item = TableSlot> + '_ {
        let positions = self.role.positions();
        let fan = self.fan_in_channels();
        (0..self.out_channels).flat_map(move |co| {
            (0..fan).flat_map(move |k| {
                let ci = if self.role == LayerRole::Depthwise { co } else { k };
                (0..positions).map(move |p| TableSlot {
                    role: self.role,
                    position: p as u8,
                    in_channel: ci as u16,
                    out_channel: co as u16,
                    in_bits: self.in_bits,
                })
            })
        })
    }
}

/// Everything needed to lay out and run a model except the tables themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDescriptor {
    pub variant: Variant,
    pub n_blocks: u8,
    pub channels: u16,
    pub scale: u8,
    pub bit_split: BitSplit,
    /// Index width of every intermediate activation.
    pub index_bits: u8,
    /// Bit `i` enables the residual connection of layer `i`.
    pub residual_flags: u32,
    pub shift_tables: Vec<ShiftTable>,
}

impl ModelDescriptor {
    /// Named variant with zero shifts and default residual flags.
    pub fn new(variant: Variant, channels: u16, scale: u8) -> Result<Self> {
        let n_blocks = variant
            .block_count()
            .ok_or(Error::InvalidDescriptor("custom variant needs an explicit block count"))?;
        Self::custom(variant, n_blocks, channels, scale)
    }

    /// Descriptor with an explicit block count, zero shifts and default residual flags.
    pub fn custom(variant: Variant, n_blocks: u8, channels: u16, scale: u8) -> Result<Self> {
        let desc = Self {
            variant,
            n_blocks,
            channels,
            scale,
            bit_split: BitSplit::default(),
            index_bits: 6,
            residual_flags: default_residual_flags(n_blocks),
            shift_tables: (0..n_blocks).map(|_| ShiftTable::zeros(channels as usize)).collect(),
        };
        desc.validate()?;
        Ok(desc)
    }

    /// Default configuration of a named variant: 16 channels, x4 upscaling.
    pub fn preset(variant: Variant) -> Result<Self> {
        Self::new(variant, 16, 4)
    }

    pub fn layer_count(&self) -> usize {
        3 + 2 * self.n_blocks as usize
    }

    pub fn output_channels(&self) -> usize {
        self.scale as usize * self.scale as usize
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.variant.block_count() {
            if n != self.n_blocks {
                return Err(Error::InvalidDescriptor("block count does not match the variant"));
            }
        }
        if self.n_blocks > MAX_BLOCKS {
            return Err(Error::InvalidDescriptor("too many shift blocks"));
        }
        if self.channels == 0 {
            return Err(Error::InvalidDescriptor("channel count must be positive"));
        }
        if self.scale == 0 || self.scale > 16 {
            return Err(Error::InvalidDescriptor("scale must be in 1..=16"));
        }
        BitSplit::new(self.bit_split.msb_bits(), self.bit_split.lsb_bits())?;
        if !(1..=8).contains(&self.index_bits) {
            return Err(Error::InvalidDescriptor("index bits must be in 1..=8"));
        }
        if self.shift_tables.len() != self.n_blocks as usize {
            return Err(Error::InvalidDescriptor("one shift table per block is required"));
        }
        for t in &self.shift_tables {
            if t.len() != self.channels as usize {
                return Err(Error::InvalidDescriptor(
                    "shift table length must equal the channel count",
                ));
            }
            ShiftTable::new(t.offsets().to_vec())?;
        }
        let layers = self.layer_count();
        if layers < 32 && self.residual_flags >> layers != 0 {
            return Err(Error::InvalidDescriptor("residual flag set beyond the last layer"));
        }
        for (i, spec) in self.raw_layers().enumerate() {
            if self.residual_flags & (1 << i) != 0 && spec.in_channels != spec.out_channels {
                return Err(Error::InvalidDescriptor(
                    "residual connection on a layer whose channel counts differ",
                ));
            }
        }
        Ok(())
    }

    fn raw_layers(&self) -> impl Iterator<Item = LayerSpec> + '_ {
        let c = self.channels as usize;
        let n = self.n_blocks as usize;
        let mut offset = 0;
        (0..self.layer_count()).map(move |i| {
            let (role, in_channels, out_channels, in_bits) = match i {
                0 => (LayerRole::Conv3x3, 1, c, self.bit_split.msb_bits()),
                1 => (LayerRole::Conv3x3, 1, c, self.bit_split.lsb_bits()),
                i if i == 2 + 2 * n => (LayerRole::Pointwise, c, self.output_channels(), self.index_bits),
                i if i % 2 == 0 => (LayerRole::Pointwise, c, c, self.index_bits),
                _ => (LayerRole::Depthwise, c, c, self.index_bits),
            };
            let spec = LayerSpec {
                role,
                in_channels,
                out_channels,
                in_bits,
                residual: self.residual_flags & (1 << i) != 0,
                rectify: i != 2 + 2 * n,
                table_offset: offset,
            };
            offset += spec.table_count();
            spec
        })
    }

    /// All layers in execution order.
    pub fn layers(&self) -> Vec<LayerSpec> {
        self.raw_layers().collect()
    }

    pub fn table_count(&self) -> usize {
        self.raw_layers().map(|l| l.table_count()).sum()
    }

    /// Slots of every table in canonical order.
    pub fn slots(&self) -> Vec<TableSlot> {
        let layers = self.layers();
        layers.iter().flat_map(|l| l.slots()).collect()
    }
}

/// Residual on every shift-block layer, off for the feature-extraction and
/// final layers.
pub fn default_residual_flags(n_blocks: u8) -> u32 {
    let mut flags = 0u32;
    for b in 0..n_blocks as u32 {
        flags |= 0b11 << (2 + 2 * b);
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_block_counts() {
        assert_eq!(ModelDescriptor::preset(Variant::S).unwrap().n_blocks, 0);
        assert_eq!(ModelDescriptor::preset(Variant::M).unwrap().n_blocks, 1);
        assert_eq!(ModelDescriptor::preset(Variant::L).unwrap().n_blocks, 7);
        let mut d = ModelDescriptor::preset(Variant::M).unwrap();
        d.variant = Variant::L;
        assert!(d.validate().is_err());
    }

    #[test]
    fn table_counts_closed_form() {
        for (variant, n) in [(Variant::S, 0usize), (Variant::M, 1), (Variant::L, 7)] {
            for (c, r) in [(1usize, 1usize), (4, 2), (16, 4)] {
                let d = ModelDescriptor::new(variant, c as u16, r as u8).unwrap();
                let expected = 9 * c + 9 * c + n * (c * c + 9 * c) + c * r * r;
                assert_eq!(d.table_count(), expected);
                assert_eq!(d.slots().len(), expected);
            }
        }
    }

    #[test]
    fn layer_layout() {
        let d = ModelDescriptor::new(Variant::M, 3, 2).unwrap();
        let layers = d.layers();
        assert_eq!(layers.len(), 5);
        assert_eq!(layers[0].in_bits, 6);
        assert_eq!(layers[1].in_bits, 2);
        assert_eq!(layers[2].role, LayerRole::Pointwise);
        assert_eq!(layers[3].role, LayerRole::Depthwise);
        assert_eq!(layers[4].out_channels, 4);
        assert!(layers[2].residual && layers[3].residual);
        assert!(!layers[0].residual && !layers[4].residual);
        assert!(!layers[4].rectify && layers[3].rectify);
        assert_eq!(layers[1].table_offset, 27);
        assert_eq!(layers[2].table_offset, 54);
    }

    #[test]
    fn slot_order_matches_table_index() {
        let d = ModelDescriptor::new(Variant::M, 3, 2).unwrap();
        for l in d.layers() {
            for (k, s) in l.slots().enumerate() {
                let idx = l.table_index(s.out_channel as usize, s.in_channel as usize, s.position as usize);
                assert_eq!(idx, k);
            }
        }
    }

    #[test]
    fn residual_needs_matching_channels() {
        let mut d = ModelDescriptor::new(Variant::S, 4, 4).unwrap();
        d.residual_flags = 1 << 2;
        assert!(d.validate().is_err());
        let mut d = ModelDescriptor::new(Variant::S, 4, 2).unwrap();
        d.residual_flags = 1 << 2;
        assert!(d.validate().is_ok());
        d.residual_flags = 1 << 3;
        assert!(d.validate().is_err());
    }
}
