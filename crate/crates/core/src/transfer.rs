//! Conversion of a reference model into stride-1 tables.
//!
//! Every unit function maps a single index, so enumerating its whole
//! `2^in_bits` domain captures it exactly up to the `i8` quantization rule.

use alloc::vec::Vec;

use crate::engine::{Lut1D, LutPack};
use crate::model::TableSlot;
use crate::reference::{quantize_entry, ReferenceNet, UnitFunction};
use crate::Result;

/// Enumerate `f` over the slot's index domain: `entry[i] = clamp(round(f(i)), -128, 127)`.
pub fn transfer_unit(f: &UnitFunction, slot: TableSlot) -> Lut1D {
    let entries = (0..1u32 << slot.in_bits)
        .map(|i| quantize_entry(f.eval(i as f64)))
        .collect();
    Lut1D::new(slot, 1, entries).expect("stride-1 table of the full domain")
}

/// One stride-1 table per unit function, in canonical order.
pub fn transfer_model(net: &ReferenceNet) -> Result<LutPack> {
    let tables: Vec<Lut1D> = net
        .layers()
        .iter()
        .flat_map(|layer| {
            layer
                .spec
                .slots()
                .zip(&layer.units)
                .map(|(slot, f)| transfer_unit(f, slot))
        })
        .collect();
    LutPack::new(net.descriptor().clone(), tables, None)
}
