// SPDX-License-Identifier: Apache-2.0
//! Conversion between horizontal values and the vertical (bit-per-row) layout.
//!
//! Bit `i` of value `j` lives at data row `base_row + i`, column `j`; the
//! least significant bit takes the lowest row.

use crate::codegen::RowRef;
use crate::error::{Error, Result};
use crate::subarray::SubarrayState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizontalBlock {
    pub values: Vec<u64>,
    pub width: usize,
}

impl HorizontalBlock {
    pub fn new(values: Vec<u64>, width: usize) -> Result<Self> {
        check_width(width)?;
        if let Some(&v) = values.iter().find(|&&v| width < 64 && v >> width != 0) {
            return Err(Error::Unsupported(format!(
                "value {v} does not fit in {width} bits"
            )));
        }
        Ok(Self { values, width })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerticalBlock {
    pub base_row: usize,
    pub width: usize,
    pub column_count: usize,
}

fn check_width(width: usize) -> Result<()> {
    if (1..=64).contains(&width) {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "bit width {width} is outside 1..=64"
        )))
    }
}

fn check_region(state: &SubarrayState, base_row: usize, width: usize, count: usize) -> Result<()> {
    check_width(width)?;
    let cfg = state.config();
    if count > cfg.columns {
        return Err(Error::Capacity(format!(
            "{count} values exceed {} columns",
            cfg.columns
        )));
    }
    if base_row + width > cfg.data_row_count {
        return Err(Error::Capacity(format!(
            "rows {base_row}..{} exceed the {}-row data region",
            base_row + width,
            cfg.data_row_count
        )));
    }
    Ok(())
}

/// Write `block` vertically at `base_row`. Only columns `0..values.len()` of
/// the addressed rows change.
pub fn to_vertical(
    block: &HorizontalBlock,
    state: &mut SubarrayState,
    base_row: usize,
) -> Result<VerticalBlock> {
    let count = block.values.len();
    check_region(state, base_row, block.width, count)?;
    if let Some(&v) = block
        .values
        .iter()
        .find(|&&v| block.width < 64 && v >> block.width != 0)
    {
        return Err(Error::Unsupported(format!(
            "value {v} does not fit in {} bits",
            block.width
        )));
    }
    let full_words = count / 64;
    for bit in 0..block.width {
        let row = RowRef::Data(base_row + bit);
        let mut words = state.row_words(row)?;
        for (w, word) in words.iter_mut().enumerate().take(count.div_ceil(64)) {
            let lanes = &block.values[w * 64..count.min(w * 64 + 64)];
            let mut packed = 0u64;
            for (k, &v) in lanes.iter().enumerate() {
                packed |= (v >> bit & 1) << k;
            }
            let keep = if w < full_words {
                0
            } else {
                !0u64 << lanes.len()
            };
            *word = (*word & keep) | packed;
        }
        state.write_row_words(row, &words)?;
    }
    Ok(VerticalBlock {
        base_row,
        width: block.width,
        column_count: count,
    })
}

/// Read `count` values of `width` bits stored vertically at `base_row`.
pub fn to_horizontal(
    state: &SubarrayState,
    base_row: usize,
    width: usize,
    count: usize,
) -> Result<HorizontalBlock> {
    check_region(state, base_row, width, count)?;
    let mut values = vec![0u64; count];
    for bit in 0..width {
        let words = state.row_words(RowRef::Data(base_row + bit))?;
        for (j, v) in values.iter_mut().enumerate() {
            *v |= (words[j / 64] >> (j % 64) & 1) << bit;
        }
    }
    Ok(HorizontalBlock { values, width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::SubarrayConfig;

    fn state() -> SubarrayState {
        SubarrayState::new(&SubarrayConfig::with_rows(80, 64).unwrap()).unwrap()
    }

    #[test]
    fn five_lsb_first() {
        let mut s = state();
        to_vertical(&HorizontalBlock::new(vec![5], 4).unwrap(), &mut s, 0).unwrap();
        let col: Vec<bool> = (0..4).map(|r| s.bit(RowRef::Data(r), 0).unwrap()).collect();
        assert_eq!(col, [true, false, true, false]);
        assert_eq!(to_horizontal(&s, 0, 4, 1).unwrap().values, [5]);
    }

    #[test]
    fn zero_and_fifteen() {
        let mut s = state();
        to_vertical(&HorizontalBlock::new(vec![0, 15], 4).unwrap(), &mut s, 2).unwrap();
        for r in 2..6 {
            assert!(!s.bit(RowRef::Data(r), 0).unwrap());
            assert!(s.bit(RowRef::Data(r), 1).unwrap());
        }
    }

    #[test]
    fn overflow_rejected() {
        let mut s = state();
        let many = HorizontalBlock::new(vec![1; 70], 4).unwrap();
        assert!(matches!(
            to_vertical(&many, &mut s, 0),
            Err(Error::Capacity(_))
        ));
        let tall = HorizontalBlock::new(vec![1], 64).unwrap();
        assert!(matches!(
            to_vertical(&tall, &mut s, 20),
            Err(Error::Capacity(_))
        ));
        assert!(HorizontalBlock::new(vec![16], 4).is_err());
        assert!(HorizontalBlock::new(vec![1], 0).is_err());
    }

    #[test]
    fn full_width_values() {
        let mut s = state();
        let vals = vec![u64::MAX, 0, 1 << 63, 0x0123_4567_89ab_cdef];
        to_vertical(&HorizontalBlock::new(vals.clone(), 64).unwrap(), &mut s, 0).unwrap();
        assert_eq!(to_horizontal(&s, 0, 64, 4).unwrap().values, vals);
    }
}
