//! Bit-slicing plans and the bit-striped register layout.
//!
//! An N-bit matrix element is split into `ceil(N/M)` M-bit slices stored in
//! separate analog arrays; slice 0 holds the least significant bits. Partial
//! products are recombined by shift-and-add. Digital pipelines instead stripe
//! each value across arrays, one bit position per array.

use crate::error::{Result, SimError};

/// How an N-bit element is split into M-bit device slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlicePlan {
    pub element_bits: u8,
    pub bits_per_cell: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceOrdering {
    LsbFirst,
}

impl SlicePlan {
    pub fn new(element_bits: u8, bits_per_cell: u8) -> Self {
        assert!(element_bits >= 1 && element_bits <= 64);
        assert!((1..=8).contains(&bits_per_cell));
        Self {
            element_bits,
            bits_per_cell,
        }
    }

    pub fn slice_count(&self) -> usize {
        self.element_bits.div_ceil(self.bits_per_cell) as usize
    }

    pub fn ordering(&self) -> SliceOrdering {
        SliceOrdering::LsbFirst
    }

    fn cell_mask(&self) -> u64 {
        (1u64 << self.bits_per_cell) - 1
    }
}

/// Split a bit pattern into LSB-first slices.
pub fn slice_value(pattern: u64, plan: &SlicePlan) -> Result<Vec<u64>> {
    let width = 64 - pattern.leading_zeros() as u8;
    if width > plan.element_bits {
        return Err(SimError::PlanMismatch {
            pattern_bits: width,
            plan_bits: plan.element_bits,
        });
    }
    Ok((0..plan.slice_count())
        .map(|i| (pattern >> (i as u8 * plan.bits_per_cell)) & plan.cell_mask())
        .collect())
}

/// Shift-and-add recombination of per-slice partial products.
pub fn recombine_slices(partials: &[i64], plan: &SlicePlan) -> i128 {
    partials
        .iter()
        .enumerate()
        .map(|(i, &p)| (p as i128) << (i * plan.bits_per_cell as usize))
        .sum()
}

/// Placement of one bit-striped vector register within a digital pipeline:
/// element `e`, bit `b` lives at (array `b`, row `e`, column `register_index`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StripedLayout {
    pub width_elements: usize,
    pub depth_bits: usize,
    pub register_index: usize,
}

impl StripedLayout {
    /// (array, row, column) coordinate of bit `b` of element `e`.
    pub fn locate(&self, element: usize, bit: usize) -> (usize, usize, usize) {
        debug_assert!(element < self.width_elements);
        debug_assert!(bit < self.depth_bits);
        (bit, element, self.register_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fig2_layout() {
        // 0b1101 with 2-bit cells: array 0 holds value[1:0], array 1 value[3:2]
        let plan = SlicePlan::new(4, 2);
        assert_eq!(slice_value(0b1101, &plan).unwrap(), vec![0b01, 0b11]);
    }

    #[test]
    fn single_slice_identity() {
        let plan = SlicePlan::new(4, 4);
        assert_eq!(slice_value(0b1111, &plan).unwrap(), vec![0b1111]);
    }

    #[test]
    fn byte_slicing_all_patterns() {
        let plan = SlicePlan::new(8, 2);
        assert_eq!(
            slice_value(0xA7, &plan).unwrap(),
            vec![0b11, 0b01, 0b10, 0b10]
        );
        // reassembly oracle over every byte
        for v in 0u64..256 {
            let slices = slice_value(v, &plan).unwrap();
            let rebuilt: u64 = slices
                .iter()
                .enumerate()
                .map(|(i, s)| s << (2 * i))
                .sum();
            assert_eq!(rebuilt, v);
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let plan = SlicePlan::new(4, 2);
        assert!(matches!(
            slice_value(0x1F, &plan),
            Err(SimError::PlanMismatch { .. })
        ));
    }

    #[test]
    fn recombine_examples() {
        let plan = SlicePlan::new(4, 2);
        assert_eq!(recombine_slices(&[1, 3], &plan), 13);
        let plan = SlicePlan::new(8, 8);
        assert_eq!(recombine_slices(&[42], &plan), 42);
    }

    proptest! {
        /// Slice-wise dot products recombine to the unsliced dot product.
        #[test]
        fn sliced_dot_product_roundtrip(
            n in 1u8..=16,
            m_idx in 0usize..4,
            seed in any::<u64>(),
        ) {
            let m = [1u8, 2, 4, 8][m_idx];
            let plan = SlicePlan::new(n, m);
            let mut rng = seed;
            let mut next = || {
                rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (rng >> 32) & ((1u64 << n) - 1).max(1)
            };
            let values: Vec<u64> = (0..16).map(|_| next() & if n == 64 { u64::MAX } else { (1 << n) - 1 }).collect();
            let inputs: Vec<u64> = (0..16).map(|_| next() & 1).collect();
            let direct: i128 = values.iter().zip(&inputs).map(|(&v, &x)| (v as i128) * (x as i128)).sum();
            let mut partials = vec![0i64; plan.slice_count()];
            for (&v, &x) in values.iter().zip(&inputs) {
                for (i, s) in slice_value(v, &plan).unwrap().iter().enumerate() {
                    partials[i] += (*s as i64) * (x as i64);
                }
            }
            prop_assert_eq!(recombine_slices(&partials, &plan), direct);
        }
    }

    #[test]
    fn striped_layout_locates_bits() {
        let layout = StripedLayout {
            width_elements: 64,
            depth_bits: 8,
            register_index: 3,
        };
        assert_eq!(layout.locate(5, 7), (7, 5, 3));
    }
}
