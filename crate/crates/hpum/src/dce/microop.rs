//! Hardware-level microops executed by digital pipelines.

/// One step retired by one array in one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicroopKind {
    Nor,
    CopyRow,
    WriteRow,
    ReadRow,
    ShiftStep,
    Nop,
}

/// A microop addressed to one array of a pipeline. Columns are vector
/// register indices; `row_mask` selects which of the 64 rows participate.
///
/// `src1_array_delta` models the inter-array buffer: a NOR may take its first
/// operand from the carry latch of a neighboring array (RACER-style), and a
/// COPY_ROW may pull a column from an adjacent array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Microop {
    pub kind: MicroopKind,
    pub array: u8,
    pub src1: u8,
    pub src2: u8,
    pub dst: u8,
    pub row_mask: u64,
    pub src1_array_delta: i8,
    /// Immediate row pattern for WRITE_ROW.
    pub imm: u64,
}

impl Microop {
    pub fn nor(array: usize, src1: usize, src2: usize, dst: usize, row_mask: u64) -> Self {
        Self {
            kind: MicroopKind::Nor,
            array: array as u8,
            src1: src1 as u8,
            src2: src2 as u8,
            dst: dst as u8,
            row_mask,
            src1_array_delta: 0,
            imm: 0,
        }
    }

    pub fn nor_from(
        array: usize,
        src1: usize,
        delta: i8,
        src2: usize,
        dst: usize,
        row_mask: u64,
    ) -> Self {
        Self {
            src1_array_delta: delta,
            ..Self::nor(array, src1, src2, dst, row_mask)
        }
    }

    pub fn copy_row(array: usize, src: usize, delta: i8, dst: usize, row_mask: u64) -> Self {
        Self {
            kind: MicroopKind::CopyRow,
            array: array as u8,
            src1: src as u8,
            src2: 0,
            dst: dst as u8,
            row_mask,
            src1_array_delta: delta,
            imm: 0,
        }
    }

    pub fn write_row(array: usize, dst: usize, imm: u64, row_mask: u64) -> Self {
        Self {
            kind: MicroopKind::WriteRow,
            array: array as u8,
            src1: 0,
            src2: 0,
            dst: dst as u8,
            row_mask,
            src1_array_delta: 0,
            imm,
        }
    }

    pub fn read_row(array: usize, src: usize, row_mask: u64) -> Self {
        Self {
            kind: MicroopKind::ReadRow,
            array: array as u8,
            src1: src as u8,
            src2: 0,
            dst: 0,
            row_mask,
            src1_array_delta: 0,
            imm: 0,
        }
    }

    /// One hop of a cross-array shift: array `array` latches column `col`
    /// from array `array + delta` (out-of-range sources read as zero).
    /// A shift toward higher array indices therefore uses `delta = -1`.
    pub fn shift_step(array: usize, col: usize, delta: i8, row_mask: u64) -> Self {
        Self {
            kind: MicroopKind::ShiftStep,
            array: array as u8,
            src1: col as u8,
            src2: 0,
            dst: col as u8,
            row_mask,
            src1_array_delta: delta,
            imm: 0,
        }
    }
}
