//! Digital compute element: 64 bit-pipelines of NOR-capable memory arrays.
//!
//! State is held as one `u64` per (array, column): bit `r` of the word is row
//! `r` of the array, so a NOR microop over all 64 rows is a single word op.
//! Values are bit-striped (see [`crate::slicing::StripedLayout`]): bit `b` of
//! the element in row `e` lives in array `b`, row `e`, at the value register's
//! column.
//!
//! Every macro lowers to a stream of [`Microop`]s which is executed by a tiny
//! interpreter; there is no host-level arithmetic shortcut on the data path.
//! Timing follows the bit-pipelined model: arrays retire at most one microop
//! per cycle, a macro streams through `depth_in_use` arrays with a stagger of
//! `microops_per_bit`, and back-to-back macros overlap so the steady-state
//! issue gap equals `microops_per_bit`.

pub mod microop;


pub use microop::{Microop, MicroopKind};

use crate::config::{LogicFamily, MacroCosts, SimConfig};
use crate::cost::{CostReport, EnergyBreakdown};
use crate::error::{Result, SimError};

/// Columns at the top of every array reserved as macro scratch space.
pub const SCRATCH_COLS: usize = 8;

// Scratch roles, as offsets from `cols - SCRATCH_COLS`.
const T1: usize = 0;
const T2: usize = 1;
const T3: usize = 2;
const T4: usize = 3;
const T5: usize = 4;
const CARRY: usize = 5;
const CINIT: usize = 6;
const BCAST: usize = 7;

/// Parameters the DCE needs from the global config.
#[derive(Debug, Clone, Copy)]
pub struct DceParams {
    pub family: LogicFamily,
    pub macro_costs: MacroCosts,
    pub latency_multiplier: u32,
    pub element_load_cycles: u64,
    /// pJ per retired array microop.
    pub array_pj: f64,
    /// pJ per busy cycle of pipeline control.
    pub ctrl_pj: f64,
}

impl DceParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            family: cfg.logic_family,
            macro_costs: cfg.macro_costs,
            latency_multiplier: cfg.dce_latency_multiplier,
            element_load_cycles: cfg.element_load_cycles,
            array_pj: cfg.cost.digital_array_boolean_pj,
            ctrl_pj: cfg.cost.pipeline_ctrl_pj,
        }
    }
}

/// Word-line scan direction of a pipeline. Reversal is a physical drain of
/// in-flight microops; element addressing is unaffected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reversed,
}

/// Vector macros the pipeline control can expand. Binary ops read `src1`
/// and `src2`; `Not` and `Copy` ignore `src2`; `Mux` selects `src1` where
/// the selector bit (element value 0/1 in column `sel`) is 1, else `src2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacroOp {
    Not,
    Or,
    And,
    Xor,
    Add,
    Sub,
    Copy,
    /// dst = 1 if src1 >= src2 (unsigned over the depth in use).
    CmpGe,
    Mux { sel: usize },
}

impl MacroOp {
    fn microops_per_bit(&self, costs: &MacroCosts) -> u32 {
        match self {
            MacroOp::Not => costs.not,
            MacroOp::Or => costs.or,
            MacroOp::And => costs.and,
            MacroOp::Xor => costs.xor,
            MacroOp::Add => costs.add,
            MacroOp::Sub => costs.sub,
            MacroOp::Copy => costs.copy,
            MacroOp::CmpGe => costs.cmp_ge,
            MacroOp::Mux { .. } => costs.mux,
        }
    }
}

/// Timing and cost of one scheduled pipeline operation.
#[derive(Debug, Clone, Copy, Default)]
pub struct MacroExec {
    /// Cycle the operation entered array 0.
    pub issue: u64,
    /// Cycle the last microop retired.
    pub done: u64,
    /// Microops retired by this operation.
    pub microops: u64,
    pub cost: CostReport,
}

/// One bit-pipeline: `depth` arrays of `rows x cols` NOR-capable cells.
#[derive(Debug, Clone)]
pub struct DigitalPipeline {
    pub id: usize,
    pub depth: usize,
    pub cols: usize,
    pub rows: usize,
    /// grids[array][col]: bit r of the word is row r.
    grids: Vec<Vec<u64>>,
    pub direction: Direction,
    /// Cycle at which array 0 can accept the next macro.
    head_free: u64,
    /// End of the latest scheduled work (for busy-cycle accounting).
    busy_end: u64,
    pub busy_cycles: u64,
    pub retired_microops: u64,
    /// When set, every executed microop is appended here.
    pub trace: Option<Vec<Microop>>,
}

impl DigitalPipeline {
    pub fn new(id: usize, depth: usize, cols: usize, rows: usize) -> Self {
        assert!(rows <= 64 && rows >= 1);
        assert!(cols > SCRATCH_COLS);
        Self {
            id,
            depth,
            cols,
            rows,
            grids: vec![vec![0u64; cols]; depth],
            direction: Direction::Forward,
            head_free: 0,
            busy_end: 0,
            busy_cycles: 0,
            retired_microops: 0,
            trace: None,
        }
    }

    fn scratch_base(&self) -> usize {
        self.cols - SCRATCH_COLS
    }

    /// Highest column index usable as a value register.
    pub fn user_cols(&self) -> usize {
        self.scratch_base()
    }

    fn row_mask_all(&self) -> u64 {
        if self.rows == 64 {
            u64::MAX
        } else {
            (1u64 << self.rows) - 1
        }
    }

    fn check_user_col(&self, col: usize) -> Result<()> {
        if col >= self.user_cols() {
            return Err(SimError::ReservedRegister {
                pipeline: self.id,
                register: col,
            });
        }
        Ok(())
    }

    /// Read one column word of one array.
    pub fn column(&self, array: usize, col: usize) -> u64 {
        self.grids[array][col]
    }

    fn column_at(&self, array: usize, delta: i8, col: usize) -> u64 {
        let idx = array as i64 + delta as i64;
        if idx < 0 || idx as usize >= self.depth {
            0
        } else {
            self.grids[idx as usize][col]
        }
    }

    fn write_masked(&mut self, array: usize, col: usize, value: u64, mask: u64) {
        let w = &mut self.grids[array][col];
        *w = (*w & !mask) | (value & mask);
    }

    /// Execute a single microop against the grid state.
    fn apply(&mut self, op: &Microop) -> Result<()> {
        let arr = op.array as usize;
        let mask = op.row_mask & self.row_mask_all();
        match op.kind {
            MicroopKind::Nor => {
                let dst = op.dst as usize;
                if dst == op.src2 as usize || (op.src1_array_delta == 0 && dst == op.src1 as usize)
                {
                    return Err(SimError::ColumnConflict { col: dst });
                }
                let a = self.column_at(arr, op.src1_array_delta, op.src1 as usize);
                let b = self.grids[arr][op.src2 as usize];
                self.write_masked(arr, dst, !(a | b), mask);
            }
            MicroopKind::CopyRow => {
                let v = self.column_at(arr, op.src1_array_delta, op.src1 as usize);
                self.write_masked(arr, op.dst as usize, v, mask);
            }
            MicroopKind::WriteRow => {
                self.write_masked(arr, op.dst as usize, op.imm, mask);
            }
            MicroopKind::ReadRow | MicroopKind::Nop => {}
            MicroopKind::ShiftStep => {
                let v = self.column_at(arr, op.src1_array_delta, op.src1 as usize);
                self.write_masked(arr, op.dst as usize, v, mask);
            }
        }
        if let Some(t) = &mut self.trace {
            t.push(*op);
        }
        Ok(())
    }

    /// Reserve the issue slot and account busy cycles.
    ///
    /// `occupancy` is how long array 0 stays blocked (the steady-state issue
    /// gap); `latency` is time to full retirement.
    fn schedule(&mut self, at: u64, occupancy: u64, latency: u64, params: &DceParams) -> (u64, u64, f64) {
        let issue = at.max(self.head_free);
        self.head_free = issue + occupancy;
        let done = issue + latency;
        let new_busy = done.saturating_sub(issue.max(self.busy_end));
        self.busy_end = self.busy_end.max(done);
        self.busy_cycles += new_busy;
        (issue, done, params.ctrl_pj * new_busy as f64)
    }

    fn finish(
        &mut self,
        issue: u64,
        done: u64,
        ctrl_pj: f64,
        microops: u64,
        params: &DceParams,
    ) -> MacroExec {
        self.retired_microops += microops;
        let mut energy = EnergyBreakdown::default();
        energy.digital_array_pj = params.array_pj * microops as f64;
        energy.pipeline_ctrl_pj = ctrl_pj;
        MacroExec {
            issue,
            done,
            microops,
            cost: CostReport {
                cycles: done - issue,
                energy,
            },
        }
    }

    /// Expand and execute one macro over `bits` arrays at the masked rows.
    ///
    /// Latency is `microops_per_bit * latency_multiplier * bits + (bits - 1)`
    /// (stream plus pipeline fill); the issue slot frees after
    /// `microops_per_bit * latency_multiplier` cycles.
    pub fn run_macro(
        &mut self,
        params: &DceParams,
        op: MacroOp,
        dst: usize,
        src1: usize,
        src2: usize,
        bits: usize,
        row_mask: u64,
        at: u64,
    ) -> Result<MacroExec> {
        assert!(bits >= 1 && bits <= self.depth);
        self.check_user_col(dst)?;
        self.check_user_col(src1)?;
        if !matches!(op, MacroOp::Not | MacroOp::Copy) {
            self.check_user_col(src2)?;
        }
        if let MacroOp::Mux { sel } = op {
            self.check_user_col(sel)?;
        }

        let cols = self.cols;
        let mut nor_ops = 0u64;
        let mut other_ops = 0u64;
        {
            let mut sink = |u: Microop| -> Result<()> {
                match u.kind {
                    MicroopKind::Nor => nor_ops += 1,
                    _ => other_ops += 1,
                }
                self.apply(&u)
            };
            lower_macro(op, dst, src1, src2, bits, row_mask, cols, &mut sink)?;
        }

        let k = op.microops_per_bit(&params.macro_costs) as u64 * params.latency_multiplier as u64;
        let occupancy = k;
        let latency = k * bits as u64 + (bits as u64 - 1);
        // For the ideal family the executed NOR network is only a semantic
        // model; charge the family's declared microop count instead.
        let charged_nors = match params.family {
            LogicFamily::Oscar => nor_ops,
            LogicFamily::Ideal => {
                op.microops_per_bit(&params.macro_costs) as u64 * bits as u64
            }
        };
        let (issue, done, ctrl) = self.schedule(at, occupancy, latency, params);
        Ok(self.finish(issue, done, ctrl, charged_nors + other_ops, params))
    }

    /// Shift a register's bit-planes across arrays within a `bits`-wide
    /// window: `amount > 0` moves toward the MSB (multiply by 2^amount),
    /// `amount < 0` toward the LSB. One cycle per position; bits shifted out
    /// of the window are dropped, vacated planes fill with zero.
    pub fn shift(
        &mut self,
        params: &DceParams,
        col: usize,
        amount: i32,
        bits: usize,
        row_mask: u64,
        at: u64,
    ) -> Result<MacroExec> {
        self.check_user_col(col)?;
        self.shift_unchecked(params, col, amount, bits, row_mask, at)
    }

    fn shift_unchecked(
        &mut self,
        params: &DceParams,
        col: usize,
        amount: i32,
        bits: usize,
        row_mask: u64,
        at: u64,
    ) -> Result<MacroExec> {
        assert!(bits >= 1 && bits <= self.depth);
        let steps = amount.unsigned_abs() as u64;
        let delta: i8 = if amount >= 0 { -1 } else { 1 };
        let mut ops = 0u64;
        for _ in 0..steps {
            // Execute each hop in an order that never reads an overwritten
            // plane: toward MSB runs top-down, toward LSB bottom-up.
            let range: Vec<usize> = if amount >= 0 {
                (0..bits).rev().collect()
            } else {
                (0..bits).collect()
            };
            for arr in range {
                self.apply(&Microop::shift_step(arr, col, delta, row_mask))?;
                ops += 1;
            }
        }
        let latency = steps * params.latency_multiplier as u64;
        let (issue, done, ctrl) = self.schedule(at, latency, latency, params);
        Ok(self.finish(issue, done, ctrl, ops, params))
    }

    /// Reverse the pipeline's scan direction. All in-flight work drains
    /// first, then the turnaround takes `depth` cycles.
    pub fn reverse(&mut self, params: &DceParams, at: u64) -> MacroExec {
        let start = at.max(self.busy_end).max(self.head_free);
        let latency = self.depth as u64;
        self.head_free = start + latency;
        let done = start + latency;
        let new_busy = done - start.max(self.busy_end);
        self.busy_end = done;
        self.busy_cycles += new_busy;
        self.direction = match self.direction {
            Direction::Forward => Direction::Reversed,
            Direction::Reversed => Direction::Forward,
        };
        let mut energy = EnergyBreakdown::default();
        energy.pipeline_ctrl_pj = params.ctrl_pj * new_busy as f64;
        MacroExec {
            issue: start,
            done,
            microops: 0,
            cost: CostReport {
                cycles: latency,
                energy,
            },
        }
    }

    /// Rotate-left of the low `width` bits of `col` by `k` positions.
    ///
    /// Composite ceremony: copy to scratch, shift the two halves in opposite
    /// scan directions (each shift preceded by a pipeline reversal), then OR.
    pub fn rotl(
        &mut self,
        params: &DceParams,
        col: usize,
        width: usize,
        k: usize,
        row_mask: u64,
        at: u64,
    ) -> Result<MacroExec> {
        assert!(width <= self.depth && k < width);
        self.check_user_col(col)?;
        let spare = self.scratch_base() + BCAST;
        // scratch copy (bypasses the user-column check on purpose)
        let mut total = MacroExec::default();
        let run = |e: MacroExec, total: &mut MacroExec| {
            if total.done == 0 && total.issue == 0 && total.microops == 0 {
                *total = e;
            } else {
                total.done = e.done;
                total.microops += e.microops;
                total.cost.cycles = total.done - total.issue;
                total.cost.energy.add(&e.cost.energy);
            }
        };
        // copy col -> spare
        let cols = self.cols;
        let mut nor_ops = 0u64;
        {
            let mut sink = |u: Microop| -> Result<()> {
                nor_ops += 1;
                self.apply(&u)
            };
            lower_macro(MacroOp::Copy, spare, col, col, width, row_mask, cols, &mut sink)?;
        }
        let kcopy = params.macro_costs.copy as u64 * params.latency_multiplier as u64;
        let (i0, d0, c0) = self.schedule(at, kcopy, kcopy * width as u64 + width as u64 - 1, params);
        let e = self.finish(i0, d0, c0, nor_ops, params);
        run(e, &mut total);

        let e = self.shift(params, col, k as i32, width, row_mask, total.done)?;
        run(e, &mut total);
        let e = self.reverse(params, total.done);
        run(e, &mut total);
        let e =
            self.shift_unchecked(params, spare, -((width - k) as i32), width, row_mask, total.done)?;
        run(e, &mut total);
        let e = self.reverse(params, total.done);
        run(e, &mut total);
        // col |= spare
        let mut nor_ops = 0u64;
        {
            let mut sink = |u: Microop| -> Result<()> {
                nor_ops += 1;
                self.apply(&u)
            };
            lower_macro(MacroOp::Or, col, col, spare, width, row_mask, cols, &mut sink)?;
        }
        let kor = params.macro_costs.or as u64 * params.latency_multiplier as u64;
        let (i1, d1, c1) =
            self.schedule(total.done, kor, kor * width as u64 + width as u64 - 1, params);
        let e = self.finish(i1, d1, c1, nor_ops, params);
        run(e, &mut total);
        Ok(total)
    }

    /// Host-side staging write of a whole striped register (used when data
    /// arrives over the transfer network; the network charges the cost).
    pub fn stage_register(&mut self, col: usize, values: &[u64], bits: usize) -> Result<()> {
        self.check_user_col(col)?;
        if values.len() > self.rows {
            return Err(SimError::Shape {
                got: values.len(),
                want: self.rows,
            });
        }
        for b in 0..bits.min(self.depth) {
            let mut plane = 0u64;
            for (row, &v) in values.iter().enumerate() {
                plane |= ((v >> b) & 1) << row;
            }
            self.grids[b][col] = plane;
        }
        for b in bits..self.depth {
            self.grids[b][col] = 0;
        }
        Ok(())
    }

    /// Write one element's bits (host staging; no cost).
    pub fn stage_element(&mut self, col: usize, row: usize, value: u64, bits: usize) -> Result<()> {
        self.check_user_col(col)?;
        if row >= self.rows {
            return Err(SimError::Index(row));
        }
        for b in 0..bits.min(self.depth) {
            let bit = (value >> b) & 1;
            let w = &mut self.grids[b][col];
            *w = (*w & !(1 << row)) | (bit << row);
        }
        Ok(())
    }

    /// Read an element value back out of the striped layout.
    pub fn read_element(&self, col: usize, row: usize, bits: usize) -> u64 {
        let mut v = 0u64;
        for b in 0..bits.min(self.depth) {
            v |= ((self.grids[b][col] >> row) & 1) << b;
        }
        v
    }

    /// Read a whole register as per-row element values.
    pub fn read_register(&self, col: usize, bits: usize) -> Vec<u64> {
        (0..self.rows).map(|r| self.read_element(col, r, bits)).collect()
    }

    /// Load per-row immediates through row-buffer writes (one microop and one
    /// cycle per bit-plane).
    pub fn load_immediate(
        &mut self,
        params: &DceParams,
        col: usize,
        values: &[u64],
        bits: usize,
        at: u64,
    ) -> Result<MacroExec> {
        self.check_user_col(col)?;
        let mut ops = 0u64;
        for b in 0..bits {
            let mut plane = 0u64;
            for (row, &v) in values.iter().enumerate() {
                plane |= ((v >> b) & 1) << row;
            }
            self.apply(&Microop::write_row(b, col, plane, self.row_mask_all()))?;
            ops += 1;
        }
        let latency = bits as u64 * params.latency_multiplier as u64;
        let (issue, done, ctrl) = self.schedule(at, latency, latency, params);
        Ok(self.finish(issue, done, ctrl, ops, params))
    }
}

/// Expand one macro into its microop stream over arrays `0..bits`.
///
/// The stream is fed to `sink` in dependency order; executing it in order
/// reproduces the macro's semantics exactly. With the NOR family this is the
/// physical OSCAR-style network (9-NOR full adder and friends).
pub fn lower_macro(
    op: MacroOp,
    dst: usize,
    src1: usize,
    src2: usize,
    bits: usize,
    m: u64,
    cols: usize,
    sink: &mut dyn FnMut(Microop) -> Result<()>,
) -> Result<()> {
    let s = cols - SCRATCH_COLS;
    let (t1, t2, t3, t4, t5) = (s + T1, s + T2, s + T3, s + T4, s + T5);
    let (carry, cinit, bcast) = (s + CARRY, s + CINIT, s + BCAST);
    let (x, y) = (src1, src2);
    match op {
        MacroOp::Not => {
            for arr in 0..bits {
                sink(Microop::nor(arr, x, x, dst, m))?;
            }
        }
        MacroOp::Or => {
            for arr in 0..bits {
                sink(Microop::nor(arr, x, y, t1, m))?;
                sink(Microop::nor(arr, t1, t1, dst, m))?;
            }
        }
        MacroOp::And => {
            for arr in 0..bits {
                sink(Microop::nor(arr, x, x, t1, m))?;
                sink(Microop::nor(arr, y, y, t2, m))?;
                sink(Microop::nor(arr, t1, t2, dst, m))?;
            }
        }
        MacroOp::Xor => {
            for arr in 0..bits {
                xor_network(arr, x, y, dst, m, t1, t2, t3, t4, sink)?;
            }
        }
        MacroOp::Copy => {
            for arr in 0..bits {
                sink(Microop::nor(arr, x, x, t1, m))?;
                sink(Microop::nor(arr, t1, t1, dst, m))?;
            }
        }
        MacroOp::Add => {
            sink(Microop::write_row(0, cinit, 0, m))?;
            for arr in 0..bits {
                adder_bit(arr, x, y, dst, m, t1, t2, t3, t4, carry, cinit, true, sink)?;
            }
        }
        MacroOp::Sub => {
            // x - y = x + !y + 1
            sink(Microop::write_row(0, cinit, u64::MAX, m))?;
            for arr in 0..bits {
                sink(Microop::nor(arr, y, y, t5, m))?;
                adder_bit(arr, x, t5, dst, m, t1, t2, t3, t4, carry, cinit, true, sink)?;
            }
        }
        MacroOp::CmpGe => {
            // Borrow chain of x - y; the final carry-out is 1 iff x >= y.
            sink(Microop::write_row(0, cinit, u64::MAX, m))?;
            for arr in 0..bits {
                sink(Microop::nor(arr, y, y, t5, m))?;
                adder_bit(arr, x, t5, dst, m, t1, t2, t3, t4, carry, cinit, false, sink)?;
            }
            // Walk the top carry down to array 0, then form a clean 0/1 value.
            for arr in (0..bits - 1).rev() {
                sink(Microop::copy_row(arr, carry, 1, carry, m))?;
            }
            sink(Microop::nor(0, carry, carry, t1, m))?;
            sink(Microop::nor(0, t1, t1, dst, m))?;
            for arr in 1..bits {
                sink(Microop::write_row(arr, dst, 0, m))?;
            }
        }
        MacroOp::Mux { sel } => {
            // Broadcast the selector bit (array 0) up the pipeline...
            sink(Microop::nor(0, sel, sel, t1, m))?;
            sink(Microop::nor(0, t1, t1, bcast, m))?;
            for arr in 1..bits {
                sink(Microop::copy_row(arr, bcast, -1, bcast, m))?;
            }
            // ...then per bit: dst = (x & sel) | (y & !sel).
            for arr in 0..bits {
                sink(Microop::nor(arr, bcast, bcast, t1, m))?; // !sel
                sink(Microop::nor(arr, x, x, t2, m))?; // !x
                sink(Microop::nor(arr, t2, t1, t3, m))?; // x & sel
                sink(Microop::nor(arr, y, y, t2, m))?; // !y
                sink(Microop::nor(arr, t2, bcast, t4, m))?; // y & !sel
                sink(Microop::nor(arr, t3, t4, t1, m))?;
                sink(Microop::nor(arr, t1, t1, dst, m))?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn xor_network(
    arr: usize,
    x: usize,
    y: usize,
    dst: usize,
    m: u64,
    t1: usize,
    t2: usize,
    t3: usize,
    t4: usize,
    sink: &mut dyn FnMut(Microop) -> Result<()>,
) -> Result<()> {
    sink(Microop::nor(arr, x, y, t1, m))?;
    sink(Microop::nor(arr, x, t1, t2, m))?;
    sink(Microop::nor(arr, y, t1, t3, m))?;
    sink(Microop::nor(arr, t2, t3, t4, m))?; // XNOR
    sink(Microop::nor(arr, t4, t4, dst, m))?;
    Ok(())
}

/// One bit position of the 9-NOR ripple adder. The carry-in is read from the
/// previous array's carry latch (`src1_array_delta = -1`); array 0 reads the
/// preloaded `cinit` column instead. When `emit_sum` is false only the carry
/// chain is produced (used by CMP_GE).
#[allow(clippy::too_many_arguments)]
fn adder_bit(
    arr: usize,
    x: usize,
    y: usize,
    dst: usize,
    m: u64,
    t1: usize,
    t2: usize,
    t3: usize,
    t4: usize,
    carry: usize,
    cinit: usize,
    emit_sum: bool,
    sink: &mut dyn FnMut(Microop) -> Result<()>,
) -> Result<()> {
    let cin = |src2: usize, d: usize| -> Microop {
        if arr == 0 {
            Microop::nor(0, cinit, src2, d, m)
        } else {
            Microop::nor_from(arr, carry, -1, src2, d, m)
        }
    };
    sink(Microop::nor(arr, x, y, t1, m))?; // n1 = NOR(x, y)
    sink(Microop::nor(arr, x, t1, t2, m))?; // n2
    sink(Microop::nor(arr, y, t1, t3, m))?; // n3
    sink(Microop::nor(arr, t2, t3, t4, m))?; // n4 = XNOR(x, y)
    sink(cin(t4, t2))?; // n5 = NOR(n4, cin)
    sink(Microop::nor(arr, t1, t2, carry, m))?; // carry-out = NOR(n1, n5)
    if emit_sum {
        sink(Microop::nor(arr, t4, t2, t3, m))?; // n6 = NOR(n4, n5)
        sink(cin(t2, t1))?; // n7 = NOR(cin, n5)
        sink(Microop::nor(arr, t3, t1, dst, m))?; // sum = NOR(n6, n7)
    }
    Ok(())
}

/// The digital half of an HCT: a bank of pipelines plus gather/scatter
/// between them.
#[derive(Debug, Clone)]
pub struct Dce {
    pub pipelines: Vec<DigitalPipeline>,
    pub params: DceParams,
}

impl Dce {
    pub fn new(cfg: &SimConfig) -> Self {
        let g = cfg.geometry;
        let pipelines = (0..g.dce_pipelines)
            .map(|i| DigitalPipeline::new(i, g.pipeline_depth, g.array_cols, g.array_rows))
            .collect();
        Self {
            pipelines,
            params: DceParams::from_config(cfg),
        }
    }

    pub fn pipeline(&self, i: usize) -> &DigitalPipeline {
        &self.pipelines[i]
    }

    pub fn pipeline_mut(&mut self, i: usize) -> &mut DigitalPipeline {
        &mut self.pipelines[i]
    }

    /// Content-dependent gather: for every masked row `e` of `pipe`, read the
    /// address in `addr_col`, fetch entry `a` of the table that starts at
    /// `table_base` in pipeline `src_pipe` (entry `a` lives at row `a % rows`,
    /// column `table_base + a / rows`), and deposit it in `dst_col` row `e`.
    ///
    /// Costs `element_load_cycles` per gathered element, serialized on the
    /// single row buffer shared by the source arrays.
    #[allow(clippy::too_many_arguments)]
    pub fn element_load(
        &mut self,
        pipe: usize,
        addr_col: usize,
        dst_col: usize,
        src_pipe: usize,
        table_base: usize,
        table_len: u64,
        addr_bits: usize,
        value_bits: usize,
        row_mask: u64,
        at: u64,
    ) -> Result<MacroExec> {
        let rows = self.pipelines[pipe].rows as u64;
        self.pipelines[pipe].check_user_col(addr_col)?;
        self.pipelines[pipe].check_user_col(dst_col)?;

        // Phase 1: read addresses and gather table values (immutable).
        let mut fetched: Vec<(usize, u64)> = Vec::new();
        for row in 0..self.pipelines[pipe].rows {
            if (row_mask >> row) & 1 == 0 {
                continue;
            }
            let addr = self.pipelines[pipe].read_element(addr_col, row, addr_bits);
            if addr >= table_len {
                return Err(SimError::AddressRange {
                    addr,
                    limit: table_len,
                });
            }
            let src_row = (addr % rows) as usize;
            let src_col = table_base + (addr / rows) as usize;
            if src_col >= self.pipelines[src_pipe].user_cols() {
                return Err(SimError::Index(src_col));
            }
            let v = self.pipelines[src_pipe].read_element(src_col, src_row, value_bits);
            fetched.push((row, v));
        }
        let count = fetched.len() as u64;

        // Phase 2: deposit (mutable) and charge row-buffer microops.
        let ops = count * self.params.element_load_cycles;
        let p = &mut self.pipelines[pipe];
        for (row, v) in fetched {
            for b in 0..value_bits {
                p.apply(&Microop::write_row(b, dst_col, ((v >> b) & 1) << row, 1 << row))?;
            }
        }
        let latency = count * self.params.element_load_cycles;
        let params = self.params;
        let (issue, done, ctrl) = p.schedule(at, latency, latency, &params);
        Ok(p.finish(issue, done, ctrl, ops, &params))
    }

    /// Content-dependent scatter: the inverse of [`Dce::element_load`]. Each
    /// masked row's value in `src_col` is written to table entry `addr` of
    /// the destination pipeline. Same cost model as the gather.
    #[allow(clippy::too_many_arguments)]
    pub fn element_store(
        &mut self,
        pipe: usize,
        addr_col: usize,
        src_col: usize,
        dst_pipe: usize,
        table_base: usize,
        table_len: u64,
        addr_bits: usize,
        value_bits: usize,
        row_mask: u64,
        at: u64,
    ) -> Result<MacroExec> {
        let rows = self.pipelines[pipe].rows as u64;
        self.pipelines[pipe].check_user_col(addr_col)?;
        self.pipelines[pipe].check_user_col(src_col)?;

        let mut stores: Vec<(usize, usize, u64)> = Vec::new();
        for row in 0..self.pipelines[pipe].rows {
            if (row_mask >> row) & 1 == 0 {
                continue;
            }
            let addr = self.pipelines[pipe].read_element(addr_col, row, addr_bits);
            if addr >= table_len {
                return Err(SimError::AddressRange {
                    addr,
                    limit: table_len,
                });
            }
            let v = self.pipelines[pipe].read_element(src_col, row, value_bits);
            stores.push(((addr % rows) as usize, table_base + (addr / rows) as usize, v));
        }
        let count = stores.len() as u64;
        let params = self.params;
        let ops = count * params.element_load_cycles;
        let p = &mut self.pipelines[dst_pipe];
        for (row, col, v) in stores {
            if col >= p.user_cols() {
                return Err(SimError::Index(col));
            }
            for b in 0..value_bits {
                p.apply(&Microop::write_row(b, col, ((v >> b) & 1) << row, 1 << row))?;
            }
        }
        let latency = count * params.element_load_cycles;
        let (issue, done, ctrl) = p.schedule(at, latency, latency, &params);
        Ok(p.finish(issue, done, ctrl, ops, &params))
    }
}
