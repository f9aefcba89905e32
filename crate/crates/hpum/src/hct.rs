//! One hybrid compute tile: an ACE (64 analog crossbars behind shared ADCs)
//! and a DCE (64 digital pipelines), joined by an 8 B/cycle transfer network
//! with in-flight shift and transpose units, an analog/digital arbiter, and
//! an instruction injector unit (IIU) that expands MVM reductions without
//! consuming front-end issue slots.

use crate::ace::{compensate, digitize, AdcModel, AnalogMatrix, Remap};
use crate::config::SimConfig;
use crate::cost::{CostReport, CostTable, EnergyBreakdown};
use crate::dce::{Dce, MacroExec, MacroOp};
use crate::error::{Result, SimError};
use crate::fixed::{decode_int, FixedPointSpec};
use crate::slicing::SlicePlan;
use crate::trace::EventTrace;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::HashSet;

/// Which domain currently owns an analog-capable array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayMode {
    Analog,
    Digital,
    Idle,
}

/// The per-tile arbiter: array ownership plus pipeline reservations.
#[derive(Debug, Clone, Default)]
pub struct ArbiterState {
    pub array_mode: Vec<ArrayMode>,
    pub reserved_pipelines: HashSet<usize>,
}

impl Default for ArrayMode {
    fn default() -> Self {
        ArrayMode::Idle
    }
}

/// The IIU's table-and-counter program for one vACore's MVM reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IiuProgram {
    /// Microop template length of one reduction step (one pipelined ADD).
    pub template_len: u32,
    /// Register-argument stride between repetitions.
    pub stride: u32,
    /// Repetition counter: one step per partial product.
    pub repetitions: u32,
}

/// A virtual analog core: ceil(N/M) member arrays jointly holding one
/// bit-sliced matrix.
#[derive(Debug, Clone)]
pub struct VACore {
    pub id: usize,
    pub member_arrays: Vec<usize>,
    pub element_bits: u8,
    pub bits_per_cell: u8,
    /// shift_schedule[slice][input_bit] = input_bit + M * slice.
    pub shift_schedule: Vec<Vec<u32>>,
    pub iiu_program: IiuProgram,
}

/// A cross-network move of one row/register payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferEvent {
    pub bytes: u64,
    pub shift_amount: u32,
    pub transpose: bool,
}

/// Matrix rows staged as DCE registers after an A->D move.
#[derive(Debug, Clone)]
pub struct DigitalMatrix {
    pub rows: usize,
    pub cols: usize,
    pub element_bits: u8,
    pub signed: bool,
    /// (pipeline, register) holding matrix row r, sign-extended to
    /// [`DIGITAL_MATRIX_BITS`].
    pub placement: Vec<(usize, usize)>,
    /// Ideal values retained for D->A reprogramming.
    pub values: Vec<Vec<i64>>,
}

/// Width of staged digital matrix rows (sign-extended window).
pub const DIGITAL_MATRIX_BITS: usize = 32;
/// Matrix rows staged per pipeline in the digital layout; the remaining user
/// registers serve as MVM working set.
pub const ROWS_PER_PIPE: usize = 48;
/// First DCE pipeline available for A->D matrix staging (pipelines 0..4 are
/// chip-managed: input, destination, cross-tile combine).
pub const DIGITAL_PIPE_BASE: usize = 4;

// Working registers of the digital-MVM routine, per pipeline.
const DR_ACC: usize = 48;
const DR_X: usize = 49;
const DR_ROW: usize = 50;
const DR_BIT: usize = 51;
const DR_MASK: usize = 52;
const DR_ZERO: usize = 53;
const DR_ONE: usize = 54;
const DR_LAND: usize = 55;

/// One analog MVM request.
#[derive(Debug, Clone, Copy)]
pub struct MvmRequest {
    pub vacore: usize,
    pub input_pipeline: usize,
    pub input_register: usize,
    pub input_bits: u8,
    pub signed_input: bool,
    pub dest_pipeline: usize,
    pub dest_register: usize,
    pub optimized: bool,
}

/// Timing, cost, and bookkeeping of one MVM.
#[derive(Debug, Clone, Default)]
pub struct MvmOutcome {
    pub cost: CostReport,
    pub acc_bits: usize,
    /// Issue cycles of the reduction ADDs (event-trace view for the
    /// pipelining acceptance check).
    pub add_issues: Vec<u64>,
    pub frontend_issues: u64,
    /// Cycles ADC output waited on a busy transfer network.
    pub adc_stall_cycles: u64,
    /// Cycles the DCE write port idled while a partial was still converting.
    pub write_wait_cycles: u64,
    pub conversion_cycles_per_partial: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HctStats {
    pub frontend_issues: u64,
    pub mvm_count: u64,
}

/// One hybrid compute tile.
pub struct Hct {
    pub id: usize,
    pub dce: Dce,
    pub arbiter: ArbiterState,
    pub vacores: Vec<VACore>,
    pub matrices: Vec<Option<AnalogMatrix>>,
    pub cfg: SimConfig,
    pub stats: HctStats,
    pub trace: EventTrace,
    /// Narrowed ADC window for applications that provision fewer levels
    /// than the full-scale default (e.g. AES MixColumns parity readout).
    pub adc_window_override: Option<(i64, i64)>,
    /// Ramp-ADC early termination level count (AES stops at 4 levels).
    pub adc_early_termination: Option<u64>,
    rng: ChaCha12Rng,
    next_free_array: usize,
    /// Next free DCE pipeline for A->D matrix staging. Starts above the
    /// chip-managed input/dest/combine pipelines so staged matrices and the
    /// MVM plumbing never alias.
    digital_pipe_cursor: usize,
    /// Cycle at which the ACE's shared ADC block is next free.
    adc_free: u64,
    /// Cycle at which the transfer network is next free.
    net_free: u64,
}

impl Hct {
    pub fn new(id: usize, cfg: &SimConfig) -> Self {
        Self {
            id,
            dce: Dce::new(cfg),
            arbiter: ArbiterState {
                array_mode: vec![ArrayMode::Idle; cfg.geometry.ace_arrays],
                reserved_pipelines: HashSet::new(),
            },
            vacores: Vec::new(),
            matrices: Vec::new(),
            cfg: cfg.clone(),
            stats: HctStats::default(),
            trace: EventTrace::default(),
            adc_window_override: None,
            adc_early_termination: None,
            rng: ChaCha12Rng::seed_from_u64(
                cfg.noise.rng_seed.wrapping_mul(0x9E3779B97F4A7C15) ^ id as u64,
            ),
            next_free_array: 0,
            digital_pipe_cursor: DIGITAL_PIPE_BASE,
            adc_free: 0,
            net_free: 0,
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }

    fn cost_table(&self) -> &CostTable {
        &self.cfg.cost
    }

    // ----- arbiter ------------------------------------------------------

    pub fn reserve_pipeline(&mut self, pipeline: usize) -> Result<()> {
        if pipeline >= self.dce.pipelines.len() {
            return Err(SimError::Index(pipeline));
        }
        if !self.arbiter.reserved_pipelines.insert(pipeline) {
            return Err(SimError::AlreadyReserved(pipeline));
        }
        self.trace.push(0, self.id, "reserve", format!("pipeline={pipeline}"));
        Ok(())
    }

    pub fn release_pipeline(&mut self, pipeline: usize) {
        self.arbiter.reserved_pipelines.remove(&pipeline);
        self.trace.push(0, self.id, "release", format!("pipeline={pipeline}"));
    }

    /// Front-end-issued digital macro; rejected on reserved pipelines.
    #[allow(clippy::too_many_arguments)]
    pub fn digital_macro(
        &mut self,
        pipeline: usize,
        op: MacroOp,
        dst: usize,
        src1: usize,
        src2: usize,
        bits: usize,
        row_mask: u64,
        at: u64,
    ) -> Result<MacroExec> {
        if self.arbiter.reserved_pipelines.contains(&pipeline) {
            return Err(SimError::ReservedRegister {
                pipeline,
                register: dst,
            });
        }
        self.stats.frontend_issues += 1;
        let params = self.dce.params;
        self.dce
            .pipeline_mut(pipeline)
            .run_macro(&params, op, dst, src1, src2, bits, row_mask, at)
    }

    // ----- vACore lifecycle --------------------------------------------

    /// Claim `ceil(element_bits / bits_per_cell)` member arrays.
    pub fn alloc_vacore(&mut self, element_bits: u8, bits_per_cell: u8) -> Result<usize> {
        if let Some(existing) = self.vacores.first() {
            if existing.element_bits != element_bits {
                return Err(SimError::WidthConflict {
                    requested: element_bits,
                    existing: existing.element_bits,
                });
            }
        }
        let plan = SlicePlan::new(element_bits, bits_per_cell);
        let n = plan.slice_count();
        if self.next_free_array + n > self.cfg.geometry.ace_arrays {
            return Err(SimError::Capacity(format!(
                "need {n} ACE arrays, {} free",
                self.cfg.geometry.ace_arrays - self.next_free_array
            )));
        }
        let member_arrays: Vec<usize> =
            (self.next_free_array..self.next_free_array + n).collect();
        self.next_free_array += n;
        let shift_schedule: Vec<Vec<u32>> = (0..n)
            .map(|j| {
                (0..64usize)
                    .map(|i| i as u32 + bits_per_cell as u32 * j as u32)
                    .collect()
            })
            .collect();
        let id = self.vacores.len();
        self.vacores.push(VACore {
            id,
            member_arrays,
            element_bits,
            bits_per_cell,
            shift_schedule,
            iiu_program: IiuProgram {
                template_len: self.cfg.macro_costs.add,
                stride: 1,
                repetitions: element_bits as u32 * n as u32,
            },
        });
        self.matrices.push(None);
        Ok(id)
    }

    /// Program a logical matrix into a vACore's member arrays. Charges the
    /// per-array reprogram cost.
    pub fn program_matrix(
        &mut self,
        vacore: usize,
        values: Vec<Vec<i64>>,
        remap: Remap,
    ) -> Result<CostReport> {
        let vc = self.vacores.get(vacore).ok_or(SimError::Index(vacore))?.clone();
        for &a in &vc.member_arrays {
            if self.arbiter.array_mode[a] == ArrayMode::Digital {
                return Err(SimError::ArbiterConflict {
                    array: a,
                    mode: "digital",
                });
            }
        }
        let plan = SlicePlan::new(vc.element_bits, vc.bits_per_cell);
        let m = AnalogMatrix::program(values, plan, remap, &self.cfg.noise, &mut self.rng)?;
        for &a in &vc.member_arrays {
            self.arbiter.array_mode[a] = ArrayMode::Analog;
        }
        let n = vc.member_arrays.len() as u64;
        self.matrices[vacore] = Some(m);
        self.trace
            .push(0, self.id, "program", format!("vacore={vacore} arrays={n}"));
        let mut energy = EnergyBreakdown::default();
        energy.reprogram_pj = self.cfg.cost.reprogram_pj_per_array * n as f64;
        Ok(CostReport {
            cycles: self.cfg.cost.reprogram_cycles_per_array * n,
            energy,
        })
    }

    // ----- transfer network --------------------------------------------

    /// Move bytes across the tile network: ceil(bytes/8) cycles; shift and
    /// transpose are applied in flight by the shift/transposition units at
    /// no extra latency.
    pub fn transfer(&mut self, event: &TransferEvent, at: u64) -> CostReport {
        let cycles = event.bytes.div_ceil(self.cfg.cost.transfer_bytes_per_cycle);
        let start = at.max(self.net_free);
        self.net_free = start + cycles;
        self.trace.push(
            start,
            self.id,
            "transfer",
            format!(
                "bytes={} shift={} transpose={}",
                event.bytes, event.shift_amount, event.transpose
            ),
        );
        CostReport {
            cycles,
            energy: EnergyBreakdown::default(),
        }
    }

    // ----- analog MVM ---------------------------------------------------

    /// Accumulator width needed for an MVM of this vACore.
    pub fn mvm_acc_bits(&self, vacore: usize, input_bits: u8) -> usize {
        let vc = &self.vacores[vacore];
        let rows = self.matrices[vacore].as_ref().map_or(64, |m| m.rows);
        let log_rows = usize::BITS as usize - (rows.max(1) - 1).leading_zeros() as usize;
        (vc.element_bits as usize + input_bits as usize + log_rows + 2).min(48)
    }

    /// Execute one MVM through the analog path.
    ///
    /// Each (input bit i, slice j) pair produces one digitized
    /// partial row vector, transferred transposed into the reserved dest
    /// pipeline with its 2^(i + M*j) shift applied in flight, then reduced
    /// by pipelined DCE ADDs. Unoptimized mode serializes convert / write /
    /// shift / add per partial with no overlap.
    pub fn exec_mvm(&mut self, req: &MvmRequest, at: u64) -> Result<MvmOutcome> {
        let vc = self.vacores.get(req.vacore).ok_or(SimError::Index(req.vacore))?.clone();
        let matrix = self.matrices[req.vacore]
            .clone()
            .ok_or_else(|| SimError::Capacity(format!("vacore {} not programmed", req.vacore)))?;
        for &a in &vc.member_arrays {
            if self.arbiter.array_mode[a] != ArrayMode::Analog {
                return Err(SimError::ArbiterConflict {
                    array: a,
                    mode: "digital",
                });
            }
        }
        if !self.arbiter.reserved_pipelines.contains(&req.dest_pipeline) {
            return Err(SimError::Capacity(format!(
                "dest pipeline {} not reserved for MVM",
                req.dest_pipeline
            )));
        }
        let rows = matrix.rows;
        let cols = matrix.cols;
        let lane_mask = if cols >= 64 { u64::MAX } else { (1u64 << cols) - 1 };
        let acc_bits = self.mvm_acc_bits(req.vacore, req.input_bits);

        // Input bit-planes, read out of the striped input register.
        let inputs: Vec<u64> = (0..rows)
            .map(|r| {
                self.dce
                    .pipeline(req.input_pipeline)
                    .read_element(req.input_register, r, req.input_bits as usize)
            })
            .collect();

        let (adc_min, adc_max) = self
            .adc_window_override
            .unwrap_or((-matrix.full_scale(), matrix.full_scale()));
        let mut adc = AdcModel::new(
            self.cfg.adc_kind,
            self.cfg.adc_resolution_bits,
            adc_min,
            adc_max,
        );
        if let Some(levels) = self.adc_early_termination {
            adc = adc.with_early_termination(levels);
        }
        let conv = adc.conversion_cycles(cols, self.cost_table());
        let partial_bits = 64 - (rows as u64 * ((1u64 << vc.bits_per_cell) - 1)).leading_zeros()
            as usize
            + 1;
        let partial_bytes = cols as u64 * (partial_bits as u64).div_ceil(8);

        let mut outcome = MvmOutcome {
            acc_bits,
            conversion_cycles_per_partial: conv,
            ..Default::default()
        };
        let mut energy = EnergyBreakdown::default();
        self.trace.push(
            at,
            self.id,
            "mvm_start",
            format!("vacore={} optimized={}", req.vacore, req.optimized),
        );

        let params = self.dce.params;
        // Zero the accumulator register.
        let zero = vec![0u64; 64];
        let init = self.dce.pipeline_mut(req.dest_pipeline).load_immediate(
            &params,
            req.dest_register,
            &zero,
            acc_bits,
            at,
        )?;
        energy.add(&init.cost.energy);

        let k_total = req.input_bits as usize * vc.member_arrays.len();
        let mut t_unopt = at + init.cost.cycles;
        let mut last_done = t_unopt;
        self.adc_free = self.adc_free.max(at + init.cost.cycles);
        let mut partial_index = 0usize;

        for i in 0..req.input_bits as usize {
            let bits_vec: Vec<bool> = inputs.iter().map(|&v| (v >> i) & 1 == 1).collect();
            let negate = req.signed_input && i == req.input_bits as usize - 1;
            for (j, array) in matrix.arrays.iter().enumerate() {
                let shift = vc.shift_schedule[j][i];
                // Analog: apply wordlines, convert.
                let (sums, apply_cost) = array.apply_input_bits(
                    &bits_vec,
                    &self.cfg.noise,
                    &mut self.rng,
                    &self.cfg.cost,
                )?;
                let (mut partial, conv_cost) =
                    digitize(&sums[..cols], &adc, cols, self.cost_table())?;
                energy.add(&apply_cost.energy);
                energy.add(&conv_cost.energy);
                if matrix.remap == Remap::Symmetric {
                    let ones = bits_vec.iter().filter(|&&b| b).count() as u64;
                    compensate(&mut partial, ones)?;
                }

                // Stage the shifted partial into the landing register.
                let acc_mask = if acc_bits == 64 { u64::MAX } else { (1u64 << acc_bits) - 1 };
                let land: Vec<u64> = if req.optimized {
                    partial
                        .iter()
                        .map(|&p| ((p as u64) << shift) & acc_mask)
                        .collect()
                } else {
                    partial.iter().map(|&p| (p as u64) & acc_mask).collect()
                };

                if req.optimized {
                    // ADC pass k ready after the shared converter finishes it.
                    let ready = self.adc_free.max(at + 1) + conv;
                    self.adc_free = ready;
                    let ev = TransferEvent {
                        bytes: partial_bytes,
                        shift_amount: shift,
                        transpose: true,
                    };
                    let t_start = ready.max(self.net_free);
                    outcome.adc_stall_cycles += t_start - ready;
                    let tr = self.transfer(&ev, ready);
                    let landed = t_start + tr.cycles;
                    self.dce
                        .pipeline_mut(req.dest_pipeline)
                        .stage_register(DR_LAND, &land, acc_bits)?;
                    let op = if negate { MacroOp::Sub } else { MacroOp::Add };
                    let exec = self.dce.pipeline_mut(req.dest_pipeline).run_macro(
                        &params,
                        op,
                        req.dest_register,
                        req.dest_register,
                        DR_LAND,
                        acc_bits,
                        lane_mask,
                        landed,
                    )?;
                    outcome.write_wait_cycles += exec.issue.saturating_sub(landed);
                    outcome.add_issues.push(exec.issue);
                    self.trace.push(
                        exec.issue,
                        self.id,
                        "add_issue",
                        format!("partial={partial_index} shift={shift}"),
                    );
                    energy.add(&exec.cost.energy);
                    last_done = last_done.max(exec.done);
                } else {
                    // Unoptimized timeline: convert, write N rows, shift, add — strictly
                    // serialized, nothing overlaps.
                    t_unopt += 1 + conv;
                    let stage = self.dce.pipeline_mut(req.dest_pipeline).load_immediate(
                        &params,
                        DR_LAND,
                        &land,
                        acc_bits,
                        t_unopt,
                    )?;
                    t_unopt = stage.done;
                    if shift > 0 {
                        let sh = self.dce.pipeline_mut(req.dest_pipeline).shift(
                            &params,
                            DR_LAND,
                            shift as i32,
                            acc_bits,
                            lane_mask,
                            t_unopt,
                        )?;
                        energy.add(&sh.cost.energy);
                        t_unopt = sh.done;
                    }
                    let op = if negate { MacroOp::Sub } else { MacroOp::Add };
                    let exec = self.dce.pipeline_mut(req.dest_pipeline).run_macro(
                        &params,
                        op,
                        req.dest_register,
                        req.dest_register,
                        DR_LAND,
                        acc_bits,
                        lane_mask,
                        t_unopt,
                    )?;
                    outcome.add_issues.push(exec.issue);
                    energy.add(&stage.cost.energy);
                    energy.add(&exec.cost.energy);
                    t_unopt = exec.done;
                    last_done = last_done.max(t_unopt);
                }
                partial_index += 1;
            }
        }

        // Front-end accounting: with the IIU the whole reduction is expanded
        // by the injector (reserve trigger + MVM + IIU trigger); without it
        // every transfer+ADD (and in unoptimized mode every write/shift/add)
        // occupies a front-end slot.
        outcome.frontend_issues = if !req.optimized {
            2 + 3 * k_total as u64
        } else if self.cfg.iiu_enabled {
            3
        } else {
            2 + 2 * k_total as u64
        };
        self.stats.frontend_issues += outcome.frontend_issues;
        self.stats.mvm_count += 1;

        outcome.cost = CostReport {
            cycles: last_done - at,
            energy,
        };
        self.trace.push(
            last_done,
            self.id,
            "mvm_done",
            format!("vacore={} partials={}", req.vacore, partial_index),
        );
        Ok(outcome)
    }

    /// Read an MVM result back as signed integers (host introspection).
    pub fn read_result(&self, pipeline: usize, register: usize, acc_bits: usize, cols: usize) -> Vec<i64> {
        let spec = FixedPointSpec::new(acc_bits as u8, true, 0);
        (0..cols)
            .map(|c| {
                decode_int(
                    self.dce.pipeline(pipeline).read_element(register, c, acc_bits),
                    &spec,
                )
            })
            .collect()
    }

    // ----- domain moves -------------------------------------------------

    /// A->D: stage the vACore's matrix rows into DCE registers (transposed in
    /// flight: each analog row vector becomes one striped vector register),
    /// and hand the member arrays to the digital domain.
    pub fn move_matrix_to_digital(
        &mut self,
        vacore: usize,
        at: u64,
    ) -> Result<(DigitalMatrix, CostReport)> {
        let vc = self.vacores.get(vacore).ok_or(SimError::Index(vacore))?.clone();
        let matrix = self.matrices[vacore]
            .as_ref()
            .ok_or_else(|| SimError::Capacity(format!("vacore {vacore} not programmed")))?;
        let values = matrix.values.clone();
        let rows = matrix.rows;
        let cols = matrix.cols;
        let signed = values.iter().flatten().any(|&v| v < 0);
        let eb = vc.element_bits;
        let needed_pipes = rows.div_ceil(ROWS_PER_PIPE);
        let base = self.digital_pipe_cursor;
        if base + needed_pipes > self.dce.pipelines.len() {
            return Err(SimError::Capacity(format!(
                "matrix needs {needed_pipes} pipelines starting at {base}, \
                 only {} exist",
                self.dce.pipelines.len()
            )));
        }
        let mut report = CostReport::default();
        let mut t = at;
        let mut placement = Vec::with_capacity(rows);
        let params = self.dce.params;
        let mask32 = (1u64 << DIGITAL_MATRIX_BITS) - 1;
        for (r, row) in values.iter().enumerate() {
            let pipe = base + r / ROWS_PER_PIPE;
            let reg = r % ROWS_PER_PIPE;
            let ev = TransferEvent {
                bytes: cols as u64 * (eb as u64).div_ceil(8),
                shift_amount: 0,
                transpose: true,
            };
            let tr = self.transfer(&ev, t);
            t += tr.cycles;
            report.extend(&tr);
            let lanes: Vec<u64> = row.iter().map(|&v| (v as u64) & mask32).collect();
            let st = self.dce.pipeline_mut(pipe).load_immediate(
                &params,
                reg,
                &lanes,
                DIGITAL_MATRIX_BITS,
                t,
            )?;
            t = st.done;
            report.extend(&CostReport {
                cycles: st.cost.cycles,
                energy: st.cost.energy,
            });
            placement.push((pipe, reg));
        }
        for &a in &vc.member_arrays {
            self.arbiter.array_mode[a] = ArrayMode::Digital;
        }
        self.digital_pipe_cursor = base + needed_pipes;
        self.trace
            .push(t, self.id, "move_a_to_d", format!("vacore={vacore} rows={rows}"));
        Ok((
            DigitalMatrix {
                rows,
                cols,
                element_bits: eb,
                signed,
                placement,
                values,
            },
            report,
        ))
    }

    /// D->A: reprogram the vACore's arrays from the staged digital matrix.
    /// Charges the full per-array reprogram cost (programming analog cells is
    /// far more expensive than the A->D read-out).
    pub fn move_matrix_to_analog(
        &mut self,
        vacore: usize,
        dmat: &DigitalMatrix,
    ) -> Result<CostReport> {
        let vc = self.vacores.get(vacore).ok_or(SimError::Index(vacore))?.clone();
        // Read the values back out of the DCE registers (not the cached copy)
        // so the round trip is a real involution over machine state.
        let spec = FixedPointSpec::new(DIGITAL_MATRIX_BITS as u8, true, 0);
        let values: Vec<Vec<i64>> = dmat
            .placement
            .iter()
            .map(|&(pipe, reg)| {
                (0..dmat.cols)
                    .map(|c| {
                        decode_int(
                            self.dce.pipeline(pipe).read_element(reg, c, DIGITAL_MATRIX_BITS),
                            &spec,
                        )
                    })
                    .collect()
            })
            .collect();
        for &a in &vc.member_arrays {
            self.arbiter.array_mode[a] = ArrayMode::Idle;
        }
        // Free the staging pipelines when this was the most recent A->D move
        // (stack discipline; interleaved frees leave the pipes claimed).
        if let (Some(first), Some(last)) = (dmat.placement.first(), dmat.placement.last()) {
            if last.0 + 1 == self.digital_pipe_cursor {
                self.digital_pipe_cursor = first.0;
            }
        }
        let report = self.program_matrix(vacore, values, Remap::Raw)?;
        self.trace
            .push(0, self.id, "move_d_to_a", format!("vacore={vacore}"));
        Ok(report)
    }

    // ----- DCE-only MVM (analog disabled) -------------------------------

    /// Multiply the staged digital matrix by `input` entirely in the DCE:
    /// per matrix row, a shift-and-add long multiplication of the row
    /// register by the broadcast scalar, accumulated lane-parallel over the
    /// output elements; per-pipeline partial accumulators are then combined
    /// over the transfer network.
    pub fn exec_mvm_digital(
        &mut self,
        dmat: &DigitalMatrix,
        input: &[u64],
        input_bits: u8,
        signed_input: bool,
        at: u64,
    ) -> Result<(Vec<i64>, usize, CostReport)> {
        if input.len() != dmat.rows {
            return Err(SimError::Shape {
                got: input.len(),
                want: dmat.rows,
            });
        }
        let acc_bits = DIGITAL_MATRIX_BITS;
        let cols = dmat.cols;
        let lane_mask = if cols >= 64 { u64::MAX } else { (1u64 << cols) - 1 };
        let params = self.dce.params;
        let n_pipes = dmat.rows.div_ceil(ROWS_PER_PIPE);
        let mut report = CostReport::default();
        let mut pipe_done = vec![at; n_pipes];
        let in_mask = if input_bits == 64 { u64::MAX } else { (1u64 << input_bits) - 1 };

        for chunk in 0..n_pipes {
            let mut t = at;
            let pipe = dmat.placement[chunk * ROWS_PER_PIPE].0;
            let p = self.dce.pipeline_mut(pipe);
            // constants and accumulator init
            for (reg, val) in [(DR_ZERO, 0u64), (DR_ONE, 1u64)] {
                let e = p.load_immediate(&params, reg, &vec![val; 64], acc_bits, t)?;
                t = e.done;
                report.energy.add(&e.cost.energy);
            }
            let e = p.load_immediate(&params, DR_ACC, &vec![0u64; 64], acc_bits, t)?;
            t = e.done;
            report.energy.add(&e.cost.energy);

            let row_lo = chunk * ROWS_PER_PIPE;
            let row_hi = (row_lo + ROWS_PER_PIPE).min(dmat.rows);
            for r in row_lo..row_hi {
                let reg = dmat.placement[r].1;
                let x = input[r] & in_mask;
                // broadcast the scalar multiplier into all lanes
                let e = p.load_immediate(&params, DR_X, &vec![x; 64], input_bits as usize, t)?;
                t = e.done;
                report.energy.add(&e.cost.energy);
                // working copy of the row, shifted left one per bit step
                let e = p.run_macro(&params, MacroOp::Copy, DR_ROW, reg, reg, acc_bits, u64::MAX, t)?;
                t = e.done;
                report.energy.add(&e.cost.energy);
                for i in 0..input_bits as usize {
                    // extract multiplier bit i (the register is shifted right
                    // as we go, so the live bit is always bit 0)
                    let e = p.run_macro(&params, MacroOp::And, DR_BIT, DR_X, DR_ONE, 1, u64::MAX, t)?;
                    t = e.done;
                    report.energy.add(&e.cost.energy);
                    // all-ones mask where the bit is set: 0 - bit
                    let e = p.run_macro(
                        &params,
                        MacroOp::Sub,
                        DR_MASK,
                        DR_ZERO,
                        DR_BIT,
                        acc_bits,
                        u64::MAX,
                        t,
                    )?;
                    t = e.done;
                    report.energy.add(&e.cost.energy);
                    let e = p.run_macro(
                        &params,
                        MacroOp::And,
                        DR_MASK,
                        DR_ROW,
                        DR_MASK,
                        acc_bits,
                        u64::MAX,
                        t,
                    )?;
                    t = e.done;
                    report.energy.add(&e.cost.energy);
                    let negate = signed_input && i == input_bits as usize - 1;
                    let op = if negate { MacroOp::Sub } else { MacroOp::Add };
                    let e = p.run_macro(
                        &params,
                        op,
                        DR_ACC,
                        DR_ACC,
                        DR_MASK,
                        acc_bits,
                        lane_mask,
                        t,
                    )?;
                    t = e.done;
                    report.energy.add(&e.cost.energy);
                    if i + 1 < input_bits as usize {
                        let e = p.shift(&params, DR_ROW, 1, acc_bits, u64::MAX, t)?;
                        t = e.done;
                        report.energy.add(&e.cost.energy);
                        let e = p.shift(&params, DR_X, -1, input_bits as usize, u64::MAX, t)?;
                        t = e.done;
                        report.energy.add(&e.cost.energy);
                    }
                }
            }
            pipe_done[chunk] = t;
        }

        // Combine per-pipeline partial accumulators into the first staging
        // pipeline of this matrix.
        let base_pipe = dmat.placement[0].0;
        let mut t = *pipe_done.iter().max().unwrap();
        for chunk in 1..n_pipes {
            let pipe = dmat.placement[chunk * ROWS_PER_PIPE].0;
            let lanes: Vec<u64> = (0..64)
                .map(|c| self.dce.pipeline(pipe).read_element(DR_ACC, c, acc_bits))
                .collect();
            let ev = TransferEvent {
                bytes: 64 * (acc_bits as u64).div_ceil(8),
                shift_amount: 0,
                transpose: false,
            };
            let tr = self.transfer(&ev, t);
            t += tr.cycles;
            report.extend(&tr);
            let p0 = self.dce.pipeline_mut(base_pipe);
            p0.stage_register(DR_LAND, &lanes, acc_bits)?;
            let e = p0.run_macro(&params, MacroOp::Add, DR_ACC, DR_ACC, DR_LAND, acc_bits, lane_mask, t)?;
            t = e.done;
            report.energy.add(&e.cost.energy);
        }
        report.cycles = t - at;

        let spec = FixedPointSpec::new(acc_bits as u8, true, 0);
        let out: Vec<i64> = (0..cols)
            .map(|c| decode_int(self.dce.pipeline(base_pipe).read_element(DR_ACC, c, acc_bits), &spec))
            .collect();
        Ok((out, acc_bits, report))
    }
}
