//! Lane-parallel integer kernels built from DCE macros, shared by the
//! application mappings. An [`Engine`] wraps one pipeline of one HCT and
//! exposes composite operations (long multiplication, restoring division,
//! arithmetic shifts, per-lane variable shifts) as sequences of the primitive
//! vector macros, accumulating their cycle and energy costs.
//!
//! Register convention: callers own columns 0..40; columns 40..56 are engine
//! scratch. All values are `WIDTH`-bit two's complement lanes.

use crate::chip::Chip;
use crate::cost::CostReport;
use crate::dce::{MacroExec, MacroOp};
use crate::error::Result;

/// Working width of every engine register.
pub const WIDTH: usize = 32;
/// First engine-scratch column; callers must stay below this.
pub const SCRATCH: usize = 40;

const ZERO: usize = 40;
const CONST: usize = 41;
const T1: usize = 42;
const T2: usize = 43;
const T3: usize = 44;
const REM: usize = 45;
const SDEN: usize = 46;
const SEL: usize = 47;

fn mask(v: i64) -> u64 {
    (v as u64) & ((1u64 << WIDTH) - 1)
}

pub struct Engine<'a> {
    chip: &'a mut Chip,
    hct: usize,
    pipe: usize,
    pub cost: CostReport,
}

impl<'a> Engine<'a> {
    pub fn new(chip: &'a mut Chip, hct: usize, pipe: usize) -> Result<Self> {
        let mut e = Engine {
            chip,
            hct,
            pipe,
            cost: CostReport::default(),
        };
        e.stage(ZERO, &[0i64; 64])?;
        Ok(e)
    }

    fn track(&mut self, e: &MacroExec) {
        self.cost.extend(&CostReport {
            cycles: e.cost.cycles,
            energy: e.cost.energy.clone(),
        });
    }

    /// Stage host values into a register (charged as a transposed transfer).
    pub fn stage(&mut self, reg: usize, values: &[i64]) -> Result<()> {
        let lanes: Vec<u64> = values.iter().map(|&v| mask(v)).collect();
        let h = self.chip.hct_mut(self.hct)?;
        h.dce.pipeline_mut(self.pipe).stage_register(reg, &lanes, WIDTH)?;
        let ev = crate::hct::TransferEvent {
            bytes: values.len() as u64 * (WIDTH as u64 / 8),
            shift_amount: 0,
            transpose: true,
        };
        let c = h.transfer(&ev, 0);
        self.cost.extend(&c);
        Ok(())
    }

    pub fn stage_broadcast(&mut self, reg: usize, value: i64, n: usize) -> Result<()> {
        self.stage(reg, &vec![value; n])
    }

    /// Read `n` lanes back as signed values.
    pub fn read(&mut self, reg: usize, n: usize) -> Result<Vec<i64>> {
        let spec = crate::fixed::FixedPointSpec::new(WIDTH as u8, true, 0);
        let h = self.chip.hct_mut(self.hct)?;
        let raw = h.dce.pipeline(self.pipe).read_register(reg, WIDTH);
        Ok(raw
            .into_iter()
            .take(n)
            .map(|v| crate::fixed::decode_int(v, &spec))
            .collect())
    }

    pub fn mac(&mut self, op: MacroOp, dst: usize, s1: usize, s2: usize) -> Result<()> {
        let e = self
            .chip
            .hct_mut(self.hct)?
            .digital_macro(self.pipe, op, dst, s1, s2, WIDTH, u64::MAX, 0)?;
        self.track(&e);
        Ok(())
    }

    /// Logical shift: positive = left, negative = right.
    pub fn shift(&mut self, reg: usize, amount: i32) -> Result<()> {
        if amount == 0 {
            return Ok(());
        }
        let h = self.chip.hct_mut(self.hct)?;
        let params = h.dce.params;
        let e = h
            .dce
            .pipeline_mut(self.pipe)
            .shift(&params, reg, amount, WIDTH, u64::MAX, 0)?;
        self.track(&e);
        Ok(())
    }

    /// Arithmetic right shift via the bias trick:
    /// `asr(v, k) = ((v + 2^(W-1)) >> k) - 2^(W-1-k)` (mod 2^W).
    pub fn asr(&mut self, reg: usize, k: u32) -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        self.stage_broadcast(CONST, 1i64 << (WIDTH - 1), 64)?;
        self.mac(MacroOp::Add, T1, reg, CONST)?;
        self.shift(T1, -(k as i32))?;
        self.stage_broadcast(CONST, 1i64 << (WIDTH as u32 - 1 - k), 64)?;
        self.mac(MacroOp::Sub, reg, T1, CONST)?;
        Ok(())
    }

    /// `dst = |src|`, with the extracted sign bit (0/1) left in `sign_reg`.
    pub fn abs(&mut self, dst: usize, src: usize, sign_reg: usize) -> Result<()> {
        self.mac(MacroOp::Copy, sign_reg, src, src)?;
        self.shift(sign_reg, -((WIDTH as i32) - 1))?;
        self.mac(MacroOp::Sub, T1, ZERO, src)?;
        self.mac(MacroOp::Mux { sel: sign_reg }, dst, T1, src)?;
        Ok(())
    }

    /// `dst = sign_reg(bit0) ? -mag : mag`.
    pub fn apply_sign(&mut self, dst: usize, mag: usize, sign_reg: usize) -> Result<()> {
        self.mac(MacroOp::Sub, T1, ZERO, mag)?;
        self.mac(MacroOp::Mux { sel: sign_reg }, dst, T1, mag)?;
        Ok(())
    }

    /// `dst = src * scalar` (mod 2^W): shift-and-add long multiplication over
    /// the set bits of |scalar|; signed-safe because shifted adds commute
    /// with two's complement.
    pub fn mul_scalar(&mut self, dst: usize, src: usize, scalar: i64) -> Result<()> {
        self.mac(MacroOp::Copy, dst, ZERO, ZERO)?;
        if scalar == 0 {
            return Ok(());
        }
        let a = scalar.unsigned_abs();
        self.mac(MacroOp::Copy, T2, src, src)?;
        let top = 63 - a.leading_zeros();
        for b in 0..=top {
            if (a >> b) & 1 == 1 {
                self.mac(MacroOp::Add, T3, dst, T2)?;
                self.mac(MacroOp::Copy, dst, T3, T3)?;
            }
            if b < top {
                self.shift(T2, 1)?;
            }
        }
        if scalar < 0 {
            self.mac(MacroOp::Sub, T3, ZERO, dst)?;
            self.mac(MacroOp::Copy, dst, T3, T3)?;
        }
        Ok(())
    }

    /// `dst = a * b` for non-negative lanes, scanning `b_bits` multiplier
    /// bits: per bit, a MUX picks the shifted multiplicand or zero.
    pub fn mul_dyn(&mut self, dst: usize, a: usize, b: usize, b_bits: u32) -> Result<()> {
        self.mac(MacroOp::Copy, dst, ZERO, ZERO)?;
        self.mac(MacroOp::Copy, T2, a, a)?; // running a << j
        self.mac(MacroOp::Copy, SEL, b, b)?; // bit j at position 0
        for j in 0..b_bits {
            self.mac(MacroOp::Mux { sel: SEL }, T3, T2, ZERO)?;
            self.mac(MacroOp::Add, T1, dst, T3)?;
            self.mac(MacroOp::Copy, dst, T1, T1)?;
            if j + 1 < b_bits {
                self.shift(T2, 1)?;
                self.shift(SEL, -1)?;
            }
        }
        Ok(())
    }

    /// Restoring division `dst = num / den` (non-negative lanes, per-lane
    /// divisors). `q_bits` bounds the quotient; `den << (q_bits-1)` must fit
    /// in the register width.
    pub fn div(&mut self, dst: usize, num: usize, den: usize, q_bits: u32) -> Result<()> {
        self.mac(MacroOp::Copy, REM, num, num)?;
        self.mac(MacroOp::Copy, dst, ZERO, ZERO)?;
        self.mac(MacroOp::Copy, SDEN, den, den)?;
        self.shift(SDEN, q_bits as i32 - 1)?;
        for b in (0..q_bits).rev() {
            self.mac(MacroOp::CmpGe, SEL, REM, SDEN)?;
            self.mac(MacroOp::Sub, T1, REM, SDEN)?;
            self.mac(MacroOp::Mux { sel: SEL }, T2, T1, REM)?;
            self.mac(MacroOp::Copy, REM, T2, T2)?;
            self.mac(MacroOp::Copy, T1, SEL, SEL)?;
            self.shift(T1, b as i32)?;
            self.mac(MacroOp::Or, T2, dst, T1)?;
            self.mac(MacroOp::Copy, dst, T2, T2)?;
            if b > 0 {
                self.shift(SDEN, -1)?;
            }
        }
        Ok(())
    }

    /// Per-lane variable logical right shift `dst = src >> n` for n in
    /// `0..=max_n` held in `n_reg` (src non-negative): one equality-selected
    /// MUX per candidate amount.
    pub fn var_shr(
        &mut self,
        dst: usize,
        src: usize,
        n_reg: usize,
        max_n: u32,
    ) -> Result<()> {
        self.mac(MacroOp::Copy, dst, ZERO, ZERO)?;
        for k in 0..=max_n {
            self.stage_broadcast(CONST, k as i64, 64)?;
            self.mac(MacroOp::CmpGe, T1, n_reg, CONST)?;
            self.mac(MacroOp::CmpGe, T2, CONST, n_reg)?;
            self.mac(MacroOp::And, SEL, T1, T2)?;
            self.mac(MacroOp::Copy, T3, src, src)?;
            self.shift(T3, -(k as i32))?;
            self.mac(MacroOp::Mux { sel: SEL }, T1, T3, dst)?;
            self.mac(MacroOp::Copy, dst, T1, T1)?;
        }
        Ok(())
    }

    /// `reg = min(reg, c)` for non-negative lanes and constant c.
    pub fn min_const(&mut self, reg: usize, c: i64) -> Result<()> {
        self.stage_broadcast(CONST, c, 64)?;
        self.mac(MacroOp::CmpGe, SEL, reg, CONST)?;
        self.mac(MacroOp::Mux { sel: SEL }, T1, CONST, reg)?;
        self.mac(MacroOp::Copy, reg, T1, T1)?;
        Ok(())
    }

    /// `dst += addend_reg` through a temporary (macros forbid aliased
    /// operands).
    pub fn acc_add(&mut self, dst: usize, addend: usize) -> Result<()> {
        self.mac(MacroOp::Add, T1, dst, addend)?;
        self.mac(MacroOp::Copy, dst, T1, T1)?;
        Ok(())
    }

    /// `dst -= sub_reg` through a temporary.
    pub fn acc_sub(&mut self, dst: usize, sub: usize) -> Result<()> {
        self.mac(MacroOp::Sub, T1, dst, sub)?;
        self.mac(MacroOp::Copy, dst, T1, T1)?;
        Ok(())
    }

    /// Add a broadcast constant in place.
    pub fn add_const(&mut self, reg: usize, c: i64) -> Result<()> {
        self.stage_broadcast(CONST, c, 64)?;
        self.acc_add(reg, CONST)
    }

    /// `dst = c - reg` for a broadcast constant.
    pub fn rsub_const(&mut self, dst: usize, reg: usize, c: i64) -> Result<()> {
        self.stage_broadcast(CONST, c, 64)?;
        self.mac(MacroOp::Sub, dst, CONST, reg)?;
        Ok(())
    }

    /// Bitwise AND with a broadcast constant, in place.
    pub fn and_const(&mut self, reg: usize, c: i64) -> Result<()> {
        self.stage_broadcast(CONST, c, 64)?;
        self.mac(MacroOp::And, T1, reg, CONST)?;
        self.mac(MacroOp::Copy, reg, T1, T1)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{NoiseConfig, SimConfig};

    fn chip() -> Chip {
        let mut cfg = SimConfig::default();
        cfg.noise = NoiseConfig::off();
        cfg.set("geometry.hct_count", "2").unwrap();
        Chip::new(&cfg)
    }

    #[test]
    fn asr_matches_arithmetic_shift() {
        let mut c = chip();
        let mut e = Engine::new(&mut c, 0, 8).unwrap();
        let vals = vec![-1000i64, 1000, -1, 0, 7, -259];
        e.stage(0, &vals).unwrap();
        e.asr(0, 3).unwrap();
        let got = e.read(0, vals.len()).unwrap();
        let want: Vec<i64> = vals.iter().map(|v| v >> 3).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn mul_scalar_signed() {
        let mut c = chip();
        let mut e = Engine::new(&mut c, 0, 8).unwrap();
        let vals = vec![-12i64, 5, 0, 113, -1];
        for s in [-91i64, 0, 1, 369, -7] {
            e.stage(0, &vals).unwrap();
            e.mul_scalar(1, 0, s).unwrap();
            let got = e.read(1, vals.len()).unwrap();
            let want: Vec<i64> = vals.iter().map(|v| v * s).collect();
            assert_eq!(got, want, "scalar {s}");
        }
    }

    #[test]
    fn mul_dyn_unsigned() {
        let mut c = chip();
        let mut e = Engine::new(&mut c, 0, 8).unwrap();
        let a = vec![453i64, 0, 255, 101];
        let b = vec![453i64, 17, 255, 3];
        e.stage(0, &a).unwrap();
        e.stage(1, &b).unwrap();
        e.mul_dyn(2, 0, 1, 10).unwrap();
        let got = e.read(2, a.len()).unwrap();
        let want: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn restoring_division_per_lane() {
        let mut c = chip();
        let mut e = Engine::new(&mut c, 0, 8).unwrap();
        let num = vec![65536i64, 130816, 255, 0, 4096];
        let den = vec![257i64, 511, 256, 91, 1];
        e.stage(0, &num).unwrap();
        e.stage(1, &den).unwrap();
        e.div(2, 0, 1, 13).unwrap();
        let got = e.read(2, num.len()).unwrap();
        let want: Vec<i64> = num.iter().zip(&den).map(|(n, d)| n / d).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn variable_shift_and_abs() {
        let mut c = chip();
        let mut e = Engine::new(&mut c, 0, 8).unwrap();
        let src = vec![511i64, 511, 511, 480];
        let n = vec![0i64, 3, 8, 1];
        e.stage(0, &src).unwrap();
        e.stage(1, &n).unwrap();
        e.var_shr(2, 0, 1, 8).unwrap();
        assert_eq!(e.read(2, 4).unwrap(), vec![511, 63, 1, 240]);

        let vals = vec![-17i64, 17, 0, -1];
        e.stage(0, &vals).unwrap();
        e.abs(2, 0, 3).unwrap();
        assert_eq!(e.read(2, 4).unwrap(), vec![17, 17, 0, 1]);
        assert_eq!(e.read(3, 4).unwrap(), vec![1, 0, 0, 1]);
        e.apply_sign(4, 2, 3).unwrap();
        assert_eq!(e.read(4, 4).unwrap(), vals);
    }

    #[test]
    fn min_const_clamps() {
        let mut c = chip();
        let mut e = Engine::new(&mut c, 0, 8).unwrap();
        e.stage(0, &[100, 2047, 2048, 5000]).unwrap();
        e.min_const(0, 2047).unwrap();
        assert_eq!(e.read(0, 4).unwrap(), vec![100, 2047, 2047, 2047]);
    }

    #[test]
    fn costs_accumulate() {
        let mut c = chip();
        let mut e = Engine::new(&mut c, 0, 8).unwrap();
        e.stage(0, &[1, 2, 3]).unwrap();
        e.mul_scalar(1, 0, 369).unwrap();
        assert!(e.cost.cycles > 0);
        assert!(e.cost.energy.total_pj() > 0.0);
    }
}
