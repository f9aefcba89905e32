//! Tiny fixed-point CNN inference: 8x8x1 input, two valid 3x3 convolutions
//! (1 -> 6 -> 16 channels) with a 2x2 max-pool between them, and a 16 -> 10
//! fully connected classifier.
//!
//! Convolutions are lowered by Toeplitz expansion into matrices held in the
//! ACE and executed with `exec_mvm_api` (tiled and recombined by the chip
//! runtime). Bias add, ReLU, right-shift requantization, and max-pooling run
//! as DCE macro programs on staged activation registers in an otherwise idle
//! pipeline.
//!
//! Arithmetic contract (mirrored exactly by the host oracle): activations
//! and weights are integers; after each conv, per-channel bias is added,
//! negatives clamp to zero (ReLU), and the result is logically shifted right
//! by `frac_bits`. The FC layer adds bias without ReLU or shift.

use crate::chip::{Chip, MatrixHandle, Precision};
use crate::cost::CostReport;
use crate::dce::{MacroExec, MacroOp};
use crate::error::{Result, SimError};

/// Pipeline used for activation post-processing (an otherwise idle
/// digital pipeline).
const ACT_PIPE: usize = 8;
/// Working register width for activations (two's complement).
const ACT_BITS: usize = 32;

pub const INPUT_DIM: usize = 8;
pub const C1_OUT: usize = 6; // 6x6 spatial
pub const C2_OUT: usize = 16; // 1x1 spatial
pub const FC_OUT: usize = 10;
const C1_SPATIAL: usize = 6;
const POOLED_SPATIAL: usize = 3;
const POOLED_LEN: usize = C1_OUT * POOLED_SPATIAL * POOLED_SPATIAL; // 54

#[derive(Debug, Clone)]
pub struct TinyCnn {
    /// conv1\[ch\]\[ki\]\[kj\], 1 input channel.
    pub conv1_w: Vec<[[i64; 3]; 3]>,
    pub conv1_b: Vec<i64>,
    /// conv2\[ch_out\]\[ch_in\]\[ki\]\[kj\].
    pub conv2_w: Vec<Vec<[[i64; 3]; 3]>>,
    pub conv2_b: Vec<i64>,
    /// fc\[out\]\[in\].
    pub fc_w: Vec<[i64; C2_OUT]>,
    pub fc_b: Vec<i64>,
    pub frac_bits: u8,
}

impl TinyCnn {
    /// Deterministic small-signed-weight model from a seed.
    pub fn random(seed: u64) -> Self {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0xA5A5);
        let mut next = move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 33) % 63) as i64 - 31 // -31..=31, 6-bit signed
        };
        TinyCnn {
            conv1_w: (0..C1_OUT)
                .map(|_| {
                    let mut k = [[0i64; 3]; 3];
                    for row in &mut k {
                        for w in row {
                            *w = next();
                        }
                    }
                    k
                })
                .collect(),
            conv1_b: (0..C1_OUT).map(|_| next()).collect(),
            conv2_w: (0..C2_OUT)
                .map(|_| {
                    (0..C1_OUT)
                        .map(|_| {
                            let mut k = [[0i64; 3]; 3];
                            for row in &mut k {
                                for w in row {
                                    *w = next();
                                }
                            }
                            k
                        })
                        .collect()
                })
                .collect(),
            conv2_b: (0..C2_OUT).map(|_| next()).collect(),
            fc_w: (0..FC_OUT)
                .map(|_| {
                    let mut r = [0i64; C2_OUT];
                    for w in &mut r {
                        *w = next();
                    }
                    r
                })
                .collect(),
            fc_b: (0..FC_OUT).map(|_| next()).collect(),
            frac_bits: 4,
        }
    }

    /// Toeplitz expansion of conv1: 64 pixel rows x 216 output columns
    /// (column o = ch * 36 + output position).
    pub fn conv1_matrix(&self) -> Vec<Vec<i64>> {
        let out_cols = C1_OUT * C1_SPATIAL * C1_SPATIAL;
        let mut m = vec![vec![0i64; out_cols]; INPUT_DIM * INPUT_DIM];
        for ch in 0..C1_OUT {
            for pi in 0..C1_SPATIAL {
                for pj in 0..C1_SPATIAL {
                    let o = ch * C1_SPATIAL * C1_SPATIAL + pi * C1_SPATIAL + pj;
                    for ki in 0..3 {
                        for kj in 0..3 {
                            m[(pi + ki) * INPUT_DIM + (pj + kj)][o] = self.conv1_w[ch][ki][kj];
                        }
                    }
                }
            }
        }
        m
    }

    /// conv2 over the pooled 3x3x6 volume collapses to a dense 54 x 16 map
    /// (row = ch_in * 9 + ki * 3 + kj).
    pub fn conv2_matrix(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; C2_OUT]; POOLED_LEN];
        for (ch_out, per_in) in self.conv2_w.iter().enumerate() {
            for (ch_in, k) in per_in.iter().enumerate() {
                for ki in 0..3 {
                    for kj in 0..3 {
                        m[ch_in * 9 + ki * 3 + kj][ch_out] = k[ki][kj];
                    }
                }
            }
        }
        m
    }

    pub fn fc_matrix(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; FC_OUT]; C2_OUT];
        for (o, row) in self.fc_w.iter().enumerate() {
            for (i, &w) in row.iter().enumerate() {
                m[i][o] = w;
            }
        }
        m
    }

    /// Host fixed-point oracle, mirroring the machine arithmetic op for op.
    pub fn oracle(&self, image: &[i64]) -> Vec<i64> {
        let conv1 = self.conv1_matrix();
        let y1: Vec<i64> = (0..C1_OUT * 36)
            .map(|o| (0..64).map(|p| conv1[p][o] * image[p]).sum::<i64>())
            .collect();
        let post1: Vec<i64> = y1
            .iter()
            .enumerate()
            .map(|(o, &v)| ((v + self.conv1_b[o / 36]).max(0) as u64 >> self.frac_bits) as i64)
            .collect();
        let mut pooled = vec![0i64; POOLED_LEN];
        for ch in 0..C1_OUT {
            for pi in 0..POOLED_SPATIAL {
                for pj in 0..POOLED_SPATIAL {
                    let mut m = 0i64;
                    for di in 0..2 {
                        for dj in 0..2 {
                            let idx = ch * 36 + (2 * pi + di) * C1_SPATIAL + (2 * pj + dj);
                            m = m.max(post1[idx]);
                        }
                    }
                    pooled[ch * 9 + pi * 3 + pj] = m;
                }
            }
        }
        let conv2 = self.conv2_matrix();
        let y2: Vec<i64> = (0..C2_OUT)
            .map(|o| (0..POOLED_LEN).map(|p| conv2[p][o] * pooled[p]).sum::<i64>())
            .collect();
        let post2: Vec<i64> = y2
            .iter()
            .enumerate()
            .map(|(o, &v)| ((v + self.conv2_b[o]).max(0) as u64 >> self.frac_bits) as i64)
            .collect();
        (0..FC_OUT)
            .map(|o| {
                (0..C2_OUT)
                    .map(|i| self.fc_w[o][i] * post2[i])
                    .sum::<i64>()
                    + self.fc_b[o]
            })
            .collect()
    }
}

/// Matrix handles after `set_matrix` of the three layers.
pub struct CnnContext {
    pub conv1: MatrixHandle,
    pub conv2: MatrixHandle,
    pub fc: MatrixHandle,
    pub setup_cost: CostReport,
    /// HCT whose idle pipeline hosts activation post-processing.
    pub act_hct: usize,
}

pub fn cnn_setup(chip: &mut Chip, model: &TinyCnn) -> Result<CnnContext> {
    let mut setup_cost = CostReport::default();
    let (conv1, c) = chip.set_matrix(model.conv1_matrix(), 6, Precision::Med)?;
    setup_cost.extend(&c);
    let (conv2, c) = chip.set_matrix(model.conv2_matrix(), 6, Precision::Med)?;
    setup_cost.extend(&c);
    let (fc, c) = chip.set_matrix(model.fc_matrix(), 6, Precision::Med)?;
    setup_cost.extend(&c);
    let act_hct = chip.matrices[conv1.0].tiles[0].hct;
    Ok(CnnContext {
        conv1,
        conv2,
        fc,
        setup_cost,
        act_hct,
    })
}

fn act_macro(
    chip: &mut Chip,
    hct: usize,
    op: MacroOp,
    dst: usize,
    s1: usize,
    s2: usize,
    cost: &mut CostReport,
) -> Result<()> {
    let e = chip
        .hct_mut(hct)?
        .digital_macro(ACT_PIPE, op, dst, s1, s2, ACT_BITS, u64::MAX, 0)?;
    cost.extend(&exec_cost(&e));
    Ok(())
}

fn act_shift(
    chip: &mut Chip,
    hct: usize,
    col: usize,
    amount: i32,
    cost: &mut CostReport,
) -> Result<()> {
    let h = chip.hct_mut(hct)?;
    let params = h.dce.params;
    let e = h
        .dce
        .pipeline_mut(ACT_PIPE)
        .shift(&params, col, amount, ACT_BITS, u64::MAX, 0)?;
    cost.extend(&exec_cost(&e));
    Ok(())
}

fn exec_cost(e: &MacroExec) -> CostReport {
    CostReport {
        cycles: e.cost.cycles,
        energy: e.cost.energy,
    }
}

fn stage_lanes(
    chip: &mut Chip,
    hct: usize,
    reg: usize,
    values: &[i64],
    cost: &mut CostReport,
) -> Result<()> {
    let mask = (1u64 << ACT_BITS) - 1;
    let lanes: Vec<u64> = values.iter().map(|&v| (v as u64) & mask).collect();
    let h = chip.hct_mut(hct)?;
    h.dce
        .pipeline_mut(ACT_PIPE)
        .stage_register(reg, &lanes, ACT_BITS)?;
    let ev = crate::hct::TransferEvent {
        bytes: values.len() as u64 * (ACT_BITS as u64 / 8),
        shift_amount: 0,
        transpose: true,
    };
    cost.extend(&h.transfer(&ev, 0));
    Ok(())
}

fn read_lanes(chip: &mut Chip, hct: usize, reg: usize, n: usize) -> Result<Vec<i64>> {
    let spec = crate::fixed::FixedPointSpec::new(ACT_BITS as u8, true, 0);
    let h = chip.hct_mut(hct)?;
    let raw = h.dce.pipeline(ACT_PIPE).read_register(reg, ACT_BITS);
    Ok(raw
        .into_iter()
        .take(n)
        .map(|v| crate::fixed::decode_int(v, &spec))
        .collect())
}

/// Bias add + optional ReLU + optional logical right shift, as DCE macros
/// over 64-lane chunks. Registers: 0 = x, 1 = bias, 2 = zero, 3 = sign
/// scratch, 4 = result.
fn post_process(
    chip: &mut Chip,
    hct: usize,
    values: &[i64],
    bias: &[i64],
    relu: bool,
    shift: u8,
    cost: &mut CostReport,
) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(values.len());
    for (chunk_vals, chunk_bias) in values.chunks(64).zip(bias.chunks(64)) {
        let n = chunk_vals.len();
        stage_lanes(chip, hct, 0, chunk_vals, cost)?;
        stage_lanes(chip, hct, 1, chunk_bias, cost)?;
        stage_lanes(chip, hct, 2, &vec![0; n], cost)?;
        act_macro(chip, hct, MacroOp::Add, 4, 0, 1, cost)?;
        if relu {
            // sign bit -> lane selector; Mux keeps zero where negative
            act_macro(chip, hct, MacroOp::Copy, 3, 4, 4, cost)?;
            act_shift(chip, hct, 3, -((ACT_BITS as i32) - 1), cost)?;
            act_macro(chip, hct, MacroOp::Mux { sel: 3 }, 4, 2, 4, cost)?;
        }
        if shift > 0 {
            act_shift(chip, hct, 4, -(shift as i32), cost)?;
        }
        out.extend(read_lanes(chip, hct, 4, n)?);
    }
    Ok(out)
}

/// 2x2 max-pool of the conv1 activation volume: the four pool positions are
/// gathered into lane-aligned registers and reduced with CMP_GE + MUX pairs
/// (values are non-negative post-ReLU, so the unsigned compare is exact).
fn max_pool(
    chip: &mut Chip,
    hct: usize,
    post1: &[i64],
    cost: &mut CostReport,
) -> Result<Vec<i64>> {
    let gather = |di: usize, dj: usize| -> Vec<i64> {
        let mut v = Vec::with_capacity(POOLED_LEN);
        for ch in 0..C1_OUT {
            for pi in 0..POOLED_SPATIAL {
                for pj in 0..POOLED_SPATIAL {
                    v.push(post1[ch * 36 + (2 * pi + di) * C1_SPATIAL + (2 * pj + dj)]);
                }
            }
        }
        v
    };
    // registers: 0,1 = operands, 3 = selector, 4 = running max
    stage_lanes(chip, hct, 4, &gather(0, 0), cost)?;
    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
        stage_lanes(chip, hct, 1, &gather(di, dj), cost)?;
        act_macro(chip, hct, MacroOp::CmpGe, 3, 4, 1, cost)?;
        act_macro(chip, hct, MacroOp::Mux { sel: 3 }, 4, 4, 1, cost)?;
    }
    read_lanes(chip, hct, 4, POOLED_LEN)
}

/// Run inference over a batch of 8x8 images (row-major, 64 pixels each).
pub fn cnn_run_inference(
    chip: &mut Chip,
    model: &TinyCnn,
    images: &[Vec<i64>],
) -> Result<(Vec<Vec<i64>>, CostReport)> {
    for img in images {
        if img.len() != INPUT_DIM * INPUT_DIM {
            return Err(SimError::Shape {
                got: img.len(),
                want: INPUT_DIM * INPUT_DIM,
            });
        }
    }
    let ctx = cnn_setup(chip, model)?;
    let mut cost = ctx.setup_cost.clone();
    let mut logits = Vec::with_capacity(images.len());
    let bias1: Vec<i64> = (0..C1_OUT * 36).map(|o| model.conv1_b[o / 36]).collect();
    for img in images {
        let r1 = chip.exec_mvm_api(ctx.conv1, img)?;
        cost.extend(&r1.cost);
        let post1 = post_process(
            chip,
            ctx.act_hct,
            &r1.values,
            &bias1,
            true,
            model.frac_bits,
            &mut cost,
        )?;
        let pooled = max_pool(chip, ctx.act_hct, &post1, &mut cost)?;
        let r2 = chip.exec_mvm_api(ctx.conv2, &pooled)?;
        cost.extend(&r2.cost);
        let post2 = post_process(
            chip,
            ctx.act_hct,
            &r2.values,
            &model.conv2_b,
            true,
            model.frac_bits,
            &mut cost,
        )?;
        let r3 = chip.exec_mvm_api(ctx.fc, &post2)?;
        cost.extend(&r3.cost);
        let out = post_process(chip, ctx.act_hct, &r3.values, &model.fc_b, false, 0, &mut cost)?;
        logits.push(out);
    }
    Ok((logits, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{NoiseConfig, SimConfig};

    fn quiet_chip() -> Chip {
        let mut cfg = SimConfig::default();
        cfg.noise = NoiseConfig::off();
        cfg.set("geometry.hct_count", "8").unwrap();
        Chip::new(&cfg)
    }

    fn images(seed: u64, n: usize) -> Vec<Vec<i64>> {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(3);
        (0..n)
            .map(|_| {
                (0..64)
                    .map(|_| {
                        s = s
                            .wrapping_mul(6364136223846793005)
                            .wrapping_add(1442695040888963407);
                        ((s >> 40) & 0xf) as i64
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn zero_image_zero_bias_gives_zero_logits() {
        let mut model = TinyCnn::random(1);
        model.conv1_b.iter_mut().for_each(|b| *b = 0);
        model.conv2_b.iter_mut().for_each(|b| *b = 0);
        model.fc_b.iter_mut().for_each(|b| *b = 0);
        let mut chip = quiet_chip();
        let (logits, _) = cnn_run_inference(&mut chip, &model, &[vec![0; 64]]).unwrap();
        assert_eq!(logits[0], vec![0i64; FC_OUT]);
    }

    #[test]
    fn one_hot_image_stamps_the_kernel() {
        // impulse response of conv1: output at position (pi,pj) sees the
        // kernel weight w[ch][i-pi][j-pj] for an impulse at pixel (i,j)
        let model = TinyCnn::random(2);
        let m = model.conv1_matrix();
        let (i, j) = (4, 4);
        for ch in 0..C1_OUT {
            for ki in 0..3 {
                for kj in 0..3 {
                    let (pi, pj) = (i - ki, j - kj);
                    let o = ch * 36 + pi * C1_SPATIAL + pj;
                    assert_eq!(m[i * 8 + j][o], model.conv1_w[ch][ki][kj]);
                }
            }
        }
    }

    #[test]
    fn machine_logits_match_fixed_point_oracle() {
        let model = TinyCnn::random(3);
        let imgs = images(7, 8);
        let mut chip = quiet_chip();
        let (logits, cost) = cnn_run_inference(&mut chip, &model, &imgs).unwrap();
        for (img, got) in imgs.iter().zip(&logits) {
            assert_eq!(*got, model.oracle(img));
        }
        assert!(cost.cycles > 0);
        assert!(cost.energy.total_pj() > 0.0);
    }

    #[test]
    fn shape_error_on_bad_image() {
        let model = TinyCnn::random(4);
        let mut chip = quiet_chip();
        assert!(matches!(
            cnn_run_inference(&mut chip, &model, &[vec![0; 63]]),
            Err(SimError::Shape { got: 63, want: 64 })
        ));
    }
}
