//! Analog compute element: crossbars of differential cell pairs executing
//! bit-sliced matrix-vector multiplies, plus the ADC models that digitize
//! bitline currents.
//!
//! Value fidelity and conversion latency are decoupled: digitization always
//! quantizes to the nearest integer accumulation level (the ADC is provisioned
//! for the programmed configuration's full range), while the SAR/ramp choice
//! governs latency and energy. Non-idealities are parameterized proxies:
//! bounded per-device programming error, bounded per-read bitline
//! perturbation, and a linear IR-drop droop proportional to the positive-rail
//! current of each bitline.

use crate::config::NoiseConfig;
use crate::cost::{CostReport, CostTable, EnergyBreakdown};
use crate::error::{Result, SimError};
use crate::slicing::SlicePlan;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::fmt;
use std::str::FromStr;

/// Which ADC flavor an ACE is built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AdcKind {
    Sar,
    Ramp,
}

impl fmt::Display for AdcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdcKind::Sar => "sar",
            AdcKind::Ramp => "ramp",
        })
    }
}

impl FromStr for AdcKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sar" => Ok(AdcKind::Sar),
            "ramp" => Ok(AdcKind::Ramp),
            other => Err(SimError::Config(format!("unknown ADC kind {other:?}"))),
        }
    }
}

/// How 0/1 bit matrices are coded into differential pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Remap {
    /// b stored as-is: 1 -> (+1, 0), 0 -> (0, 0).
    Raw,
    /// b stored as b - 1/2: 1 -> (+1/2, 0), 0 -> (0, +1/2 on the negative
    /// rail). Halves the worst-case positive-rail current; the missing k/2 is
    /// restored digitally by [`compensate`].
    Symmetric,
}

/// Behavioral ADC: latency/energy by kind, value by nearest-level quantization
/// over the provisioned window `[min_level, max_level]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcModel {
    pub kind: AdcKind,
    pub resolution_bits: u8,
    /// Converters per ACE (2 SAR units, 1 ramp unit).
    pub units: u32,
    /// Ramp-only: stop the reference sweep after this many levels.
    pub early_termination_levels: Option<u64>,
    pub min_level: i64,
    pub max_level: i64,
}

impl AdcModel {
    pub fn new(kind: AdcKind, resolution_bits: u8, min_level: i64, max_level: i64) -> Self {
        Self {
            kind,
            resolution_bits,
            units: match kind {
                AdcKind::Sar => 2,
                AdcKind::Ramp => 1,
            },
            early_termination_levels: None,
            min_level,
            max_level,
        }
    }

    pub fn with_early_termination(mut self, levels: u64) -> Self {
        self.early_termination_levels = Some(levels);
        self
    }

    /// Conversion latency for one digitization pass.
    pub fn conversion_cycles(&self, active_bitlines: usize, cost: &CostTable) -> u64 {
        match self.kind {
            AdcKind::Sar => {
                (active_bitlines as u64).div_ceil(self.units as u64) * cost.sar_conversion_cycles
            }
            AdcKind::Ramp => self
                .early_termination_levels
                .unwrap_or(cost.ramp_conversion_cycles),
        }
    }
}

/// One crossbar of differential conductance pairs. Programmed state carries
/// the frozen per-device programming error; ideal codes are kept for
/// noise-free introspection and D->A round trips.
#[derive(Debug, Clone)]
pub struct ConductanceArray {
    pub rows: usize,
    pub cols: usize,
    /// Programmed conductances (level units), row-major.
    pos: Vec<f64>,
    neg: Vec<f64>,
    /// Ideal signed cell values before the differential split.
    ideal: Vec<i64>,
    pub remap: Remap,
}

/// Draw a zero-mean normal deviate and clamp it to +/- sigma, so device
/// errors are bounded (a formed cell is always within one verify margin).
fn clamped_error(rng: &mut ChaCha12Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let n = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    (n * sigma).clamp(-sigma, sigma)
}

impl ConductanceArray {
    /// Program one slice grid (`values[row][col]`, signed integers for RAW,
    /// strictly 0/1 for SYMMETRIC). Each pair holds |v| on the
    /// sign-appropriate rail; programming error is drawn once per formed
    /// device, zero-conductance devices stay exactly zero.
    pub fn program(
        values: &[Vec<i64>],
        remap: Remap,
        noise: &NoiseConfig,
        rng: &mut ChaCha12Rng,
    ) -> Result<Self> {
        let rows = values.len();
        let cols = values.first().map_or(0, |r| r.len());
        let mut pos = vec![0.0; rows * cols];
        let mut neg = vec![0.0; rows * cols];
        let mut ideal = vec![0i64; rows * cols];
        for (r, row) in values.iter().enumerate() {
            if row.len() != cols {
                return Err(SimError::Shape {
                    got: row.len(),
                    want: cols,
                });
            }
            for (c, &v) in row.iter().enumerate() {
                let i = r * cols + c;
                ideal[i] = v;
                let (p, n) = match remap {
                    Remap::Raw => {
                        if v >= 0 {
                            (v as f64, 0.0)
                        } else {
                            (0.0, (-v) as f64)
                        }
                    }
                    Remap::Symmetric => match v {
                        1 => (0.5, 0.0),
                        0 => (0.0, 0.5),
                        other => {
                            return Err(SimError::Config(format!(
                                "SYMMETRIC remap requires 0/1 cells, got {other}"
                            )))
                        }
                    },
                };
                pos[i] = if p != 0.0 {
                    p + clamped_error(rng, noise.programming_sigma)
                } else {
                    0.0
                };
                neg[i] = if n != 0.0 {
                    n + clamped_error(rng, noise.programming_sigma)
                } else {
                    0.0
                };
            }
        }
        Ok(Self {
            rows,
            cols,
            pos,
            neg,
            ideal,
            remap,
        })
    }

    /// Ideal stored value of one cell (g_plus - g_minus before the remap's
    /// digital compensation).
    pub fn ideal_value(&self, row: usize, col: usize) -> i64 {
        self.ideal[row * self.cols + col]
    }

    /// Positive-rail current per bitline for a 0/1 input vector, before any
    /// droop (exposed for the remap-motivation invariant).
    pub fn positive_rail(&self, input_bits: &[bool]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &bit) in input_bits.iter().enumerate() {
            if bit {
                for c in 0..self.cols {
                    out[c] += self.pos[r * self.cols + c];
                }
            }
        }
        out
    }

    /// Apply one bit-vector on the wordlines and accumulate bitline sums.
    ///
    /// Per bitline: sum of stored differential values over active rows, plus
    /// bounded read noise, minus `ir_drop_alpha * positive_rail_current`.
    /// One wordline-active cycle; row periphery energy per active row.
    pub fn apply_input_bits(
        &self,
        input_bits: &[bool],
        noise: &NoiseConfig,
        rng: &mut ChaCha12Rng,
        cost: &CostTable,
    ) -> Result<(Vec<f64>, CostReport)> {
        if input_bits.len() != self.rows {
            return Err(SimError::Shape {
                got: input_bits.len(),
                want: self.rows,
            });
        }
        let mut pos_cur = vec![0.0; self.cols];
        let mut neg_cur = vec![0.0; self.cols];
        let mut active_rows = 0u64;
        for (r, &bit) in input_bits.iter().enumerate() {
            if bit {
                active_rows += 1;
                let base = r * self.cols;
                for c in 0..self.cols {
                    pos_cur[c] += self.pos[base + c];
                    neg_cur[c] += self.neg[base + c];
                }
            }
        }
        let sums = (0..self.cols)
            .map(|c| {
                pos_cur[c] - neg_cur[c] + clamped_error(rng, noise.read_sigma)
                    - noise.ir_drop_alpha * pos_cur[c]
            })
            .collect();
        let mut energy = EnergyBreakdown::default();
        energy.row_periphery_pj = cost.row_periphery_pj * active_rows as f64;
        Ok((
            sums,
            CostReport {
                cycles: 1,
                energy,
            },
        ))
    }
}

/// Quantize bitline sums to integer levels and account the conversion.
///
/// SAR converts one bitline per unit per cycle (multiplexed); ramp sweeps all
/// bitlines concurrently through `2^resolution` reference levels unless early
/// termination is set. A sum outside the provisioned window (beyond the
/// half-level capture range) raises [`SimError::AdcRange`].
pub fn digitize(
    sums: &[f64],
    adc: &AdcModel,
    active_bitlines: usize,
    cost: &CostTable,
) -> Result<(Vec<i64>, CostReport)> {
    let mut out = Vec::with_capacity(sums.len());
    for &s in sums {
        if s < adc.min_level as f64 - 0.5 || s > adc.max_level as f64 + 0.5 {
            return Err(SimError::AdcRange {
                sum: s,
                min: adc.min_level,
                max: adc.max_level,
            });
        }
        out.push((s.round() as i64).clamp(adc.min_level, adc.max_level));
    }
    let cycles = adc.conversion_cycles(active_bitlines, cost);
    let mut energy = EnergyBreakdown::default();
    let per_unit = match adc.kind {
        AdcKind::Sar => cost.sar_adc_pj,
        AdcKind::Ramp => cost.ramp_adc_pj,
    };
    energy.adc_pj = per_unit * cycles as f64 * adc.units as f64;
    energy.sample_hold_pj = cost.sample_hold_pj * active_bitlines as f64;
    Ok((out, CostReport { cycles, energy }))
}

/// Undo the SYMMETRIC remap digitally: each output observed `d - k/2`, where
/// `k` is the number of 1s in the input vector; add `k/2` back. `k` must be
/// even for an integer-coded correction.
pub fn compensate(outputs: &mut [i64], ones_in_input: u64) -> Result<()> {
    if ones_in_input % 2 != 0 {
        return Err(SimError::Parity { k: ones_in_input });
    }
    let half = (ones_in_input / 2) as i64;
    for o in outputs.iter_mut() {
        *o += half;
    }
    Ok(())
}

/// A logical matrix programmed across one ACE's arrays, one slice per array.
///
/// Element (r, c) of the matrix is split by `plan` into LSB-first slices;
/// slice `i` of every element lives in array `i` at the same (row, col).
/// Signed elements store |v| slices on the sign-appropriate rail.
#[derive(Debug, Clone)]
pub struct AnalogMatrix {
    pub rows: usize,
    pub cols: usize,
    pub plan: SlicePlan,
    pub remap: Remap,
    pub arrays: Vec<ConductanceArray>,
    /// Ideal logical matrix, kept for D->A round trips and reprogramming.
    pub values: Vec<Vec<i64>>,
}

impl AnalogMatrix {
    pub fn program(
        values: Vec<Vec<i64>>,
        plan: SlicePlan,
        remap: Remap,
        noise: &NoiseConfig,
        rng: &mut ChaCha12Rng,
    ) -> Result<Self> {
        let rows = values.len();
        let cols = values.first().map_or(0, |r| r.len());
        let n_slices = plan.slice_count();
        let mask = (1u64 << plan.bits_per_cell) - 1;
        let mut arrays = Vec::with_capacity(n_slices);
        for slice in 0..n_slices {
            let grid: Vec<Vec<i64>> = values
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&v| {
                            let mag = v.unsigned_abs();
                            let s = ((mag >> (slice as u32 * plan.bits_per_cell as u32)) & mask)
                                as i64;
                            if v < 0 {
                                -s
                            } else {
                                s
                            }
                        })
                        .collect()
                })
                .collect();
            arrays.push(ConductanceArray::program(&grid, remap, noise, rng)?);
        }
        Ok(Self {
            rows,
            cols,
            plan,
            remap,
            arrays,
            values,
        })
    }

    /// Largest possible |accumulation| on one bitline of one slice array,
    /// used to provision the ADC window.
    pub fn full_scale(&self) -> i64 {
        let cell_max = ((1u64 << self.plan.bits_per_cell) - 1) as i64;
        self.rows as i64 * cell_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(7)
    }

    fn noise_off() -> NoiseConfig {
        NoiseConfig::off()
    }

    #[test]
    fn zero_input_gives_zero_sums() {
        let m = vec![vec![3, 1], vec![2, 2]];
        let arr = ConductanceArray::program(&m, Remap::Raw, &noise_off(), &mut rng()).unwrap();
        let (sums, _) = arr
            .apply_input_bits(&[false, false], &noise_off(), &mut rng(), &CostTable::default())
            .unwrap();
        assert_eq!(sums, vec![0.0, 0.0]);
    }

    #[test]
    fn one_hot_input_selects_row() {
        let m = vec![vec![3, -1], vec![2, 5]];
        let arr = ConductanceArray::program(&m, Remap::Raw, &noise_off(), &mut rng()).unwrap();
        let (sums, _) = arr
            .apply_input_bits(&[false, true], &noise_off(), &mut rng(), &CostTable::default())
            .unwrap();
        assert_eq!(sums, vec![2.0, 5.0]);
    }

    #[test]
    fn symmetric_stores_half_codes() {
        let m = vec![vec![1, 0]];
        let arr = ConductanceArray::program(&m, Remap::Symmetric, &noise_off(), &mut rng()).unwrap();
        // bit 1 -> +1/2 on the positive rail; bit 0 -> +1/2 on the negative
        let (sums, _) = arr
            .apply_input_bits(&[true], &noise_off(), &mut rng(), &CostTable::default())
            .unwrap();
        assert_eq!(sums, vec![0.5, -0.5]);
        assert!(matches!(
            ConductanceArray::program(&[vec![2]], Remap::Symmetric, &noise_off(), &mut rng()),
            Err(SimError::Config(_))
        ));
    }

    #[test]
    fn symmetric_halves_positive_rail_current() {
        // strictly-positive 1-bit matrix: RAW positive rail carries the full
        // dot product, SYMMETRIC only half of it
        let m: Vec<Vec<i64>> = vec![vec![1; 4]; 8];
        let raw = ConductanceArray::program(&m, Remap::Raw, &noise_off(), &mut rng()).unwrap();
        let sym = ConductanceArray::program(&m, Remap::Symmetric, &noise_off(), &mut rng()).unwrap();
        let input = vec![true; 8];
        for (r, s) in raw.positive_rail(&input).iter().zip(sym.positive_rail(&input)) {
            assert!(s < *r, "symmetric rail {s} !< raw rail {r}");
            assert_eq!(s, r / 2.0);
        }
    }

    #[test]
    fn digitize_exact_on_levels() {
        let adc = AdcModel::new(AdcKind::Sar, 8, 0, 255);
        let (out, _) = digitize(&[0.0, 7.0, 254.6], &adc, 3, &CostTable::default()).unwrap();
        assert_eq!(out, vec![0, 7, 255]);
    }

    #[test]
    fn digitize_monotone() {
        let adc = AdcModel::new(AdcKind::Sar, 8, -8, 8);
        let mut last = i64::MIN;
        let mut x = -8.0;
        while x <= 8.0 {
            let (out, _) = digitize(&[x], &adc, 1, &CostTable::default()).unwrap();
            assert!(out[0] >= last);
            last = out[0];
            x += 0.03125;
        }
    }

    #[test]
    fn digitize_range_error() {
        let adc = AdcModel::new(AdcKind::Sar, 2, -2, 2);
        assert!(matches!(
            digitize(&[2.6], &adc, 1, &CostTable::default()),
            Err(SimError::AdcRange { .. })
        ));
    }

    #[test]
    fn adc_latencies_match_published_numbers() {
        let cost = CostTable::default();
        let sar = AdcModel::new(AdcKind::Sar, 8, 0, 255);
        assert_eq!(sar.conversion_cycles(64, &cost), 32); // 64 bitlines / 2 units
        assert_eq!(sar.conversion_cycles(1, &cost), 1);
        let ramp = AdcModel::new(AdcKind::Ramp, 8, 0, 255);
        assert_eq!(ramp.conversion_cycles(64, &cost), 256);
        assert_eq!(
            ramp.with_early_termination(4).conversion_cycles(64, &cost),
            4
        );
    }

    #[test]
    fn adc_energy_per_busy_cycle_per_unit() {
        let cost = CostTable::default();
        let adc = AdcModel::new(AdcKind::Sar, 8, 0, 255);
        let (_, report) = digitize(&[1.0; 64], &adc, 64, &cost).unwrap();
        assert_eq!(report.cycles, 32);
        let expected = cost.sar_adc_pj * 32.0 * 2.0 + cost.sample_hold_pj * 64.0;
        assert!((report.energy.adc_pj + report.energy.sample_hold_pj - expected).abs() < 1e-12);
    }

    #[test]
    fn compensate_restores_dot_product() {
        // observed r = d - k/2 for a k-ones input
        let mut out = vec![-2, 0, 2];
        compensate(&mut out, 4).unwrap();
        assert_eq!(out, vec![0, 2, 4]);
        assert!(matches!(
            compensate(&mut out, 3),
            Err(SimError::Parity { k: 3 })
        ));
    }

    #[test]
    fn programming_error_is_bounded() {
        let noise = NoiseConfig::default();
        let m: Vec<Vec<i64>> = vec![vec![1; 16]; 16];
        let mut r = rng();
        let arr = ConductanceArray::program(&m, Remap::Raw, &noise, &mut r).unwrap();
        let one_hot: Vec<Vec<bool>> = (0..16)
            .map(|i| (0..16).map(|j| j == i).collect())
            .collect();
        for input in &one_hot {
            let (sums, _) = arr
                .apply_input_bits(input, &NoiseConfig::off(), &mut r, &CostTable::default())
                .unwrap();
            for s in sums {
                assert!((s - 1.0).abs() <= noise.programming_sigma + 1e-12);
            }
        }
    }
}
