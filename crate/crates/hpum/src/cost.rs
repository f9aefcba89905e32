//! Per-component energy and latency constants, and the cost reports
//! accumulated from them.
//!
//! The chip runs at 1 GHz (1 ns cycle); energies are stored as picojoules per
//! active cycle, derived from the published per-component mW figures.

use crate::error::{Result, SimError};
use serde::Serialize;

/// Energy-per-active-cycle and latency constants for one HCT.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    /// pJ per array executing one Boolean microop.
    pub digital_array_boolean_pj: f64,
    /// pJ per busy cycle of a pipeline's control logic.
    pub pipeline_ctrl_pj: f64,
    /// pJ per busy cycle per SAR ADC unit.
    pub sar_adc_pj: f64,
    /// pJ per busy cycle per ramp ADC unit.
    pub ramp_adc_pj: f64,
    /// pJ per wordline-active cycle.
    pub row_periphery_pj: f64,
    /// pJ per sample-and-hold conversion.
    pub sample_hold_pj: f64,
    /// pJ per issue cycle of a front end (one front end serves 8 HCTs).
    pub frontend_pj: f64,
    /// Cycles for one SAR conversion (one bitline per unit).
    pub sar_conversion_cycles: u64,
    /// Cycles for a full ramp conversion (all bitlines concurrently).
    pub ramp_conversion_cycles: u64,
    /// ACE<->DCE transfer network bandwidth.
    pub transfer_bytes_per_cycle: u64,
    /// Fixed per-array cost of reprogramming analog cells (D->A moves, updates).
    pub reprogram_cycles_per_array: u64,
    /// pJ per array reprogram.
    pub reprogram_pj_per_array: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            digital_array_boolean_pj: 8.0,
            pipeline_ctrl_pj: 1.6,
            sar_adc_pj: 1.5,
            ramp_adc_pj: 1.2,
            row_periphery_pj: 0.7,
            sample_hold_pj: 2.1e-8,
            frontend_pj: 63.0,
            sar_conversion_cycles: 1,
            ramp_conversion_cycles: 256,
            transfer_bytes_per_cycle: 8,
            reprogram_cycles_per_array: 10_000,
            reprogram_pj_per_array: 10_000.0,
        }
    }
}

impl CostTable {
    /// Apply a `cost.<key>` config override.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if value <= 0.0 {
            return Err(SimError::Config(format!(
                "cost entry {key} must be strictly positive"
            )));
        }
        match key {
            "digital_array_boolean_pj" => self.digital_array_boolean_pj = value,
            "pipeline_ctrl_pj" => self.pipeline_ctrl_pj = value,
            "sar_adc_pj" => self.sar_adc_pj = value,
            "ramp_adc_pj" => self.ramp_adc_pj = value,
            "row_periphery_pj" => self.row_periphery_pj = value,
            "sample_hold_pj" => self.sample_hold_pj = value,
            "frontend_pj" => self.frontend_pj = value,
            "sar_conversion_cycles" => self.sar_conversion_cycles = value as u64,
            "ramp_conversion_cycles" => self.ramp_conversion_cycles = value as u64,
            "transfer_bytes_per_cycle" => self.transfer_bytes_per_cycle = value as u64,
            "reprogram_cycles_per_array" => self.reprogram_cycles_per_array = value as u64,
            "reprogram_pj_per_array" => self.reprogram_pj_per_array = value,
            _ => return Err(SimError::Config(format!("unknown cost key: cost.{key}"))),
        }
        Ok(())
    }
}

/// Energy accumulators, one slot per hardware component class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub digital_array_pj: f64,
    pub pipeline_ctrl_pj: f64,
    pub adc_pj: f64,
    pub row_periphery_pj: f64,
    pub sample_hold_pj: f64,
    pub frontend_pj: f64,
    pub reprogram_pj: f64,
}

impl EnergyBreakdown {
    pub fn total_pj(&self) -> f64 {
        self.digital_array_pj
            + self.pipeline_ctrl_pj
            + self.adc_pj
            + self.row_periphery_pj
            + self.sample_hold_pj
            + self.frontend_pj
            + self.reprogram_pj
    }

    pub fn add(&mut self, other: &EnergyBreakdown) {
        self.digital_array_pj += other.digital_array_pj;
        self.pipeline_ctrl_pj += other.pipeline_ctrl_pj;
        self.adc_pj += other.adc_pj;
        self.row_periphery_pj += other.row_periphery_pj;
        self.sample_hold_pj += other.sample_hold_pj;
        self.frontend_pj += other.frontend_pj;
        self.reprogram_pj += other.reprogram_pj;
    }
}

/// Cycle and energy totals for one operation or run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostReport {
    pub cycles: u64,
    pub energy: EnergyBreakdown,
}

impl CostReport {
    /// Sequential composition: cycles add.
    pub fn extend(&mut self, other: &CostReport) {
        self.cycles += other.cycles;
        self.energy.add(&other.energy);
    }

    /// Parallel composition: cycles take the max, energy adds.
    pub fn join(&mut self, other: &CostReport) {
        self.cycles = self.cycles.max(other.cycles);
        self.energy.add(&other.energy);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_constants() {
        let t = CostTable::default();
        assert_eq!(t.digital_array_boolean_pj, 8.0);
        assert_eq!(t.pipeline_ctrl_pj, 1.6);
        assert_eq!(t.sar_adc_pj, 1.5);
        assert_eq!(t.ramp_adc_pj, 1.2);
        assert_eq!(t.row_periphery_pj, 0.7);
        assert_eq!(t.sample_hold_pj, 2.1e-8);
        assert_eq!(t.frontend_pj, 63.0);
        assert_eq!(t.sar_conversion_cycles, 1);
        assert_eq!(t.ramp_conversion_cycles, 256);
        assert_eq!(t.transfer_bytes_per_cycle, 8);
    }

    #[test]
    fn override_by_key() {
        let mut t = CostTable::default();
        t.set("sar_adc_pj", 2.0).unwrap();
        assert_eq!(t.sar_adc_pj, 2.0);
        assert!(t.set("sar_adc_pj", 0.0).is_err());
        assert!(t.set("bogus", 1.0).is_err());
    }

    #[test]
    fn breakdown_sums_exactly() {
        let mut e = EnergyBreakdown::default();
        e.digital_array_pj = 1.25;
        e.adc_pj = 0.5;
        e.frontend_pj = 63.0;
        assert_eq!(e.total_pj(), 1.25 + 0.5 + 63.0);
    }
}
