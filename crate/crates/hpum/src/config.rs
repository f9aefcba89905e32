//! Flat `key = value` configuration ingestion.
//!
//! Documented keys (defaults in parentheses):
//!
//! ```text
//! cost.digital_array_boolean_pj (8.0)    cost.pipeline_ctrl_pj (1.6)
//! cost.sar_adc_pj (1.5)                  cost.ramp_adc_pj (1.2)
//! cost.row_periphery_pj (0.7)            cost.sample_hold_pj (2.1e-8)
//! cost.frontend_pj (63.0)                cost.sar_conversion_cycles (1)
//! cost.ramp_conversion_cycles (256)      cost.transfer_bytes_per_cycle (8)
//! cost.reprogram_cycles_per_array (10000) cost.reprogram_pj_per_array (10000)
//! noise.programming_sigma (0.03)         noise.read_sigma (0.02)
//! noise.ir_drop_alpha (0.15)             noise.seed (0)
//! geometry.hct_count (1860 SAR / 1660 ramp) geometry.ace_arrays (64)
//! geometry.dce_pipelines (64)            geometry.pipeline_depth (64)
//! geometry.max_active_pipelines (0 = unlimited)
//! adc.kind (sar|ramp, sar)               adc.resolution_bits (8)
//! dce.logic_family (oscar|ideal, oscar)  dce.latency_multiplier (1)
//! dce.element_load_cycles (3)
//! dce.microops.{not,or,and,xor,add,sub,copy,cmp_ge,mux} (family defaults)
//! ```

use crate::ace::AdcKind;
use crate::cost::CostTable;
use crate::error::{Result, SimError};
use std::path::Path;

/// Parameterized proxies for analog non-idealities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// One-time conductance programming error, clamped to +/- sigma (level units).
    pub programming_sigma: f64,
    /// Per-read bitline perturbation, clamped to +/- sigma.
    pub read_sigma: f64,
    /// Linear droop coefficient applied to the positive-rail bitline current.
    pub ir_drop_alpha: f64,
    pub rng_seed: u64,
}

impl NoiseConfig {
    /// All-zero config: bit-exact ideal arithmetic.
    pub fn off() -> Self {
        Self {
            programming_sigma: 0.0,
            read_sigma: 0.0,
            ir_drop_alpha: 0.0,
            rng_seed: 0,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        // Calibrated so that a RAW 0/1 column mapping misreads at full rail
        // current while the symmetric remap stays below half an ADC level.
        Self {
            programming_sigma: 0.03,
            read_sigma: 0.02,
            ir_drop_alpha: 0.15,
            rng_seed: 0,
        }
    }
}

/// Which digital logic family the DCE models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicFamily {
    /// NOR-only ReRAM family.
    Oscar,
    /// Any two-input Boolean op in one microop (sweep comparison point only).
    Ideal,
}

/// Microop counts per bit for each macro, by logic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacroCosts {
    pub not: u32,
    pub or: u32,
    pub and: u32,
    pub xor: u32,
    pub add: u32,
    pub sub: u32,
    pub copy: u32,
    pub cmp_ge: u32,
    pub mux: u32,
}

impl MacroCosts {
    pub fn for_family(family: LogicFamily) -> Self {
        match family {
            // Canonical minimal NOR networks.
            LogicFamily::Oscar => Self {
                not: 1,
                or: 2,
                and: 3,
                xor: 5,
                add: 9,
                sub: 10,
                copy: 2,
                cmp_ge: 12,
                mux: 10,
            },
            LogicFamily::Ideal => Self {
                not: 1,
                or: 1,
                and: 1,
                xor: 1,
                add: 5,
                sub: 6,
                copy: 1,
                cmp_ge: 7,
                mux: 4,
            },
        }
    }
}

/// Fixed tile geometry, overridable for design-space sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub hct_count: usize,
    pub ace_arrays: usize,
    pub dce_pipelines: usize,
    pub pipeline_depth: usize,
    pub array_rows: usize,
    pub array_cols: usize,
    /// Thermal cap on concurrently active pipelines per DCE (0 = unlimited).
    pub max_active_pipelines: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            hct_count: 1860,
            ace_arrays: 64,
            dce_pipelines: 64,
            pipeline_depth: 64,
            array_rows: 64,
            array_cols: 64,
            max_active_pipelines: 0,
        }
    }
}

/// Everything a simulation run needs, assembled from defaults plus overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cost: CostTable,
    pub noise: NoiseConfig,
    pub geometry: Geometry,
    pub adc_kind: AdcKind,
    pub adc_resolution_bits: u8,
    pub logic_family: LogicFamily,
    pub macro_costs: MacroCosts,
    /// Multiplier on every digital microop latency (default 1).
    pub dce_latency_multiplier: u32,
    pub element_load_cycles: u64,
    pub iiu_enabled: bool,
    hct_count_overridden: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cost: CostTable::default(),
            noise: NoiseConfig::default(),
            geometry: Geometry::default(),
            adc_kind: AdcKind::Sar,
            adc_resolution_bits: 8,
            logic_family: LogicFamily::Oscar,
            macro_costs: MacroCosts::for_family(LogicFamily::Oscar),
            dce_latency_multiplier: 1,
            element_load_cycles: 3,
            iiu_enabled: true,
            hct_count_overridden: false,
        }
    }
}

impl SimConfig {
    /// Iso-area default: an SAR chip holds 1860 HCTs, a ramp chip 1660.
    pub fn with_adc(mut self, kind: AdcKind) -> Self {
        self.adc_kind = kind;
        if !self.hct_count_overridden {
            self.geometry.hct_count = match kind {
                AdcKind::Sar => 1860,
                AdcKind::Ramp => 1660,
            };
        }
        self
    }

    pub fn frontend_count(&self) -> usize {
        self.geometry.hct_count.div_ceil(8)
    }

    pub fn set_logic_family(&mut self, family: LogicFamily) {
        self.logic_family = family;
        self.macro_costs = MacroCosts::for_family(family);
    }

    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| SimError::Config(format!("{key}: expected number, got {value:?}")))
        };
        match key {
            k if k.starts_with("cost.") => self.cost.set(&k[5..], num()?)?,
            "noise.programming_sigma" => self.noise.programming_sigma = num()?,
            "noise.read_sigma" => self.noise.read_sigma = num()?,
            "noise.ir_drop_alpha" => self.noise.ir_drop_alpha = num()?,
            "noise.seed" => self.noise.rng_seed = num()? as u64,
            "geometry.hct_count" => {
                self.geometry.hct_count = num()? as usize;
                self.hct_count_overridden = true;
            }
            "geometry.ace_arrays" => self.geometry.ace_arrays = num()? as usize,
            "geometry.dce_pipelines" => self.geometry.dce_pipelines = num()? as usize,
            "geometry.pipeline_depth" => self.geometry.pipeline_depth = num()? as usize,
            "geometry.max_active_pipelines" => {
                self.geometry.max_active_pipelines = num()? as usize
            }
            "adc.kind" => {
                let kind = match value {
                    "sar" => AdcKind::Sar,
                    "ramp" => AdcKind::Ramp,
                    _ => return Err(SimError::Config(format!("adc.kind: {value:?}"))),
                };
                *self = std::mem::take(&mut *self).with_adc(kind);
            }
            "adc.resolution_bits" => self.adc_resolution_bits = num()? as u8,
            "dce.logic_family" => {
                let family = match value {
                    "oscar" => LogicFamily::Oscar,
                    "ideal" => LogicFamily::Ideal,
                    _ => return Err(SimError::Config(format!("dce.logic_family: {value:?}"))),
                };
                self.set_logic_family(family);
            }
            "dce.latency_multiplier" => self.dce_latency_multiplier = num()? as u32,
            "dce.element_load_cycles" => self.element_load_cycles = num()? as u64,
            "dce.iiu_enabled" => self.iiu_enabled = value == "true" || value == "1",
            k if k.starts_with("dce.microops.") => {
                let n = num()? as u32;
                match &k[13..] {
                    "not" => self.macro_costs.not = n,
                    "or" => self.macro_costs.or = n,
                    "and" => self.macro_costs.and = n,
                    "xor" => self.macro_costs.xor = n,
                    "add" => self.macro_costs.add = n,
                    "sub" => self.macro_costs.sub = n,
                    "copy" => self.macro_costs.copy = n,
                    "cmp_ge" => self.macro_costs.cmp_ge = n,
                    "mux" => self.macro_costs.mux = n,
                    other => {
                        return Err(SimError::Config(format!("unknown key dce.microops.{other}")))
                    }
                }
            }
            _ => return Err(SimError::Config(format!("unknown key: {key}"))),
        }
        Ok(())
    }
}
