use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("value {value} out of range for {bits}-bit {signed} fixed-point", signed = if *.signed { "signed" } else { "unsigned" })]
    Overflow { value: f64, bits: u8, signed: bool },

    #[error("bit pattern width {pattern_bits} does not match slice plan element width {plan_bits}")]
    PlanMismatch { pattern_bits: u8, plan_bits: u8 },

    #[error("NOR destination column {col} aliases a source column")]
    ColumnConflict { col: usize },

    #[error("write into reserved pipeline {pipeline} register {register}")]
    ReservedRegister { pipeline: usize, register: usize },

    #[error("element address {addr} out of range (limit {limit})")]
    AddressRange { addr: u64, limit: u64 },

    #[error("capacity exhausted: {0}")]
    Capacity(String),

    #[error("bitline sum {sum} exceeds ADC full scale [{min}, {max}]")]
    AdcRange { sum: f64, min: i64, max: i64 },

    #[error("compensation factor k={k} is odd; integer-coded mapping requires even input weight")]
    Parity { k: u64 },

    #[error("pipeline {0} already reserved")]
    AlreadyReserved(usize),

    #[error("array {array} busy with {mode} operation")]
    ArbiterConflict { array: usize, mode: &'static str },

    #[error("vACore width {requested} conflicts with existing width {existing} on this HCT")]
    WidthConflict { requested: u8, existing: u8 },

    #[error("input length {got} does not match matrix dimension {want}")]
    Shape { got: usize, want: usize },

    #[error("index {0} out of range")]
    Index(usize),

    #[error("cannot disable both analog and digital modes")]
    Mode,

    #[error("config error: {0}")]
    Config(String),

    #[error("sweep budget {budget} not divisible into {configs} configurations of {arrays_per_step} arrays")]
    Budget {
        budget: usize,
        configs: usize,
        arrays_per_step: usize,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;
