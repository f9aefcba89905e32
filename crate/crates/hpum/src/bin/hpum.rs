//! Command-line driver for the hybrid-PUM simulator.
//!
//! Subcommands run an application (`aes`, `cnn`, `llm`), the iso-array
//! design-space sweep (`sweep`), the SAR-vs-ramp ADC study (`adc-study`),
//! or validate a previously written JSON report (`report`).
//!
//! Exit codes: 0 success, 2 configuration error, 3 oracle mismatch (only
//! when `--check-oracle` was requested), 4 capacity/budget error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hpum::ace::AdcKind;
use hpum::config::{NoiseConfig, SimConfig};
use hpum::report::{
    adc_study_csv, aes_report_traced, cnn_report_traced, llm_report_traced, run_adc_study,
    run_sweep, sweep_csv, RunReport, SweepSpec,
};
use hpum::SimError;

#[derive(Parser)]
#[command(
    name = "hpum",
    version,
    about = "Cycle-approximate simulator of a hybrid analog/digital PUM chip"
)]
struct Cli {
    /// Flat `key = value` config file (see config module docs for keys).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// RNG seed for input generation and noise sampling.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Override the ADC kind from the config.
    #[arg(long, global = true, value_enum, value_name = "KIND")]
    adc: Option<AdcArg>,

    /// Noise model: `off`, `default`, or a `key = value` file with
    /// `noise.*` overrides.
    #[arg(long, global = true, value_name = "off|default|FILE")]
    noise: Option<String>,

    /// Write the event trace (one line per tile event) to this file.
    #[arg(long, global = true, value_name = "FILE")]
    trace: Option<PathBuf>,

    /// Write the JSON report/rows to this file.
    #[arg(long, global = true, value_name = "FILE")]
    json: Option<PathBuf>,

    /// Write the CSV series (kernel breakdown, sweep, or study) to this file.
    #[arg(long, global = true, value_name = "FILE")]
    csv: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdcArg {
    Sar,
    Ramp,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encrypt seeded random blocks with AES-128 on the chip.
    Aes {
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        /// Exit 3 if the machine output differs from the host reference.
        #[arg(long)]
        check_oracle: bool,
    },
    /// Classify seeded random images with the tiny fixed-point CNN.
    Cnn {
        #[arg(long, default_value_t = 2)]
        images: usize,
        /// Exit 3 if logits differ from the bit-exact integer reference.
        #[arg(long)]
        check_oracle: bool,
    },
    /// Run seeded random sequences through the tiny transformer encoder.
    Llm {
        #[arg(long, default_value_t = 1)]
        sequences: usize,
        /// Exit 3 if output error exceeds 2^-4 against the float reference.
        #[arg(long)]
        check_oracle: bool,
    },
    /// Iso-array D/A/H-1..H-9 throughput sweep over both logic families.
    Sweep {
        /// Total array budget (a multiple of 640).
        #[arg(long, default_value_t = 640)]
        budget: usize,
        /// Auxiliary-path latency (cycles/block) for the all-analog config.
        #[arg(long, value_name = "CYCLES")]
        aux_latency: Option<f64>,
        /// Analog-side conversion+transfer cycles per MVM in the naive hybrid.
        #[arg(long, default_value_t = 264.0, value_name = "CYCLES")]
        conversion_cycles: f64,
    },
    /// SAR vs ramp comparison per application.
    AdcStudy {
        /// Comma-separated subset of aes,cnn,llm.
        #[arg(long, value_delimiter = ',', default_values = ["aes", "cnn", "llm"])]
        apps: Vec<String>,
    },
    /// Validate a JSON report file and print its summary.
    Report {
        /// Report file produced by an app subcommand's `--json`.
        file: PathBuf,
    },
}

enum CliError {
    Sim(SimError),
    /// Bad config/noise file or unreadable input: exit 2.
    Config(String),
    /// Machine output failed the requested oracle check: exit 3.
    OracleMismatch(String),
    /// Output file could not be written: exit 1.
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Config(m) | CliError::Io(m) => write!(f, "{m}"),
            CliError::OracleMismatch(m) => write!(f, "oracle mismatch: {m}"),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::OracleMismatch(_) => 3,
            CliError::Sim(SimError::Config(_)) => 2,
            CliError::Sim(SimError::Capacity(_)) | CliError::Sim(SimError::Budget { .. }) => 4,
            CliError::Io(_) | CliError::Sim(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn build_config(cli: &Cli) -> Result<SimConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::parse_file(path)?,
        None => SimConfig::default(),
    };
    match cli.noise.as_deref() {
        None | Some("default") => {}
        Some("off") => cfg.noise = NoiseConfig::off(),
        Some(file) => apply_noise_file(&mut cfg, Path::new(file))?,
    }
    if let Some(adc) = cli.adc {
        cfg = cfg.with_adc(match adc {
            AdcArg::Sar => AdcKind::Sar,
            AdcArg::Ramp => AdcKind::Ramp,
        });
    }
    cfg.noise.rng_seed = cli.seed;
    Ok(cfg)
}

/// A noise file is the same flat `key = value` format as the main config,
/// restricted to `noise.*` keys.
fn apply_noise_file(cfg: &mut SimConfig, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read noise file {}: {e}", path.display())))?;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("bad noise line: {line}")))?;
        let key = key.trim();
        if !key.starts_with("noise.") {
            return Err(CliError::Config(format!(
                "noise file may only set noise.* keys, got {key}"
            )));
        }
        cfg.set(key, value.trim())?;
    }
    Ok(())
}

fn write_out(path: &Path, what: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {what} to {}: {e}", path.display())))
}

fn emit_report(
    cli: &Cli,
    report: &RunReport,
    events: &[String],
    check_oracle: bool,
) -> Result<(), CliError> {
    if let Some(path) = &cli.json {
        write_out(path, "JSON report", &report.to_json())?;
    }
    if let Some(path) = &cli.csv {
        write_out(path, "kernel CSV", &report.kernel_csv())?;
    }
    if let Some(path) = &cli.trace {
        write_out(path, "trace", &(events.join("\n") + "\n"))?;
    }
    println!(
        "{}: batch={} cycles={} throughput={:.3e} ops/s energy={:.3} pJ oracle={}",
        report.app,
        report.batch,
        report.cycles,
        report.throughput_ops_per_sec,
        report.energy.total_pj,
        if report.oracle_ok { "ok" } else { "MISMATCH" }
    );
    for k in &report.kernels {
        println!("  {:>14}: {} cycles", k.name, k.cycles);
    }
    if check_oracle && !report.oracle_ok {
        return Err(CliError::OracleMismatch(format!(
            "{} output disagrees with the reference oracle",
            report.app
        )));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let trace = cli.trace.is_some();
    match &cli.cmd {
        Cmd::Aes {
            blocks,
            check_oracle,
        } => {
            let cfg = build_config(cli)?;
            let (report, events) = aes_report_traced(&cfg, cli.seed, *blocks, trace)?;
            emit_report(cli, &report, &events, *check_oracle)
        }
        Cmd::Cnn {
            images,
            check_oracle,
        } => {
            let cfg = build_config(cli)?;
            let (report, events) = cnn_report_traced(&cfg, cli.seed, *images, trace)?;
            emit_report(cli, &report, &events, *check_oracle)
        }
        Cmd::Llm {
            sequences,
            check_oracle,
        } => {
            let cfg = build_config(cli)?;
            let (report, events) = llm_report_traced(&cfg, cli.seed, *sequences, trace)?;
            emit_report(cli, &report, &events, *check_oracle)
        }
        Cmd::Sweep {
            budget,
            aux_latency,
            conversion_cycles,
        } => {
            let spec = SweepSpec {
                budget_arrays: *budget,
                aux_latency_cycles: *aux_latency,
                conversion_cycles_per_mvm: *conversion_cycles,
                ..SweepSpec::default()
            };
            let rows = run_sweep(&spec)?;
            let csv = sweep_csv(&rows);
            if let Some(path) = &cli.csv {
                write_out(path, "sweep CSV", &csv)?;
            }
            if let Some(path) = &cli.json {
                let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
                write_out(path, "sweep JSON", &text)?;
            }
            print!("{csv}");
            Ok(())
        }
        Cmd::AdcStudy { apps } => {
            let names: Vec<&str> = apps.iter().map(String::as_str).collect();
            let rows = run_adc_study(&names, cli.seed)?;
            let csv = adc_study_csv(&rows);
            if let Some(path) = &cli.csv {
                write_out(path, "study CSV", &csv)?;
            }
            if let Some(path) = &cli.json {
                let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
                write_out(path, "study JSON", &text)?;
            }
            print!("{csv}");
            Ok(())
        }
        Cmd::Report { file } => {
            let text = std::fs::read_to_string(file).map_err(|e| {
                CliError::Config(format!("cannot read report {}: {e}", file.display()))
            })?;
            let report = RunReport::validate_json(&text)?;
            println!(
                "valid report: app={} batch={} cycles={} throughput={:.3e} ops/s \
                 energy={:.3} pJ oracle={}",
                report.app,
                report.batch,
                report.cycles,
                report.throughput_ops_per_sec,
                report.energy.total_pj,
                if report.oracle_ok { "ok" } else { "MISMATCH" }
            );
            Ok(())
        }
    }
}
