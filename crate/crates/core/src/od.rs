//! On-demand subsystem cost models.
//!
//! RISC-V task execution priced on the DVFS curve, the peripheral
//! crypto cost table, SPI and FeRAM transfer models, and the adaptive
//! voltage-scaling estimation/tracking procedure built on the 128
//! timing-fault sensors.

use crate::power::{DvfsCurve, PowerError, PowerMode};
use crate::time::SimTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OdError {
    #[error("operation requires CPU_RUNNING, current mode is {0:?}")]
    WrongMode(PowerMode),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("no entry in the crypto table for {0:?}")]
    UnknownAlgorithm(String),
    #[error("sign-off voltage {signoff_v} gives no headroom over the scaled point {v_run}")]
    NoHeadroom { signoff_v: f64, v_run: f64 },
    #[error("bad model parameters: {0}")]
    BadModel(&'static str),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpuTask {
    pub name: String,
    pub cycles: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Execute a CPU task at voltage `v`. Frequency defaults to the curve
/// maximum for `v`; a configured frequency must not exceed it. Energy
/// is cycles times the per-cycle energy at `v`, charged to the OD
/// domain by the caller.
pub fn run_cpu_task(
    task: &CpuTask,
    v: f64,
    f_hz: Option<f64>,
    dvfs: &DvfsCurve,
    mode: PowerMode,
) -> Result<(SimTime, f64), OdError> {
    if mode != PowerMode::CpuRunning {
        return Err(OdError::WrongMode(mode));
    }
    let (f_max, e_cycle) = dvfs.lookup(v)?;
    let f = f_hz.unwrap_or(f_max);
    if f > f_max || f <= 0.0 {
        return Err(OdError::Power(PowerError::FrequencyOutOfRange(f, f_max)));
    }
    if task.cycles == 0 {
        return Ok((SimTime::ZERO, 0.0));
    }
    let duration = SimTime::from_secs_f64(task.cycles as f64 / f);
    Ok((duration, task.cycles as f64 * e_cycle))
}

/// One crypto table entry. Block ciphers give `block_bits`; stream
/// ciphers leave it out and pay a one-time warmup plus per-byte cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoParams {
    pub name: String,
    pub key_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_bits: Option<u32>,
    #[serde(default)]
    pub cycles_per_block: u64,
    #[serde(default)]
    pub warmup_cycles: u64,
    #[serde(default)]
    pub cycles_per_byte: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CryptoTable(pub Vec<CryptoParams>);

impl Default for CryptoTable {
    fn default() -> Self {
        // Cycle counts are deterministic placeholders (the silicon
        // numbers are not published); algorithm/key/block parameters
        // are the implemented set.
        CryptoTable(vec![
            CryptoParams {
                name: "aes-128".into(),
                key_bits: 128,
                block_bits: Some(128),
                cycles_per_block: 40,
                warmup_cycles: 0,
                cycles_per_byte: 0,
            },
            CryptoParams {
                name: "aes-192".into(),
                key_bits: 192,
                block_bits: Some(128),
                cycles_per_block: 48,
                warmup_cycles: 0,
                cycles_per_byte: 0,
            },
            CryptoParams {
                name: "aes-256".into(),
                key_bits: 256,
                block_bits: Some(128),
                cycles_per_block: 56,
                warmup_cycles: 0,
                cycles_per_byte: 0,
            },
            CryptoParams {
                name: "present-80".into(),
                key_bits: 80,
                block_bits: Some(64),
                cycles_per_block: 32,
                warmup_cycles: 0,
                cycles_per_byte: 0,
            },
            CryptoParams {
                name: "trivium-80".into(),
                key_bits: 80,
                block_bits: None,
                cycles_per_block: 0,
                warmup_cycles: 1152,
                cycles_per_byte: 1,
            },
        ])
    }
}

impl CryptoTable {
    pub fn get(&self, name: &str) -> Result<&CryptoParams, OdError> {
        self.0
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| OdError::UnknownAlgorithm(name.to_string()))
    }

    /// Cycles to process `n_bytes` with the named algorithm; zero
    /// bytes cost zero cycles for every algorithm.
    pub fn cost_cycles(&self, name: &str, n_bytes: u64) -> Result<u64, OdError> {
        let p = self.get(name)?;
        if n_bytes == 0 {
            return Ok(0);
        }
        Ok(match p.block_bits {
            Some(block_bits) => {
                let blocks = (n_bytes * 8).div_ceil(block_bits as u64);
                blocks * p.cycles_per_block
            }
            None => p.warmup_cycles + n_bytes * p.cycles_per_byte,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiModel {
    pub rate_bps: f64,
}

impl Default for SpiModel {
    fn default() -> Self {
        SpiModel { rate_bps: 100e6 }
    }
}

impl SpiModel {
    pub fn transfer_duration(&self, bytes: u64) -> SimTime {
        SimTime::from_secs_f64(bytes as f64 * 8.0 / self.rate_bps)
    }

    /// CPU cycles spent servicing the transfer at core frequency `f`.
    pub fn transfer_cycles(&self, bytes: u64, f_hz: f64) -> u64 {
        (bytes as f64 * 8.0 * f_hz / self.rate_bps).ceil() as u64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeRamModel {
    pub bandwidth_bytes_per_s: f64,
    pub energy_per_byte_j: f64,
}

impl Default for FeRamModel {
    fn default() -> Self {
        FeRamModel {
            bandwidth_bytes_per_s: 10e6,
            energy_per_byte_j: 1.076e-9,
        }
    }
}

impl FeRamModel {
    pub fn load(&self, bytes: u64) -> (SimTime, f64) {
        let duration = SimTime::from_secs_f64(bytes as f64 / self.bandwidth_bytes_per_s);
        (duration, bytes as f64 * self.energy_per_byte_j)
    }
}

pub const AVS_SENSOR_COUNT: usize = 128;

/// Adaptive voltage scaling instance: the true minimal operating
/// voltage of this die plus the measurement and guardband policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvsModel {
    pub v_true_min: f64,
    pub signoff_voltage: f64,
    /// Half-width of the estimation error band (fraction of truth).
    pub estimation_error_bound: f64,
    /// Margin applied on top of the estimate before running.
    pub guardband: f64,
}

impl Default for AvsModel {
    fn default() -> Self {
        AvsModel {
            v_true_min: 0.70,
            signoff_voltage: 0.9,
            estimation_error_bound: 0.02,
            guardband: 0.02,
        }
    }
}

impl AvsModel {
    pub fn validate(&self) -> Result<(), OdError> {
        if !(self.v_true_min > 0.0 && self.signoff_voltage > 0.0) {
            return Err(OdError::BadModel("voltages must be positive"));
        }
        if self.v_true_min > self.signoff_voltage {
            return Err(OdError::BadModel(
                "true Vmin above sign-off voltage is not a working die",
            ));
        }
        if !(0.0..0.5).contains(&self.estimation_error_bound) || !(0.0..0.5).contains(&self.guardband)
        {
            return Err(OdError::BadModel("error bound and guardband must be small fractions"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvsEstimate {
    pub v_est: f64,
    /// Trigger voltage per timing sensor, ordered by path criticality
    /// (most critical first, so the sequence is non-increasing).
    pub sensor_trigger_v: Vec<f64>,
}

/// One functional-test campaign with a forced estimation error
/// (test hook; `estimate_vmin` samples it instead).
pub fn estimate_vmin_with(avs: &AvsModel, epsilon: f64) -> Result<AvsEstimate, OdError> {
    avs.validate()?;
    let v_est = avs.v_true_min * (1.0 + epsilon);
    let mut sensor_trigger_v = Vec::with_capacity(AVS_SENSOR_COUNT);
    for i in 0..AVS_SENSOR_COUNT {
        // Most critical path triggers at the estimate itself; slack
        // grows down the list.
        let slack = 0.15 * i as f64 / (AVS_SENSOR_COUNT - 1) as f64;
        sensor_trigger_v.push(v_est * (1.0 - slack));
    }
    Ok(AvsEstimate {
        v_est,
        sensor_trigger_v,
    })
}

/// Seeded campaign: the estimation error is uniform within the bound.
pub fn estimate_vmin(avs: &AvsModel, seed: u64) -> Result<AvsEstimate, OdError> {
    avs.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = avs.estimation_error_bound;
    let epsilon = rng.gen_range(-b..=b);
    estimate_vmin_with(avs, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvsOutcome {
    pub v_est: f64,
    pub v_run: f64,
    /// 1 - E(v_run)/E(signoff) per cycle.
    pub reduction: f64,
}

/// Re-price the workload at the guardbanded estimate instead of the
/// sign-off voltage. Equal voltages give zero reduction; a scaled
/// point above sign-off is an error.
pub fn apply_avs(avs: &AvsModel, v_est: f64, dvfs: &DvfsCurve) -> Result<AvsOutcome, OdError> {
    avs.validate()?;
    let v_run = v_est * (1.0 + avs.guardband);
    if v_run > avs.signoff_voltage {
        return Err(OdError::NoHeadroom {
            signoff_v: avs.signoff_voltage,
            v_run,
        });
    }
    let (_, e_run) = dvfs.lookup(v_run)?;
    let (_, e_signoff) = dvfs.lookup(avs.signoff_voltage)?;
    Ok(AvsOutcome {
        v_est,
        v_run,
        reduction: 1.0 - e_run / e_signoff,
    })
}
