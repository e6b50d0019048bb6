//! Wake-up radio power model and OOK baseband codec.
//!
//! Frames are 58 symbols: a 16-symbol alternating preamble, a 1,1
//! start marker, an 8-bit wake identifier and a 32-bit payload, both
//! MSB-first. Each symbol spans `samples_per_symbol` samples; the bit
//! value is asserted at `data_delay` and held for the remainder, so
//! earlier sample positions still carry the previous symbol's level.
//! The decoder scans every stream offset and samples at `data_delay`.

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PREAMBLE_SYMBOLS: usize = 16;
pub const MARKER_SYMBOLS: usize = 2;
pub const ID_BITS: usize = 8;
pub const PAYLOAD_BITS: usize = 32;
pub const FRAME_SYMBOLS: usize = PREAMBLE_SYMBOLS + MARKER_SYMBOLS + ID_BITS + PAYLOAD_BITS;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OokConfig {
    pub samples_per_symbol: usize,
    pub data_delay: usize,
    pub wake_id: u8,
    pub bitrate_bps: f64,
}

impl Default for OokConfig {
    fn default() -> Self {
        OokConfig {
            samples_per_symbol: 4,
            data_delay: 1,
            wake_id: 0xA5,
            bitrate_bps: 50_000.0,
        }
    }
}

impl OokConfig {
    pub fn validate(&self) -> Result<(), WurError> {
        if self.samples_per_symbol == 0 {
            return Err(WurError::BadConfig("samples_per_symbol must be >= 1"));
        }
        if self.data_delay >= self.samples_per_symbol {
            return Err(WurError::BadConfig(
                "data_delay must be below samples_per_symbol",
            ));
        }
        if self.bitrate_bps <= 0.0 || self.bitrate_bps.is_nan() {
            return Err(WurError::BadConfig("bitrate must be positive"));
        }
        Ok(())
    }

    pub fn frame_duration(&self) -> SimTime {
        SimTime::from_secs_f64(FRAME_SYMBOLS as f64 / self.bitrate_bps)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WurError {
    #[error("invalid OOK configuration: {0}")]
    BadConfig(&'static str),
    #[error("no sensitivity entry for the {0} MHz band")]
    BandUnsupported(u32),
    #[error("duty fraction {0} outside (0, 1]")]
    BadDuty(f64),
}

fn frame_symbols(id: u8, payload: u32) -> Vec<bool> {
    let mut sym = Vec::with_capacity(FRAME_SYMBOLS);
    for i in 0..PREAMBLE_SYMBOLS {
        sym.push(i % 2 == 0);
    }
    sym.push(true);
    sym.push(true);
    for i in (0..ID_BITS).rev() {
        sym.push(id >> i & 1 == 1);
    }
    for i in (0..PAYLOAD_BITS).rev() {
        sym.push(payload >> i & 1 == 1);
    }
    sym
}

/// Expand a frame into its sample stream. Within each symbol, samples
/// before `data_delay` hold the previous symbol's level (idle low
/// before the first symbol).
pub fn encode_frame(cfg: &OokConfig, id: u8, payload: u32) -> Vec<bool> {
    cfg.validate().expect("invalid OOK configuration");
    let sym = frame_symbols(id, payload);
    let sps = cfg.samples_per_symbol;
    let mut out = Vec::with_capacity(sym.len() * sps);
    let mut prev = false;
    for &s in &sym {
        for k in 0..sps {
            out.push(if k < cfg.data_delay { prev } else { s });
        }
        prev = s;
    }
    out
}

/// Scan the stream for one frame; returns the identifier and payload
/// of the first full frame found, or nothing.
pub fn decode_frame(cfg: &OokConfig, stream: &[bool]) -> Option<(u8, u32)> {
    cfg.validate().ok()?;
    let sps = cfg.samples_per_symbol;
    let expect = frame_symbols(0, 0);
    for offset in 0..stream.len() {
        let mut symbols = [false; FRAME_SYMBOLS];
        let mut complete = true;
        for (k, slot) in symbols.iter_mut().enumerate() {
            match stream.get(offset + k * sps + cfg.data_delay) {
                Some(&v) => *slot = v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            // Later offsets only run out of samples sooner.
            return None;
        }
        let sync = PREAMBLE_SYMBOLS + MARKER_SYMBOLS;
        if symbols[..sync] != expect[..sync] {
            continue;
        }
        let mut id = 0u8;
        for &b in &symbols[sync..sync + ID_BITS] {
            id = id << 1 | b as u8;
        }
        let mut payload = 0u32;
        for &b in &symbols[sync + ID_BITS..] {
            payload = payload << 1 | b as u32;
        }
        return Some((id, payload));
    }
    None
}

/// Parse a "01" text stream; whitespace is ignored.
pub fn parse_sample_text(text: &str) -> Result<Vec<bool>, String> {
    let mut out = Vec::new();
    for (i, c) in text.chars().enumerate() {
        match c {
            '0' => out.push(false),
            '1' => out.push(true),
            c if c.is_whitespace() => {}
            c => return Err(format!("invalid sample character {c:?} at offset {i}")),
        }
    }
    Ok(out)
}

pub fn sample_text(stream: &[bool]) -> String {
    stream.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WurMode {
    Off,
    Idle,
    Duty(f64),
    Decode,
}

/// Duty fraction that reproduces the measured listening increment
/// over the controller-only mode (solves 40 nW + d x 76 uW = 4.1 uW).
pub const DEFAULT_WAKE_DUTY: f64 = 4.06e-6 / 76e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WurPowerCfg {
    pub idle_w: f64,
    pub decode_w: f64,
}

impl Default for WurPowerCfg {
    fn default() -> Self {
        WurPowerCfg {
            idle_w: 40e-9,
            decode_w: 76e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WurRadio {
    pub mode: WurMode,
    pub power: WurPowerCfg,
    /// (band MHz, sensitivity dBm); bands absent here are unsupported.
    pub sensitivity_dbm: Vec<(u32, f64)>,
}

impl Default for WurRadio {
    fn default() -> Self {
        WurRadio {
            mode: WurMode::Idle,
            power: WurPowerCfg::default(),
            sensitivity_dbm: vec![(433, -73.0), (868, -65.0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    RadioOff,
    BelowSensitivity,
    IdMismatch,
    NoFrame,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RxOutcome {
    /// Frame accepted: raise the baseband interrupt on the controller
    /// at `interrupt_at` with the payload in a config register.
    Interrupt {
        payload: u32,
        interrupt_at: SimTime,
        energy_j: f64,
    },
    Dropped(DropReason),
}

impl WurRadio {
    pub fn sensitivity(&self, band_mhz: u32) -> Result<f64, WurError> {
        self.sensitivity_dbm
            .iter()
            .find(|(b, _)| *b == band_mhz)
            .map(|&(_, s)| s)
            .ok_or(WurError::BandUnsupported(band_mhz))
    }

    pub fn average_power(&self, mode: WurMode) -> Result<f64, WurError> {
        match mode {
            WurMode::Off => Ok(0.0),
            WurMode::Idle => Ok(self.power.idle_w),
            WurMode::Decode => Ok(self.power.decode_w),
            WurMode::Duty(d) => {
                if d > 0.0 && d <= 1.0 {
                    Ok(self.power.idle_w + d * self.power.decode_w)
                } else {
                    Err(WurError::BadDuty(d))
                }
            }
        }
    }

    /// Receive one frame: gate on sensitivity, decode, match against
    /// the wake identifier. Decode energy covers the frame duration.
    pub fn rx_event(
        &self,
        cfg: &OokConfig,
        stream: &[bool],
        band_mhz: u32,
        rssi_dbm: f64,
        at: SimTime,
    ) -> Result<RxOutcome, WurError> {
        let sensitivity = self.sensitivity(band_mhz)?;
        if self.mode == WurMode::Off {
            return Ok(RxOutcome::Dropped(DropReason::RadioOff));
        }
        if rssi_dbm < sensitivity {
            return Ok(RxOutcome::Dropped(DropReason::BelowSensitivity));
        }
        let Some((id, payload)) = decode_frame(cfg, stream) else {
            return Ok(RxOutcome::Dropped(DropReason::NoFrame));
        };
        if id != cfg.wake_id {
            return Ok(RxOutcome::Dropped(DropReason::IdMismatch));
        }
        let dur = cfg.frame_duration();
        Ok(RxOutcome::Interrupt {
            payload,
            interrupt_at: at + dur,
            energy_j: self.power.decode_w * dur.as_secs_f64(),
        })
    }
}
