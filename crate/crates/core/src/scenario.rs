//! Daily presence-classification scenario.
//!
//! A PIR sensor ticks every few seconds while a room is occupied. The
//! wake-up controller services each tick with a short filter task and
//! passes a configurable fraction of detections on to the on-demand
//! subsystem, which captures a camera frame, loads classifier weights
//! from external FeRAM, pulls the image over SPI and classifies it on
//! the accelerator (or, as a sweep toggle, on the CPU). A handful of
//! status messages go out over the main radio each day. The engine
//! replays one full day through the event kernel against the energy
//! ledger and reports average power, per-component shares and counts.
//!
//! A cloud variant skips filtering and local inference entirely: every
//! detection captures a frame, encrypts it and ships it over the link.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{SimConfig, VERSION};
use crate::kernel::{EventQueue, EventTraceRow, KernelError, Payload};
use crate::od::OdError;
use crate::pneuro::{self, PneuroError};
use crate::power::{
    EnergyLedger, Initiator, PowerDomain, PowerError, PowerMode, PowerTraceRow, MODES,
};
use crate::time::SimTime;
use crate::tpsram::{HandshakeEdge, SramSignal, TpSram, TpSramError, WrpOp};
use crate::wuc::{RaiseOutcome, Wuc, WucError, WucPhase, WucTask};

pub const DAY_S: f64 = 86_400.0;

/// Interrupt ids the scenario wires up.
const SRC_PIR: u8 = 0;
const SRC_OD_DONE: u8 = 9;
const SRC_MESSAGE: u8 = 12;

/// Where classification results land in the shared memory.
const RESULT_ADDR: usize = 0x1000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown sweep parameter {0:?}")]
    UnknownParameter(String),
    #[error("no network named {0:?}")]
    UnknownNetwork(String),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Wuc(#[from] WucError),
    #[error(transparent)]
    Sram(#[from] TpSramError),
    #[error(transparent)]
    Pneuro(#[from] PneuroError),
    #[error(transparent)]
    Od(#[from] OdError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Detection filter run by the wake-up controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterPolicy {
    /// Pass a fixed fraction of detections, spread evenly.
    FixedRate { pass_rate: f64 },
    /// Drop to a lower pass rate once the last `window` classifications
    /// contain `empty_threshold` or more empty scenes.
    History {
        window: usize,
        empty_threshold: u32,
        base_pass_rate: f64,
        filtered_pass_rate: f64,
    },
}

impl FilterPolicy {
    fn check(&self) -> Result<(), (String, String)> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        match self {
            FilterPolicy::FixedRate { pass_rate } => {
                if !rate_ok(*pass_rate) {
                    return Err(("filter.pass_rate".into(), "must be in [0, 1]".into()));
                }
            }
            FilterPolicy::History {
                window,
                empty_threshold,
                base_pass_rate,
                filtered_pass_rate,
            } => {
                if *window == 0 {
                    return Err(("filter.window".into(), "must be nonzero".into()));
                }
                if *empty_threshold as usize > *window {
                    return Err((
                        "filter.empty_threshold".into(),
                        "cannot exceed the window".into(),
                    ));
                }
                if !rate_ok(*base_pass_rate) || !rate_ok(*filtered_pass_rate) {
                    return Err(("filter".into(), "pass rates must be in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

/// Which end of the system classifies the frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Filter, classify locally, transmit a few status messages.
    Edge,
    /// Transmit every frame; the classifier runs elsewhere.
    Cloud,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Edge => "edge",
            Variant::Cloud => "cloud",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// When the room becomes occupied, seconds after midnight.
    pub occupancy_start_s: f64,
    pub occupancy_hours: f64,
    /// PIR detection spacing while occupied.
    pub pir_interval_s: f64,
    /// Uniform per-detection start jitter, 0 for a strict grid.
    pub pir_jitter_s: f64,
    pub pir_power_w: f64,
    pub camera_power_w: f64,
    pub camera_frame_s: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub image_bytes_per_pixel: u32,
    /// Classifier weights pulled from external FeRAM per activation.
    pub weight_bytes: u64,
    /// Key into the config's network table.
    pub network: String,
    pub classify_on_cpu: bool,
    /// CPU cycles for one software classification of a frame.
    pub cpu_classify_cycles: u64,
    /// On-demand operating point for all scenario work.
    pub od_volts: f64,
    pub od_freq_hz: f64,
    /// Uncore draw of the powered on-demand island (buses, PLL, SPI,
    /// camera interface). Calibrated against the deployment estimate.
    pub od_envelope_w: f64,
    pub filter: FilterPolicy,
    /// Every n-th classification reports an empty scene (drives the
    /// history filter; the fixed-rate filter ignores results).
    pub empty_every: u64,
    pub filter_task_instructions: u64,
    pub reconfig_task_instructions: u64,
    pub message_task_instructions: u64,
    pub messages_per_day: u32,
    pub message_payload_bytes: u64,
    /// Peripheral-mode window per outgoing message (radio handoff).
    pub message_periph_s: f64,
    /// Main-radio energy per status message, drawn from the battery
    /// but not from the node rails.
    pub message_radio_j: f64,
    pub crypto_algorithm: String,
    /// Main radio throughput for image upload in the cloud variant.
    pub radio_tx_bps: f64,
    pub cloud_link_j_per_bit: f64,
    /// Keep the wake-up radio listening while otherwise idle.
    pub wur_listening: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            occupancy_start_s: 32_400.0,
            occupancy_hours: 8.0,
            pir_interval_s: 5.0,
            pir_jitter_s: 0.0,
            pir_power_w: 6.0e-6,
            camera_power_w: 2.5e-3,
            camera_frame_s: 1.0,
            image_width: 224,
            image_height: 224,
            image_bytes_per_pixel: 1,
            weight_bytes: 524_288,
            network: "presence-fc".to_string(),
            classify_on_cpu: false,
            cpu_classify_cycles: 126_000_000,
            od_volts: 0.48,
            od_freq_hz: 25.0e6,
            od_envelope_w: 915.0e-6,
            filter: FilterPolicy::FixedRate { pass_rate: 0.30 },
            empty_every: 4,
            filter_task_instructions: 1000,
            reconfig_task_instructions: 200,
            message_task_instructions: 200,
            messages_per_day: 5,
            message_payload_bytes: 32,
            message_periph_s: 264.0e-6,
            message_radio_j: 0.18,
            crypto_algorithm: "aes-128".to_string(),
            radio_tx_bps: 1.0e6,
            cloud_link_j_per_bit: 3.5e-9,
            wur_listening: false,
        }
    }
}

impl ScenarioConfig {
    pub fn image_bytes(&self) -> u64 {
        self.image_width as u64 * self.image_height as u64 * self.image_bytes_per_pixel as u64
    }

    pub fn validate(&self) -> Result<(), (String, String)> {
        let positive: [(&str, f64); 8] = [
            ("pir_interval_s", self.pir_interval_s),
            ("pir_power_w", self.pir_power_w),
            ("camera_power_w", self.camera_power_w),
            ("od_volts", self.od_volts),
            ("od_freq_hz", self.od_freq_hz),
            ("od_envelope_w", self.od_envelope_w),
            ("radio_tx_bps", self.radio_tx_bps),
            ("message_periph_s", self.message_periph_s),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err((field.into(), "must be positive and finite".into()));
            }
        }
        let nonneg: [(&str, f64); 6] = [
            ("occupancy_start_s", self.occupancy_start_s),
            ("occupancy_hours", self.occupancy_hours),
            ("pir_jitter_s", self.pir_jitter_s),
            ("camera_frame_s", self.camera_frame_s),
            ("message_radio_j", self.message_radio_j),
            ("cloud_link_j_per_bit", self.cloud_link_j_per_bit),
        ];
        for (field, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err((field.into(), "must be nonnegative and finite".into()));
            }
        }
        if self.occupancy_start_s >= DAY_S {
            return Err(("occupancy_start_s".into(), "must lie within the day".into()));
        }
        if self.occupancy_hours > 24.0 {
            return Err(("occupancy_hours".into(), "at most 24".into()));
        }
        if self.image_bytes() == 0 {
            return Err(("image_width".into(), "image must be nonempty".into()));
        }
        if self.filter_task_instructions == 0
            || self.reconfig_task_instructions == 0
            || self.message_task_instructions == 0
        {
            return Err((
                "filter_task_instructions".into(),
                "controller tasks need at least one instruction".into(),
            ));
        }
        if self.empty_every == 0 {
            return Err(("empty_every".into(), "must be nonzero".into()));
        }
        if self.cpu_classify_cycles == 0 {
            return Err(("cpu_classify_cycles".into(), "must be nonzero".into()));
        }
        if self.network.is_empty() {
            return Err(("network".into(), "must name a network".into()));
        }
        self.filter.check()
    }
}

/// PIR detection instants for one day: a strict grid over the occupied
/// window (wrapping past midnight if needed), plus optional seeded
/// jitter. Always sorted.
pub fn generate_pir_events(scn: &ScenarioConfig, seed: u64) -> Vec<SimTime> {
    let interval = SimTime::from_secs_f64(scn.pir_interval_s).as_ps();
    let day = SimTime::from_secs_f64(DAY_S).as_ps();
    let start = SimTime::from_secs_f64(scn.occupancy_start_s).as_ps();
    let dur = SimTime::from_secs_f64(scn.occupancy_hours * 3600.0).as_ps();
    let count = dur / interval;
    let jitter = SimTime::from_secs_f64(scn.pir_jitter_s).as_ps();
    let mut rng = (jitter > 0).then(|| ChaCha8Rng::seed_from_u64(seed));
    let mut times: Vec<SimTime> = (0..count)
        .map(|k| {
            let mut t = (start + k * interval) % day;
            if let Some(rng) = &mut rng {
                t = (t + rng.gen_range(0..jitter)) % day;
            }
            SimTime::from_ps(t)
        })
        .collect();
    times.sort_unstable();
    times
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DayCounts {
    pub detections: u64,
    /// Local classifications completed (edge).
    pub classifications: u64,
    /// Frames shipped to the cloud (cloud variant).
    pub transmissions: u64,
    pub messages: u64,
    pub wuc_wakeups: u64,
    pub wuc_instructions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub energy_j: f64,
    pub avg_power_w: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResidency {
    pub mode: String,
    pub seconds: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainEnergy {
    pub domain: String,
    pub energy_j: f64,
}

/// Result of one simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyReport {
    pub variant: String,
    pub seed: u64,
    pub config_sha256: String,
    pub version: String,
    pub day_s: f64,
    pub avg_power_w: f64,
    pub total_energy_j: f64,
    /// Battery draws; fractions sum to one.
    pub components: Vec<Component>,
    pub counts: DayCounts,
    pub mode_residency: Vec<ModeResidency>,
    pub node_domains: Vec<DomainEnergy>,
    /// Accelerator share of the total (edge variant).
    pub pneuro_energy_j: f64,
    pub pneuro_fraction: f64,
    pub mean_wake_ns: f64,
}

impl DailyReport {
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TraceOptions {
    pub power: bool,
    pub handshake: bool,
    pub events: bool,
}

/// A day's report plus any traces that were requested.
#[derive(Debug)]
pub struct RunArtifacts {
    pub report: DailyReport,
    pub power_trace: Vec<PowerTraceRow>,
    pub handshake_trace: Vec<HandshakeEdge>,
    pub event_trace: Vec<EventTraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
enum Ev {
    Pir,
    Message,
    WucFetch,
    FilterDone { accepted: bool },
    CameraDone,
    SpiDone,
    InferDone,
    CryptoDone,
    TxDone,
    ReconfigDone,
    MessageTaskDone,
    MessagePeriphDone,
    DayEnd,
}

impl Payload for Ev {
    fn kind(&self) -> &'static str {
        match self {
            Ev::Pir => "pir",
            Ev::Message => "message",
            Ev::WucFetch => "wuc_fetch",
            Ev::FilterDone { .. } => "filter_done",
            Ev::CameraDone => "camera_done",
            Ev::SpiDone => "spi_done",
            Ev::InferDone => "infer_done",
            Ev::CryptoDone => "crypto_done",
            Ev::TxDone => "tx_done",
            Ev::ReconfigDone => "reconfig_done",
            Ev::MessageTaskDone => "message_task_done",
            Ev::MessagePeriphDone => "message_periph_done",
            Ev::DayEnd => "day_end",
        }
    }
}

/// Bresenham-style accept accumulator: realizes any pass rate with the
/// accepted count never more than one off the exact proportion.
#[derive(Debug)]
struct RateGate {
    acc: f64,
}

impl RateGate {
    fn new() -> Self {
        RateGate { acc: 0.0 }
    }

    fn decide(&mut self, pass_rate: f64) -> bool {
        self.acc += pass_rate;
        if self.acc >= 1.0 - 1e-9 {
            self.acc -= 1.0;
            true
        } else {
            false
        }
    }
}

#[derive(Debug)]
enum FilterState {
    Fixed {
        pass_rate: f64,
        gate: RateGate,
    },
    History {
        base: f64,
        filtered: f64,
        threshold: u32,
        window: VecDeque<bool>,
        cap: usize,
        gate: RateGate,
    },
}

impl FilterState {
    fn new(policy: &FilterPolicy) -> Self {
        match *policy {
            FilterPolicy::FixedRate { pass_rate } => FilterState::Fixed {
                pass_rate,
                gate: RateGate::new(),
            },
            FilterPolicy::History {
                window,
                empty_threshold,
                base_pass_rate,
                filtered_pass_rate,
            } => FilterState::History {
                base: base_pass_rate,
                filtered: filtered_pass_rate,
                threshold: empty_threshold,
                window: VecDeque::with_capacity(window),
                cap: window,
                gate: RateGate::new(),
            },
        }
    }

    fn decide(&mut self) -> bool {
        match self {
            FilterState::Fixed { pass_rate, gate } => gate.decide(*pass_rate),
            FilterState::History {
                base,
                filtered,
                threshold,
                window,
                gate,
                ..
            } => {
                let empties = window.iter().filter(|e| **e).count() as u32;
                let rate = if empties >= *threshold {
                    *filtered
                } else {
                    *base
                };
                gate.decide(rate)
            }
        }
    }

    fn observe(&mut self, empty: bool) {
        if let FilterState::History { window, cap, .. } = self {
            if window.len() == *cap {
                window.pop_front();
            }
            window.push_back(empty);
        }
    }
}

/// External (off-node) battery draws.
#[derive(Debug, Default)]
struct ExternalEnergy {
    pir_j: f64,
    camera_j: f64,
    feram_j: f64,
    radio_j: f64,
}

struct Engine<'a> {
    sim: &'a SimConfig,
    scn: &'a ScenarioConfig,
    variant: Variant,
    q: EventQueue<Ev>,
    ledger: EnergyLedger,
    wuc: Wuc,
    sram: TpSram,
    filter: FilterState,
    ext: ExternalEnergy,
    counts: DayCounts,
    od_users: u32,
    periph_users: u32,
    od_on_since: SimTime,
    pneuro_j: f64,
    e_cyc_j: f64,
    infer_latency: SimTime,
    infer_energy_j: f64,
    spi_cycles: u64,
    crypto_image_cycles: u64,
    crypto_message_cycles: u64,
    event_trace: Option<Vec<EventTraceRow>>,
    day_end: SimTime,
    done: bool,
}

impl<'a> Engine<'a> {
    fn new(
        sim: &'a SimConfig,
        variant: Variant,
        traces: TraceOptions,
    ) -> Result<Self, ScenarioError> {
        let scn = &sim.scenario;
        let mut ledger = EnergyLedger::new(sim.power.clone(), SimTime::ZERO);
        ledger.set_od_operating_point(scn.od_volts, scn.od_freq_hz, &sim.dvfs)?;
        if traces.power {
            ledger.enable_trace();
        }
        let mut sram = TpSram::new(sim.tpsram_timing.clone(), sim.tpsram_power.clone());
        if traces.handshake {
            sram.enable_trace();
        }
        let e_cyc_j = sim.dvfs.energy_per_cycle_j(scn.od_volts)?;

        let net = sim
            .networks
            .get(&scn.network)
            .ok_or_else(|| ScenarioError::UnknownNetwork(scn.network.clone()))?;
        let layers = net.resolve()?;
        let run = pneuro::run_inference(
            &layers,
            &sim.cluster,
            &sim.efficiency,
            &sim.pneuro_energy,
            scn.od_volts,
            scn.od_freq_hz,
            &sim.dvfs,
        )?;

        let image_bytes = scn.image_bytes();
        let spi_cycles = sim.spi.transfer_cycles(image_bytes, scn.od_freq_hz);
        let crypto_image_cycles = sim.crypto.cost_cycles(&scn.crypto_algorithm, image_bytes)?;
        let crypto_message_cycles = sim
            .crypto
            .cost_cycles(&scn.crypto_algorithm, scn.message_payload_bytes)?;

        Ok(Engine {
            sim,
            scn,
            variant,
            q: EventQueue::new(),
            ledger,
            wuc: Wuc::new(sim.wuc_timing.clone(), sim.wuc_power.clone()),
            sram,
            filter: FilterState::new(&scn.filter),
            ext: ExternalEnergy::default(),
            counts: DayCounts::default(),
            od_users: 0,
            periph_users: 0,
            od_on_since: SimTime::ZERO,
            pneuro_j: 0.0,
            e_cyc_j,
            infer_latency: run.latency,
            infer_energy_j: run.energy_j,
            spi_cycles,
            crypto_image_cycles,
            crypto_message_cycles,
            event_trace: traces.events.then(Vec::new),
            day_end: SimTime::from_secs_f64(DAY_S),
            done: false,
        })
    }

    /// The mode implied by what is active right now. CPU_RUNNING
    /// dominates the peripheral window which dominates the controller;
    /// overlaps are rare enough that the folded-away draw is noise.
    fn target_mode(&self) -> PowerMode {
        if self.od_users > 0 {
            PowerMode::CpuRunning
        } else if self.periph_users > 0 {
            PowerMode::WucPeriph
        } else if self.wuc.phase() != WucPhase::Idle {
            PowerMode::WucOnly
        } else {
            PowerMode::Idle
        }
    }

    fn recompute_mode(&mut self, at: SimTime) -> Result<(), ScenarioError> {
        let target = self.target_mode();
        let current = self.ledger.mode();
        if target == current {
            return Ok(());
        }
        if current == PowerMode::CpuRunning {
            // Close the envelope accrual over the whole powered window.
            self.ledger.accrue(
                PowerDomain::Od,
                self.scn.od_envelope_w,
                self.od_on_since,
                at,
            )?;
        }
        self.ledger.set_mode(target, at, Initiator::Wuc)?;
        if target == PowerMode::CpuRunning {
            self.od_on_since = at;
            self.sram.set_voltage(self.scn.od_volts);
        } else {
            self.sram.set_voltage(crate::power::TPSRAM_BASE_VOLTS);
        }
        if target == PowerMode::Idle {
            // Retire the shared memory through its sleep handshake.
            self.sram.drive(SramSignal::SleepReq, true, at)?;
        }
        Ok(())
    }

    fn raise(&mut self, id: u8, at: SimTime) -> Result<(), ScenarioError> {
        match self.wuc.raise_interrupt(id, at)? {
            RaiseOutcome::Wake(rec) => {
                self.recompute_mode(rec.raised_at)?;
                self.sram
                    .drive(SramSignal::SleepReq, false, rec.sram_wake_req_at)?;
                self.q.schedule(rec.first_fetch_at, "wuc", Ev::WucFetch)?;
            }
            RaiseOutcome::Queued | RaiseOutcome::Ignored => {}
        }
        Ok(())
    }

    /// Run the next pending controller task, or go idle.
    fn service_next(&mut self, at: SimTime) -> Result<(), ScenarioError> {
        let Some(id) = self.wuc.begin_service() else {
            self.wuc.go_idle(at)?;
            self.recompute_mode(at)?;
            return Ok(());
        };
        let (instructions, done) = match id {
            SRC_PIR => {
                let accepted = match self.variant {
                    Variant::Edge => self.filter.decide(),
                    // The cloud node ships every frame.
                    Variant::Cloud => true,
                };
                (
                    self.scn.filter_task_instructions,
                    Ev::FilterDone { accepted },
                )
            }
            SRC_OD_DONE => (self.scn.reconfig_task_instructions, Ev::ReconfigDone),
            SRC_MESSAGE => (self.scn.message_task_instructions, Ev::MessageTaskDone),
            other => {
                return Err(ScenarioError::Invalid {
                    field: "interrupt".into(),
                    reason: format!("unexpected source {other}"),
                })
            }
        };
        let task = WucTask::new(id, instructions, Vec::new())?;
        self.sram.advance(at);
        let run = self.wuc.execute_task(&task, at, self.sram.is_awake())?;
        self.q.schedule(run.end, "wuc", done)?;
        Ok(())
    }

    fn open_od_window(&mut self, at: SimTime) -> Result<(), ScenarioError> {
        self.od_users += 1;
        if self.od_users == 1 {
            self.recompute_mode(at)?;
        }
        Ok(())
    }

    fn close_od_window(&mut self, at: SimTime) -> Result<(), ScenarioError> {
        self.od_users -= 1;
        if self.od_users == 0 {
            self.recompute_mode(at)?;
        }
        Ok(())
    }

    /// Charge `cycles` of on-demand work ending at `at`.
    fn accrue_od_cycles(&mut self, cycles: u64, from: SimTime, to: SimTime) -> Result<f64, ScenarioError> {
        let energy = cycles as f64 * self.e_cyc_j;
        let dur = (to - from).as_secs_f64();
        let watts = if dur > 0.0 { energy / dur } else { 0.0 };
        if watts > 0.0 {
            self.ledger.accrue(PowerDomain::Od, watts, from, to)?;
        }
        Ok(energy)
    }

    fn handle(&mut self, ev: Ev, at: SimTime) -> Result<(), ScenarioError> {
        match ev {
            Ev::Pir => {
                self.counts.detections += 1;
                self.raise(SRC_PIR, at)?;
            }
            Ev::Message => {
                self.raise(SRC_MESSAGE, at)?;
            }
            Ev::WucFetch => {
                self.service_next(at)?;
            }
            Ev::FilterDone { accepted } => {
                if accepted {
                    self.open_od_window(at)?;
                    let frame = SimTime::from_secs_f64(self.scn.camera_frame_s);
                    self.q.schedule(at + frame, "od", Ev::CameraDone)?;
                }
                self.service_next(at)?;
            }
            Ev::CameraDone => {
                self.ext.camera_j += self.scn.camera_power_w * self.scn.camera_frame_s;
                if self.variant == Variant::Edge {
                    // Weights streamed from FeRAM during the frame.
                    let (_, feram_j) = self.sim.feram.load(self.scn.weight_bytes);
                    self.ext.feram_j += feram_j;
                }
                let spi_dur = self.sim.spi.transfer_duration(self.scn.image_bytes());
                self.q.schedule(at + spi_dur, "od", Ev::SpiDone)?;
            }
            Ev::SpiDone => {
                let start = at - self.sim.spi.transfer_duration(self.scn.image_bytes());
                self.accrue_od_cycles(self.spi_cycles, start, at)?;
                match self.variant {
                    Variant::Edge => {
                        let dur = if self.scn.classify_on_cpu {
                            SimTime::from_secs_f64(
                                self.scn.cpu_classify_cycles as f64 / self.scn.od_freq_hz,
                            )
                        } else {
                            self.infer_latency
                        };
                        self.q.schedule(at + dur, "od", Ev::InferDone)?;
                    }
                    Variant::Cloud => {
                        let dur = SimTime::from_secs_f64(
                            self.crypto_image_cycles as f64 / self.scn.od_freq_hz,
                        );
                        self.q.schedule(at + dur, "od", Ev::CryptoDone)?;
                    }
                }
            }
            Ev::InferDone => {
                self.counts.classifications += 1;
                if self.scn.classify_on_cpu {
                    let cycles = self.scn.cpu_classify_cycles;
                    let start =
                        at - SimTime::from_secs_f64(cycles as f64 / self.scn.od_freq_hz);
                    self.accrue_od_cycles(cycles, start, at)?;
                } else {
                    let start = at - self.infer_latency;
                    let dur = self.infer_latency.as_secs_f64();
                    let watts = if dur > 0.0 {
                        self.infer_energy_j / dur
                    } else {
                        0.0
                    };
                    if watts > 0.0 {
                        self.ledger.accrue(PowerDomain::Od, watts, start, at)?;
                    }
                    self.pneuro_j += self.infer_energy_j;
                }
                // Land the verdict in the shared memory over its write
                // port, then hand the window back to the controller.
                let empty = self.counts.classifications.is_multiple_of(self.scn.empty_every);
                self.filter.observe(empty);
                self.sram.advance(at);
                self.sram.set_wrp_operation(WrpOp::Write {
                    addr: RESULT_ADDR,
                    data: empty as u8,
                })?;
                self.sram.drive(SramSignal::WrpCk, true, at)?;
                self.sram
                    .drive(SramSignal::WrpCk, false, at + SimTime::from_ns(10))?;
                self.raise(SRC_OD_DONE, at)?;
                self.close_od_window(at)?;
            }
            Ev::CryptoDone => {
                let start =
                    at - SimTime::from_secs_f64(self.crypto_image_cycles as f64 / self.scn.od_freq_hz);
                self.accrue_od_cycles(self.crypto_image_cycles, start, at)?;
                let bits = self.scn.image_bytes() as f64 * 8.0;
                let tx = SimTime::from_secs_f64(bits / self.scn.radio_tx_bps);
                self.q.schedule(at + tx, "radio", Ev::TxDone)?;
            }
            Ev::TxDone => {
                self.counts.transmissions += 1;
                let bits = self.scn.image_bytes() as f64 * 8.0;
                self.ext.radio_j += bits * self.scn.cloud_link_j_per_bit;
                self.close_od_window(at)?;
            }
            Ev::ReconfigDone => {
                self.service_next(at)?;
            }
            Ev::MessageTaskDone => {
                self.counts.messages += 1;
                self.ext.radio_j += self.scn.message_radio_j;
                self.periph_users += 1;
                self.recompute_mode(at)?;
                let window = SimTime::from_secs_f64(self.scn.message_periph_s);
                // Payload encryption rides inside the handoff window.
                self.accrue_od_cycles(self.crypto_message_cycles, at, at + window)?;
                self.q.schedule(at + window, "radio", Ev::MessagePeriphDone)?;
                self.service_next(at)?;
            }
            Ev::MessagePeriphDone => {
                self.periph_users -= 1;
                self.recompute_mode(at)?;
            }
            Ev::DayEnd => {
                if self.od_users > 0 {
                    // Day boundary truncates any window still open.
                    self.ledger.accrue(
                        PowerDomain::Od,
                        self.scn.od_envelope_w,
                        self.od_on_since,
                        at,
                    )?;
                    self.od_on_since = at;
                }
                if self.scn.wur_listening {
                    // Duty-cycled listening rides on top of every mode.
                    self.ledger.accrue(
                        PowerDomain::Wur,
                        self.sim.power.wur_listen_w,
                        SimTime::ZERO,
                        at,
                    )?;
                }
                self.ledger.advance_to(at);
                self.ext.pir_j = self.scn.pir_power_w * DAY_S;
                self.done = true;
            }
        }
        Ok(())
    }

    fn run(&mut self, seed: u64) -> Result<(), ScenarioError> {
        for t in generate_pir_events(self.scn, seed) {
            self.q.schedule(t, "pir", Ev::Pir)?;
        }
        if self.variant == Variant::Edge {
            let slot = DAY_S / self.scn.messages_per_day.max(1) as f64;
            for k in 0..self.scn.messages_per_day {
                let t = SimTime::from_secs_f64((k as f64 + 0.5) * slot);
                self.q.schedule(t, "message", Ev::Message)?;
            }
        }
        self.q.schedule(self.day_end, "day", Ev::DayEnd)?;
        while !self.done {
            let event = self.q.advance()?;
            if let Some(trace) = &mut self.event_trace {
                trace.push(EventTraceRow {
                    time_ps: event.fire_at.as_ps(),
                    seq: event.seq,
                    target: event.target,
                    payload_kind: event.payload.kind(),
                });
            }
            self.handle(event.payload, event.fire_at)?;
        }
        Ok(())
    }

    fn report(&self, seed: u64) -> DailyReport {
        let node_j = self.ledger.total_energy_j();
        let components_raw = [
            ("samurai", node_j),
            ("pir", self.ext.pir_j),
            ("camera", self.ext.camera_j),
            ("feram", self.ext.feram_j),
            ("radio", self.ext.radio_j),
        ];
        let total_j: f64 = components_raw.iter().map(|(_, e)| e).sum();
        let components = components_raw
            .iter()
            .map(|&(name, e)| Component {
                name: name.to_string(),
                energy_j: e,
                avg_power_w: e / DAY_S,
                fraction: e / total_j,
            })
            .collect();
        let mode_residency = MODES
            .iter()
            .map(|&m| ModeResidency {
                mode: m.name().to_string(),
                seconds: self.ledger.mode_time(m).as_secs_f64(),
                energy_j: self.ledger.mode_energy_j(m),
            })
            .collect();
        let node_domains = crate::power::DOMAINS
            .iter()
            .map(|&d| DomainEnergy {
                domain: d.name().to_string(),
                energy_j: self.ledger.domain_energy_j(d),
            })
            .collect();
        let perf = self.wuc.perf();
        DailyReport {
            variant: self.variant.name().to_string(),
            seed,
            config_sha256: self.sim.sha256_hex(),
            version: VERSION.to_string(),
            day_s: DAY_S,
            avg_power_w: total_j / DAY_S,
            total_energy_j: total_j,
            components,
            counts: DayCounts {
                detections: self.counts.detections,
                classifications: self.counts.classifications,
                transmissions: self.counts.transmissions,
                messages: self.counts.messages,
                wuc_wakeups: perf.wakeups,
                wuc_instructions: perf.instructions,
            },
            mode_residency,
            node_domains,
            pneuro_energy_j: self.pneuro_j,
            pneuro_fraction: self.pneuro_j / total_j,
            mean_wake_ns: perf.mean_ttff_ps().unwrap_or(0.0) / 1000.0,
        }
    }
}

/// Simulate one day and return the report plus requested traces.
pub fn run_day_with(
    sim: &SimConfig,
    variant: Variant,
    seed: u64,
    traces: TraceOptions,
) -> Result<RunArtifacts, ScenarioError> {
    sim.scenario
        .validate()
        .map_err(|(field, reason)| ScenarioError::Invalid { field, reason })?;
    let mut engine = Engine::new(sim, variant, traces)?;
    engine.run(seed)?;
    let report = engine.report(seed);
    Ok(RunArtifacts {
        report,
        power_trace: engine.ledger.take_trace(),
        handshake_trace: engine.sram.take_trace(),
        event_trace: engine.event_trace.take().unwrap_or_default(),
    })
}

pub fn run_day(sim: &SimConfig, variant: Variant, seed: u64) -> Result<DailyReport, ScenarioError> {
    run_day_with(sim, variant, seed, TraceOptions::default()).map(|a| a.report)
}

/// Set one sweep parameter by dotted name.
pub fn apply_parameter(
    sim: &mut SimConfig,
    parameter: &str,
    value: f64,
) -> Result<(), ScenarioError> {
    let scn = &mut sim.scenario;
    match parameter {
        "scenario.filter.pass_rate" | "filter.pass_rate" | "pass_rate" => match &mut scn.filter {
            FilterPolicy::FixedRate { pass_rate } => *pass_rate = value,
            FilterPolicy::History { .. } => {
                return Err(ScenarioError::Invalid {
                    field: "filter".into(),
                    reason: "pass_rate sweeps need the fixed_rate filter".into(),
                })
            }
        },
        "scenario.classify_on_cpu" | "classify_on_cpu" => scn.classify_on_cpu = value != 0.0,
        "scenario.camera_power_w" | "camera_power_w" => scn.camera_power_w = value,
        "scenario.camera_frame_s" | "camera_frame_s" => scn.camera_frame_s = value,
        "scenario.pir_interval_s" | "pir_interval_s" => scn.pir_interval_s = value,
        "scenario.occupancy_hours" | "occupancy_hours" => scn.occupancy_hours = value,
        "scenario.messages_per_day" | "messages_per_day" => scn.messages_per_day = value as u32,
        "scenario.message_radio_j" | "message_radio_j" => scn.message_radio_j = value,
        "scenario.od_envelope_w" | "od_envelope_w" => scn.od_envelope_w = value,
        "scenario.cpu_classify_cycles" | "cpu_classify_cycles" => {
            scn.cpu_classify_cycles = value as u64
        }
        "scenario.weight_bytes" | "weight_bytes" => scn.weight_bytes = value as u64,
        "scenario.cloud_link_j_per_bit" | "cloud_link_j_per_bit" => {
            scn.cloud_link_j_per_bit = value
        }
        other => return Err(ScenarioError::UnknownParameter(other.to_string())),
    }
    Ok(())
}

/// Run one day per value of `parameter`, at most `threads` at a time.
/// Reports come back in input order.
pub fn sweep(
    sim: &SimConfig,
    variant: Variant,
    parameter: &str,
    values: &[f64],
    seed: u64,
    threads: usize,
) -> Result<Vec<DailyReport>, ScenarioError> {
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = sim.clone();
        apply_parameter(&mut cfg, parameter, v)?;
        cfg.scenario
            .validate()
            .map_err(|(field, reason)| ScenarioError::Invalid { field, reason })?;
        configs.push(cfg);
    }
    let threads = threads.max(1).min(configs.len().max(1));
    if threads <= 1 || configs.len() <= 1 {
        return configs
            .iter()
            .map(|cfg| run_day(cfg, variant, seed))
            .collect();
    }
    let mut slots: Vec<Option<Result<DailyReport, ScenarioError>>> = Vec::new();
    slots.resize_with(configs.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let result = run_day(&configs[i], variant, seed);
                slots.lock().expect("sweep lock")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("sweep lock")
        .iter_mut()
        .map(|slot| slot.take().expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const UW: f64 = 1.0e-6;

    fn edge_report() -> DailyReport {
        run_day(&SimConfig::default(), Variant::Edge, 7).unwrap()
    }

    fn with_pass_rate(rate: f64) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.scenario.filter = FilterPolicy::FixedRate { pass_rate: rate };
        cfg
    }

    #[test]
    fn pir_grid_covers_the_occupied_window() {
        let scn = ScenarioConfig::default();
        let events = generate_pir_events(&scn, 0);
        assert_eq!(events.len(), 5760);
        assert_eq!(events[0], SimTime::from_secs(32_400));
        assert_eq!(events[1] - events[0], SimTime::from_secs(5));
        assert_eq!(*events.last().unwrap(), SimTime::from_secs(61_195));
    }

    #[test]
    fn always_occupied_day_has_a_full_grid() {
        let scn = ScenarioConfig {
            occupancy_start_s: 0.0,
            occupancy_hours: 24.0,
            ..ScenarioConfig::default()
        };
        assert_eq!(generate_pir_events(&scn, 0).len(), 17_280);
    }

    #[test]
    fn jittered_grid_is_sorted_and_seeded() {
        let scn = ScenarioConfig {
            pir_jitter_s: 1.0,
            ..ScenarioConfig::default()
        };
        let a = generate_pir_events(&scn, 3);
        let b = generate_pir_events(&scn, 3);
        let c = generate_pir_events(&scn, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a.len(), 5760);
    }

    #[test]
    fn rate_gate_tracks_the_exact_proportion() {
        for &p in &[0.0, 0.1, 0.3, 0.5, 0.65, 0.9, 1.0] {
            let mut gate = RateGate::new();
            let accepted = (0..5760).filter(|_| gate.decide(p)).count() as i64;
            let exact = (5760.0 * p).floor() as i64;
            assert!(
                (accepted - exact).abs() <= 1,
                "p={p}: accepted {accepted} vs exact {exact}"
            );
        }
    }

    #[test]
    fn default_day_matches_the_deployment_estimate() {
        let r = edge_report();
        assert_eq!(r.counts.detections, 5760);
        assert_eq!(r.counts.classifications, 1728);
        assert_eq!(r.counts.messages, 5);
        let total_uw = r.avg_power_w / UW;
        assert!(
            (total_uw - 105.0).abs() < 0.2,
            "edge average {total_uw:.3} uW"
        );
        let camera = r.component("camera").unwrap().fraction;
        let samurai = r.component("samurai").unwrap().fraction;
        assert!((camera - 0.4762).abs() < 0.003, "camera share {camera:.4}");
        assert!(
            (samurai - 0.2600).abs() < 0.003,
            "samurai share {samurai:.4}"
        );
        assert!(r.pneuro_fraction > 0.0 && r.pneuro_fraction < 0.02);
        assert!((r.mean_wake_ns - 207.0).abs() < 1e-9);
    }

    #[test]
    fn report_bookkeeping_is_consistent() {
        let r = edge_report();
        let frac_sum: f64 = r.components.iter().map(|c| c.fraction).sum();
        assert!((frac_sum - 1.0).abs() < 1e-9);
        let energy_sum: f64 = r.components.iter().map(|c| c.energy_j).sum();
        assert!((energy_sum - r.total_energy_j).abs() < 1e-12 * r.total_energy_j.max(1.0));
        assert!((r.avg_power_w - r.total_energy_j / DAY_S).abs() < 1e-18);
        let residency: f64 = r.mode_residency.iter().map(|m| m.seconds).sum();
        assert!((residency - DAY_S).abs() < 1e-6);
        let mode_energy: f64 = r.mode_residency.iter().map(|m| m.energy_j).sum();
        let domain_energy: f64 = r.node_domains.iter().map(|d| d.energy_j).sum();
        let node = r.component("samurai").unwrap().energy_j;
        assert!((mode_energy - node).abs() < 1e-9 * node);
        assert!((domain_energy - node).abs() < 1e-9 * node);
    }

    #[test]
    fn cpu_running_residency_matches_the_window_math() {
        let r = edge_report();
        let cpu = r
            .mode_residency
            .iter()
            .find(|m| m.mode == "cpu_running")
            .unwrap();
        // 1728 windows of 1 s frame + 4.01408 ms SPI + 36.36236 ms inference.
        assert!((cpu.seconds - 1797.77).abs() < 0.05, "{}", cpu.seconds);
    }

    #[test]
    fn zero_pass_rate_leaves_only_the_floor() {
        let cfg = with_pass_rate(0.0);
        let r = run_day(&cfg, Variant::Edge, 7).unwrap();
        assert_eq!(r.counts.classifications, 0);
        let total_uw = r.avg_power_w / UW;
        assert!((total_uw - 22.75).abs() < 0.05, "floor {total_uw:.3} uW");
    }

    #[test]
    fn unfiltered_day_costs_close_to_three_x() {
        let all = run_day(&with_pass_rate(1.0), Variant::Edge, 7).unwrap();
        let base = edge_report();
        assert_eq!(all.counts.classifications, 5760);
        let ratio = all.avg_power_w / base.avg_power_w;
        assert!((ratio - 2.828).abs() < 0.01, "ratio {ratio:.4}");
    }

    #[test]
    fn relaxed_filter_costs_just_under_two_x() {
        let mid = run_day(&with_pass_rate(0.65), Variant::Edge, 7).unwrap();
        let base = edge_report();
        assert_eq!(mid.counts.classifications, 3744);
        let ratio = mid.avg_power_w / base.avg_power_w;
        assert!((ratio - 1.914).abs() < 0.01, "ratio {ratio:.4}");
    }

    #[test]
    fn cpu_classification_multiplies_the_budget() {
        let mut cfg = SimConfig::default();
        cfg.scenario.classify_on_cpu = true;
        let cpu = run_day(&cfg, Variant::Edge, 7).unwrap();
        let total_uw = cpu.avg_power_w / UW;
        assert!((total_uw - 243.7).abs() < 1.5, "cpu total {total_uw:.2} uW");
        assert_eq!(cpu.pneuro_energy_j, 0.0);
    }

    #[test]
    fn cloud_variant_pays_for_the_link() {
        let cfg = SimConfig::default();
        let cloud = run_day(&cfg, Variant::Cloud, 7).unwrap();
        let edge = edge_report();
        assert_eq!(cloud.counts.transmissions, 5760);
        assert_eq!(cloud.counts.classifications, 0);
        assert_eq!(cloud.counts.messages, 0);
        let total_uw = cloud.avg_power_w / UW;
        assert!((total_uw - 359.9).abs() < 1.0, "cloud {total_uw:.2} uW");
        let radio = cloud.component("radio").unwrap().fraction;
        let camera = cloud.component("camera").unwrap().fraction;
        assert!((radio - 0.2602).abs() < 0.005, "radio share {radio:.4}");
        assert!((camera - 0.4631).abs() < 0.005, "camera share {camera:.4}");
        let ratio = cloud.avg_power_w / edge.avg_power_w;
        assert!((ratio - 3.43).abs() < 0.02, "cloud/edge {ratio:.3}");
        // Local filtering beats shipping frames at any pass rate.
        let all_local = run_day(&with_pass_rate(1.0), Variant::Edge, 7).unwrap();
        assert!(all_local.avg_power_w < cloud.avg_power_w);
    }

    #[test]
    fn wur_listening_adds_its_measured_draw() {
        let mut cfg = with_pass_rate(0.0);
        cfg.scenario.wur_listening = true;
        let with_wur = run_day(&cfg, Variant::Edge, 7).unwrap();
        let without = run_day(&with_pass_rate(0.0), Variant::Edge, 7).unwrap();
        let delta_uw = (with_wur.avg_power_w - without.avg_power_w) / UW;
        assert!((delta_uw - 4.1).abs() < 0.01, "wur delta {delta_uw:.3} uW");
    }

    #[test]
    fn history_filter_backs_off_on_empty_scenes() {
        let mut cfg = SimConfig::default();
        cfg.scenario.filter = FilterPolicy::History {
            window: 8,
            empty_threshold: 3,
            base_pass_rate: 0.9,
            filtered_pass_rate: 0.1,
        };
        cfg.scenario.empty_every = 1;
        let r = run_day(&cfg, Variant::Edge, 7).unwrap();
        let n = r.counts.classifications;
        assert!(n > 100 && n < 1500, "history classifications {n}");
        let all = run_day(&with_pass_rate(0.9), Variant::Edge, 7).unwrap();
        assert!(r.avg_power_w < all.avg_power_w);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = SimConfig::default();
        let a = serde_json::to_string(&run_day(&cfg, Variant::Edge, 42).unwrap()).unwrap();
        let b = serde_json::to_string(&run_day(&cfg, Variant::Edge, 42).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_is_ordered_parallel_safe_and_affine() {
        let cfg = SimConfig::default();
        let values = [0.1, 0.2, 0.3, 0.4, 0.5];
        let serial = sweep(&cfg, Variant::Edge, "filter.pass_rate", &values, 7, 1).unwrap();
        let parallel = sweep(&cfg, Variant::Edge, "filter.pass_rate", &values, 7, 4).unwrap();
        for (s, p) in serial.iter().zip(&parallel) {
            assert_eq!(
                serde_json::to_string(s).unwrap(),
                serde_json::to_string(p).unwrap()
            );
        }
        // Total power is affine in the accepted count.
        let pts: Vec<(f64, f64)> = serial
            .iter()
            .map(|r| (r.counts.classifications as f64, r.avg_power_w))
            .collect();
        let slope = (pts[4].1 - pts[0].1) / (pts[4].0 - pts[0].0);
        let intercept = pts[0].1 - slope * pts[0].0;
        for (x, y) in &pts {
            let fit = intercept + slope * x;
            assert!((fit - y).abs() < 1e-4 * y, "affine residual at {x}");
        }
    }

    #[test]
    fn unknown_sweep_parameter_is_rejected() {
        let cfg = SimConfig::default();
        let err = sweep(&cfg, Variant::Edge, "scenario.nonsense", &[1.0], 7, 1).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownParameter(_)));
    }

    #[test]
    fn wakeup_counts_are_exact() {
        let r = edge_report();
        // Every detection wakes the controller; each accepted frame
        // wakes it again for reconfiguration; of the five message
        // slots, two coincide with detection instants and queue up.
        assert_eq!(r.counts.wuc_wakeups, 5760 + 1728 + 3);
        assert_eq!(
            r.counts.wuc_instructions,
            5760 * 1000 + 1728 * 200 + 5 * 200
        );
    }
}
