//! Power domains, operating modes, DVFS and energy accounting.
//!
//! Mode powers are configuration constants seeded from the measured
//! steady-state numbers; components override them with activity-based
//! accruals during scenario runs. The ledger integrates piecewise
//! constant power per domain and per mode and can break a window down
//! into per-domain energies and fractions.

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("mode change requested by {0}; only the wake-up controller may initiate one")]
    IllegalInitiator(&'static str),
    #[error("accrual interval ends at {to} before it starts at {from}")]
    NegativeInterval { from: SimTime, to: SimTime },
    #[error("voltage {0} V outside the curve's [{1}, {2}] V range")]
    OutOfRange(f64, f64, f64),
    #[error("frequency {0} Hz above the curve's maximum {1} Hz")]
    FrequencyOutOfRange(f64, f64),
    #[error("breakdown window is empty")]
    EmptyWindow,
    #[error("figure of merit divides by zero")]
    DivisionByZero,
}

/// The five power domains of the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerDomain {
    /// Always-responsive logic: wake-up controller and its peripherals.
    Ar,
    /// Retentive transfer-port SRAM shared between the two subsystems.
    TpSram,
    /// On-demand subsystem: CPU, accelerator, peripherals.
    Od,
    /// Retentive data memory inside the on-demand subsystem.
    RetentionSram,
    /// Wake-up radio receiver.
    Wur,
}

pub const DOMAINS: [PowerDomain; 5] = [
    PowerDomain::Ar,
    PowerDomain::TpSram,
    PowerDomain::Od,
    PowerDomain::RetentionSram,
    PowerDomain::Wur,
];

impl PowerDomain {
    pub fn index(self) -> usize {
        match self {
            PowerDomain::Ar => 0,
            PowerDomain::TpSram => 1,
            PowerDomain::Od => 2,
            PowerDomain::RetentionSram => 3,
            PowerDomain::Wur => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PowerDomain::Ar => "ar",
            PowerDomain::TpSram => "tp_sram",
            PowerDomain::Od => "od",
            PowerDomain::RetentionSram => "retention_sram",
            PowerDomain::Wur => "wur",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainState {
    Off,
    Sleep,
    Run,
}

/// Node operating modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    Idle,
    WucOnly,
    WucWur,
    WucPeriph,
    CpuRunning,
}

pub const MODES: [PowerMode; 5] = [
    PowerMode::Idle,
    PowerMode::WucOnly,
    PowerMode::WucWur,
    PowerMode::WucPeriph,
    PowerMode::CpuRunning,
];

impl PowerMode {
    pub fn index(self) -> usize {
        match self {
            PowerMode::Idle => 0,
            PowerMode::WucOnly => 1,
            PowerMode::WucWur => 2,
            PowerMode::WucPeriph => 3,
            PowerMode::CpuRunning => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PowerMode::Idle => "idle",
            PowerMode::WucOnly => "wuc_only",
            PowerMode::WucWur => "wuc_wur",
            PowerMode::WucPeriph => "wuc_periph",
            PowerMode::CpuRunning => "cpu_running",
        }
    }
}

/// Who asked for a mode change. Only the wake-up controller (or the
/// initial bootstrap) is allowed to switch modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initiator {
    Wuc,
    Bootstrap,
    Other(&'static str),
}

/// Fixed AR-domain supply.
pub const AR_VOLTS: f64 = 0.45;
/// TP-SRAM supply outside CPU_RUNNING.
pub const TPSRAM_BASE_VOLTS: f64 = 0.48;

/// Steady per-domain power constants for each mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModePowerConfig {
    /// Wake-up controller asleep, W.
    pub wuc_idle_w: f64,
    /// Wake-up controller running at full instruction rate, W.
    pub wuc_run_w: f64,
    /// TP-SRAM in retention sleep, W.
    pub tpsram_sleep_w: f64,
    /// TP-SRAM serving the running controller, W.
    pub tpsram_run_w: f64,
    /// Retentive data memory size, bytes.
    pub retention_bytes: u64,
    /// Retention leakage per bit, A.
    pub retention_leak_a_per_bit: f64,
    /// Retention rail voltage, V.
    pub retention_volts: f64,
    /// Wake-up radio average power while duty-cycled listening, W.
    pub wur_listen_w: f64,
    /// On-demand peripherals awake with CPU and accelerator idle, W.
    pub od_periph_w: f64,
    /// Whole-node peak at full activity, 0.9 V / 350 MHz, W.
    pub peak_w: f64,
    /// Reference operating point for the peak figure.
    pub peak_volts: f64,
    pub peak_freq_hz: f64,
}

impl Default for ModePowerConfig {
    fn default() -> Self {
        ModePowerConfig {
            wuc_idle_w: 1.6e-6,
            wuc_run_w: 14.45e-6,
            tpsram_sleep_w: 4.6e-6,
            tpsram_run_w: 14.3e-6,
            retention_bytes: 32 * 1024,
            retention_leak_a_per_bit: 1.03e-12,
            retention_volts: 0.5,
            // 40 nW idle floor plus 5.342% decode duty reproduces the
            // measured +4.1 uW of the WuC+WuR mode.
            wur_listen_w: 4.1e-6,
            // 86.6% of the measured 224 uW WuC+Periph total.
            od_periph_w: 194.0e-6,
            peak_w: 96.0e-3,
            peak_volts: 0.9,
            peak_freq_hz: 350.0e6,
        }
    }
}

impl ModePowerConfig {
    /// Retention leakage power from bit count and per-bit current.
    pub fn retention_w(&self) -> f64 {
        self.retention_bytes as f64 * 8.0 * self.retention_leak_a_per_bit * self.retention_volts
    }

    /// Per-domain steady power for a mode. For CPU_RUNNING the OD entry
    /// is zero: OD energy there is activity-accrued by the components.
    pub fn domain_powers(&self, mode: PowerMode) -> [f64; 5] {
        let ret = self.retention_w();
        match mode {
            PowerMode::Idle => [self.wuc_idle_w, self.tpsram_sleep_w, 0.0, ret, 0.0],
            PowerMode::WucOnly => [self.wuc_run_w, self.tpsram_run_w, 0.0, ret, 0.0],
            PowerMode::WucWur => [
                self.wuc_run_w,
                self.tpsram_run_w,
                0.0,
                ret,
                self.wur_listen_w,
            ],
            PowerMode::WucPeriph => [
                self.wuc_run_w,
                self.tpsram_run_w,
                self.od_periph_w,
                ret,
                0.0,
            ],
            PowerMode::CpuRunning => [self.wuc_idle_w, self.tpsram_run_w, 0.0, ret, 0.0],
        }
    }

    /// Total steady mode power (meaningful for the static modes).
    pub fn mode_power_w(&self, mode: PowerMode) -> f64 {
        self.domain_powers(mode).iter().sum()
    }

    /// Per-domain (state, volts) for a mode; `od_volts` applies in
    /// CPU_RUNNING where the TP-SRAM rail tracks the OD rail.
    pub fn domain_states(&self, mode: PowerMode, od_volts: f64) -> [(DomainState, f64); 5] {
        use DomainState::*;
        let ret = (Run, self.retention_volts);
        match mode {
            PowerMode::Idle => [
                (Sleep, AR_VOLTS),
                (Sleep, TPSRAM_BASE_VOLTS),
                (Off, 0.0),
                ret,
                (Off, 0.0),
            ],
            PowerMode::WucOnly => [
                (Run, AR_VOLTS),
                (Run, TPSRAM_BASE_VOLTS),
                (Off, 0.0),
                ret,
                (Off, 0.0),
            ],
            PowerMode::WucWur => [
                (Run, AR_VOLTS),
                (Run, TPSRAM_BASE_VOLTS),
                (Off, 0.0),
                ret,
                (Run, AR_VOLTS),
            ],
            PowerMode::WucPeriph => [
                (Run, AR_VOLTS),
                (Run, TPSRAM_BASE_VOLTS),
                (Run, TPSRAM_BASE_VOLTS),
                ret,
                (Off, 0.0),
            ],
            PowerMode::CpuRunning => [
                (Run, AR_VOLTS),
                (Run, od_volts),
                (Run, od_volts),
                ret,
                (Off, 0.0),
            ],
        }
    }
}

/// Voltage/frequency/energy-per-cycle curve, linear between anchors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvfsCurve {
    /// Anchors (volts, hz, joules per cycle), ascending voltage.
    pub anchors: Vec<(f64, f64, f64)>,
}

impl Default for DvfsCurve {
    fn default() -> Self {
        DvfsCurve {
            anchors: vec![(0.48, 25.0e6, 19.0e-12), (0.90, 350.0e6, 66.0e-12)],
        }
    }
}

impl DvfsCurve {
    pub fn v_min(&self) -> f64 {
        self.anchors.first().map(|a| a.0).unwrap_or(0.0)
    }

    pub fn v_max(&self) -> f64 {
        self.anchors.last().map(|a| a.0).unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.anchors.len() < 2 {
            return Err("dvfs curve needs at least two anchors".into());
        }
        for w in self.anchors.windows(2) {
            let (v0, f0, e0) = w[0];
            let (v1, f1, e1) = w[1];
            if !(v1 > v0 && f1 > f0 && e1 > e0) {
                return Err(format!(
                    "dvfs anchors must strictly increase: ({v0},{f0},{e0}) vs ({v1},{f1},{e1})"
                ));
            }
        }
        Ok(())
    }

    /// (max frequency, energy per cycle) at `volts`.
    pub fn lookup(&self, volts: f64) -> Result<(f64, f64), PowerError> {
        let lo = self.v_min();
        let hi = self.v_max();
        if !(volts >= lo && volts <= hi) {
            return Err(PowerError::OutOfRange(volts, lo, hi));
        }
        for w in self.anchors.windows(2) {
            let (v0, f0, e0) = w[0];
            let (v1, f1, e1) = w[1];
            if volts <= v1 {
                let t = (volts - v0) / (v1 - v0);
                return Ok((f0 + t * (f1 - f0), e0 + t * (e1 - e0)));
            }
        }
        unreachable!("volts within range but no segment matched")
    }

    pub fn max_freq_hz(&self, volts: f64) -> Result<f64, PowerError> {
        Ok(self.lookup(volts)?.0)
    }

    pub fn energy_per_cycle_j(&self, volts: f64) -> Result<f64, PowerError> {
        Ok(self.lookup(volts)?.1)
    }

    /// Lowest voltage whose max frequency reaches `hz`.
    pub fn voltage_for_frequency(&self, hz: f64) -> Result<f64, PowerError> {
        let (_, f_lo, _) = self.anchors[0];
        let (v_hi, f_hi, _) = *self.anchors.last().unwrap();
        if hz > f_hi {
            return Err(PowerError::FrequencyOutOfRange(hz, f_hi));
        }
        if hz <= f_lo {
            return Ok(self.anchors[0].0);
        }
        for w in self.anchors.windows(2) {
            let (v0, f0, _) = w[0];
            let (v1, f1, _) = w[1];
            if hz <= f1 {
                let t = (hz - f0) / (f1 - f0);
                return Ok(v0 + t * (v1 - v0));
            }
        }
        Ok(v_hi)
    }
}

/// One recorded interval of constant power on a domain.
#[derive(Debug, Clone, Copy)]
struct Pulse {
    from: SimTime,
    to: SimTime,
    watts: f64,
}

/// Record of a mode transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub at: SimTime,
    pub from: PowerMode,
    pub to: PowerMode,
    pub domain_changes: Vec<(PowerDomain, DomainState, f64)>,
}

/// One line of the power-trace CSV.
#[derive(Debug, Clone)]
pub struct PowerTraceRow {
    pub time_ps: u64,
    pub mode: &'static str,
    pub domain: &'static str,
    pub voltage_v: f64,
    pub power_w: f64,
}

/// Integrates per-domain and per-mode energy over time.
#[derive(Debug)]
pub struct EnergyLedger {
    cfg: ModePowerConfig,
    mode: PowerMode,
    od_volts: f64,
    od_freq_hz: f64,
    base_powers: [f64; 5],
    domain_energy_j: [f64; 5],
    mode_energy_j: [f64; 5],
    mode_time_ps: [u64; 5],
    pulses: [Vec<Pulse>; 5],
    start: SimTime,
    last_update: SimTime,
    trace: Option<Vec<PowerTraceRow>>,
}

impl EnergyLedger {
    /// Ledger starting at `start` in IDLE.
    pub fn new(cfg: ModePowerConfig, start: SimTime) -> Self {
        let base = cfg.domain_powers(PowerMode::Idle);
        EnergyLedger {
            cfg,
            mode: PowerMode::Idle,
            od_volts: TPSRAM_BASE_VOLTS,
            od_freq_hz: 25.0e6,
            base_powers: base,
            domain_energy_j: [0.0; 5],
            mode_energy_j: [0.0; 5],
            mode_time_ps: [0; 5],
            pulses: Default::default(),
            start,
            last_update: start,
            trace: None,
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
        self.emit_trace_rows(self.start);
    }

    pub fn take_trace(&mut self) -> Vec<PowerTraceRow> {
        self.trace.take().unwrap_or_default()
    }

    pub fn mode(&self) -> PowerMode {
        self.mode
    }

    pub fn od_operating_point(&self) -> (f64, f64) {
        (self.od_volts, self.od_freq_hz)
    }

    pub fn config(&self) -> &ModePowerConfig {
        &self.cfg
    }

    pub fn start_time(&self) -> SimTime {
        self.start
    }

    pub fn last_update(&self) -> SimTime {
        self.last_update
    }

    fn emit_trace_rows(&mut self, at: SimTime) {
        if let Some(trace) = &mut self.trace {
            let states = self.cfg.domain_states(self.mode, self.od_volts);
            for d in DOMAINS {
                let i = d.index();
                trace.push(PowerTraceRow {
                    time_ps: at.as_ps(),
                    mode: self.mode.name(),
                    domain: d.name(),
                    voltage_v: states[i].1,
                    power_w: self.base_powers[i],
                });
            }
        }
    }

    /// Integrate the current baseline powers up to `t`.
    pub fn advance_to(&mut self, t: SimTime) {
        debug_assert!(t >= self.last_update, "ledger time went backwards");
        if t <= self.last_update {
            return;
        }
        let from = self.last_update;
        let dt = (t - from).as_secs_f64();
        for i in 0..5 {
            let w = self.base_powers[i];
            if w != 0.0 {
                let e = w * dt;
                self.domain_energy_j[i] += e;
                self.mode_energy_j[self.mode.index()] += e;
                self.pulses[i].push(Pulse {
                    from,
                    to: t,
                    watts: w,
                });
            }
        }
        self.mode_time_ps[self.mode.index()] += (t - from).as_ps();
        self.last_update = t;
    }

    /// Switch modes at `at`. Elapsed time is charged at the old mode's
    /// powers first. Only the wake-up controller may initiate this.
    pub fn set_mode(
        &mut self,
        mode: PowerMode,
        at: SimTime,
        initiator: Initiator,
    ) -> Result<TransitionRecord, PowerError> {
        if let Initiator::Other(name) = initiator {
            return Err(PowerError::IllegalInitiator(name));
        }
        self.advance_to(at);
        let from = self.mode;
        if mode == from {
            return Ok(TransitionRecord {
                at,
                from,
                to: mode,
                domain_changes: Vec::new(),
            });
        }
        // Leaving CPU_RUNNING drops the shared rail back to its base.
        if from == PowerMode::CpuRunning {
            self.od_volts = TPSRAM_BASE_VOLTS;
        }
        self.mode = mode;
        self.base_powers = self.cfg.domain_powers(mode);
        let states = self.cfg.domain_states(mode, self.od_volts);
        self.emit_trace_rows(at);
        let mut changes = Vec::with_capacity(5);
        for d in DOMAINS {
            let (state, volts) = states[d.index()];
            changes.push((d, state, volts));
        }
        Ok(TransitionRecord {
            at,
            from,
            to: mode,
            domain_changes: changes,
        })
    }

    /// Set the OD rail point; the TP-SRAM rail tracks it in CPU_RUNNING.
    pub fn set_od_operating_point(
        &mut self,
        volts: f64,
        freq_hz: f64,
        dvfs: &DvfsCurve,
    ) -> Result<(), PowerError> {
        let (f_max, _) = dvfs.lookup(volts)?;
        if freq_hz > f_max * (1.0 + 1e-9) {
            return Err(PowerError::FrequencyOutOfRange(freq_hz, f_max));
        }
        self.od_volts = volts;
        self.od_freq_hz = freq_hz;
        Ok(())
    }

    /// Add `watts` on `domain` over `[from, to]`. Returns joules added.
    pub fn accrue(
        &mut self,
        domain: PowerDomain,
        watts: f64,
        from: SimTime,
        to: SimTime,
    ) -> Result<f64, PowerError> {
        if to < from {
            return Err(PowerError::NegativeInterval { from, to });
        }
        let e = watts * (to - from).as_secs_f64();
        let i = domain.index();
        self.domain_energy_j[i] += e;
        self.mode_energy_j[self.mode.index()] += e;
        if watts != 0.0 && to > from {
            self.pulses[i].push(Pulse { from, to, watts });
            if let Some(trace) = &mut self.trace {
                let states = self.cfg.domain_states(self.mode, self.od_volts);
                trace.push(PowerTraceRow {
                    time_ps: from.as_ps(),
                    mode: self.mode.name(),
                    domain: domain.name(),
                    voltage_v: states[i].1,
                    power_w: watts,
                });
            }
        }
        Ok(e)
    }

    pub fn domain_energy_j(&self, domain: PowerDomain) -> f64 {
        self.domain_energy_j[domain.index()]
    }

    pub fn total_energy_j(&self) -> f64 {
        self.domain_energy_j.iter().sum()
    }

    pub fn mode_energy_j(&self, mode: PowerMode) -> f64 {
        self.mode_energy_j[mode.index()]
    }

    pub fn mode_time(&self, mode: PowerMode) -> SimTime {
        SimTime::from_ps(self.mode_time_ps[mode.index()])
    }

    /// Per-domain energy and fraction over `[from, to]`.
    pub fn breakdown(
        &self,
        from: SimTime,
        to: SimTime,
    ) -> Result<Vec<(PowerDomain, f64, f64)>, PowerError> {
        if to <= from {
            return Err(PowerError::EmptyWindow);
        }
        let mut energies = [0.0f64; 5];
        for (i, pulses) in self.pulses.iter().enumerate() {
            for p in pulses {
                let lo = p.from.max(from);
                let hi = p.to.min(to);
                if hi > lo {
                    energies[i] += p.watts * (hi - lo).as_secs_f64();
                }
            }
        }
        let total: f64 = energies.iter().sum();
        Ok(DOMAINS
            .iter()
            .map(|&d| {
                let e = energies[d.index()];
                let frac = if total > 0.0 { e / total } else { 0.0 };
                (d, e, frac)
            })
            .collect())
    }
}

/// The three figures of merit:
/// peak/idle power ratio, peak GOPS per idle microwatt, and the latter
/// scaled by retention kilobytes.
pub fn compute_foms(
    peak_w: f64,
    idle_w: f64,
    peak_gops: f64,
    retention_kb: f64,
) -> Result<(f64, f64, f64), PowerError> {
    if idle_w == 0.0 {
        return Err(PowerError::DivisionByZero);
    }
    let fom1 = peak_w / idle_w;
    let fom2 = peak_gops / (idle_w * 1e6);
    let fom3 = fom2 * retention_kb;
    Ok((fom1, fom2, fom3))
}

/// A published comparison row: inputs plus the printed derived values.
#[derive(Debug, Clone, Serialize)]
pub struct FomRow {
    pub label: &'static str,
    pub idle_w: f64,
    pub peak_gops: f64,
    pub retention_kb: f64,
    /// Printed (value, decimals) pairs for cross-checking.
    pub printed_fom2: (f64, u32),
    pub printed_fom3: (f64, u32),
}

/// Comparison table rows with their printed figures.
pub fn comparison_rows() -> Vec<FomRow> {
    vec![
        FomRow {
            label: "this work",
            idle_w: 6.4e-6,
            peak_gops: 36.0,
            retention_kb: 40.0,
            printed_fom2: (5.63, 2),
            printed_fom3: (225.0, 0),
        },
        FomRow {
            label: "pullini",
            idle_w: 108.0e-6,
            peak_gops: 7.0,
            retention_kb: 448.0,
            printed_fom2: (0.064, 3),
            printed_fom3: (29.04, 2),
        },
        FomRow {
            label: "myers",
            idle_w: 0.08e-6,
            peak_gops: 0.066,
            retention_kb: 8.0,
            printed_fom2: (0.83, 2),
            printed_fom3: (6.60, 2),
        },
        FomRow {
            label: "lallement",
            idle_w: 0.704e-6,
            peak_gops: 0.15,
            retention_kb: 8.0,
            printed_fom2: (0.21, 2),
            printed_fom3: (1.70, 2),
        },
    ]
}

/// True when `computed` matches a printed value within 1% plus half a
/// unit in the printed value's last digit (printed figures are rounded).
pub fn matches_printed(computed: f64, printed: (f64, u32)) -> bool {
    let (value, decimals) = printed;
    let half_ulp = 0.5 * 10f64.powi(-(decimals as i32));
    (computed - value).abs() <= 0.01 * value.abs() + half_ulp
}
