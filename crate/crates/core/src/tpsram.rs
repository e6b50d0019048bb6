//! Retentive transfer-port SRAM with clock-less handshake ports.
//!
//! The memory exposes a sleep handshake (SLEEP_REQ/SLEEP_ACK) and two
//! ports: WRP on the controller side and RP on the on-demand side, each
//! driven by a CK/RDY/Q_V four-phase exchange. `drive` consumes one
//! input edge, validates it against the protocol, and returns the
//! response edges the memory will emit; violations carry a
//! machine-readable rule id. The 8 KiB array retains contents through
//! sleep.

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const MEM_BYTES: usize = 8192;

pub const V_RP_READ_MIN: f64 = 0.35;
pub const V_WRP_WRITE_MIN: f64 = 0.35;
pub const V_WRP_READ_MIN: f64 = 0.40;
pub const V_CONCURRENT_MIN: f64 = 0.48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SramSignal {
    SleepReq,
    SleepAck,
    WrpCk,
    WrpRdy,
    WrpQv,
    RpCk,
    RpRdy,
    RpQv,
}

pub const SIGNALS: [SramSignal; 8] = [
    SramSignal::SleepReq,
    SramSignal::SleepAck,
    SramSignal::WrpCk,
    SramSignal::WrpRdy,
    SramSignal::WrpQv,
    SramSignal::RpCk,
    SramSignal::RpRdy,
    SramSignal::RpQv,
];

impl SramSignal {
    fn index(self) -> usize {
        match self {
            SramSignal::SleepReq => 0,
            SramSignal::SleepAck => 1,
            SramSignal::WrpCk => 2,
            SramSignal::WrpRdy => 3,
            SramSignal::WrpQv => 4,
            SramSignal::RpCk => 5,
            SramSignal::RpRdy => 6,
            SramSignal::RpQv => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SramSignal::SleepReq => "SLEEP_REQ",
            SramSignal::SleepAck => "SLEEP_ACK",
            SramSignal::WrpCk => "WRP_CK",
            SramSignal::WrpRdy => "WRP_RDY",
            SramSignal::WrpQv => "WRP_Q_V",
            SramSignal::RpCk => "RP_CK",
            SramSignal::RpRdy => "RP_RDY",
            SramSignal::RpQv => "RP_Q_V",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        SIGNALS.iter().copied().find(|sig| sig.name() == s)
    }

    /// Signals driven by the outside world; the rest are memory outputs.
    pub fn is_input(self) -> bool {
        matches!(
            self,
            SramSignal::SleepReq | SramSignal::WrpCk | SramSignal::RpCk
        )
    }
}

impl fmt::Display for SramSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Machine-readable protocol rule identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleId {
    /// RP_CK raised while RP_RDY is low.
    RpNotReady,
    /// WRP_CK raised while WRP_RDY is low.
    WrpNotReady,
    /// Port clock raised while the memory is asleep or transitioning.
    PortWhileAsleep,
    /// SLEEP_REQ raised while a port operation is in flight.
    SleepWhileBusy,
    /// Wake requested while the sleep entry is still completing.
    WakeWhileTransitioning,
}

impl RuleId {
    pub fn code(self) -> &'static str {
        match self {
            RuleId::RpNotReady => "RP_NOT_READY",
            RuleId::WrpNotReady => "WRP_NOT_READY",
            RuleId::PortWhileAsleep => "PORT_WHILE_ASLEEP",
            RuleId::SleepWhileBusy => "SLEEP_WHILE_BUSY",
            RuleId::WakeWhileTransitioning => "WAKE_WHILE_TRANSITIONING",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TpSramError {
    #[error("protocol violation {rule} at {at}")]
    Protocol { rule: RuleId, at: SimTime },
    #[error("{op} needs at least {required_v} V, rail is at {actual_v} V")]
    VoltageCapability {
        op: &'static str,
        required_v: f64,
        actual_v: f64,
    },
    #[error("address {0} outside the {MEM_BYTES}-byte array")]
    OutOfRange(usize),
    #[error("functional access while the memory is not awake")]
    NotAwake,
    #[error("{0} is a memory output, not a drivable input")]
    NotAnInput(SramSignal),
}

/// Timing parameters, picoseconds. The four access offsets must be
/// strictly ordered so the read handshake always unfolds as
/// Q_V down, RDY down, Q_V up (data valid), RDY up.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TpSramTiming {
    pub t_wake_ps: u64,
    pub t_sleep_ps: u64,
    pub qv_fall_ps: u64,
    pub rdy_fall_ps: u64,
    pub qv_rise_ps: u64,
    pub rdy_rise_ps: u64,
    /// Wake time vs rail voltage, user-editable; single measured point
    /// by default. The closest entry to the operating voltage is used.
    pub wake_table: Vec<(f64, u64)>,
}

impl Default for TpSramTiming {
    fn default() -> Self {
        TpSramTiming {
            t_wake_ps: 15_500,
            t_sleep_ps: 15_500,
            qv_fall_ps: 10_000,
            rdy_fall_ps: 20_000,
            qv_rise_ps: 80_000,
            rdy_rise_ps: 90_000,
            wake_table: vec![(0.48, 15_500)],
        }
    }
}

impl TpSramTiming {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.qv_fall_ps < self.rdy_fall_ps
            && self.rdy_fall_ps < self.qv_rise_ps
            && self.qv_rise_ps < self.rdy_rise_ps)
        {
            return Err("access edge offsets must be strictly ordered".into());
        }
        if self.wake_table.is_empty() {
            return Err("wake table must have at least one entry".into());
        }
        Ok(())
    }

    fn wake_ps_at(&self, volts: f64) -> u64 {
        self.wake_table
            .iter()
            .min_by(|a, b| {
                (a.0 - volts)
                    .abs()
                    .partial_cmp(&(b.0 - volts).abs())
                    .unwrap()
            })
            .map(|&(_, t)| t)
            .unwrap_or(self.t_wake_ps)
    }
}

/// Power model inputs for the shared memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SramActivity {
    Sleep,
    /// Serving the wake-up controller at full instruction rate.
    ArActive,
    /// Both ports active at the given access rate.
    Shared { access_hz: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TpSramPower {
    pub sleep_w: f64,
    pub ar_active_w: f64,
    pub energy_per_access_j: f64,
}

impl Default for TpSramPower {
    fn default() -> Self {
        TpSramPower {
            sleep_w: 4.6e-6,
            ar_active_w: 14.3e-6,
            energy_per_access_j: 5.0e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortId {
    Wrp,
    Rp,
}

/// Operation armed on the WRP port before its clock edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrpOp {
    Read { addr: usize },
    Write { addr: usize, data: u8 },
}

/// A response edge the memory will emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledEdge {
    pub at: SimTime,
    pub signal: SramSignal,
    pub level: bool,
    /// Read data riding on a Q_V rise.
    pub data: Option<u8>,
}

/// One line of the handshake trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeEdge {
    pub time_ps: u64,
    pub signal: SramSignal,
    pub level: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Sleeping,
    Waking { awake_at: SimTime },
    Awake,
    EnteringSleep { asleep_at: SimTime },
}

#[derive(Debug)]
pub struct TpSram {
    mem: Vec<u8>,
    volts: f64,
    timing: TpSramTiming,
    power: TpSramPower,
    phase: Phase,
    levels: [bool; 8],
    rp_busy_until: Option<SimTime>,
    wrp_busy_until: Option<SimTime>,
    rp_addr: usize,
    wrp_op: WrpOp,
    pending: Vec<ScheduledEdge>,
    now: SimTime,
    trace: Option<Vec<HandshakeEdge>>,
}

impl TpSram {
    pub fn new(timing: TpSramTiming, power: TpSramPower) -> Self {
        timing.validate().expect("invalid TP-SRAM timing");
        // Asleep at reset: SLEEP_REQ high, everything else low.
        let mut levels = [false; 8];
        levels[SramSignal::SleepReq.index()] = true;
        TpSram {
            mem: vec![0; MEM_BYTES],
            volts: 0.48,
            timing,
            power,
            phase: Phase::Sleeping,
            levels,
            rp_busy_until: None,
            wrp_busy_until: None,
            rp_addr: 0,
            wrp_op: WrpOp::Read { addr: 0 },
            pending: Vec::new(),
            now: SimTime::ZERO,
            trace: None,
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<HandshakeEdge> {
        let mut rows = self.trace.take().unwrap_or_default();
        rows.sort_by_key(|r| r.time_ps);
        self.trace = Some(Vec::new());
        rows
    }

    pub fn set_voltage(&mut self, volts: f64) {
        assert!((0.0..=1.0).contains(&volts), "implausible rail voltage");
        self.volts = volts;
    }

    pub fn voltage(&self) -> f64 {
        self.volts
    }

    pub fn level(&self, signal: SramSignal) -> bool {
        self.levels[signal.index()]
    }

    pub fn is_awake(&self) -> bool {
        self.phase == Phase::Awake
    }

    /// Advance the memory's clock to `at`, applying any response edges
    /// that have come due. Useful before inspecting levels or phase.
    pub fn advance(&mut self, at: SimTime) {
        self.settle(at);
    }

    /// Arm the RP read address ahead of the RP_CK edge.
    pub fn set_rp_address(&mut self, addr: usize) -> Result<(), TpSramError> {
        if addr >= MEM_BYTES {
            return Err(TpSramError::OutOfRange(addr));
        }
        self.rp_addr = addr;
        Ok(())
    }

    /// Arm the WRP operation ahead of the WRP_CK edge.
    pub fn set_wrp_operation(&mut self, op: WrpOp) -> Result<(), TpSramError> {
        let addr = match op {
            WrpOp::Read { addr } | WrpOp::Write { addr, .. } => addr,
        };
        if addr >= MEM_BYTES {
            return Err(TpSramError::OutOfRange(addr));
        }
        self.wrp_op = op;
        Ok(())
    }

    /// Apply scheduled response edges up to and including `at`.
    fn settle(&mut self, at: SimTime) {
        assert!(at >= self.now, "drives must be time-ordered");
        self.now = at;
        let mut i = 0;
        while i < self.pending.len() {
            if self.pending[i].at <= at {
                let e = self.pending.remove(i);
                self.levels[e.signal.index()] = e.level;
            } else {
                i += 1;
            }
        }
        match self.phase {
            Phase::Waking { awake_at } if at >= awake_at => self.phase = Phase::Awake,
            Phase::EnteringSleep { asleep_at } if at >= asleep_at => self.phase = Phase::Sleeping,
            _ => {}
        }
        if let Some(t) = self.rp_busy_until {
            if at >= t {
                self.rp_busy_until = None;
            }
        }
        if let Some(t) = self.wrp_busy_until {
            if at >= t {
                self.wrp_busy_until = None;
            }
        }
    }

    fn emit(&mut self, edges: &[ScheduledEdge]) {
        self.pending.extend_from_slice(edges);
        if let Some(trace) = &mut self.trace {
            trace.extend(edges.iter().map(|e| HandshakeEdge {
                time_ps: e.at.as_ps(),
                signal: e.signal,
                level: e.level,
            }));
        }
    }

    fn log_input(&mut self, at: SimTime, signal: SramSignal, level: bool) {
        if let Some(trace) = &mut self.trace {
            trace.push(HandshakeEdge {
                time_ps: at.as_ps(),
                signal,
                level,
            });
        }
    }

    /// Drive one input edge at `at`; returns the memory's response
    /// edges. Driving a signal to its current level is a no-op.
    pub fn drive(
        &mut self,
        signal: SramSignal,
        level: bool,
        at: SimTime,
    ) -> Result<Vec<ScheduledEdge>, TpSramError> {
        if !signal.is_input() {
            return Err(TpSramError::NotAnInput(signal));
        }
        self.settle(at);
        if self.levels[signal.index()] == level {
            return Ok(Vec::new());
        }
        let edges = match (signal, level) {
            (SramSignal::SleepReq, false) => self.wake_request(at)?,
            (SramSignal::SleepReq, true) => self.sleep_request(at)?,
            (SramSignal::RpCk, true) => self.rp_access(at)?,
            (SramSignal::WrpCk, true) => self.wrp_access(at)?,
            // Clock falls carry no action; levels are just tracked.
            (SramSignal::RpCk, false) | (SramSignal::WrpCk, false) => Vec::new(),
            _ => unreachable!("non-input signals rejected above"),
        };
        self.levels[signal.index()] = level;
        self.log_input(at, signal, level);
        self.emit(&edges);
        Ok(edges)
    }

    fn wake_request(&mut self, at: SimTime) -> Result<Vec<ScheduledEdge>, TpSramError> {
        match self.phase {
            Phase::Sleeping => {
                let awake_at = at + SimTime::from_ps(self.timing.wake_ps_at(self.volts));
                self.phase = Phase::Waking { awake_at };
                Ok(vec![
                    ScheduledEdge {
                        at: awake_at,
                        signal: SramSignal::SleepAck,
                        level: true,
                        data: None,
                    },
                    ScheduledEdge {
                        at: awake_at,
                        signal: SramSignal::RpRdy,
                        level: true,
                        data: None,
                    },
                    ScheduledEdge {
                        at: awake_at,
                        signal: SramSignal::WrpRdy,
                        level: true,
                        data: None,
                    },
                ])
            }
            Phase::EnteringSleep { .. } => Err(TpSramError::Protocol {
                rule: RuleId::WakeWhileTransitioning,
                at,
            }),
            // Already awake or waking: the request level was already low.
            _ => Ok(Vec::new()),
        }
    }

    fn sleep_request(&mut self, at: SimTime) -> Result<Vec<ScheduledEdge>, TpSramError> {
        if self.rp_busy_until.is_some() || self.wrp_busy_until.is_some() {
            return Err(TpSramError::Protocol {
                rule: RuleId::SleepWhileBusy,
                at,
            });
        }
        match self.phase {
            Phase::Awake => {
                let asleep_at = at + SimTime::from_ps(self.timing.t_sleep_ps);
                self.phase = Phase::EnteringSleep { asleep_at };
                Ok(vec![
                    ScheduledEdge {
                        at,
                        signal: SramSignal::SleepAck,
                        level: false,
                        data: None,
                    },
                    ScheduledEdge {
                        at,
                        signal: SramSignal::RpRdy,
                        level: false,
                        data: None,
                    },
                    ScheduledEdge {
                        at,
                        signal: SramSignal::WrpRdy,
                        level: false,
                        data: None,
                    },
                ])
            }
            Phase::Waking { .. } => Err(TpSramError::Protocol {
                rule: RuleId::SleepWhileBusy,
                at,
            }),
            _ => Ok(Vec::new()),
        }
    }

    fn rp_access(&mut self, at: SimTime) -> Result<Vec<ScheduledEdge>, TpSramError> {
        if self.phase != Phase::Awake {
            return Err(TpSramError::Protocol {
                rule: RuleId::PortWhileAsleep,
                at,
            });
        }
        if self.rp_busy_until.is_some() || !self.levels[SramSignal::RpRdy.index()] {
            return Err(TpSramError::Protocol {
                rule: RuleId::RpNotReady,
                at,
            });
        }
        if self.volts < V_RP_READ_MIN {
            return Err(TpSramError::VoltageCapability {
                op: "RP read",
                required_v: V_RP_READ_MIN,
                actual_v: self.volts,
            });
        }
        let data = self.mem[self.rp_addr];
        let t = &self.timing;
        self.rp_busy_until = Some(at + SimTime::from_ps(t.rdy_rise_ps));
        Ok(vec![
            ScheduledEdge {
                at: at + SimTime::from_ps(t.qv_fall_ps),
                signal: SramSignal::RpQv,
                level: false,
                data: None,
            },
            ScheduledEdge {
                at: at + SimTime::from_ps(t.rdy_fall_ps),
                signal: SramSignal::RpRdy,
                level: false,
                data: None,
            },
            ScheduledEdge {
                at: at + SimTime::from_ps(t.qv_rise_ps),
                signal: SramSignal::RpQv,
                level: true,
                data: Some(data),
            },
            ScheduledEdge {
                at: at + SimTime::from_ps(t.rdy_rise_ps),
                signal: SramSignal::RpRdy,
                level: true,
                data: None,
            },
        ])
    }

    fn wrp_access(&mut self, at: SimTime) -> Result<Vec<ScheduledEdge>, TpSramError> {
        if self.phase != Phase::Awake {
            return Err(TpSramError::Protocol {
                rule: RuleId::PortWhileAsleep,
                at,
            });
        }
        if self.wrp_busy_until.is_some() || !self.levels[SramSignal::WrpRdy.index()] {
            return Err(TpSramError::Protocol {
                rule: RuleId::WrpNotReady,
                at,
            });
        }
        let t = &self.timing;
        self.wrp_busy_until = Some(at + SimTime::from_ps(t.rdy_rise_ps));
        match self.wrp_op {
            WrpOp::Write { addr, data } => {
                if self.volts < V_WRP_WRITE_MIN {
                    self.wrp_busy_until = None;
                    return Err(TpSramError::VoltageCapability {
                        op: "WRP write",
                        required_v: V_WRP_WRITE_MIN,
                        actual_v: self.volts,
                    });
                }
                // Registered at the clock edge.
                self.mem[addr] = data;
                Ok(vec![
                    ScheduledEdge {
                        at: at + SimTime::from_ps(t.rdy_fall_ps),
                        signal: SramSignal::WrpRdy,
                        level: false,
                        data: None,
                    },
                    ScheduledEdge {
                        at: at + SimTime::from_ps(t.rdy_rise_ps),
                        signal: SramSignal::WrpRdy,
                        level: true,
                        data: None,
                    },
                ])
            }
            WrpOp::Read { addr } => {
                if self.volts < V_WRP_READ_MIN {
                    self.wrp_busy_until = None;
                    return Err(TpSramError::VoltageCapability {
                        op: "WRP read",
                        required_v: V_WRP_READ_MIN,
                        actual_v: self.volts,
                    });
                }
                let data = self.mem[addr];
                Ok(vec![
                    ScheduledEdge {
                        at: at + SimTime::from_ps(t.qv_fall_ps),
                        signal: SramSignal::WrpQv,
                        level: false,
                        data: None,
                    },
                    ScheduledEdge {
                        at: at + SimTime::from_ps(t.rdy_fall_ps),
                        signal: SramSignal::WrpRdy,
                        level: false,
                        data: None,
                    },
                    ScheduledEdge {
                        at: at + SimTime::from_ps(t.qv_rise_ps),
                        signal: SramSignal::WrpQv,
                        level: true,
                        data: Some(data),
                    },
                    ScheduledEdge {
                        at: at + SimTime::from_ps(t.rdy_rise_ps),
                        signal: SramSignal::WrpRdy,
                        level: true,
                        data: None,
                    },
                ])
            }
        }
    }

    /// Functional single-port read, voltage-gated per port.
    pub fn read(&mut self, port: PortId, addr: usize, at: SimTime) -> Result<u8, TpSramError> {
        self.settle(at);
        if self.phase != Phase::Awake {
            return Err(TpSramError::NotAwake);
        }
        if addr >= MEM_BYTES {
            return Err(TpSramError::OutOfRange(addr));
        }
        let (op, min_v) = match port {
            PortId::Rp => ("RP read", V_RP_READ_MIN),
            PortId::Wrp => ("WRP read", V_WRP_READ_MIN),
        };
        if self.volts < min_v {
            return Err(TpSramError::VoltageCapability {
                op,
                required_v: min_v,
                actual_v: self.volts,
            });
        }
        Ok(self.mem[addr])
    }

    /// Functional write through the WRP port.
    pub fn write(&mut self, addr: usize, data: u8, at: SimTime) -> Result<(), TpSramError> {
        self.settle(at);
        if self.phase != Phase::Awake {
            return Err(TpSramError::NotAwake);
        }
        if addr >= MEM_BYTES {
            return Err(TpSramError::OutOfRange(addr));
        }
        if self.volts < V_WRP_WRITE_MIN {
            return Err(TpSramError::VoltageCapability {
                op: "WRP write",
                required_v: V_WRP_WRITE_MIN,
                actual_v: self.volts,
            });
        }
        self.mem[addr] = data;
        Ok(())
    }

    /// Simultaneous RP read and WRP write. Needs the dual-port voltage
    /// floor; on a same-address collision the read returns the value
    /// from before the write.
    pub fn concurrent_access(
        &mut self,
        rp_addr: usize,
        wrp_addr: usize,
        wrp_data: u8,
        at: SimTime,
    ) -> Result<u8, TpSramError> {
        self.settle(at);
        if self.phase != Phase::Awake {
            return Err(TpSramError::NotAwake);
        }
        if rp_addr >= MEM_BYTES {
            return Err(TpSramError::OutOfRange(rp_addr));
        }
        if wrp_addr >= MEM_BYTES {
            return Err(TpSramError::OutOfRange(wrp_addr));
        }
        if self.volts < V_CONCURRENT_MIN {
            return Err(TpSramError::VoltageCapability {
                op: "concurrent dual-port access",
                required_v: V_CONCURRENT_MIN,
                actual_v: self.volts,
            });
        }
        let read = self.mem[rp_addr];
        self.mem[wrp_addr] = wrp_data;
        Ok(read)
    }

    pub fn power_draw(&self, activity: SramActivity) -> f64 {
        match activity {
            SramActivity::Sleep => self.power.sleep_w,
            SramActivity::ArActive => self.power.ar_active_w,
            SramActivity::Shared { access_hz } => {
                self.power.ar_active_w + access_hz * self.power.energy_per_access_j
            }
        }
    }
}

impl Default for TpSram {
    fn default() -> Self {
        TpSram::new(TpSramTiming::default(), TpSramPower::default())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConformanceError {
    #[error("row {row}: {source}")]
    Drive {
        row: usize,
        #[source]
        source: TpSramError,
    },
    #[error("row {row}: unexpected output edge {signal} -> {level}")]
    UnexpectedOutput {
        row: usize,
        signal: SramSignal,
        level: bool,
    },
    #[error("row {row}: timestamps must be non-decreasing")]
    OutOfOrder { row: usize },
}

/// Replay a handshake trace through a fresh memory model, checking that
/// inputs are legal and that every output edge matches what the model
/// would emit at that exact time. Traces may end mid-operation.
pub fn check_trace(rows: &[HandshakeEdge]) -> Result<(), ConformanceError> {
    let mut sram = TpSram::default();
    let mut expected: Vec<ScheduledEdge> = Vec::new();
    let mut last = 0u64;
    for (i, row) in rows.iter().enumerate() {
        if row.time_ps < last {
            return Err(ConformanceError::OutOfOrder { row: i });
        }
        last = row.time_ps;
        let at = SimTime::from_ps(row.time_ps);
        if row.signal.is_input() {
            let edges = sram
                .drive(row.signal, row.level, at)
                .map_err(|source| ConformanceError::Drive { row: i, source })?;
            expected.extend(edges);
        } else {
            let pos = expected.iter().position(|e| {
                e.signal == row.signal && e.level == row.level && e.at.as_ps() == row.time_ps
            });
            match pos {
                Some(p) => {
                    expected.remove(p);
                }
                None => {
                    return Err(ConformanceError::UnexpectedOutput {
                        row: i,
                        signal: row.signal,
                        level: row.level,
                    })
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn awake_sram() -> TpSram {
        let mut s = TpSram::default();
        s.drive(SramSignal::SleepReq, false, SimTime::ZERO).unwrap();
        s.settle(SimTime::from_ps(15_500));
        s
    }

    #[test]
    fn wake_handshake_takes_15_5_ns() {
        let mut s = TpSram::default();
        let edges = s.drive(SramSignal::SleepReq, false, SimTime::ZERO).unwrap();
        let ack = edges
            .iter()
            .find(|e| e.signal == SramSignal::SleepAck)
            .unwrap();
        assert_eq!(ack.at, SimTime::from_ps(15_500));
        assert!(ack.level);
        assert!(!s.is_awake());
        s.settle(SimTime::from_ps(15_500));
        assert!(s.is_awake());
        assert!(s.level(SramSignal::RpRdy));
    }

    #[test]
    fn rp_read_edge_order_is_strict() {
        let mut s = awake_sram();
        s.write(42, 0xA5, SimTime::from_ns(20)).unwrap();
        s.set_rp_address(42).unwrap();
        let t0 = SimTime::from_ns(100);
        let edges = s.drive(SramSignal::RpCk, true, t0).unwrap();
        let seq: Vec<_> = edges.iter().map(|e| (e.signal, e.level)).collect();
        assert_eq!(
            seq,
            vec![
                (SramSignal::RpQv, false),
                (SramSignal::RpRdy, false),
                (SramSignal::RpQv, true),
                (SramSignal::RpRdy, true),
            ]
        );
        assert!(edges.windows(2).all(|w| w[0].at < w[1].at));
        assert_eq!(edges[2].data, Some(0xA5));
        // Default standalone access completes 90 ns after the clock.
        assert_eq!(edges[3].at, t0 + SimTime::from_ns(90));
    }

    #[test]
    fn rp_clock_while_busy_flags_rule() {
        let mut s = awake_sram();
        s.drive(SramSignal::RpCk, true, SimTime::from_ns(100)).unwrap();
        s.drive(SramSignal::RpCk, false, SimTime::from_ns(130)).unwrap();
        let err = s
            .drive(SramSignal::RpCk, true, SimTime::from_ns(150))
            .unwrap_err();
        assert_eq!(
            err,
            TpSramError::Protocol {
                rule: RuleId::RpNotReady,
                at: SimTime::from_ns(150)
            }
        );
        // Once RDY is back up the port accepts a new clock.
        s.drive(SramSignal::RpCk, true, SimTime::from_ns(190)).unwrap();
    }

    #[test]
    fn sleep_during_operation_flags_rule() {
        let mut s = awake_sram();
        s.drive(SramSignal::WrpCk, true, SimTime::from_ns(100)).unwrap();
        let err = s
            .drive(SramSignal::SleepReq, true, SimTime::from_ns(120))
            .unwrap_err();
        assert_eq!(
            err,
            TpSramError::Protocol {
                rule: RuleId::SleepWhileBusy,
                at: SimTime::from_ns(120)
            }
        );
    }

    #[test]
    fn port_clock_while_asleep_flags_rule() {
        let mut s = TpSram::default();
        let err = s
            .drive(SramSignal::RpCk, true, SimTime::from_ns(1))
            .unwrap_err();
        assert!(matches!(
            err,
            TpSramError::Protocol {
                rule: RuleId::PortWhileAsleep,
                ..
            }
        ));
        // Also during the wake transition itself.
        s.drive(SramSignal::SleepReq, false, SimTime::from_ns(2)).unwrap();
        let err = s
            .drive(SramSignal::WrpCk, true, SimTime::from_ns(5))
            .unwrap_err();
        assert!(matches!(
            err,
            TpSramError::Protocol {
                rule: RuleId::PortWhileAsleep,
                ..
            }
        ));
    }

    #[test]
    fn voltage_gates_per_port() {
        let mut s = awake_sram();
        s.set_voltage(0.38);
        // RP read and WRP write work down to 0.35 V.
        assert!(s.read(PortId::Rp, 0, SimTime::from_ns(50)).is_ok());
        assert!(s.write(0, 1, SimTime::from_ns(51)).is_ok());
        // WRP read needs 0.40 V.
        let err = s.read(PortId::Wrp, 0, SimTime::from_ns(52)).unwrap_err();
        assert!(matches!(err, TpSramError::VoltageCapability { required_v, .. } if required_v == 0.40));
        s.set_voltage(0.40);
        assert!(s.read(PortId::Wrp, 0, SimTime::from_ns(53)).is_ok());
        s.set_voltage(0.34);
        assert!(s.read(PortId::Rp, 0, SimTime::from_ns(54)).is_err());
    }

    #[test]
    fn concurrent_access_needs_dual_port_floor() {
        let mut s = awake_sram();
        s.set_voltage(0.45);
        let err = s
            .concurrent_access(0, 1, 9, SimTime::from_ns(60))
            .unwrap_err();
        assert!(matches!(err, TpSramError::VoltageCapability { required_v, .. } if required_v == 0.48));
        s.set_voltage(0.48);
        assert!(s.concurrent_access(0, 1, 9, SimTime::from_ns(61)).is_ok());
    }

    #[test]
    fn same_address_collision_reads_old_value() {
        let mut s = awake_sram();
        s.write(100, 7, SimTime::from_ns(70)).unwrap();
        let read = s.concurrent_access(100, 100, 99, SimTime::from_ns(80)).unwrap();
        assert_eq!(read, 7);
        assert_eq!(s.read(PortId::Rp, 100, SimTime::from_ns(90)).unwrap(), 99);
    }

    #[test]
    fn contents_retained_through_sleep() {
        let mut s = awake_sram();
        for (i, b) in [(0usize, 0x11u8), (4095, 0x22), (8191, 0x33)] {
            s.write(i, b, SimTime::from_us(1)).unwrap();
        }
        s.drive(SramSignal::SleepReq, true, SimTime::from_us(2)).unwrap();
        s.drive(SramSignal::SleepReq, false, SimTime::from_us(3)).unwrap();
        assert_eq!(s.read(PortId::Rp, 0, SimTime::from_us(4)).unwrap(), 0x11);
        assert_eq!(s.read(PortId::Rp, 4095, SimTime::from_us(5)).unwrap(), 0x22);
        assert_eq!(s.read(PortId::Rp, 8191, SimTime::from_us(6)).unwrap(), 0x33);
    }

    #[test]
    fn out_of_range_addresses_rejected() {
        let mut s = awake_sram();
        assert_eq!(
            s.read(PortId::Rp, MEM_BYTES, SimTime::from_us(1)),
            Err(TpSramError::OutOfRange(MEM_BYTES))
        );
        assert!(s.set_rp_address(MEM_BYTES).is_err());
        assert!(s
            .set_wrp_operation(WrpOp::Write {
                addr: MEM_BYTES,
                data: 0
            })
            .is_err());
    }

    #[test]
    fn outputs_are_not_drivable() {
        let mut s = awake_sram();
        let err = s
            .drive(SramSignal::RpRdy, true, SimTime::from_us(1))
            .unwrap_err();
        assert_eq!(err, TpSramError::NotAnInput(SramSignal::RpRdy));
    }

    #[test]
    fn power_draw_levels() {
        let s = TpSram::default();
        assert_eq!(s.power_draw(SramActivity::Sleep), 4.6e-6);
        assert_eq!(s.power_draw(SramActivity::ArActive), 14.3e-6);
        let shared = s.power_draw(SramActivity::Shared { access_hz: 1.0e6 });
        assert!(shared > 14.3e-6);
    }

    #[test]
    fn recorded_trace_passes_conformance() {
        let mut s = TpSram::default();
        s.enable_trace();
        s.drive(SramSignal::SleepReq, false, SimTime::ZERO).unwrap();
        s.set_rp_address(7).unwrap();
        s.drive(SramSignal::RpCk, true, SimTime::from_ns(50)).unwrap();
        s.drive(SramSignal::RpCk, false, SimTime::from_ns(75)).unwrap();
        s.drive(SramSignal::SleepReq, true, SimTime::from_ns(200)).unwrap();
        let rows = s.take_trace();
        assert!(check_trace(&rows).is_ok());

        // Tampering with an output edge time must be caught.
        let mut bad = rows.clone();
        let idx = bad
            .iter()
            .position(|r| r.signal == SramSignal::RpQv && r.level)
            .unwrap();
        bad[idx].time_ps += 1;
        // Re-sort to keep timestamps ordered, then expect a mismatch.
        bad.sort_by_key(|r| r.time_ps);
        assert!(check_trace(&bad).is_err());
    }

    #[test]
    fn illegal_input_in_trace_is_caught() {
        let rows = vec![HandshakeEdge {
            time_ps: 10,
            signal: SramSignal::RpCk,
            level: true,
        }];
        let err = check_trace(&rows).unwrap_err();
        assert!(matches!(err, ConformanceError::Drive { row: 0, .. }));
    }
}
