//! Clock-less wake-up controller.
//!
//! Sixteen interrupt sources (8 GPIO, 4 hardware, 4 software) feed a
//! run-to-completion scheduler. From IDLE an interrupt starts the wake
//! sequence: 95 ns controller boot, 15.5 ns memory wake, then the
//! first instruction fetch, 207 ns end to end. Tasks are instruction
//! counts with declarative effects; the ISA itself is not modeled.

use crate::power::PowerMode;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub const SOURCE_COUNT: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Gpio(u8),
    HwDbb,
    HwOd(u8),
    Sw(u8),
}

impl SourceKind {
    pub fn from_id(id: u8) -> Option<SourceKind> {
        match id {
            0..=7 => Some(SourceKind::Gpio(id)),
            8 => Some(SourceKind::HwDbb),
            9..=11 => Some(SourceKind::HwOd(id - 9)),
            12..=15 => Some(SourceKind::Sw(id - 12)),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        match self {
            SourceKind::Gpio(n) => n,
            SourceKind::HwDbb => 8,
            SourceKind::HwOd(n) => 9 + n,
            SourceKind::Sw(n) => 12 + n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    RisingEdge,
    FallingEdge,
    HighLevel,
    LowLevel,
}

#[derive(Debug, Clone, Copy)]
pub struct InterruptSource {
    pub kind: SourceKind,
    pub enabled: bool,
    pub trigger: Trigger,
}

/// Declarative task effect, applied atomically at task completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WucAction {
    SetMode(PowerMode),
    ConfigureOdTrigger { trigger_id: u8 },
    WriteTpSram { addr: usize, data: u8 },
    RaiseSwInterrupt { sw_index: u8 },
    ScheduleTimer { source: u8, after: SimTime },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WucTask {
    pub source_id: u8,
    pub instruction_count: u64,
    pub effects: Vec<WucAction>,
}

impl WucTask {
    pub fn new(
        source_id: u8,
        instruction_count: u64,
        effects: Vec<WucAction>,
    ) -> Result<Self, WucError> {
        if source_id >= SOURCE_COUNT {
            return Err(WucError::UnknownSource(source_id));
        }
        if instruction_count == 0 {
            return Err(WucError::ZeroInstructions);
        }
        Ok(WucTask {
            source_id,
            instruction_count,
            effects,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WucPhase {
    Idle,
    Waking,
    Running,
}

/// Timing knobs, picoseconds. The default wake sequence is
/// 95 ns boot + 15.5 ns memory wake + 90 ns first read + 6.5 ns decode
/// = 207 ns to the first executed instruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WucTiming {
    pub t_boot_ps: u64,
    pub t_sram_wake_ps: u64,
    pub t_first_read_ps: u64,
    pub t_decode_ps: u64,
    pub instr_period_ps: u64,
}

impl Default for WucTiming {
    fn default() -> Self {
        WucTiming {
            t_boot_ps: 95_000,
            t_sram_wake_ps: 15_500,
            t_first_read_ps: 90_000,
            t_decode_ps: 6_500,
            instr_period_ps: 588_235,
        }
    }
}

impl WucTiming {
    pub fn wake_latency_ps(&self) -> u64 {
        self.t_boot_ps + self.t_sram_wake_ps + self.t_first_read_ps + self.t_decode_ps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WucPower {
    pub idle_w: f64,
    pub run_w: f64,
    /// Shared memory draw while serving the controller.
    pub sram_run_w: f64,
}

impl Default for WucPower {
    fn default() -> Self {
        WucPower {
            idle_w: 1.6e-6,
            run_w: 14.45e-6,
            sram_run_w: 14.3e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WakeRecord {
    pub source: u8,
    pub raised_at: SimTime,
    /// SLEEP_REQ lowered on the shared memory.
    pub sram_wake_req_at: SimTime,
    pub sram_ready_at: SimTime,
    pub first_fetch_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaiseOutcome {
    /// Wake sequence started; the caller schedules the fetch event.
    Wake(WakeRecord),
    /// Already awake or waking; source queued for later service.
    Queued,
    /// Source disabled; counted, nothing else happens.
    Ignored,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct WucPerf {
    pub wakeups: u64,
    pub instructions: u64,
    pub ignored_raises: u64,
    pub ttff_ps: Vec<u64>,
}

impl WucPerf {
    pub fn mean_ttff_ps(&self) -> Option<f64> {
        if self.ttff_ps.is_empty() {
            None
        } else {
            Some(self.ttff_ps.iter().sum::<u64>() as f64 / self.ttff_ps.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRun {
    pub start: SimTime,
    pub end: SimTime,
    pub energy_j: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum WucError {
    #[error("no interrupt source with id {0}")]
    UnknownSource(u8),
    #[error("tasks must execute at least one instruction")]
    ZeroInstructions,
    #[error("pending interrupts remain; cannot go idle")]
    PendingNotEmpty,
    #[error("controller is not in the running phase")]
    NotRunning,
    #[error("shared memory is asleep; fetch impossible")]
    SramAsleep,
}

#[derive(Debug)]
pub struct Wuc {
    sources: [InterruptSource; SOURCE_COUNT as usize],
    phase: WucPhase,
    pending: BTreeSet<u8>,
    timing: WucTiming,
    power: WucPower,
    perf: WucPerf,
}

impl Wuc {
    pub fn new(timing: WucTiming, power: WucPower) -> Self {
        let sources = std::array::from_fn(|i| InterruptSource {
            kind: SourceKind::from_id(i as u8).unwrap(),
            enabled: true,
            trigger: Trigger::RisingEdge,
        });
        Wuc {
            sources,
            phase: WucPhase::Idle,
            pending: BTreeSet::new(),
            timing,
            power,
            perf: WucPerf::default(),
        }
    }

    pub fn phase(&self) -> WucPhase {
        self.phase
    }

    pub fn pending(&self) -> impl Iterator<Item = u8> + '_ {
        self.pending.iter().copied()
    }

    pub fn perf(&self) -> &WucPerf {
        &self.perf
    }

    pub fn timing(&self) -> &WucTiming {
        &self.timing
    }

    pub fn power(&self) -> &WucPower {
        &self.power
    }

    pub fn set_enabled(&mut self, id: u8, enabled: bool) -> Result<(), WucError> {
        let src = self
            .sources
            .get_mut(id as usize)
            .ok_or(WucError::UnknownSource(id))?;
        src.enabled = enabled;
        Ok(())
    }

    pub fn source(&self, id: u8) -> Result<&InterruptSource, WucError> {
        self.sources
            .get(id as usize)
            .ok_or(WucError::UnknownSource(id))
    }

    /// Raise one interrupt. From IDLE this starts the wake sequence;
    /// otherwise the source joins the pending set.
    pub fn raise_interrupt(&mut self, id: u8, at: SimTime) -> Result<RaiseOutcome, WucError> {
        let src = self
            .sources
            .get(id as usize)
            .ok_or(WucError::UnknownSource(id))?;
        if !src.enabled {
            self.perf.ignored_raises += 1;
            return Ok(RaiseOutcome::Ignored);
        }
        self.pending.insert(id);
        match self.phase {
            WucPhase::Idle => {
                let t = &self.timing;
                let record = WakeRecord {
                    source: id,
                    raised_at: at,
                    sram_wake_req_at: at + SimTime::from_ps(t.t_boot_ps),
                    sram_ready_at: at + SimTime::from_ps(t.t_boot_ps + t.t_sram_wake_ps),
                    first_fetch_at: at + SimTime::from_ps(t.wake_latency_ps()),
                };
                self.phase = WucPhase::Waking;
                self.perf.wakeups += 1;
                self.perf.ttff_ps.push(t.wake_latency_ps());
                Ok(RaiseOutcome::Wake(record))
            }
            WucPhase::Waking | WucPhase::Running => Ok(RaiseOutcome::Queued),
        }
    }

    /// Take the next pending source for service (ascending id) and
    /// enter the running phase. Call at the first-fetch time after a
    /// wake, or right after a task completes.
    pub fn begin_service(&mut self) -> Option<u8> {
        let id = self.pending.iter().next().copied()?;
        self.pending.remove(&id);
        self.phase = WucPhase::Running;
        Some(id)
    }

    /// Run one task to completion. The shared memory must be awake;
    /// effects are the caller's to apply at the returned end time.
    pub fn execute_task(
        &mut self,
        task: &WucTask,
        start: SimTime,
        sram_awake: bool,
    ) -> Result<TaskRun, WucError> {
        if self.phase != WucPhase::Running {
            return Err(WucError::NotRunning);
        }
        if !sram_awake {
            return Err(WucError::SramAsleep);
        }
        let dur = SimTime::from_ps(task.instruction_count * self.timing.instr_period_ps);
        let end = start + dur;
        let energy_j = (self.power.run_w + self.power.sram_run_w) * dur.as_secs_f64();
        self.perf.instructions += task.instruction_count;
        Ok(TaskRun {
            start,
            end,
            energy_j,
        })
    }

    /// Return to IDLE. The caller issues the mode command and the
    /// memory sleep handshake.
    pub fn go_idle(&mut self, _at: SimTime) -> Result<WucAction, WucError> {
        if self.phase != WucPhase::Running {
            return Err(WucError::NotRunning);
        }
        if !self.pending.is_empty() {
            return Err(WucError::PendingNotEmpty);
        }
        self.phase = WucPhase::Idle;
        Ok(WucAction::SetMode(PowerMode::Idle))
    }

    pub fn energy_per_instruction_j(&self) -> f64 {
        self.power.run_w * self.timing.instr_period_ps as f64 * 1e-12
    }
}

impl Default for Wuc {
    fn default() -> Self {
        Wuc::new(WucTiming::default(), WucPower::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_ids_partition_into_kinds() {
        let mut gpio = 0;
        let mut hw = 0;
        let mut sw = 0;
        for id in 0..SOURCE_COUNT {
            match SourceKind::from_id(id).unwrap() {
                SourceKind::Gpio(_) => gpio += 1,
                SourceKind::HwDbb | SourceKind::HwOd(_) => hw += 1,
                SourceKind::Sw(_) => sw += 1,
            }
            assert_eq!(SourceKind::from_id(id).unwrap().id(), id);
        }
        assert_eq!((gpio, hw, sw), (8, 4, 4));
        assert!(SourceKind::from_id(16).is_none());
    }

    #[test]
    fn wake_sequence_totals_207_ns() {
        let mut wuc = Wuc::default();
        let at = SimTime::from_us(10);
        let outcome = wuc.raise_interrupt(3, at).unwrap();
        let rec = match outcome {
            RaiseOutcome::Wake(r) => r,
            _ => panic!("expected a wake"),
        };
        assert_eq!(rec.sram_wake_req_at, at + SimTime::from_ns(95));
        assert_eq!(rec.sram_ready_at - rec.sram_wake_req_at, SimTime::from_ps(15_500));
        assert_eq!(rec.first_fetch_at - at, SimTime::from_ns(207));
        assert_eq!(wuc.phase(), WucPhase::Waking);
    }

    #[test]
    fn wake_latency_is_about_a_third_of_an_instruction() {
        let t = WucTiming::default();
        let ratio = t.wake_latency_ps() as f64 / t.instr_period_ps as f64;
        assert!((ratio - 0.352).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn raises_while_running_queue_in_id_order() {
        let mut wuc = Wuc::default();
        wuc.raise_interrupt(5, SimTime::ZERO).unwrap();
        assert_eq!(wuc.begin_service(), Some(5));
        assert_eq!(
            wuc.raise_interrupt(12, SimTime::from_ns(300)).unwrap(),
            RaiseOutcome::Queued
        );
        assert_eq!(
            wuc.raise_interrupt(3, SimTime::from_ns(400)).unwrap(),
            RaiseOutcome::Queued
        );
        assert_eq!(wuc.begin_service(), Some(3));
        assert_eq!(wuc.begin_service(), Some(12));
        assert_eq!(wuc.begin_service(), None);
        assert_eq!(wuc.perf().wakeups, 1);
    }

    #[test]
    fn disabled_source_is_ignored() {
        let mut wuc = Wuc::default();
        wuc.set_enabled(7, false).unwrap();
        assert_eq!(
            wuc.raise_interrupt(7, SimTime::ZERO).unwrap(),
            RaiseOutcome::Ignored
        );
        assert_eq!(wuc.phase(), WucPhase::Idle);
        assert_eq!(wuc.perf().ignored_raises, 1);
    }

    #[test]
    fn task_duration_and_energy_scale_with_instructions() {
        let mut wuc = Wuc::default();
        wuc.raise_interrupt(0, SimTime::ZERO).unwrap();
        wuc.begin_service();
        let task = WucTask::new(0, 2000, vec![]).unwrap();
        let run = wuc
            .execute_task(&task, SimTime::from_ns(207), true)
            .unwrap();
        let dur_s = (run.end - run.start).as_secs_f64();
        assert!((dur_s - 1.176e-3).abs() < 2e-6, "duration {dur_s}");
        let expect = 28.75e-6 * dur_s;
        assert!((run.energy_j - expect).abs() < 1e-15);

        let one = WucTask::new(0, 1, vec![]).unwrap();
        let run = wuc.execute_task(&one, run.end, true).unwrap();
        assert_eq!(run.end - run.start, SimTime::from_ps(588_235));
    }

    #[test]
    fn zero_instruction_task_rejected() {
        assert_eq!(WucTask::new(0, 0, vec![]), Err(WucError::ZeroInstructions));
        assert_eq!(
            WucTask::new(16, 1, vec![]),
            Err(WucError::UnknownSource(16))
        );
    }

    #[test]
    fn execute_requires_awake_memory_and_running_phase() {
        let mut wuc = Wuc::default();
        let task = WucTask::new(0, 1, vec![]).unwrap();
        assert_eq!(
            wuc.execute_task(&task, SimTime::ZERO, true),
            Err(WucError::NotRunning)
        );
        wuc.raise_interrupt(0, SimTime::ZERO).unwrap();
        wuc.begin_service();
        assert_eq!(
            wuc.execute_task(&task, SimTime::ZERO, false),
            Err(WucError::SramAsleep)
        );
    }

    #[test]
    fn go_idle_guards_pending_set() {
        let mut wuc = Wuc::default();
        wuc.raise_interrupt(4, SimTime::ZERO).unwrap();
        wuc.begin_service();
        wuc.raise_interrupt(9, SimTime::from_ns(10)).unwrap();
        assert_eq!(
            wuc.go_idle(SimTime::from_us(1)),
            Err(WucError::PendingNotEmpty)
        );
        assert_eq!(wuc.begin_service(), Some(9));
        let action = wuc.go_idle(SimTime::from_us(2)).unwrap();
        assert_eq!(action, WucAction::SetMode(PowerMode::Idle));
        assert_eq!(wuc.phase(), WucPhase::Idle);
    }

    #[test]
    fn energy_per_instruction_near_8_5_pj() {
        let wuc = Wuc::default();
        let e = wuc.energy_per_instruction_j();
        assert!((e - 8.5e-12).abs() < 0.01e-12, "got {e}");
    }
}
