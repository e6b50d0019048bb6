//! Discrete-event model of a dual-subsystem IoT node: an
//! always-responsive island (wake-up controller, wake-up radio,
//! retentive two-port SRAM) next to an on-demand island (RISC-V core,
//! SIMD neural accelerator, crypto blocks) under DVFS, with a shared
//! energy ledger and a day-scale smart-camera scenario built on top.

pub mod config;
pub mod kernel;
pub mod od;
pub mod pneuro;
pub mod power;
pub mod scenario;
pub mod selftest;
pub mod time;
pub mod tpsram;
pub mod wuc;
pub mod wur;

pub use config::{ConfigError, SimConfig};
pub use kernel::{Event, EventQueue, KernelError};
pub use od::{AvsModel, CryptoTable, OdError};
pub use pneuro::{
    ClusterConfig, EfficiencyTable, LayerKind, NetworkDescriptor, PneuroError, QuantTensor,
};
pub use power::{
    DvfsCurve, EnergyLedger, Initiator, ModePowerConfig, PowerDomain, PowerError, PowerMode,
};
pub use scenario::{DailyReport, FilterPolicy, ScenarioConfig, ScenarioError, Variant};
pub use selftest::{run_acceptance, CriterionResult};
pub use time::SimTime;
pub use tpsram::{TpSram, TpSramError};
pub use wuc::{Wuc, WucError, WucTask};
pub use wur::{OokConfig, WurError, WurRadio};
