//! Aggregate run configuration.
//!
//! One serde document carries every model's parameters plus the
//! scenario description, so a run is fully specified by a single JSON
//! file. Missing fields take the built-in defaults; unknown fields are
//! rejected. The defaults reproduce the reference measurement set.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::od::{AvsModel, CryptoTable, FeRamModel, SpiModel};
use crate::pneuro::{
    ClusterConfig, EfficiencyTable, LayerDescriptor, LayerKind, NetworkDescriptor,
    PneuroEnergyModel,
};
use crate::power::{DvfsCurve, ModePowerConfig};
use crate::scenario::ScenarioConfig;
use crate::tpsram::{TpSramPower, TpSramTiming};
use crate::wuc::{WucPower, WucTiming};
use crate::wur::{OokConfig, WurPowerCfg};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub power: ModePowerConfig,
    pub dvfs: DvfsCurve,
    pub wuc_timing: WucTiming,
    pub wuc_power: WucPower,
    pub tpsram_timing: TpSramTiming,
    pub tpsram_power: TpSramPower,
    pub ook: OokConfig,
    pub wur_power: WurPowerCfg,
    /// (band MHz, sensitivity dBm); bands absent here are unsupported.
    pub wur_sensitivity_dbm: Vec<(u32, f64)>,
    pub cluster: ClusterConfig,
    pub efficiency: EfficiencyTable,
    pub pneuro_energy: PneuroEnergyModel,
    pub crypto: CryptoTable,
    pub spi: SpiModel,
    pub feram: FeRamModel,
    pub avs: AvsModel,
    /// Named network descriptors the scenario and CLI can refer to.
    pub networks: BTreeMap<String, NetworkDescriptor>,
    pub scenario: ScenarioConfig,
    /// Free-form provenance notes carried into reports.
    pub notes: Vec<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            power: ModePowerConfig::default(),
            dvfs: DvfsCurve::default(),
            wuc_timing: WucTiming::default(),
            wuc_power: WucPower::default(),
            tpsram_timing: TpSramTiming::default(),
            tpsram_power: TpSramPower::default(),
            ook: OokConfig::default(),
            wur_power: WurPowerCfg::default(),
            wur_sensitivity_dbm: vec![(433, -73.0), (868, -65.0)],
            cluster: ClusterConfig::default(),
            efficiency: EfficiencyTable::default(),
            pneuro_energy: PneuroEnergyModel::default(),
            crypto: CryptoTable::default(),
            spi: SpiModel::default(),
            feram: FeRamModel::default(),
            avs: AvsModel::default(),
            networks: default_networks(),
            scenario: ScenarioConfig::default(),
            notes: vec![
                "power, timing and efficiency constants are calibrated against the \
                 reference measurement set for the dual-subsystem node"
                    .to_string(),
                "dvfs anchors are measured silicon points; intermediate operating \
                 points interpolate linearly"
                    .to_string(),
                "crypto cycle counts are deterministic placeholders; per-block \
                 throughput of the hardware is not public"
                    .to_string(),
                "scenario envelope power and cpu classification cycles are \
                 calibrated so daily averages match the deployment estimates"
                    .to_string(),
            ],
        }
    }
}

fn fc(name: &str, mac: u64) -> LayerDescriptor {
    LayerDescriptor {
        name: name.to_string(),
        kind: LayerKind::Fc,
        mac_count: Some(mac),
        dims: None,
        overhead_cycles: None,
    }
}

fn conv(name: &str, kind: LayerKind, mac: u64) -> LayerDescriptor {
    LayerDescriptor {
        name: name.to_string(),
        kind,
        mac_count: Some(mac),
        dims: None,
        overhead_cycles: None,
    }
}

/// Built-in network descriptors: the keyword-spotting DS-CNN used for
/// the accelerator benchmarks, and the small presence classifier the
/// daily scenario runs per camera frame.
pub fn default_networks() -> BTreeMap<String, NetworkDescriptor> {
    let mut layers = vec![conv("conv1", LayerKind::Conv5x5, 320_000)];
    for i in 1..=4 {
        layers.push(conv(&format!("dw{i}"), LayerKind::Conv3x3, 72_000));
        layers.push(fc(&format!("pw{i}"), 512_000));
    }
    layers.push(fc("fc", 768));
    let kws = NetworkDescriptor {
        name: "kws-dscnn".to_string(),
        overhead_factor: Some(3.3637),
        layers,
    };

    let presence = NetworkDescriptor {
        name: "presence-fc".to_string(),
        overhead_factor: None,
        layers: vec![fc("fc-stack", 50_000_000)],
    };

    let mut map = BTreeMap::new();
    map.insert(kws.name.clone(), kws);
    map.insert(presence.name.clone(), presence);
    map
}

impl SimConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical (compact) JSON form, hex-encoded.
    pub fn sha256_hex(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    pub fn network(&self, name: &str) -> Result<&NetworkDescriptor, ConfigError> {
        self.networks
            .get(name)
            .ok_or_else(|| invalid("networks", format!("no network named {name:?}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.power;
        for (field, v) in [
            ("power.wuc_idle_w", p.wuc_idle_w),
            ("power.wuc_run_w", p.wuc_run_w),
            ("power.tpsram_sleep_w", p.tpsram_sleep_w),
            ("power.tpsram_run_w", p.tpsram_run_w),
            ("power.retention_leak_a_per_bit", p.retention_leak_a_per_bit),
            ("power.wur_listen_w", p.wur_listen_w),
            ("power.od_periph_w", p.od_periph_w),
            ("power.peak_w", p.peak_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, "must be positive and finite"));
            }
        }
        if p.wuc_run_w < p.wuc_idle_w {
            return Err(invalid("power.wuc_run_w", "run power below idle power"));
        }
        if p.tpsram_run_w < p.tpsram_sleep_w {
            return Err(invalid("power.tpsram_run_w", "run power below sleep power"));
        }
        self.dvfs
            .validate()
            .map_err(|e| invalid("dvfs", e))?;
        self.tpsram_timing
            .validate()
            .map_err(|e| invalid("tpsram_timing", e))?;
        self.ook
            .validate()
            .map_err(|e| invalid("ook", e))?;
        self.cluster
            .validate()
            .map_err(|e| invalid("cluster", e))?;
        self.avs
            .validate()
            .map_err(|e| invalid("avs", e))?;
        if self.wuc_timing.instr_period_ps == 0 {
            return Err(invalid("wuc_timing.instr_period_ps", "must be nonzero"));
        }
        if self.spi.rate_bps <= 0.0 || self.spi.rate_bps.is_nan() {
            return Err(invalid("spi.rate_bps", "must be positive"));
        }
        if self.feram.bandwidth_bytes_per_s <= 0.0 || self.feram.bandwidth_bytes_per_s.is_nan() {
            return Err(invalid("feram.bandwidth_bytes_per_s", "must be positive"));
        }
        for (name, net) in &self.networks {
            net.resolve()
                .map_err(|e| invalid(&format!("networks.{name}"), e))?;
        }
        self.scenario
            .validate()
            .map_err(|(field, reason)| invalid(&format!("scenario.{field}"), reason))?;
        if !self.networks.contains_key(&self.scenario.network) {
            return Err(invalid(
                "scenario.network",
                format!("no network named {:?}", self.scenario.network),
            ));
        }
        self.crypto
            .get(&self.scenario.crypto_algorithm)
            .map_err(|e| invalid("scenario.crypto_algorithm", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn empty_document_is_the_default() {
        let cfg = SimConfig::from_json_str("{}").unwrap();
        assert_eq!(cfg.sha256_hex(), SimConfig::default().sha256_hex());
    }

    #[test]
    fn json_roundtrip_preserves_hash() {
        let cfg = SimConfig::default();
        let text = cfg.to_json_pretty();
        let back = SimConfig::from_json_str(&text).unwrap();
        assert_eq!(cfg.sha256_hex(), back.sha256_hex());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = SimConfig::from_json_str(r#"{"not_a_field": 1}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn hash_tracks_content() {
        let mut cfg = SimConfig::default();
        let before = cfg.sha256_hex();
        cfg.scenario.camera_power_w *= 2.0;
        assert_ne!(before, cfg.sha256_hex());
    }

    #[test]
    fn kws_network_mac_and_overhead_totals() {
        let cfg = SimConfig::default();
        let layers = cfg.networks["kws-dscnn"].resolve().unwrap();
        let mac: u64 = layers.iter().map(|l| l.mac_count).sum();
        let overhead: u64 = layers.iter().map(|l| l.overhead_cycles).sum();
        assert_eq!(mac, 2_656_768);
        assert_eq!(overhead, 139_640);
    }

    #[test]
    fn bad_pass_rate_is_rejected_with_field_path() {
        let mut cfg = SimConfig::default();
        cfg.scenario.filter = crate::scenario::FilterPolicy::FixedRate { pass_rate: 1.5 };
        let err = cfg.validate().unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert!(field.starts_with("scenario.")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn scenario_network_must_exist() {
        let mut cfg = SimConfig::default();
        cfg.scenario.network = "missing".to_string();
        assert!(cfg.validate().is_err());
    }
}
