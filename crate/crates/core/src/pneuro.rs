//! SIMD neural accelerator model.
//!
//! Three views of the same block: a bit-exact integer functional model
//! (8-bit data, 9-bit signed multipliers, 32-bit accumulators), a
//! cycle model built on per-kind MAC efficiencies, and an energy model
//! with a MAC term from the efficiency curves plus calibrated
//! per-overhead-cycle and static-power terms.
//!
//! Cluster arithmetic: each cluster holds 4 NCBs of 8 PEs, so one or
//! two clusters sustain 32 or 64 MACs per cycle before efficiency.

use crate::power::DvfsCurve;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Embedded memory budget shared by data and program stores.
pub const TOTAL_MEM_BYTES: usize = 264 * 1024;

pub const V_LOW: f64 = 0.48;
pub const V_HIGH: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
pub enum PneuroError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("32-bit accumulator overflow at output {output_index}")]
    AccumulatorOverflow { output_index: usize },
    #[error("voltage {v} outside [{lo}, {hi}]")]
    VoltageOutOfRange { v: f64, lo: f64, hi: f64 },
    #[error("frequency {f_hz} Hz exceeds the curve maximum {max_hz} Hz at this voltage")]
    FrequencyExceedsVoltage { f_hz: f64, max_hz: f64 },
    #[error("bad layer descriptor: {0}")]
    BadDescriptor(String),
    #[error("network has no layers")]
    EmptyNetwork,
    #[error("bad tensor: {0}")]
    BadTensor(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Fc,
    Conv3x3,
    Conv5x5,
}

pub const KINDS: [LayerKind; 3] = [LayerKind::Fc, LayerKind::Conv3x3, LayerKind::Conv5x5];

impl LayerKind {
    fn index(self) -> usize {
        match self {
            LayerKind::Fc => 0,
            LayerKind::Conv3x3 => 1,
            LayerKind::Conv5x5 => 2,
        }
    }

    pub fn kernel_width(self) -> usize {
        match self {
            LayerKind::Fc => 1,
            LayerKind::Conv3x3 => 3,
            LayerKind::Conv5x5 => 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub n_clusters: u32,
    pub ncb_per_cluster: u32,
    pub pe_per_ncb: u32,
    pub data_mem_bytes: usize,
    pub program_mem_bytes: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            n_clusters: 2,
            ncb_per_cluster: 4,
            pe_per_ncb: 8,
            data_mem_bytes: 256 * 1024,
            program_mem_bytes: 8 * 1024,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), PneuroError> {
        if !(1..=2).contains(&self.n_clusters) {
            return Err(PneuroError::BadDescriptor(
                "n_clusters must be 1 or 2".into(),
            ));
        }
        if self.ncb_per_cluster != 4 || self.pe_per_ncb != 8 {
            return Err(PneuroError::BadDescriptor(
                "cluster organization is fixed at 4 NCBs of 8 PEs".into(),
            ));
        }
        if self.data_mem_bytes + self.program_mem_bytes != TOTAL_MEM_BYTES {
            return Err(PneuroError::BadDescriptor(format!(
                "embedded memory must total {TOTAL_MEM_BYTES} bytes"
            )));
        }
        Ok(())
    }

    pub fn macs_per_cycle(&self) -> u64 {
        (self.n_clusters * self.ncb_per_cluster * self.pe_per_ncb) as u64
    }
}

/// Per-kind MAC efficiency and energy-efficiency anchors. The high
/// anchor is given for FC; other kinds scale by their low-anchor
/// ratio. Between anchors both interpolate linearly in voltage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyTable {
    /// Fraction of peak MACs sustained: FC, CONV3x3, CONV5x5.
    pub mac_eff: [f64; 3],
    /// TOPS/W at the low-voltage anchor, same order.
    pub tops_per_w_low: [f64; 3],
    /// TOPS/W for FC at the high-voltage anchor.
    pub fc_tops_per_w_high: f64,
}

impl Default for EfficiencyTable {
    fn default() -> Self {
        EfficiencyTable {
            mac_eff: [0.89, 0.55, 0.78],
            tops_per_w_low: [1.30, 1.09, 1.28],
            fc_tops_per_w_high: 0.36,
        }
    }
}

impl EfficiencyTable {
    pub fn validate(&self) -> Result<(), PneuroError> {
        if self.mac_eff.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(PneuroError::BadDescriptor(
                "MAC efficiencies must lie in (0, 1]".into(),
            ));
        }
        if self.tops_per_w_low.iter().any(|&e| e <= 0.0) || self.fc_tops_per_w_high <= 0.0 {
            return Err(PneuroError::BadDescriptor(
                "energy efficiencies must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn mac_eff_for(&self, kind: LayerKind) -> f64 {
        self.mac_eff[kind.index()]
    }

    /// Energy efficiency in ops per joule at voltage `v`.
    pub fn ops_per_joule(&self, kind: LayerKind, v: f64) -> Result<f64, PneuroError> {
        if !(V_LOW..=V_HIGH).contains(&v) {
            return Err(PneuroError::VoltageOutOfRange {
                v,
                lo: V_LOW,
                hi: V_HIGH,
            });
        }
        let low = self.tops_per_w_low[kind.index()];
        let ratio = self.fc_tops_per_w_high / self.tops_per_w_low[LayerKind::Fc.index()];
        let high = low * ratio;
        let t = (v - V_LOW) / (V_HIGH - V_LOW);
        Ok((low + t * (high - low)) * 1e12)
    }
}

/// Energy terms beyond the MAC work itself: a per-overhead-cycle cost
/// and a static draw over the run, both linear in voltage between the
/// anchors. Calibrated against the reference measurement set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PneuroEnergyModel {
    pub e_overhead_j_low: f64,
    pub e_overhead_j_high: f64,
    pub p_static_w_low: f64,
    pub p_static_w_high: f64,
}

impl Default for PneuroEnergyModel {
    fn default() -> Self {
        PneuroEnergyModel {
            e_overhead_j_low: 7.56e-12,
            e_overhead_j_high: 26.26e-12,
            p_static_w_low: 0.2e-3,
            p_static_w_high: 10.26e-3,
        }
    }
}

impl PneuroEnergyModel {
    fn lerp(v: f64, low: f64, high: f64) -> f64 {
        let t = (v - V_LOW) / (V_HIGH - V_LOW);
        low + t * (high - low)
    }

    pub fn e_overhead_j(&self, v: f64) -> f64 {
        Self::lerp(v, self.e_overhead_j_low, self.e_overhead_j_high)
    }

    pub fn p_static_w(&self, v: f64) -> f64 {
        Self::lerp(v, self.p_static_w_low, self.p_static_w_high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum LayerDims {
    Fc {
        in_features: u64,
        out_features: u64,
    },
    Conv {
        out_width: u64,
        out_height: u64,
        out_channels: u64,
        in_channels: u64,
    },
}

/// Layer entry as it appears in a network descriptor file. MAC count
/// may be given directly or computed from dims; overhead cycles may be
/// given directly, otherwise the network default applies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDescriptor {
    pub name: String,
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<LayerDims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overhead_cycles: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDescriptor {
    pub name: String,
    /// Overhead cycles per layer = ceil(factor x mac / 64) when the
    /// layer gives none. Default 0.04.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overhead_factor: Option<f64>,
    pub layers: Vec<LayerDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedLayer {
    pub name: String,
    pub kind: LayerKind,
    pub mac_count: u64,
    pub overhead_cycles: u64,
}

impl ResolvedLayer {
    pub fn new(
        name: impl Into<String>,
        kind: LayerKind,
        mac_count: u64,
        overhead_cycles: u64,
    ) -> Result<Self, PneuroError> {
        if mac_count == 0 {
            return Err(PneuroError::BadDescriptor(
                "mac_count must be positive".into(),
            ));
        }
        Ok(ResolvedLayer {
            name: name.into(),
            kind,
            mac_count,
            overhead_cycles,
        })
    }
}

pub const DEFAULT_OVERHEAD_FACTOR: f64 = 0.04;

fn ceil_div(num: u128, den: u128) -> u64 {
    num.div_ceil(den) as u64
}

/// Overhead default: a fraction of the layer's ideal cycles at the
/// full two-cluster rate, rounded up.
pub fn overhead_cycles_for(mac_count: u64, factor: f64) -> u64 {
    let scaled = (factor * 1e6).round() as u128;
    ceil_div(mac_count as u128 * scaled, 64 * 1_000_000)
}

fn mac_count_from_dims(kind: LayerKind, dims: LayerDims) -> Result<u64, PneuroError> {
    match (kind, dims) {
        (
            LayerKind::Fc,
            LayerDims::Fc {
                in_features,
                out_features,
            },
        ) => Ok(in_features * out_features),
        (
            LayerKind::Conv3x3 | LayerKind::Conv5x5,
            LayerDims::Conv {
                out_width,
                out_height,
                out_channels,
                in_channels,
            },
        ) => {
            let k = kind.kernel_width() as u64;
            Ok(out_width * out_height * out_channels * k * k * in_channels)
        }
        _ => Err(PneuroError::BadDescriptor(
            "dims variant does not match the layer kind".into(),
        )),
    }
}

impl NetworkDescriptor {
    pub fn resolve(&self) -> Result<Vec<ResolvedLayer>, PneuroError> {
        if self.layers.is_empty() {
            return Err(PneuroError::EmptyNetwork);
        }
        let factor = self.overhead_factor.unwrap_or(DEFAULT_OVERHEAD_FACTOR);
        if !(0.0..=100.0).contains(&factor) {
            return Err(PneuroError::BadDescriptor(
                "overhead_factor out of range".into(),
            ));
        }
        self.layers
            .iter()
            .map(|l| {
                let mac = match (l.mac_count, l.dims) {
                    (Some(mac), None) => mac,
                    (None, Some(dims)) => mac_count_from_dims(l.kind, dims)?,
                    (Some(mac), Some(dims)) => {
                        let from_dims = mac_count_from_dims(l.kind, dims)?;
                        if from_dims != mac {
                            return Err(PneuroError::BadDescriptor(format!(
                                "layer {}: mac_count {} disagrees with dims ({})",
                                l.name, mac, from_dims
                            )));
                        }
                        mac
                    }
                    (None, None) => {
                        return Err(PneuroError::BadDescriptor(format!(
                            "layer {}: need mac_count or dims",
                            l.name
                        )))
                    }
                };
                let overhead = l
                    .overhead_cycles
                    .unwrap_or_else(|| overhead_cycles_for(mac, factor));
                ResolvedLayer::new(l.name.clone(), l.kind, mac, overhead)
            })
            .collect()
    }
}

const EFF_SCALE: u128 = 10_000;

/// Cycles for one layer: ceil(mac / (macs_per_cycle x efficiency))
/// plus the layer's overhead cycles, which do not scale with clusters.
/// The division is done in integers to keep rounding exact.
pub fn cycles_for(layer: &ResolvedLayer, cfg: &ClusterConfig, table: &EfficiencyTable) -> u64 {
    let eff = (table.mac_eff_for(layer.kind) * EFF_SCALE as f64).round() as u128;
    let den = cfg.macs_per_cycle() as u128 * eff;
    ceil_div(layer.mac_count as u128 * EFF_SCALE, den) + layer.overhead_cycles
}

/// MAC-work energy for one layer at voltage `v` (overhead and static
/// terms live in the inference model; see `run_inference`).
pub fn energy_for(
    layer: &ResolvedLayer,
    v: f64,
    table: &EfficiencyTable,
) -> Result<f64, PneuroError> {
    let eta = table.ops_per_joule(layer.kind, v)?;
    Ok(2.0 * layer.mac_count as f64 / eta)
}

/// Sustained throughput in GOPS (1 MAC = 2 ops).
pub fn sustained_gops(cfg: &ClusterConfig, kind: LayerKind, table: &EfficiencyTable, f_hz: f64) -> f64 {
    2.0 * cfg.macs_per_cycle() as f64 * table.mac_eff_for(kind) * f_hz / 1e9
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRun {
    pub cycles: u64,
    pub overhead_cycles: u64,
    pub latency: SimTime,
    pub energy_j: f64,
    pub mac_energy_j: f64,
    pub overhead_energy_j: f64,
    pub static_energy_j: f64,
    /// Completion interrupts raised toward the host core.
    pub host_interrupts: u32,
}

/// Run a network end to end at one operating point. Layers execute
/// sequentially; energy is the MAC work plus the calibrated overhead
/// and static terms over the run.
pub fn run_inference(
    layers: &[ResolvedLayer],
    cfg: &ClusterConfig,
    table: &EfficiencyTable,
    model: &PneuroEnergyModel,
    v: f64,
    f_hz: f64,
    dvfs: &DvfsCurve,
) -> Result<InferenceRun, PneuroError> {
    if layers.is_empty() {
        return Err(PneuroError::EmptyNetwork);
    }
    cfg.validate()?;
    table.validate()?;
    let max_hz = dvfs
        .lookup(v)
        .map_err(|_| PneuroError::VoltageOutOfRange {
            v,
            lo: V_LOW,
            hi: V_HIGH,
        })?
        .0;
    if f_hz > max_hz {
        return Err(PneuroError::FrequencyExceedsVoltage { f_hz, max_hz });
    }
    let mut cycles = 0u64;
    let mut overhead_cycles = 0u64;
    let mut mac_energy_j = 0.0;
    for layer in layers {
        cycles += cycles_for(layer, cfg, table);
        overhead_cycles += layer.overhead_cycles;
        mac_energy_j += energy_for(layer, v, table)?;
    }
    let latency_s = cycles as f64 / f_hz;
    let overhead_energy_j = model.e_overhead_j(v) * overhead_cycles as f64;
    let static_energy_j = model.p_static_w(v) * latency_s;
    Ok(InferenceRun {
        cycles,
        overhead_cycles,
        latency: SimTime::from_secs_f64(latency_s),
        energy_j: mac_energy_j + overhead_energy_j + static_energy_j,
        mac_energy_j,
        overhead_energy_j,
        static_energy_j,
        host_interrupts: 1,
    })
}

/// Quantized tensor: 8-bit codes widened to i16 for storage, affine
/// (scale, zero_point) metadata, signed or unsigned code range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantTensor {
    pub data: Vec<i16>,
    pub shape: Vec<usize>,
    pub scale: f64,
    pub zero_point: i32,
    pub signed: bool,
}

impl QuantTensor {
    pub fn new(
        data: Vec<i16>,
        shape: Vec<usize>,
        scale: f64,
        zero_point: i32,
        signed: bool,
    ) -> Result<Self, PneuroError> {
        let elems: usize = shape.iter().product();
        if elems != data.len() {
            return Err(PneuroError::BadTensor("shape does not match element count"));
        }
        let (lo, hi) = if signed { (-128, 127) } else { (0, 255) };
        if data.iter().any(|&d| d < lo || d > hi) {
            return Err(PneuroError::BadTensor("element outside the 8-bit code range"));
        }
        if scale <= 0.0 || scale.is_nan() {
            return Err(PneuroError::BadTensor("scale must be positive"));
        }
        Ok(QuantTensor {
            data,
            shape,
            scale,
            zero_point,
            signed,
        })
    }

    pub fn elems(&self) -> usize {
        self.data.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExecParams {
    pub relu: bool,
    pub out_scale: f64,
    pub out_zero_point: i32,
}

fn requant(
    acc: &[i64],
    m: f64,
    params: ExecParams,
    shape: Vec<usize>,
) -> Result<QuantTensor, PneuroError> {
    let (lo, hi) = if params.relu { (0, 255) } else { (-128, 127) };
    let data = acc
        .iter()
        .map(|&a| {
            let a = if params.relu { a.max(0) } else { a };
            let q = (a as f64 * m).round() as i64 + params.out_zero_point as i64;
            q.clamp(lo as i64, hi as i64) as i16
        })
        .collect();
    QuantTensor::new(data, shape, params.out_scale, params.out_zero_point, !params.relu)
}

/// Bit-exact layer execution: 9-bit signed products accumulated in a
/// 32-bit register (overflow is an error, never a silent wrap), then
/// optional rectification and requantization with round-half-away-
/// from-zero and clamping.
pub fn execute_layer(
    kind: LayerKind,
    input: &QuantTensor,
    weights: &QuantTensor,
    params: ExecParams,
) -> Result<QuantTensor, PneuroError> {
    if params.out_scale <= 0.0 || params.out_scale.is_nan() {
        return Err(PneuroError::BadTensor("output scale must be positive"));
    }
    let m = input.scale * weights.scale / params.out_scale;
    match kind {
        LayerKind::Fc => execute_fc(input, weights, params, m),
        LayerKind::Conv3x3 | LayerKind::Conv5x5 => {
            execute_conv(kind.kernel_width(), input, weights, params, m)
        }
    }
}

fn accumulate(
    acc: &mut i64,
    x: i16,
    zx: i32,
    w: i16,
    zw: i32,
    output_index: usize,
) -> Result<(), PneuroError> {
    let prod = (x as i64 - zx as i64) * (w as i64 - zw as i64);
    *acc += prod;
    if *acc > i32::MAX as i64 || *acc < i32::MIN as i64 {
        return Err(PneuroError::AccumulatorOverflow { output_index });
    }
    Ok(())
}

fn execute_fc(
    input: &QuantTensor,
    weights: &QuantTensor,
    params: ExecParams,
    m: f64,
) -> Result<QuantTensor, PneuroError> {
    let [n_in] = input.shape[..] else {
        return Err(PneuroError::ShapeMismatch(format!(
            "FC input must be rank 1, got {:?}",
            input.shape
        )));
    };
    let [n_out, w_in] = weights.shape[..] else {
        return Err(PneuroError::ShapeMismatch(format!(
            "FC weights must be rank 2, got {:?}",
            weights.shape
        )));
    };
    if w_in != n_in {
        return Err(PneuroError::ShapeMismatch(format!(
            "FC weights expect {w_in} inputs, tensor has {n_in}"
        )));
    }
    let mut acc = vec![0i64; n_out];
    for (o, slot) in acc.iter_mut().enumerate() {
        for i in 0..n_in {
            accumulate(
                slot,
                input.data[i],
                input.zero_point,
                weights.data[o * n_in + i],
                weights.zero_point,
                o,
            )?;
        }
    }
    requant(&acc, m, params, vec![n_out])
}

fn execute_conv(
    k: usize,
    input: &QuantTensor,
    weights: &QuantTensor,
    params: ExecParams,
    m: f64,
) -> Result<QuantTensor, PneuroError> {
    let [c_in, h, w] = input.shape[..] else {
        return Err(PneuroError::ShapeMismatch(format!(
            "conv input must be rank 3 (channels, height, width), got {:?}",
            input.shape
        )));
    };
    let [c_out, wc_in, kh, kw] = weights.shape[..] else {
        return Err(PneuroError::ShapeMismatch(format!(
            "conv weights must be rank 4, got {:?}",
            weights.shape
        )));
    };
    if wc_in != c_in || kh != k || kw != k {
        return Err(PneuroError::ShapeMismatch(format!(
            "conv weights {:?} incompatible with input channels {c_in} and kernel {k}",
            weights.shape
        )));
    }
    if h < k || w < k {
        return Err(PneuroError::ShapeMismatch(format!(
            "input {h}x{w} smaller than the {k}x{k} kernel"
        )));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut acc = vec![0i64; c_out * oh * ow];
    for co in 0..c_out {
        for oy in 0..oh {
            for ox in 0..ow {
                let oidx = (co * oh + oy) * ow + ox;
                for ci in 0..c_in {
                    for ky in 0..k {
                        for kx in 0..k {
                            let x = input.data[(ci * h + oy + ky) * w + ox + kx];
                            let wv = weights.data[((co * c_in + ci) * k + ky) * k + kx];
                            accumulate(
                                &mut acc[oidx],
                                x,
                                input.zero_point,
                                wv,
                                weights.zero_point,
                                oidx,
                            )?;
                        }
                    }
                }
            }
        }
    }
    requant(&acc, m, params, vec![c_out, oh, ow])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params(relu: bool) -> ExecParams {
        ExecParams {
            relu,
            out_scale: 1.0,
            out_zero_point: 0,
        }
    }

    fn tensor(data: Vec<i16>, shape: Vec<usize>) -> QuantTensor {
        QuantTensor::new(data, shape, 1.0, 0, true).unwrap()
    }

    #[test]
    fn cluster_arithmetic() {
        let two = ClusterConfig::default();
        two.validate().unwrap();
        assert_eq!(two.macs_per_cycle(), 64);
        let one = ClusterConfig {
            n_clusters: 1,
            ..ClusterConfig::default()
        };
        assert_eq!(one.macs_per_cycle(), 32);
        let bad = ClusterConfig {
            n_clusters: 3,
            ..ClusterConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad_mem = ClusterConfig {
            data_mem_bytes: 100,
            ..ClusterConfig::default()
        };
        assert!(bad_mem.validate().is_err());
    }

    #[test]
    fn identity_fc_is_clamped_relu() {
        let input = tensor(vec![-5, 0, 7, 127], vec![4]);
        let mut w = vec![0i16; 16];
        for i in 0..4 {
            w[i * 4 + i] = 1;
        }
        let weights = tensor(w, vec![4, 4]);
        let out = execute_layer(LayerKind::Fc, &input, &weights, unit_params(true)).unwrap();
        assert_eq!(out.data, vec![0, 0, 7, 127]);
        assert!(!out.signed);
    }

    #[test]
    fn zero_weights_zero_output() {
        let input = tensor(vec![11, -22, 33], vec![3]);
        let weights = tensor(vec![0; 6], vec![2, 3]);
        let out = execute_layer(LayerKind::Fc, &input, &weights, unit_params(false)).unwrap();
        assert_eq!(out.data, vec![0, 0]);
    }

    // Independent scalar reference for FC: plain nested loops over
    // widened integers, sharing no code with the implementation.
    #[allow(clippy::too_many_arguments)]
    fn fc_oracle(
        x: &[i16],
        zx: i32,
        w: &[i16],
        zw: i32,
        n_out: usize,
        n_in: usize,
        relu: bool,
        m: f64,
        zy: i32,
    ) -> Vec<i16> {
        let mut out = Vec::new();
        for o in 0..n_out {
            let mut acc: i64 = 0;
            for i in 0..n_in {
                acc += (x[i] as i64 - zx as i64) * (w[o * n_in + i] as i64 - zw as i64);
            }
            if relu && acc < 0 {
                acc = 0;
            }
            let q = (acc as f64 * m).round() as i64 + zy as i64;
            let (lo, hi) = if relu { (0, 255) } else { (-128, 127) };
            out.push(q.clamp(lo, hi) as i16);
        }
        out
    }

    #[test]
    fn random_fc_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for case in 0..200 {
            let n_in = rng.gen_range(1..=12);
            let n_out = rng.gen_range(1..=12);
            let x: Vec<i16> = (0..n_in).map(|_| rng.gen_range(-128..=127)).collect();
            let w: Vec<i16> = (0..n_in * n_out).map(|_| rng.gen_range(-128..=127)).collect();
            let zx = rng.gen_range(-128..=127);
            let zw = rng.gen_range(-128..=127);
            let zy = rng.gen_range(-128..=127);
            let relu = rng.gen_bool(0.5);
            let sx = rng.gen_range(0.001..0.1);
            let sw = rng.gen_range(0.001..0.1);
            let sy = rng.gen_range(0.001..0.1);
            let input = QuantTensor::new(x.clone(), vec![n_in], sx, zx, true).unwrap();
            let weights = QuantTensor::new(w.clone(), vec![n_out, n_in], sw, zw, true).unwrap();
            let params = ExecParams {
                relu,
                out_scale: sy,
                out_zero_point: zy,
            };
            let got = execute_layer(LayerKind::Fc, &input, &weights, params).unwrap();
            let want = fc_oracle(&x, zx, &w, zw, n_out, n_in, relu, sx * sw / sy, zy);
            assert_eq!(got.data, want, "case {case}");
        }
    }

    // Independent direct-convolution reference.
    #[allow(clippy::too_many_arguments)]
    fn conv_oracle(
        x: &[i16],
        zx: i32,
        w: &[i16],
        zw: i32,
        c_in: usize,
        h: usize,
        wd: usize,
        c_out: usize,
        k: usize,
        relu: bool,
        m: f64,
        zy: i32,
    ) -> Vec<i16> {
        let (oh, ow) = (h - k + 1, wd - k + 1);
        let mut out = Vec::new();
        for co in 0..c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc: i64 = 0;
                    for ci in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                let xi = x[ci * h * wd + (oy + ky) * wd + (ox + kx)];
                                let wi = w[co * c_in * k * k + ci * k * k + ky * k + kx];
                                acc += (xi as i64 - zx as i64) * (wi as i64 - zw as i64);
                            }
                        }
                    }
                    if relu && acc < 0 {
                        acc = 0;
                    }
                    let q = (acc as f64 * m).round() as i64 + zy as i64;
                    let (lo, hi) = if relu { (0, 255) } else { (-128, 127) };
                    out.push(q.clamp(lo, hi) as i16);
                }
            }
        }
        out
    }

    #[test]
    fn random_conv_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for case in 0..60 {
            let (kind, k) = if case % 2 == 0 {
                (LayerKind::Conv3x3, 3usize)
            } else {
                (LayerKind::Conv5x5, 5usize)
            };
            let c_in = rng.gen_range(1..=3);
            let c_out = rng.gen_range(1..=3);
            let h = rng.gen_range(k..=k + 4);
            let wd = rng.gen_range(k..=k + 4);
            let x: Vec<i16> = (0..c_in * h * wd).map(|_| rng.gen_range(-128..=127)).collect();
            let w: Vec<i16> = (0..c_out * c_in * k * k)
                .map(|_| rng.gen_range(-128..=127))
                .collect();
            let zx = rng.gen_range(-8..=8);
            let zw = rng.gen_range(-8..=8);
            let relu = rng.gen_bool(0.5);
            let input = QuantTensor::new(x.clone(), vec![c_in, h, wd], 0.02, zx, true).unwrap();
            let weights =
                QuantTensor::new(w.clone(), vec![c_out, c_in, k, k], 0.05, zw, true).unwrap();
            let params = ExecParams {
                relu,
                out_scale: 0.04,
                out_zero_point: 3,
            };
            let got = execute_layer(kind, &input, &weights, params).unwrap();
            let want = conv_oracle(
                &x,
                zx,
                &w,
                zw,
                c_in,
                h,
                wd,
                c_out,
                k,
                relu,
                0.02 * 0.05 / 0.04,
                3,
            );
            assert_eq!(got.data, want, "case {case}");
            assert_eq!(got.shape, vec![c_out, h - k + 1, wd - k + 1]);
        }
    }

    #[test]
    fn accumulator_overflow_is_an_error() {
        let n = 40_000;
        let input = QuantTensor::new(vec![127; n], vec![n], 1.0, -128, true).unwrap();
        let weights = QuantTensor::new(vec![127; n], vec![1, n], 1.0, -128, true).unwrap();
        let err = execute_layer(LayerKind::Fc, &input, &weights, unit_params(false)).unwrap_err();
        assert!(matches!(err, PneuroError::AccumulatorOverflow { output_index: 0 }));
    }

    #[test]
    fn shape_mismatches_rejected() {
        let input = tensor(vec![1, 2, 3], vec![3]);
        let weights = tensor(vec![0; 8], vec![2, 4]);
        assert!(matches!(
            execute_layer(LayerKind::Fc, &input, &weights, unit_params(false)),
            Err(PneuroError::ShapeMismatch(_))
        ));
        assert!(QuantTensor::new(vec![300], vec![1], 1.0, 0, false).is_err());
        assert!(QuantTensor::new(vec![-1], vec![1], 1.0, 0, false).is_err());
        assert!(QuantTensor::new(vec![1, 2], vec![3], 1.0, 0, true).is_err());
    }

    #[test]
    fn cycle_formula_and_cluster_scaling() {
        let table = EfficiencyTable::default();
        let two = ClusterConfig::default();
        let one = ClusterConfig {
            n_clusters: 1,
            ..ClusterConfig::default()
        };
        // 1000 ideal cycles' worth of FC MACs at two clusters.
        let mac = (64.0 * 0.89 * 1000.0) as u64;
        let layer = ResolvedLayer::new("fc", LayerKind::Fc, mac, 17).unwrap();
        assert_eq!(cycles_for(&layer, &two, &table), 1000 + 17);
        assert_eq!(cycles_for(&layer, &one, &table), 2000 + 17);
    }

    #[test]
    fn cycles_never_beat_the_raw_rate() {
        let table = EfficiencyTable::default();
        let cfg = ClusterConfig::default();
        for mac in [1u64, 63, 64, 65, 1000, 56_960, 320_000] {
            for kind in KINDS {
                let layer = ResolvedLayer::new("l", kind, mac, 0).unwrap();
                let floor = mac.div_ceil(64);
                assert!(cycles_for(&layer, &cfg, &table) >= floor);
            }
        }
    }

    #[test]
    fn energy_anchors() {
        let table = EfficiencyTable::default();
        // Half a billion MACs = 1 GOP.
        let layer = ResolvedLayer::new("fc", LayerKind::Fc, 500_000_000, 0).unwrap();
        let e_low = energy_for(&layer, 0.48, &table).unwrap();
        assert!((e_low - 1e9 / 1.3e12).abs() / e_low < 1e-12);
        let e_high = energy_for(&layer, 0.9, &table).unwrap();
        let ratio = e_high / e_low;
        assert!((ratio - 1.30 / 0.36).abs() < 1e-9, "ratio {ratio}");
        assert!(matches!(
            energy_for(&layer, 0.3, &table),
            Err(PneuroError::VoltageOutOfRange { .. })
        ));
        assert!(ResolvedLayer::new("z", LayerKind::Fc, 0, 0).is_err());
    }

    #[test]
    fn throughput_identity() {
        let table = EfficiencyTable::default();
        let cfg = ClusterConfig::default();
        let conv3 = sustained_gops(&cfg, LayerKind::Conv3x3, &table, 350e6);
        assert!((conv3 - 24.64).abs() < 0.05, "got {conv3}");
        let fc = sustained_gops(&cfg, LayerKind::Fc, &table, 350e6);
        assert!((fc - 36.0).abs() / 36.0 < 0.15, "peak check {fc}");
    }

    #[test]
    fn single_layer_inference_latency_is_exact() {
        let table = EfficiencyTable::default();
        let cfg = ClusterConfig::default();
        let model = PneuroEnergyModel::default();
        let dvfs = DvfsCurve::default();
        let layer = ResolvedLayer::new("fc", LayerKind::Fc, 56_960, 0).unwrap();
        let run = run_inference(&[layer], &cfg, &table, &model, 0.48, 25e6, &dvfs).unwrap();
        assert_eq!(run.cycles, 1000);
        assert_eq!(run.latency, SimTime::from_us(40));
        assert_eq!(run.host_interrupts, 1);
        assert_eq!(run.overhead_energy_j, 0.0);
    }

    #[test]
    fn inference_guards_frequency_and_emptiness() {
        let table = EfficiencyTable::default();
        let cfg = ClusterConfig::default();
        let model = PneuroEnergyModel::default();
        let dvfs = DvfsCurve::default();
        let layer = ResolvedLayer::new("fc", LayerKind::Fc, 64, 0).unwrap();
        assert!(matches!(
            run_inference(&[layer], &cfg, &table, &model, 0.48, 30e6, &dvfs),
            Err(PneuroError::FrequencyExceedsVoltage { .. })
        ));
        assert!(matches!(
            run_inference(&[], &cfg, &table, &model, 0.48, 25e6, &dvfs),
            Err(PneuroError::EmptyNetwork)
        ));
    }

    #[test]
    fn descriptor_resolution() {
        let net = NetworkDescriptor {
            name: "t".into(),
            overhead_factor: None,
            layers: vec![
                LayerDescriptor {
                    name: "a".into(),
                    kind: LayerKind::Fc,
                    mac_count: Some(1600),
                    dims: None,
                    overhead_cycles: None,
                },
                LayerDescriptor {
                    name: "b".into(),
                    kind: LayerKind::Conv3x3,
                    mac_count: None,
                    dims: Some(LayerDims::Conv {
                        out_width: 10,
                        out_height: 10,
                        out_channels: 4,
                        in_channels: 2,
                    }),
                    overhead_cycles: Some(5),
                },
            ],
        };
        let layers = net.resolve().unwrap();
        // Default overhead: ceil(0.04 x 1600 / 64) = 1.
        assert_eq!(layers[0].overhead_cycles, 1);
        assert_eq!(layers[1].mac_count, 10 * 10 * 4 * 9 * 2);
        assert_eq!(layers[1].overhead_cycles, 5);

        let bad = NetworkDescriptor {
            name: "t".into(),
            overhead_factor: None,
            layers: vec![LayerDescriptor {
                name: "c".into(),
                kind: LayerKind::Fc,
                mac_count: Some(10),
                dims: Some(LayerDims::Fc {
                    in_features: 3,
                    out_features: 5,
                }),
                overhead_cycles: None,
            }],
        };
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn efficiency_interpolation_midpoint() {
        let table = EfficiencyTable::default();
        let mid = table.ops_per_joule(LayerKind::Fc, 0.69).unwrap();
        assert!((mid - (1.3 + 0.36) / 2.0 * 1e12).abs() / mid < 1e-12);
    }
}
