//! Randomized invariants over the public API. The numbered acceptance
//! suite runs larger fixed-seed versions of some of these; the cases
//! here are smaller but shrink to minimal counterexamples on failure.

use proptest::prelude::*;

use samurai_core::config::SimConfig;
use samurai_core::pneuro::{execute_layer, ExecParams, LayerKind, QuantTensor};
use samurai_core::power::{EnergyLedger, Initiator, ModePowerConfig, DOMAINS, MODES};
use samurai_core::scenario::{apply_parameter, run_day, Variant};
use samurai_core::time::SimTime;
use samurai_core::tpsram::{PortId, SramSignal, TpSram, TpSramPower, TpSramTiming};
use samurai_core::wur::{decode_frame, encode_frame, OokConfig};

proptest! {
    #[test]
    fn ook_round_trip_is_identity(
        sps in 1usize..=32,
        delay_pick in 0usize..32,
        id in any::<u8>(),
        payload in any::<u32>(),
    ) {
        let cfg = OokConfig {
            samples_per_symbol: sps,
            data_delay: delay_pick % sps,
            ..OokConfig::default()
        };
        let stream = encode_frame(&cfg, id, payload);
        prop_assert_eq!(decode_frame(&cfg, &stream), Some((id, payload)));
    }

    #[test]
    fn fc_layer_matches_scalar_math(
        n_in in 1usize..=16,
        n_out in 1usize..=6,
        seed in any::<u64>(),
        relu in any::<bool>(),
        zx in 0i32..=255,
        zw in -128i32..=127,
        zp in -100i32..=100,
    ) {
        // Cheap deterministic fill so proptest shrinks the dims, not
        // every element.
        let code = |i: usize, lo: i64, hi: i64| -> i16 {
            let span = (hi - lo + 1) as u64;
            (lo + (seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 * 0x517C_C1B7) % span) as i64) as i16
        };
        let input = QuantTensor::new(
            (0..n_in).map(|i| code(i, 0, 255)).collect(),
            vec![n_in],
            0.02,
            zx,
            false,
        ).unwrap();
        let weights = QuantTensor::new(
            (0..n_in * n_out).map(|i| code(i + 7, -128, 127)).collect(),
            vec![n_out, n_in],
            0.05,
            zw,
            true,
        ).unwrap();
        let params = ExecParams {
            relu,
            out_scale: 0.1,
            out_zero_point: if relu { zp.abs() } else { zp },
        };
        let got = execute_layer(LayerKind::Fc, &input, &weights, params).unwrap();
        let m = input.scale * weights.scale / params.out_scale;
        for o in 0..n_out {
            let mut acc = 0i64;
            for i in 0..n_in {
                acc += (input.data[i] as i64 - zx as i64)
                    * (weights.data[o * n_in + i] as i64 - zw as i64);
            }
            if params.relu {
                acc = acc.max(0);
            }
            let q = (acc as f64 * m).round() as i64 + params.out_zero_point as i64;
            let (lo, hi) = if params.relu { (0, 255) } else { (-128, 127) };
            prop_assert_eq!(got.data[o] as i64, q.clamp(lo, hi));
        }
        prop_assert_eq!(got.signed, !relu);
    }

    #[test]
    fn ledger_energy_is_conserved(
        steps in proptest::collection::vec((0usize..5, 1u64..5_000_000, 0usize..5, 0.0f64..1e-3), 1..40),
    ) {
        let mut ledger = EnergyLedger::new(ModePowerConfig::default(), SimTime::ZERO);
        let mut t = SimTime::ZERO;
        for (mode_i, dt_us, domain_i, watts) in steps {
            let from = t;
            t += SimTime::from_us(dt_us);
            ledger.set_mode(MODES[mode_i], from, Initiator::Wuc).unwrap();
            ledger.accrue(DOMAINS[domain_i], watts, from, t).unwrap();
        }
        ledger.advance_to(t);
        let by_domain: f64 = DOMAINS.iter().map(|&d| ledger.domain_energy_j(d)).sum();
        let by_mode: f64 = MODES.iter().map(|&m| ledger.mode_energy_j(m)).sum();
        let total = ledger.total_energy_j();
        prop_assert!((by_domain - total).abs() <= 1e-12 + 1e-9 * total);
        prop_assert!((by_mode - total).abs() <= 1e-12 + 1e-9 * total);
        let residency: u64 = MODES.iter().map(|&m| ledger.mode_time(m).as_ps()).sum();
        prop_assert_eq!(residency, t.as_ps());
    }

    #[test]
    fn memory_survives_sleep_cycles(
        ops in proptest::collection::vec((0usize..8192, any::<u8>(), any::<bool>()), 1..30),
    ) {
        let mut sram = TpSram::new(TpSramTiming::default(), TpSramPower::default());
        sram.set_voltage(0.48);
        let mut t = SimTime::from_ns(10);
        sram.drive(SramSignal::SleepReq, false, t).unwrap();
        t += SimTime::from_ns(20);
        let mut shadow = [0u8; 8192];
        for (addr, data, nap) in ops {
            sram.write(addr, data, t).unwrap();
            shadow[addr] = data;
            t += SimTime::from_ns(100);
            if nap {
                sram.drive(SramSignal::SleepReq, true, t).unwrap();
                t += SimTime::from_ns(20);
                sram.drive(SramSignal::SleepReq, false, t).unwrap();
                t += SimTime::from_ns(20);
            }
            prop_assert_eq!(sram.read(PortId::Rp, addr, t), Ok(shadow[addr]));
            t += SimTime::from_ns(100);
        }
    }

    #[test]
    fn config_hash_survives_serialization(
        pass_rate in 0.0f64..=1.0,
        occupancy in 1.0f64..24.0,
        messages in 0u32..20,
    ) {
        let mut cfg = SimConfig::default();
        apply_parameter(&mut cfg, "pass_rate", pass_rate).unwrap();
        cfg.scenario.occupancy_hours = occupancy;
        cfg.scenario.messages_per_day = messages;
        let json = cfg.to_json_pretty();
        let back = SimConfig::from_json_str(&json).unwrap();
        prop_assert_eq!(cfg.sha256_hex(), back.sha256_hex());
    }

    #[test]
    fn time_arithmetic_round_trips(us in 0u64..=86_400_000_000) {
        let t = SimTime::from_us(us);
        prop_assert_eq!(t.as_ps(), us * 1_000_000);
        let s = t.as_secs_f64();
        // One f64 ulp at a full day is about 20 ps.
        prop_assert!((SimTime::from_secs_f64(s).as_ps() as i128 - t.as_ps() as i128).abs() <= 32);
    }
}

/// Daily average power as a line in the accepted-detection count,
/// anchored by two reference runs.
fn affine_anchors() -> (f64, f64) {
    static ANCHORS: std::sync::OnceLock<(f64, f64)> = std::sync::OnceLock::new();
    *ANCHORS.get_or_init(|| {
        let run_at = |p: f64| {
            let mut cfg = SimConfig::default();
            apply_parameter(&mut cfg, "pass_rate", p).unwrap();
            let r = run_day(&cfg, Variant::Edge, 0).unwrap();
            (r.counts.classifications as f64, r.avg_power_w)
        };
        let (n0, w0) = run_at(0.0);
        let (n1, w1) = run_at(1.0);
        let slope = (w1 - w0) / (n1 - n0);
        (w0 - slope * n0, slope)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn day_totals_scale_with_acceptance(p in 0.05f64..=1.0) {
        let (intercept, slope) = affine_anchors();
        let mut cfg = SimConfig::default();
        apply_parameter(&mut cfg, "pass_rate", p).unwrap();
        let r = run_day(&cfg, Variant::Edge, 0).unwrap();
        let predicted = intercept + slope * r.counts.classifications as f64;
        prop_assert!((r.avg_power_w - predicted).abs() <= 1e-3 * predicted,
            "avg {} vs affine prediction {}", r.avg_power_w, predicted);
    }
}
