// SPDX-License-Identifier: Apache-2.0

//! End-to-end checks of circuit, simulation and analysis together.

use std::io::Read;

use flate2::read::GzDecoder;
use synbench::analysis::detection_events;
use synbench::bench::{run_benchmark, write_outputs, ExtraDelay, RunConfig};
use synbench::circuit::{DdScope, Encoding, InstructionKind, Pauli};
use synbench::device::{plan_device, CxGate, DeviceCalibration, QubitCalibration};
use synbench::noise::{Channel, NoiseModel, NoiseOptions};
use synbench::report::RateKind;
use synbench::sim::{run_shots, ShotTable};

fn falcon() -> DeviceCalibration {
    DeviceCalibration::from_json_str(include_str!("../fixtures/falcon27.json")).unwrap()
}

fn path(centre_t1_ns: f64) -> DeviceCalibration {
    let qubits = (0..5)
        .map(|q| {
            let t1 = if q == 2 { centre_t1_ns } else { 100_000.0 };
            QubitCalibration::new(t1, t1, 760.0)
        })
        .collect();
    let gates = (0..4)
        .map(|q| {
            (
                (q, q + 1),
                CxGate {
                    error: 0.01,
                    duration_ns: 300.0,
                },
            )
        })
        .collect();
    DeviceCalibration::new(qubits, gates).unwrap()
}

#[test]
fn aux_flip_before_measurement_fires_two_rounds() {
    let cal = falcon();
    let line = plan_device(&cal)[&7].clone().unwrap();
    let noise = NoiseModel::noiseless(&cal);
    for encoding in [Encoding::BitFlip, Encoding::PhaseFlip] {
        let cfg = RunConfig::default();
        let c = cfg.circuit(&cal, &line, encoding, 0).unwrap();
        let aux = line.qubits[1];
        let at = c.measure_starts_ps()[0];
        let f = c.with_fault(aux, at, Pauli::X).unwrap();
        let dm = detection_events(&f, &run_shots(&f, &noise, 200, 1).unwrap()).unwrap();
        for s in 0..dm.shots() {
            let fired: Vec<usize> = (0..dm.detector_count()).filter(|&d| dm.get(s, d)).collect();
            assert_eq!(fired, vec![dm.detector(0, 1), dm.detector(0, 2)], "{encoding:?}");
        }
    }
}

#[test]
fn idle_rate_scales_linearly_when_small() {
    let cfg = RunConfig {
        shots: 1_000_000,
        seed: 3,
        encodings: vec![Encoding::BitFlip],
        logical_values: vec![1],
        dd_scope: DdScope::None,
        extra_delay: ExtraDelay::None,
        noise: NoiseOptions::only(&[Channel::Relaxation]),
        qubits: Some(vec![2]),
        bootstrap_resamples: 50,
        ..Default::default()
    };
    let rate = |t1: f64| {
        let r = run_benchmark(&cfg, &path(t1)).unwrap().report;
        let e = r.qubit(2).unwrap().headline(RateKind::P1to0).unwrap().clone();
        (e.estimate.unwrap(), e.exposure_ns)
    };
    let (_, exposure) = rate(1e6);
    // Pick T1 so the rate is near 0.4%, then halve it.
    let t1 = exposure / 0.004;
    let (p1, _) = rate(t1);
    let (p2, _) = rate(t1 / 2.0);
    assert!(p1 < 0.01 && p2 < 0.01, "{p1} {p2}");
    let ratio = p2 / p1;
    assert!((ratio - 2.0).abs() <= 0.2, "ratio {ratio} ({p1} -> {p2})");
}

#[test]
fn every_variant_satisfies_the_basis_contract() {
    let cal = falcon();
    let noise = NoiseModel::compile(&cal, &NoiseOptions::default()).unwrap();
    for (q, line) in plan_device(&cal) {
        let Some(line) = line else { continue };
        for encoding in [Encoding::BitFlip, Encoding::PhaseFlip] {
            for logical in [0, 1] {
                for dd_scope in [DdScope::None, DdScope::CodeOnly, DdScope::AllQubits] {
                    let cfg = RunConfig {
                        dd_scope,
                        ..Default::default()
                    };
                    let c = cfg.circuit(&cal, &line, encoding, logical).unwrap();
                    let shots = run_shots(&c, &noise, 64, q as u64)
                        .unwrap_or_else(|e| panic!("q{q} {encoding:?} l{logical} {dd_scope:?}: {e}"));
                    assert_eq!(shots.slot_count(), c.slot_count());
                    // Echoed delays only appear when decoupling is on.
                    let echoed = c
                        .instructions()
                        .iter()
                        .any(|i| i.kind == InstructionKind::Delay { echoed: true });
                    assert_eq!(echoed, dd_scope != DdScope::None);
                }
            }
        }
    }
}

#[test]
fn outputs_round_trip_from_disk() {
    let cal = falcon();
    let cfg = RunConfig {
        shots: 1500,
        qubits: Some(vec![7, 12]),
        bootstrap_resamples: 20,
        dump_shots: true,
        dump_circuits: true,
        ..Default::default()
    };
    let out = run_benchmark(&cfg, &cal).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_outputs(&out, dir.path(), true).unwrap();
    assert_eq!(files.len(), 4 + 2 * 4 * 2);

    let csv = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert!(csv.starts_with("qubit,encoding,rate_type,estimate,stderr,guide,exposure_ns\n"));
    assert!(csv.lines().any(|l| l.starts_with("7,bit_flip,p_01,")));

    let dump = &out.shot_dumps[0];
    let name = format!("q{}_{}_l{}.txt.gz", dump.qubit, dump.encoding.as_str(), dump.logical);
    let mut text = String::new();
    GzDecoder::new(std::fs::File::open(dir.path().join("shots").join(name)).unwrap())
        .read_to_string(&mut text)
        .unwrap();
    assert_eq!(ShotTable::read_text(text.as_bytes()).unwrap(), dump.shots);

    let circuit = std::fs::read_to_string(dir.path().join("circuits/q7_bit_flip_l0.txt")).unwrap();
    assert!(circuit.lines().any(|l| l.contains("measure")));
}
