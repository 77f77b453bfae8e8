// SPDX-License-Identifier: Apache-2.0

//! Detection events and correlation-based idle error estimates.
//!
//! A detector fires when an auxiliary's outcome changes between consecutive
//! rounds. An idle error on the central code qubit flips both of its
//! auxiliaries' detectors in the following round, so it shows up as a
//! correlation between them. With `v_i`, `v_j` the detector means and
//! `C = <d_i d_j> - v_i v_j`, the probability of the shared flip is
//!
//! ```text
//! p = 1/2 - 1 / (2 sqrt(1 + 4 C / ((1 - 2 v_i)(1 - 2 v_j))))
//! ```
//!
//! which is exact when the two detectors are otherwise flipped by
//! independent mechanisms.

use rand::distr::Distribution;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::rng;
use crate::sim::ShotTable;

/// Below this many shots an estimate is flagged as unreliable.
pub const MIN_RELIABLE_SHOTS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("shot table has {got} slots, circuit expects {expected}")]
    SlotMismatch { got: usize, expected: usize },
    #[error("detector index {0} out of range")]
    DetectorOutOfRange(usize),
    #[error("detectors are degenerate (v_i = {v_i}, v_j = {v_j}); the estimate is undefined")]
    Degenerate { v_i: f64, v_j: f64 },
    #[error("idle rates need a distance-3 line, got {0} qubits")]
    UnsupportedLine(usize),
    #[error("round {round} has no preceding round to compare with (rounds = {rounds})")]
    RoundOutOfRange { round: usize, rounds: usize },
    #[error("no shots to analyse")]
    NoShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// The correlation was negative or the radicand non-positive; clamped to 0.
    Clamped,
    LowShotCount,
    /// No bootstrap resample gave a defined estimate; the standard error is 0.
    NoValidResamples,
    /// The detectors were degenerate; there is no estimate.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Closed form, exact for independent flip mechanisms.
    #[default]
    Exact,
    /// `C / ((1 - 2 v_i)(1 - 2 v_j))`, first order in the error rates.
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub mode: EstimatorMode,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::Exact,
            resamples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub shots: usize,
    pub flags: Vec<EstimateFlag>,
}

/// Detector outcomes per shot. Detector `(k, r)` compares auxiliary `k`'s
/// round-`r` outcome with round `r - 1`; round `rounds + 1` uses the parity
/// of the final code readouts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionMatrix {
    aux: usize,
    rounds: usize,
    shots: usize,
    words: usize,
    data: Vec<u64>,
}

impl DetectionMatrix {
    /// Builds a matrix from `fires(shot, detector)`.
    pub fn from_fn(aux: usize, rounds: usize, shots: usize, mut fires: impl FnMut(usize, usize) -> bool) -> Self {
        let count = aux * (rounds + 1);
        let words = count.div_ceil(64).max(1);
        let mut data = vec![0u64; words * shots];
        for s in 0..shots {
            for d in 0..count {
                if fires(s, d) {
                    data[s * words + d / 64] |= 1 << (d % 64);
                }
            }
        }
        Self {
            aux,
            rounds,
            shots,
            words,
            data,
        }
    }

    pub fn detector(&self, aux_index: usize, round: usize) -> usize {
        (round - 1) * self.aux + aux_index
    }

    pub fn detector_count(&self) -> usize {
        self.aux * (self.rounds + 1)
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn get(&self, shot: usize, det: usize) -> bool {
        self.data[shot * self.words + det / 64] >> (det % 64) & 1 == 1
    }

    pub fn mean(&self, det: usize) -> f64 {
        (0..self.shots).filter(|&s| self.get(s, det)).count() as f64 / self.shots as f64
    }

    /// Joint counts `[n00, n01, n10, n11]` of detectors `(i, j)`.
    pub fn pair_counts(&self, i: usize, j: usize) -> Result<[u64; 4], AnalysisError> {
        for d in [i, j] {
            if d >= self.detector_count() {
                return Err(AnalysisError::DetectorOutOfRange(d));
            }
        }
        let mut counts = [0u64; 4];
        for s in 0..self.shots {
            let k = (usize::from(self.get(s, i)) << 1) | usize::from(self.get(s, j));
            counts[k] += 1;
        }
        Ok(counts)
    }
}

/// Turns raw measurement records into detection events.
pub fn detection_events(circuit: &Circuit, shots: &ShotTable) -> Result<DetectionMatrix, AnalysisError> {
    if shots.slot_count() != circuit.slot_count() {
        return Err(AnalysisError::SlotMismatch {
            got: shots.slot_count(),
            expected: circuit.slot_count(),
        });
    }
    let aux = circuit.aux_qubits();
    let rounds = circuit.rounds();
    let count = aux.len() * (rounds + 1);
    let words = count.div_ceil(64).max(1);
    let mut data = vec![0u64; words * shots.shots()];
    let slot = |a: usize, r: usize| circuit.aux_slot(a, r).expect("layout");
    let finals: Vec<(usize, usize)> = aux
        .iter()
        .map(|&a| {
            let (l, r) = circuit.aux_neighbors(a).expect("auxiliary");
            (
                circuit.final_slot(l).expect("layout"),
                circuit.final_slot(r).expect("layout"),
            )
        })
        .collect();
    for s in 0..shots.shots() {
        let row = &mut data[s * words..(s + 1) * words];
        for (k, &a) in aux.iter().enumerate() {
            let mut prev = false;
            for r in 1..=rounds + 1 {
                let now = if r <= rounds {
                    shots.bit(s, slot(a, r))
                } else {
                    shots.bit(s, finals[k].0) ^ shots.bit(s, finals[k].1)
                };
                if now != prev {
                    let d = (r - 1) * aux.len() + k;
                    row[d / 64] |= 1 << (d % 64);
                }
                prev = now;
            }
        }
    }
    Ok(DetectionMatrix {
        aux: aux.len(),
        rounds,
        shots: shots.shots(),
        words,
        data,
    })
}

/// Point estimate from detector moments. Returns the estimate and whether it
/// was clamped to zero.
pub fn correlation_from_moments(
    v_i: f64,
    v_j: f64,
    v_ij: f64,
    mode: EstimatorMode,
) -> Result<(f64, bool), AnalysisError> {
    let denom = (1.0 - 2.0 * v_i) * (1.0 - 2.0 * v_j);
    if denom.is_nan() || denom <= 0.0 {
        return Err(AnalysisError::Degenerate { v_i, v_j });
    }
    let c = v_ij - v_i * v_j;
    let p = match mode {
        EstimatorMode::FirstOrder => c / denom,
        EstimatorMode::Exact => {
            let radicand = 1.0 + 4.0 * c / denom;
            if radicand <= 0.0 {
                return Ok((0.0, true));
            }
            0.5 - 0.5 / radicand.sqrt()
        }
    };
    if p < 0.0 {
        Ok((0.0, true))
    } else {
        Ok((p, false))
    }
}

fn estimate_from_counts(counts: [u64; 4], mode: EstimatorMode) -> Result<(f64, bool), AnalysisError> {
    let n = counts.iter().sum::<u64>() as f64;
    let v_i = (counts[2] + counts[3]) as f64 / n;
    let v_j = (counts[1] + counts[3]) as f64 / n;
    let v_ij = counts[3] as f64 / n;
    correlation_from_moments(v_i, v_j, v_ij, mode)
}

/// Resamples shots with replacement. Only the joint counts matter, so a
/// resample is a multinomial draw over the four detector patterns.
fn resample(counts: [u64; 4], rng: &mut impl rand::Rng) -> [u64; 4] {
    let n: u64 = counts.iter().sum();
    let mut left = n;
    let mut mass = n;
    let mut out = [0u64; 4];
    for k in 0..3 {
        if left == 0 || mass == 0 {
            break;
        }
        let p = (counts[k] as f64 / mass as f64).clamp(0.0, 1.0);
        out[k] = Binomial::new(left, p).expect("valid binomial").sample(rng);
        left -= out[k];
        mass -= counts[k];
    }
    out[3] = left;
    out
}

/// Estimates the probability of a shared flip on detectors `i` and `j`, with
/// a bootstrap standard error.
pub fn correlation_rate(
    dm: &DetectionMatrix,
    i: usize,
    j: usize,
    opts: &EstimatorOptions,
) -> Result<RateEstimate, AnalysisError> {
    if dm.shots == 0 {
        return Err(AnalysisError::NoShots);
    }
    let counts = dm.pair_counts(i, j)?;
    let (estimate, clamped) = estimate_from_counts(counts, opts.mode)?;
    let mut flags = Vec::new();
    if clamped {
        flags.push(EstimateFlag::Clamped);
    }
    if dm.shots < MIN_RELIABLE_SHOTS {
        log::warn!("estimate from only {} shots", dm.shots);
        flags.push(EstimateFlag::LowShotCount);
    }
    let mut rng = rng::stream_rng(opts.seed, 0);
    let samples: Vec<f64> = (0..opts.resamples)
        .filter_map(|_| estimate_from_counts(resample(counts, &mut rng), opts.mode).ok())
        .map(|(p, _)| p)
        .collect();
    let std_error = if samples.len() >= 2 {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        flags.push(EstimateFlag::NoValidResamples);
        0.0
    };
    Ok(RateEstimate {
        estimate,
        std_error,
        shots: dm.shots,
        flags,
    })
}

/// Idle error of the central code qubit during the window before `round`,
/// read off the correlation of its two auxiliaries' round-`round` detectors.
pub fn extract_idle_rate(
    circuit: &Circuit,
    dm: &DetectionMatrix,
    round: usize,
    opts: &EstimatorOptions,
) -> Result<RateEstimate, AnalysisError> {
    if circuit.line().len() != 5 {
        return Err(AnalysisError::UnsupportedLine(circuit.line().len()));
    }
    if round < 2 || round > circuit.rounds() {
        return Err(AnalysisError::RoundOutOfRange {
            round,
            rounds: circuit.rounds(),
        });
    }
    correlation_rate(dm, dm.detector(0, round), dm.detector(1, round), opts)
}

/// Median of finite values; the mean of the central pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_repetition_circuit, RepetitionSpec};
    use crate::device::test_support::path_device;
    use crate::device::BenchLine;
    use proptest::prelude::*;
    use rand::Rng;

    /// Exact detector moments by enumerating the shared flip `p` and the
    /// private flips `qi`, `qj`.
    fn brute_moments(p: f64, qi: f64, qj: f64) -> (f64, f64, f64) {
        let (mut vi, mut vj, mut vij) = (0.0, 0.0, 0.0);
        for mask in 0..8u32 {
            let on = |bit: u32, prob: f64| if mask >> bit & 1 == 1 { prob } else { 1.0 - prob };
            let w = on(0, p) * on(1, qi) * on(2, qj);
            let di = (mask & 1) ^ (mask >> 1 & 1);
            let dj = (mask & 1) ^ (mask >> 2 & 1);
            vi += w * f64::from(di);
            vj += w * f64::from(dj);
            vij += w * f64::from(di & dj);
        }
        (vi, vj, vij)
    }

    #[test]
    fn recovers_the_shared_flip_exactly() {
        let (vi, vj, vij) = brute_moments(0.05, 0.02, 0.03);
        assert!((vi - 0.068).abs() < 1e-15);
        assert!((vj - 0.077).abs() < 1e-15);
        let (p, clamped) = correlation_from_moments(vi, vj, vij, EstimatorMode::Exact).unwrap();
        assert!(!clamped);
        assert!((p - 0.05).abs() < 1e-12, "{p}");
        let (first, _) = correlation_from_moments(vi, vj, vij, EstimatorMode::FirstOrder).unwrap();
        assert!((first - 0.05).abs() < 0.01 && (first - 0.05).abs() > 1e-6);
    }

    proptest! {
        #[test]
        fn exact_for_independent_mechanisms(p in 0.0..0.45f64, qi in 0.0..0.45f64, qj in 0.0..0.45f64) {
            let (vi, vj, vij) = brute_moments(p, qi, qj);
            let (est, _) = correlation_from_moments(vi, vj, vij, EstimatorMode::Exact).unwrap();
            prop_assert!((est - p).abs() < 1e-9, "p {} est {}", p, est);
        }

        #[test]
        fn estimate_is_a_probability(n in proptest::array::uniform4(0u64..500)) {
            prop_assume!(n.iter().sum::<u64>() > 0);
            if let Ok((p, _)) = estimate_from_counts(n, EstimatorMode::Exact) {
                prop_assert!((0.0..=0.5).contains(&p));
            }
        }
    }

    #[test]
    fn degenerate_and_negative_cases() {
        assert_eq!(
            correlation_from_moments(0.5, 0.1, 0.05, EstimatorMode::Exact),
            Err(AnalysisError::Degenerate { v_i: 0.5, v_j: 0.1 })
        );
        // Anti-correlated detectors clamp to zero.
        assert_eq!(
            correlation_from_moments(0.2, 0.2, 0.0, EstimatorMode::Exact),
            Ok((0.0, true))
        );
        assert_eq!(
            correlation_from_moments(0.1, 0.1, 0.0, EstimatorMode::FirstOrder),
            Ok((0.0, true))
        );
    }

    fn matrix(rows: &[[bool; 2]]) -> DetectionMatrix {
        let mut data = Vec::new();
        for r in rows {
            data.push(u64::from(r[0]) | u64::from(r[1]) << 1);
        }
        DetectionMatrix {
            aux: 2,
            rounds: 0,
            shots: rows.len(),
            words: 1,
            data,
        }
    }

    fn synthetic(p: f64, qi: f64, qj: f64, shots: usize, seed: u64) -> DetectionMatrix {
        let mut rng = rng::stream_rng(seed, 7);
        let rows: Vec<[bool; 2]> = (0..shots)
            .map(|_| {
                let shared = rng.random_bool(p);
                [shared ^ rng.random_bool(qi), shared ^ rng.random_bool(qj)]
            })
            .collect();
        matrix(&rows)
    }

    #[test]
    fn bootstrap_error_matches_the_spread_of_estimates() {
        let opts = EstimatorOptions::default();
        let est: Vec<RateEstimate> = (0..40)
            .map(|s| correlation_rate(&synthetic(0.05, 0.02, 0.03, 20_000, s), 0, 1, &opts).unwrap())
            .collect();
        let values: Vec<f64> = est.iter().map(|e| e.estimate).collect();
        let mean = values.iter().sum::<f64>() / 40.0;
        let spread = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 39.0).sqrt();
        let se = est.iter().map(|e| e.std_error).sum::<f64>() / 40.0;
        assert!((mean - 0.05).abs() < 3.0 * spread / 40f64.sqrt(), "mean {mean}");
        assert!((se / spread - 1.0).abs() < 0.3, "se {se} spread {spread}");
        assert!(est.iter().all(|e| e.flags.is_empty()));
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let dm = synthetic(0.1, 0.05, 0.05, 5000, 1);
        let opts = EstimatorOptions {
            seed: 3,
            ..Default::default()
        };
        assert_eq!(correlation_rate(&dm, 0, 1, &opts), correlation_rate(&dm, 0, 1, &opts));
    }

    #[test]
    fn resampling_preserves_the_total() {
        let mut rng = rng::stream_rng(0, 0);
        for counts in [[10, 0, 0, 5], [0, 0, 0, 9], [1, 2, 3, 4]] {
            let r = resample(counts, &mut rng);
            assert_eq!(r.iter().sum::<u64>(), counts.iter().sum::<u64>());
            for k in 0..4 {
                if counts[k] == 0 {
                    assert_eq!(r[k], 0);
                }
            }
        }
    }

    #[test]
    fn flags_low_shots_and_degenerate_resamples() {
        let dm = matrix(&[
            [true, true],
            [false, false],
            [false, false],
            [true, false],
            [false, false],
        ]);
        let e = correlation_rate(&dm, 0, 1, &EstimatorOptions::default()).unwrap();
        assert!(e.flags.contains(&EstimateFlag::LowShotCount));
        let all_on = matrix(&[[true, false], [false, false]]);
        assert!(matches!(
            correlation_rate(&all_on, 0, 1, &EstimatorOptions::default()),
            Err(AnalysisError::Degenerate { .. })
        ));
        let mostly = matrix(&[[true, true], [true, true], [true, true], [false, false]]);
        let e = correlation_rate(&mostly, 0, 1, &EstimatorOptions::default());
        if let Ok(e) = e {
            assert!(e.estimate >= 0.0);
        }
        assert_eq!(dm.pair_counts(0, 5), Err(AnalysisError::DetectorOutOfRange(5)));
    }

    #[test]
    fn detection_events_follow_outcome_changes() {
        let cal = path_device(5);
        let line = BenchLine::new(&cal, [0, 1, 2, 3, 4]).unwrap();
        let c = build_repetition_circuit(
            &line,
            &cal,
            &RepetitionSpec {
                rounds: 3,
                ..Default::default()
            },
        )
        .unwrap();
        // Slots: rounds (a1, a3) x 3, then code 0, 2, 4.
        let rows = vec![
            vec![false; 9],
            // Outcome for a1 turns on in round 2 and stays: one detector fires.
            vec![false, false, true, false, true, false, true, false, false],
            // Single outcome blip on a3 in round 2: two detectors fire.
            vec![false, false, false, true, false, false, false, false, false],
        ];
        let dm = detection_events(&c, &ShotTable::from_rows(9, &rows)).unwrap();
        assert_eq!(dm.detector_count(), 8);
        let fired = |s: usize| (0..8).filter(|&d| dm.get(s, d)).collect::<Vec<_>>();
        assert_eq!(fired(0), Vec::<usize>::new());
        assert_eq!(fired(1), vec![dm.detector(0, 2)]);
        assert_eq!(fired(2), vec![dm.detector(1, 2), dm.detector(1, 3)]);
        assert!(matches!(
            detection_events(&c, &ShotTable::zeroed(5, 1)),
            Err(AnalysisError::SlotMismatch { got: 5, expected: 9 })
        ));
        assert!(matches!(
            extract_idle_rate(&c, &dm, 1, &EstimatorOptions::default()),
            Err(AnalysisError::RoundOutOfRange { round: 1, rounds: 3 })
        ));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[f64::NAN, 1.0]), Some(1.0));
    }
}
