// SPDX-License-Identifier: Apache-2.0

//! Stochastic error channels compiled from a device calibration.
//!
//! Idle qubits relax and dephase. For a delay of length `t`:
//!
//! ```text
//! P(0->1) + P(1->0) = 1 - exp(-t/T1)
//! P(0->1) / P(1->0) = (1 - p0) / p0
//! P(+<->-)          = (1 - exp(-t/T2)) / 2     (T2* when not echoed)
//! ```
//!
//! Two-qubit gates depolarize with their calibrated error, readout flips the
//! recorded bit, and (optionally) a qubit's 1->0 decay kicks the phase of its
//! neighbours with probability `eta`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceCalibration, QubitCalibration};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("{what} = {value} is not a probability in [0, 1]")]
    ProbabilityOutOfRange { what: &'static str, value: f64 },
    #[error("idle qubit mask names qubit {0}, which is not on the device")]
    UnknownQubit(usize),
    #[error("delay_slices must be at least 1")]
    ZeroSlices,
}

/// Relaxation and dephasing of one idle qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdleChannel {
    pub t1_ns: f64,
    pub t2_ns: f64,
    pub t2_star_ns: f64,
    pub p0: f64,
}

/// `1 - exp(-t/tau)`, accurate for small `t/tau`.
fn decay(t_ns: f64, tau_ns: f64) -> f64 {
    if t_ns <= 0.0 {
        0.0
    } else {
        -(-t_ns / tau_ns).exp_m1()
    }
}

impl IdleChannel {
    pub fn from_calibration(q: &QubitCalibration) -> Self {
        Self {
            t1_ns: q.t1_ns,
            t2_ns: q.t2_ns,
            t2_star_ns: q.t2_star_ns,
            p0: q.p0,
        }
    }

    /// A channel that never fires.
    pub fn ideal() -> Self {
        Self {
            t1_ns: f64::INFINITY,
            t2_ns: f64::INFINITY,
            t2_star_ns: f64::INFINITY,
            p0: 1.0,
        }
    }

    /// Total relaxation probability `1 - exp(-t/T1)`.
    pub fn relaxation(&self, t_ns: f64) -> f64 {
        decay(t_ns, self.t1_ns)
    }

    pub fn p_0to1(&self, t_ns: f64) -> f64 {
        (1.0 - self.p0) * self.relaxation(t_ns)
    }

    pub fn p_1to0(&self, t_ns: f64) -> f64 {
        self.p0 * self.relaxation(t_ns)
    }

    /// Phase-flip probability; echoed delays dephase on `T2`, free ones on `T2*`.
    pub fn p_phaseflip(&self, t_ns: f64, echoed: bool) -> f64 {
        let tau = if echoed { self.t2_ns } else { self.t2_star_ns };
        0.5 * decay(t_ns, tau)
    }
}

/// Analytic expectations for the idle flip probabilities of one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuideValues {
    pub p_1to0: f64,
    pub p_0to1: f64,
    /// Direction-averaged bit-flip probability.
    pub p_01: f64,
    pub p_pm: f64,
}

/// Guide values for an idle period of `t_delay_ns`.
///
/// With dynamical decoupling the qubit spends half the delay in each state,
/// so both directions flip with `1 - exp(-(t/2)/T1)`. Phase flips always use
/// `T2`, which already presumes echoing.
pub fn guide_values(cal: &DeviceCalibration, qubit: usize, t_delay_ns: f64, dd: bool) -> GuideValues {
    let ch = IdleChannel::from_calibration(cal.qubit(qubit));
    let p_pm = ch.p_phaseflip(t_delay_ns, true);
    if dd {
        let p = ch.relaxation(t_delay_ns / 2.0);
        GuideValues {
            p_1to0: p,
            p_0to1: p,
            p_01: p,
            p_pm,
        }
    } else {
        let p_1to0 = ch.p_1to0(t_delay_ns);
        let p_0to1 = ch.p_0to1(t_delay_ns);
        GuideValues {
            p_1to0,
            p_0to1,
            p_01: 0.5 * (p_1to0 + p_0to1),
            p_pm,
        }
    }
}

/// Channels that can be switched off for controlled experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Cx,
    Readout,
    Relaxation,
    Dephasing,
    Crosstalk,
}

/// User-facing knobs; the `noise` block of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseOptions {
    pub crosstalk_eta: f64,
    pub enable_crosstalk: bool,
    pub prep_error: f64,
    pub disable: Vec<Channel>,
    /// Restricts relaxation and dephasing to these qubits when set.
    pub idle_qubits: Option<Vec<usize>>,
    /// Relaxation is re-sampled this many times per delay segment.
    pub delay_slices: u32,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self {
            crosstalk_eta: 1.0,
            enable_crosstalk: true,
            prep_error: 0.0,
            disable: Vec::new(),
            idle_qubits: None,
            delay_slices: 1,
        }
    }
}

impl NoiseOptions {
    /// Options with every channel disabled except `keep`.
    pub fn only(keep: &[Channel]) -> Self {
        let all = [
            Channel::Cx,
            Channel::Readout,
            Channel::Relaxation,
            Channel::Dephasing,
            Channel::Crosstalk,
        ];
        Self {
            disable: all.into_iter().filter(|c| !keep.contains(c)).collect(),
            enable_crosstalk: keep.contains(&Channel::Crosstalk),
            ..Self::default()
        }
    }

    pub fn enabled(&self, channel: Channel) -> bool {
        !self.disable.contains(&channel) && (channel != Channel::Crosstalk || self.enable_crosstalk)
    }
}

/// Per-instruction error channels for one device. Immutable once compiled.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    idle: Vec<IdleChannel>,
    relaxation: Vec<bool>,
    dephasing: Vec<bool>,
    cx: BTreeMap<(usize, usize), f64>,
    readout: Vec<f64>,
    prep_error: f64,
    crosstalk_eta: f64,
    neighbors: Vec<Vec<usize>>,
    delay_slices: u32,
}

fn check_probability(what: &'static str, value: f64) -> Result<(), NoiseError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(NoiseError::ProbabilityOutOfRange { what, value })
    }
}

impl NoiseModel {
    /// Binds calibration data to channels.
    pub fn compile(cal: &DeviceCalibration, opts: &NoiseOptions) -> Result<Self, NoiseError> {
        check_probability("crosstalk_eta", opts.crosstalk_eta)?;
        check_probability("prep_error", opts.prep_error)?;
        if opts.delay_slices == 0 {
            return Err(NoiseError::ZeroSlices);
        }
        let n = cal.qubit_count();
        let mut idle_mask = vec![true; n];
        if let Some(list) = &opts.idle_qubits {
            idle_mask = vec![false; n];
            for &q in list {
                *idle_mask.get_mut(q).ok_or(NoiseError::UnknownQubit(q))? = true;
            }
        }
        let relax_on = opts.enabled(Channel::Relaxation);
        let dephase_on = opts.enabled(Channel::Dephasing);
        let cx_on = opts.enabled(Channel::Cx);
        let readout_on = opts.enabled(Channel::Readout);
        Ok(Self {
            idle: cal.qubits().iter().map(IdleChannel::from_calibration).collect(),
            relaxation: idle_mask.iter().map(|&m| m && relax_on).collect(),
            dephasing: idle_mask.iter().map(|&m| m && dephase_on).collect(),
            cx: cal
                .edges()
                .map(|(k, g)| (k, if cx_on { g.error } else { 0.0 }))
                .collect(),
            readout: cal
                .qubits()
                .iter()
                .map(|q| if readout_on { q.readout_error } else { 0.0 })
                .collect(),
            prep_error: opts.prep_error,
            crosstalk_eta: if opts.enabled(Channel::Crosstalk) {
                opts.crosstalk_eta
            } else {
                0.0
            },
            neighbors: (0..n).map(|q| cal.neighbors(q).to_vec()).collect(),
            delay_slices: opts.delay_slices,
        })
    }

    /// The zero-noise model for `cal`'s graph.
    pub fn noiseless(cal: &DeviceCalibration) -> Self {
        let n = cal.qubit_count();
        Self {
            idle: vec![IdleChannel::ideal(); n],
            relaxation: vec![false; n],
            dephasing: vec![false; n],
            cx: cal.edges().map(|(k, _)| (k, 0.0)).collect(),
            readout: vec![0.0; n],
            prep_error: 0.0,
            crosstalk_eta: 0.0,
            neighbors: (0..n).map(|q| cal.neighbors(q).to_vec()).collect(),
            delay_slices: 1,
        }
    }

    /// True when no channel can ever fire.
    pub fn is_noiseless(&self) -> bool {
        let idle_quiet = self.idle.iter().enumerate().all(|(q, ch)| {
            (!self.relaxation[q] || ch.t1_ns.is_infinite())
                && (!self.dephasing[q] || (ch.t2_ns.is_infinite() && ch.t2_star_ns.is_infinite()))
        });
        idle_quiet
            && self.cx.values().all(|&e| e == 0.0)
            && self.readout.iter().all(|&e| e == 0.0)
            && self.prep_error == 0.0
    }

    pub fn qubit_count(&self) -> usize {
        self.idle.len()
    }

    pub fn idle_channel(&self, q: usize) -> &IdleChannel {
        &self.idle[q]
    }

    pub fn p_1to0(&self, q: usize, t_ns: f64) -> f64 {
        if self.relaxation[q] {
            self.idle[q].p_1to0(t_ns)
        } else {
            0.0
        }
    }

    pub fn p_0to1(&self, q: usize, t_ns: f64) -> f64 {
        if self.relaxation[q] {
            self.idle[q].p_0to1(t_ns)
        } else {
            0.0
        }
    }

    pub fn p_phaseflip(&self, q: usize, t_ns: f64, echoed: bool) -> f64 {
        if self.dephasing[q] {
            self.idle[q].p_phaseflip(t_ns, echoed)
        } else {
            0.0
        }
    }

    /// Probability that a `cx` on this pair suffers one of the 15 non-identity Paulis.
    pub fn cx_error(&self, a: usize, b: usize) -> Option<f64> {
        self.cx.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn readout_error(&self, q: usize) -> f64 {
        self.readout[q]
    }

    pub fn prep_error(&self) -> f64 {
        self.prep_error
    }

    /// Effective cross-talk strength (zero when the channel is off).
    pub fn crosstalk_eta(&self) -> f64 {
        self.crosstalk_eta
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.neighbors[q]
    }

    pub fn delay_slices(&self) -> u32 {
        self.delay_slices
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::test_support::path_device;
    use proptest::prelude::*;

    fn channel(t1: f64, t2: f64, p0: f64) -> IdleChannel {
        IdleChannel {
            t1_ns: t1,
            t2_ns: t2,
            t2_star_ns: 0.5 * t2,
            p0,
        }
    }

    #[test]
    fn eq2_guide_values() {
        let ch = channel(100_000.0, 80_000.0, 1.0);
        let p = ch.p_1to0(12_500.0);
        assert!((p - (1.0 - (-0.125f64).exp())).abs() < 1e-15);
        assert!((p - 0.1175).abs() < 5e-5);
        let pm = ch.p_phaseflip(10_000.0, true);
        assert!((pm - 0.0588).abs() < 5e-5);
    }

    #[test]
    fn guide_value_modes() {
        let cal = path_device(5);
        let t1 = cal.qubit(2).t1_ns;
        let g = guide_values(&cal, 2, t1 / 8.0, false);
        assert!((g.p_1to0 - 0.1175).abs() < 5e-5);
        assert_eq!(g.p_0to1, 0.0);
        let g = guide_values(&cal, 2, t1 / 8.0, true);
        assert!((g.p_01 - (1.0 - (-1.0f64 / 16.0).exp())).abs() < 1e-15);
        assert!((g.p_01 - 0.0606).abs() < 5e-5);
        let g = guide_values(&cal, 2, 0.0, true);
        assert_eq!(
            g,
            GuideValues {
                p_1to0: 0.0,
                p_0to1: 0.0,
                p_01: 0.0,
                p_pm: 0.0
            }
        );
    }

    #[test]
    fn unechoed_dephasing_uses_t2_star() {
        let ch = channel(1e5, 8e4, 1.0);
        assert!(ch.p_phaseflip(1e4, false) > ch.p_phaseflip(1e4, true));
        assert!((ch.p_phaseflip(1e4, false) - 0.5 * (1.0 - (-1e4f64 / 4e4).exp())).abs() < 1e-15);
    }

    #[test]
    fn p0_of_one_forbids_excitation() {
        let ch = channel(1e5, 8e4, 1.0);
        assert_eq!(ch.p_0to1(1e6), 0.0);
    }

    #[test]
    fn limits() {
        let ch = channel(1e5, 8e4, 0.93);
        assert!((ch.p_1to0(1e9) - 0.93).abs() < 1e-12);
        assert!((ch.p_0to1(1e9) - 0.07).abs() < 1e-12);
        assert!((ch.p_phaseflip(1e9, true) - 0.5).abs() < 1e-12);
        assert!((ch.p_phaseflip(1e9, false) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_calibration_errors_and_infinite_times_are_noiseless() {
        let mut cal = path_device(5).with_uniform_cx_error(0.0).unwrap();
        let mut qubits = cal.qubits().to_vec();
        for q in &mut qubits {
            q.t1_ns = f64::INFINITY;
            q.t2_ns = f64::INFINITY;
            q.t2_star_ns = f64::INFINITY;
            q.readout_error = 0.0;
        }
        let gates = cal.edges().map(|(k, g)| (k, *g)).collect();
        cal = DeviceCalibration::new(qubits, gates).unwrap();
        let model = NoiseModel::compile(&cal, &NoiseOptions::default()).unwrap();
        assert!(model.is_noiseless());
        assert_eq!(model.p_1to0(2, 1e9), 0.0);
        assert!(NoiseModel::noiseless(&path_device(5)).is_noiseless());
        assert!(!NoiseModel::compile(&path_device(5), &NoiseOptions::default())
            .unwrap()
            .is_noiseless());
    }

    #[test]
    fn masks_switch_channels_off() {
        let cal = path_device(5);
        let opts = NoiseOptions {
            idle_qubits: Some(vec![2]),
            ..NoiseOptions::only(&[Channel::Relaxation])
        };
        let m = NoiseModel::compile(&cal, &opts).unwrap();
        assert!(m.p_1to0(2, 1e4) > 0.0);
        assert_eq!(m.p_1to0(1, 1e4), 0.0);
        assert_eq!(m.p_phaseflip(2, 1e4, true), 0.0);
        assert_eq!(m.cx_error(1, 2), Some(0.0));
        assert_eq!(m.readout_error(2), 0.0);
        assert_eq!(m.crosstalk_eta(), 0.0);
        let m = NoiseModel::compile(&cal, &NoiseOptions::default()).unwrap();
        assert_eq!(m.cx_error(2, 1), Some(0.01));
        assert_eq!(m.crosstalk_eta(), 1.0);
    }

    #[test]
    fn rejects_bad_options() {
        let cal = path_device(5);
        let bad = |o: NoiseOptions| NoiseModel::compile(&cal, &o).unwrap_err();
        assert!(matches!(
            bad(NoiseOptions {
                crosstalk_eta: 1.5,
                ..Default::default()
            }),
            NoiseError::ProbabilityOutOfRange { .. }
        ));
        assert_eq!(
            bad(NoiseOptions {
                idle_qubits: Some(vec![9]),
                ..Default::default()
            }),
            NoiseError::UnknownQubit(9)
        );
        assert_eq!(
            bad(NoiseOptions {
                delay_slices: 0,
                ..Default::default()
            }),
            NoiseError::ZeroSlices
        );
    }

    #[test]
    fn options_parse_from_config_block() {
        let o: NoiseOptions = serde_json::from_str(
            r#"{"crosstalk_eta":0.5,"enable_crosstalk":false,"prep_error":0.01,"disable":["cx","readout"]}"#,
        )
        .unwrap();
        assert_eq!(o.crosstalk_eta, 0.5);
        assert!(!o.enabled(Channel::Crosstalk));
        assert!(!o.enabled(Channel::Cx));
        assert!(o.enabled(Channel::Dephasing));
    }

    /// Flip probability of a qubit held for `t/2`, flipped, then held `t/2`,
    /// by explicit two-state Markov composition, averaged over start states.
    fn two_half_flip(ch: &IdleChannel, t: f64) -> f64 {
        // Row-stochastic transition matrix for a relaxation segment.
        let seg = |dt: f64| {
            let up = ch.p_0to1(dt);
            let down = ch.p_1to0(dt);
            [[1.0 - up, up], [down, 1.0 - down]]
        };
        let m = seg(t / 2.0);
        let flip = [[0.0, 1.0], [1.0, 0.0]];
        let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
            let mut c = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            c
        };
        let total = mul(mul(m, flip), m);
        // Ideal evolution is a single flip: start s ends in 1 - s.
        let err0 = total[0][0];
        let err1 = total[1][1];
        0.5 * (err0 + err1)
    }

    #[test]
    fn dd_approximation_error_is_bounded_by_half_the_half_delay_flip() {
        // The echoed formula 1 - exp(-(t/2)/T1) ignores decay-then-redecay
        // paths; the exact average is h - h^2/2 with h that same value.
        for &p0 in &[1.0, 0.97, 0.9] {
            let ch = channel(1e5, 8e4, p0);
            for k in 1..=50 {
                let t = 1e5 / 4.0 * k as f64 / 50.0;
                let h = ch.relaxation(t / 2.0);
                let exact = two_half_flip(&ch, t);
                let rel = (h - exact).abs() / h;
                assert!(rel <= h / 2.0 + 1e-12, "t={t} p0={p0} rel={rel}");
                if t <= 1e5 / 12.0 {
                    assert!(rel <= 0.02, "t={t} rel={rel}");
                }
            }
        }
        let ch = channel(1e5, 8e4, 1.0);
        let exact = two_half_flip(&ch, 1e5 / 4.0);
        let h = ch.relaxation(1e5 / 8.0);
        assert!((exact - (h - h * h / 2.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn relaxation_identities(
            t1 in 1e3f64..1e6, t2_frac in 0.05f64..2.0, p0 in 0.01f64..1.0, t in 0.0f64..5e6,
        ) {
            let ch = channel(t1, t1 * t2_frac, p0);
            let sum = ch.p_0to1(t) + ch.p_1to0(t);
            let expected = -(-t / t1).exp_m1();
            prop_assert!((sum - expected).abs() <= 1e-12 * expected.max(1e-300));
            if t > 0.0 {
                let ratio = ch.p_0to1(t) / ch.p_1to0(t);
                let want = (1.0 - p0) / p0;
                prop_assert!((ratio - want).abs() <= 1e-12 * want.max(1e-300));
            }
            let pm = ch.p_phaseflip(t, true);
            let want = -(-t / ch.t2_ns).exp_m1() / 2.0;
            prop_assert!((pm - want).abs() <= 1e-12 * want.max(1e-300));
            prop_assert!((0.0..=0.5).contains(&pm));
        }

        #[test]
        fn channels_are_monotone(t1 in 1e3f64..1e6, p0 in 0.0f64..=1.0, a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let ch = channel(t1, t1, p0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ch.p_1to0(lo) <= ch.p_1to0(hi));
            prop_assert!(ch.p_0to1(lo) <= ch.p_0to1(hi));
            prop_assert!(ch.p_phaseflip(lo, true) <= ch.p_phaseflip(hi, true));
            prop_assert!(ch.p_phaseflip(lo, false) <= ch.p_phaseflip(hi, false));
        }
    }
}
