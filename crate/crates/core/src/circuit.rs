// SPDX-License-Identifier: Apache-2.0

//! Timed repetition-code circuits.
//!
//! Circuits are built as a sequence of layers over a line of qubits that
//! alternate code, auxiliary, code, ... . Every layer starts when the previous
//! one has finished on all qubits, and any time a qubit spends waiting is
//! materialised as an explicit `delay`, so each qubit's timeline is gap-free.
//!
//! One syndrome round is:
//!
//! ```text
//! cx(code[k] -> aux[k])      for every k      (left neighbours)
//! cx(code[k+1] -> aux[k])    for every k      (right neighbours)
//! measure(aux), reset(aux)
//! delay(inter_round_gap), delay(extra_delay)
//! ```
//!
//! The phase-flip variant keeps the code qubits in the X basis whenever they
//! idle: an `h` layer on the code qubits follows preparation, brackets every
//! round's `cx` block, and precedes the final measurement. Auxiliaries are
//! always measured in Z.
//!
//! Times are integer picoseconds.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{BenchLine, DeviceCalibration};

/// Shortest idle (beyond the two `x` gates) that receives a CPMG sequence.
pub const DD_MIN_IDLE_PS: u64 = 4_000;

pub fn ns_to_ps(ns: f64) -> u64 {
    (ns * 1000.0).round() as u64
}

pub fn ps_to_ns(ps: u64) -> f64 {
    ps as f64 / 1000.0
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("at least 2 syndrome rounds are required, got {0}")]
    TooFewRounds(usize),
    #[error("line must have an odd length of at least 5 qubits, got {0}")]
    LineLength(usize),
    #[error("line {0:?} is not a path of distinct, coupled qubits on this device")]
    InvalidLine(Vec<usize>),
    #[error("logical value must be 0 or 1, got {0}")]
    LogicalValue(u8),
    #[error("{what} must be a finite non-negative duration, got {value} ns")]
    BadDuration { what: &'static str, value: f64 },
    #[error("qubit {0} is not part of this circuit")]
    UnknownQubit(usize),
    #[error("no instruction boundary on qubit {qubit} at {time_ps} ps")]
    InvalidFaultLocation { qubit: usize, time_ps: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    BitFlip,
    PhaseFlip,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::BitFlip => "bit_flip",
            Encoding::PhaseFlip => "phase_flip",
        }
    }
}

/// Which qubits receive dynamical decoupling in their idle periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdScope {
    None,
    AllQubits,
    #[default]
    CodeOnly,
}

impl DdScope {
    pub fn as_str(self) -> &'static str {
        match self {
            DdScope::None => "none",
            DdScope::AllQubits => "all_qubits",
            DdScope::CodeOnly => "code_only",
        }
    }

    fn covers(self, role: Role) -> bool {
        match self {
            DdScope::None => false,
            DdScope::AllQubits => true,
            DdScope::CodeOnly => role == Role::Code,
        }
    }

    /// Whether code qubits are decoupled under this scope.
    pub fn decouples_code(self) -> bool {
        self != DdScope::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Code,
    Auxiliary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstructionKind {
    PrepareZ0,
    X,
    H,
    /// `qubits` holds `[control, target]`.
    Cx,
    Measure {
        slot: usize,
    },
    Reset,
    Delay {
        echoed: bool,
    },
    /// Deterministic error marker; zero duration.
    Fault(Pauli),
}

impl InstructionKind {
    fn label(&self) -> String {
        match self {
            InstructionKind::PrepareZ0 => "prepare_z0".into(),
            InstructionKind::X => "x".into(),
            InstructionKind::H => "h".into(),
            InstructionKind::Cx => "cx".into(),
            InstructionKind::Measure { slot } => format!("measure[{slot}]"),
            InstructionKind::Reset => "reset".into(),
            InstructionKind::Delay { .. } => "delay".into(),
            InstructionKind::Fault(p) => format!("fault_{p:?}").to_lowercase(),
        }
    }

    pub fn is_delay(&self) -> bool {
        matches!(self, InstructionKind::Delay { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub kind: InstructionKind,
    pub qubits: Vec<usize>,
    pub start_ps: u64,
    pub duration_ps: u64,
}

impl Instruction {
    pub fn end_ps(&self) -> u64 {
        self.start_ps + self.duration_ps
    }

    fn on(&self, q: usize) -> bool {
        self.qubits.contains(&q)
    }
}

/// Parameters of one repetition-code experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionSpec {
    pub encoding: Encoding,
    pub logical: u8,
    pub rounds: usize,
    /// Idle time appended after every round's measurement and reset.
    pub extra_delay_ns: f64,
    pub dd_scope: DdScope,
    /// Wait between the reset and the next round, before any extra delay.
    pub inter_round_gap_ns: f64,
    /// Reset (and initial preparation) duration; defaults to the qubit's `x` duration.
    pub reset_ns: Option<f64>,
}

impl Default for RepetitionSpec {
    fn default() -> Self {
        Self {
            encoding: Encoding::BitFlip,
            logical: 0,
            rounds: 2,
            extra_delay_ns: 0.0,
            dd_scope: DdScope::None,
            inter_round_gap_ns: 0.0,
            reset_ns: None,
        }
    }
}

/// A gap-free, time-ordered instruction schedule plus its measurement layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    instructions: Vec<Instruction>,
    line: Vec<usize>,
    roles: BTreeMap<usize, Role>,
    rounds: usize,
    encoding: Encoding,
    logical: u8,
    dd_scope: DdScope,
    extra_delay_ps: u64,
    aux_slots: BTreeMap<(usize, usize), usize>,
    final_slots: BTreeMap<usize, usize>,
    measure_start_ps: Vec<u64>,
    final_start_ps: u64,
}

struct Schedule {
    instrs: Vec<Instruction>,
    cursor: u64,
}

impl Schedule {
    /// Starts every op at the cursor; the layer lasts as long as its longest op.
    fn layer(&mut self, ops: Vec<(InstructionKind, Vec<usize>, u64)>) -> u64 {
        let start = self.cursor;
        let mut end = start;
        for (kind, qubits, dur) in ops {
            end = end.max(start + dur);
            self.instrs.push(Instruction {
                kind,
                qubits,
                start_ps: start,
                duration_ps: dur,
            });
        }
        self.cursor = end;
        start
    }

    fn idle(&mut self, dur: u64) {
        self.cursor += dur;
    }
}

fn check_duration(what: &'static str, value: f64) -> Result<u64, CircuitError> {
    if value.is_finite() && value >= 0.0 {
        Ok(ns_to_ps(value))
    } else {
        Err(CircuitError::BadDuration { what, value })
    }
}

fn sort_instructions(instrs: &mut [Instruction], line: &[usize]) {
    let pos = |q: usize| line.iter().position(|&l| l == q).unwrap_or(usize::MAX);
    instrs.sort_by_key(|i| (i.start_ps, i.duration_ps != 0, pos(i.qubits[0])));
}

/// Builds the repetition-code circuit on a benchmark line.
pub fn build_repetition_circuit(
    line: &BenchLine,
    cal: &DeviceCalibration,
    spec: &RepetitionSpec,
) -> Result<Circuit, CircuitError> {
    build_on_path(&line.qubits, cal, spec)
}

/// Builds the circuit on any odd-length path of at least five qubits.
pub fn build_on_path(path: &[usize], cal: &DeviceCalibration, spec: &RepetitionSpec) -> Result<Circuit, CircuitError> {
    if path.len() < 5 || path.len() % 2 == 0 {
        return Err(CircuitError::LineLength(path.len()));
    }
    let distinct: std::collections::BTreeSet<_> = path.iter().collect();
    let coupled = path.windows(2).all(|p| cal.cx(p[0], p[1]).is_some());
    if distinct.len() != path.len() || path.iter().any(|&q| q >= cal.qubit_count()) || !coupled {
        return Err(CircuitError::InvalidLine(path.to_vec()));
    }
    if spec.rounds < 2 {
        return Err(CircuitError::TooFewRounds(spec.rounds));
    }
    if spec.logical > 1 {
        return Err(CircuitError::LogicalValue(spec.logical));
    }
    let extra_ps = check_duration("extra_delay", spec.extra_delay_ns)?;
    let gap_ps = check_duration("inter_round_gap", spec.inter_round_gap_ns)?;
    let reset_override = spec.reset_ns.map(|ns| check_duration("reset", ns)).transpose()?;

    let code: Vec<usize> = path.iter().step_by(2).copied().collect();
    let aux: Vec<usize> = path.iter().skip(1).step_by(2).copied().collect();
    let x_ps = |q: usize| ns_to_ps(cal.qubit(q).x_ns);
    let reset_ps = |q: usize| reset_override.unwrap_or_else(|| x_ps(q));
    let cx_ps = |c: usize, t: usize| ns_to_ps(cal.cx(c, t).expect("validated path").duration_ns);
    let phase = spec.encoding == Encoding::PhaseFlip;
    let h_layer = |s: &mut Schedule| {
        s.layer(code.iter().map(|&q| (InstructionKind::H, vec![q], x_ps(q))).collect());
    };

    let mut s = Schedule {
        instrs: Vec::new(),
        cursor: 0,
    };
    s.layer(
        path.iter()
            .map(|&q| (InstructionKind::PrepareZ0, vec![q], reset_ps(q)))
            .collect(),
    );
    if spec.logical == 1 {
        s.layer(code.iter().map(|&q| (InstructionKind::X, vec![q], x_ps(q))).collect());
    }
    if phase {
        h_layer(&mut s);
    }

    let mut aux_slots = BTreeMap::new();
    let mut measure_start_ps = Vec::with_capacity(spec.rounds);
    let mut slot = 0;
    for round in 1..=spec.rounds {
        if phase {
            h_layer(&mut s);
        }
        s.layer(
            aux.iter()
                .enumerate()
                .map(|(k, &a)| (InstructionKind::Cx, vec![code[k], a], cx_ps(code[k], a)))
                .collect(),
        );
        s.layer(
            aux.iter()
                .enumerate()
                .map(|(k, &a)| (InstructionKind::Cx, vec![code[k + 1], a], cx_ps(code[k + 1], a)))
                .collect(),
        );
        if phase {
            h_layer(&mut s);
        }
        let mut ops = Vec::new();
        for &a in &aux {
            aux_slots.insert((a, round), slot);
            ops.push((
                InstructionKind::Measure { slot },
                vec![a],
                ns_to_ps(cal.qubit(a).readout_ns),
            ));
            slot += 1;
        }
        measure_start_ps.push(s.layer(ops));
        s.layer(
            aux.iter()
                .map(|&a| (InstructionKind::Reset, vec![a], reset_ps(a)))
                .collect(),
        );
        s.idle(gap_ps);
        s.idle(extra_ps);
    }
    if phase {
        h_layer(&mut s);
    }
    let mut final_slots = BTreeMap::new();
    let mut ops = Vec::new();
    for &q in &code {
        final_slots.insert(q, slot);
        ops.push((
            InstructionKind::Measure { slot },
            vec![q],
            ns_to_ps(cal.qubit(q).readout_ns),
        ));
        slot += 1;
    }
    let final_start_ps = s.layer(ops);
    let end = s.cursor;

    // Materialise every idle gap as one delay.
    let mut instrs = s.instrs;
    let mut delays = Vec::new();
    for &q in path {
        let mut own: Vec<&Instruction> = instrs.iter().filter(|i| i.on(q)).collect();
        own.sort_by_key(|i| i.start_ps);
        let mut t = 0;
        for i in own.iter().map(|i| (i.start_ps, i.end_ps())).chain([(end, end)]) {
            if i.0 > t {
                delays.push(Instruction {
                    kind: InstructionKind::Delay { echoed: false },
                    qubits: vec![q],
                    start_ps: t,
                    duration_ps: i.0 - t,
                });
            }
            t = t.max(i.1);
        }
    }
    instrs.extend(delays);
    sort_instructions(&mut instrs, path);

    let roles = path
        .iter()
        .enumerate()
        .map(|(i, &q)| (q, if i % 2 == 0 { Role::Code } else { Role::Auxiliary }))
        .collect();
    let circuit = Circuit {
        instructions: instrs,
        line: path.to_vec(),
        roles,
        rounds: spec.rounds,
        encoding: spec.encoding,
        logical: spec.logical,
        dd_scope: DdScope::None,
        extra_delay_ps: extra_ps,
        aux_slots,
        final_slots,
        measure_start_ps,
        final_start_ps,
    };
    Ok(insert_dynamical_decoupling(&circuit, spec.dd_scope, cal))
}

/// Replaces each long enough, not yet echoed delay on an in-scope qubit by
/// `delay(t'/4) x delay(t'/2) x delay(t'/4)` with `t' = t - 2 x_duration`.
/// The quarter segments are rounded down; the remainder goes to the middle.
pub fn insert_dynamical_decoupling(circuit: &Circuit, scope: DdScope, cal: &DeviceCalibration) -> Circuit {
    let mut out = Vec::with_capacity(circuit.instructions.len());
    for ins in &circuit.instructions {
        let q = ins.qubits[0];
        let x = ns_to_ps(cal.qubit(q).x_ns);
        let eligible = ins.kind == InstructionKind::Delay { echoed: false }
            && scope.covers(circuit.roles[&q])
            && ins.duration_ps >= 2 * x + DD_MIN_IDLE_PS;
        if !eligible {
            out.push(ins.clone());
            continue;
        }
        let free = ins.duration_ps - 2 * x;
        let quarter = free / 4;
        let middle = free - 2 * quarter;
        let mut t = ins.start_ps;
        for (kind, dur) in [
            (InstructionKind::Delay { echoed: true }, quarter),
            (InstructionKind::X, x),
            (InstructionKind::Delay { echoed: true }, middle),
            (InstructionKind::X, x),
            (InstructionKind::Delay { echoed: true }, quarter),
        ] {
            out.push(Instruction {
                kind,
                qubits: vec![q],
                start_ps: t,
                duration_ps: dur,
            });
            t += dur;
        }
    }
    sort_instructions(&mut out, &circuit.line);
    let dd_scope = match (circuit.dd_scope, scope) {
        (DdScope::AllQubits, _) | (_, DdScope::AllQubits) => DdScope::AllQubits,
        (DdScope::CodeOnly, _) | (_, DdScope::CodeOnly) => DdScope::CodeOnly,
        _ => DdScope::None,
    };
    Circuit {
        instructions: out,
        dd_scope,
        ..circuit.clone()
    }
}

impl Circuit {
    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// Physical qubits in line order.
    pub fn line(&self) -> &[usize] {
        &self.line
    }

    pub fn role(&self, q: usize) -> Option<Role> {
        self.roles.get(&q).copied()
    }

    pub fn code_qubits(&self) -> Vec<usize> {
        self.line.iter().step_by(2).copied().collect()
    }

    pub fn aux_qubits(&self) -> Vec<usize> {
        self.line.iter().skip(1).step_by(2).copied().collect()
    }

    /// The bulk code qubit of a distance-3 line (middle of the line).
    pub fn center(&self) -> usize {
        self.line[self.line.len() / 2]
    }

    /// Code-qubit neighbours `(left, right)` of an auxiliary.
    pub fn aux_neighbors(&self, aux: usize) -> Option<(usize, usize)> {
        let i = self.line.iter().position(|&q| q == aux)?;
        (i % 2 == 1).then(|| (self.line[i - 1], self.line[i + 1]))
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn logical(&self) -> u8 {
        self.logical
    }

    pub fn dd_scope(&self) -> DdScope {
        self.dd_scope
    }

    pub fn extra_delay_ps(&self) -> u64 {
        self.extra_delay_ps
    }

    /// Slot holding auxiliary `aux`'s outcome in `round` (1-based).
    pub fn aux_slot(&self, aux: usize, round: usize) -> Option<usize> {
        self.aux_slots.get(&(aux, round)).copied()
    }

    /// Slot holding code qubit `q`'s final readout.
    pub fn final_slot(&self, q: usize) -> Option<usize> {
        self.final_slots.get(&q).copied()
    }

    pub fn slot_count(&self) -> usize {
        self.aux_slots.len() + self.final_slots.len()
    }

    pub fn duration_ps(&self) -> u64 {
        self.instructions.iter().map(Instruction::end_ps).max().unwrap_or(0)
    }

    /// Start time of each round's auxiliary measurement.
    pub fn measure_starts_ps(&self) -> &[u64] {
        &self.measure_start_ps
    }

    pub fn final_measure_start_ps(&self) -> u64 {
        self.final_start_ps
    }

    /// Instructions touching `q`, in time order.
    pub fn timeline(&self, q: usize) -> impl Iterator<Item = &Instruction> + '_ {
        self.instructions.iter().filter(move |i| i.on(q))
    }

    /// The idle window of `q` following round `round`'s measurement: from the
    /// end of `q`'s last `cx` of that round to its next `cx` (or, after the
    /// last round, to the final measurement).
    pub fn idle_window(&self, q: usize, round: usize) -> Result<(u64, u64), CircuitError> {
        if !self.roles.contains_key(&q) {
            return Err(CircuitError::UnknownQubit(q));
        }
        let m = *self
            .measure_start_ps
            .get(round.wrapping_sub(1))
            .ok_or(CircuitError::UnknownQubit(q))?;
        let is_cx = |i: &&Instruction| i.kind == InstructionKind::Cx;
        let start = self
            .timeline(q)
            .filter(is_cx)
            .filter(|i| i.end_ps() <= m)
            .map(Instruction::end_ps)
            .max()
            .unwrap_or(0);
        let end = self
            .timeline(q)
            .filter(is_cx)
            .map(|i| i.start_ps)
            .find(|&t| t >= m)
            .unwrap_or(self.final_start_ps);
        Ok((start, end))
    }

    /// Per round, the summed delay time of `q` inside its idle window.
    pub fn idle_exposure(&self, q: usize) -> Result<Vec<u64>, CircuitError> {
        (1..=self.rounds)
            .map(|r| {
                let (start, end) = self.idle_window(q, r)?;
                Ok(self
                    .timeline(q)
                    .filter(|i| i.kind.is_delay() && i.start_ps >= start && i.end_ps() <= end)
                    .map(|i| i.duration_ps)
                    .sum())
            })
            .collect()
    }

    /// Inserts a deterministic Pauli on `qubit` at `time_ps`, which must be a
    /// boundary of one of that qubit's instructions.
    pub fn with_fault(&self, qubit: usize, time_ps: u64, pauli: Pauli) -> Result<Circuit, CircuitError> {
        if !self.roles.contains_key(&qubit) {
            return Err(CircuitError::UnknownQubit(qubit));
        }
        let boundary = self
            .timeline(qubit)
            .any(|i| i.start_ps == time_ps || i.end_ps() == time_ps);
        if !boundary {
            return Err(CircuitError::InvalidFaultLocation { qubit, time_ps });
        }
        let mut instructions = self.instructions.clone();
        instructions.push(Instruction {
            kind: InstructionKind::Fault(pauli),
            qubits: vec![qubit],
            start_ps: time_ps,
            duration_ps: 0,
        });
        sort_instructions(&mut instructions, &self.line);
        Ok(Circuit {
            instructions,
            ..self.clone()
        })
    }

    #[cfg(test)]
    pub(crate) fn retain(&self, keep: impl Fn(&Instruction) -> bool) -> Circuit {
        Circuit {
            instructions: self.instructions.iter().filter(|i| keep(i)).cloned().collect(),
            ..self.clone()
        }
    }

    /// Plain-text timeline, one instruction per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in &self.instructions {
            let qubits: Vec<String> = i.qubits.iter().map(usize::to_string).collect();
            let echoed = matches!(i.kind, InstructionKind::Delay { echoed: true });
            let _ = writeln!(
                out,
                "{:>12.3} {:<12} {:<8} {:>10.3} {}",
                ps_to_ns(i.start_ps),
                i.kind.label(),
                qubits.join(","),
                ps_to_ns(i.duration_ps),
                u8::from(echoed),
            );
        }
        out
    }
}
