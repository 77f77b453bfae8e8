// SPDX-License-Identifier: Apache-2.0

//! Pauli-frame Monte Carlo sampling of timed circuits.
//!
//! Every qubit carries one classical bit interpreted in either the Z or the
//! X basis. Which basis a qubit is in at each instruction is fixed by the
//! circuit (only `h` changes it), so it is resolved once at compile time:
//! `cx` and `measure` must see Z-basis operands, `x` on an X-basis qubit is a
//! no-op, and idle noise becomes amplitude relaxation in Z and phase flips in
//! X.
//!
//! Cross-talk: when a Z-basis qubit relaxes `1 -> 0` inside a delay segment,
//! each coupled neighbour idling in the X basis during an overlapping segment
//! takes a phase flip with probability `eta`, at most once per event. The
//! flip is applied lazily, just before the neighbour's next non-delay
//! instruction; by then every overlapping segment has been sampled because
//! instructions run in start-time order.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{ps_to_ns, Circuit, InstructionKind, Pauli};
use crate::noise::NoiseModel;
use crate::{par, rng};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("instruction {index} ({kind}) on qubit {qubit} needs the Z basis")]
    BasisContract {
        index: usize,
        kind: &'static str,
        qubit: usize,
    },
    #[error("qubit {0} is outside the noise model")]
    UnknownQubit(usize),
    #[error("no coupling between qubits {0} and {1}")]
    MissingCoupling(usize, usize),
}

/// Measurement records, one bit per slot per shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotTable {
    slots: usize,
    words: usize,
    shots: usize,
    data: Vec<u64>,
}

impl ShotTable {
    pub fn zeroed(slots: usize, shots: usize) -> Self {
        let words = slots.div_ceil(64).max(1);
        Self {
            slots,
            words,
            shots,
            data: vec![0; words * shots],
        }
    }

    pub fn from_rows(slots: usize, rows: &[Vec<bool>]) -> Self {
        let mut t = Self::zeroed(slots, rows.len());
        for (s, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), slots, "row {s} has the wrong width");
            for (k, &b) in row.iter().enumerate() {
                if b {
                    t.data[s * t.words + k / 64] |= 1 << (k % 64);
                }
            }
        }
        t
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn slot_count(&self) -> usize {
        self.slots
    }

    pub fn bit(&self, shot: usize, slot: usize) -> bool {
        debug_assert!(slot < self.slots);
        self.data[shot * self.words + slot / 64] >> (slot % 64) & 1 == 1
    }

    pub fn row(&self, shot: usize) -> Vec<bool> {
        (0..self.slots).map(|k| self.bit(shot, k)).collect()
    }

    pub fn count_ones(&self, slot: usize) -> usize {
        (0..self.shots).filter(|&s| self.bit(s, slot)).count()
    }

    /// One line of `0`/`1` characters per shot, in slot order.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut line = Vec::with_capacity(self.slots + 1);
        for s in 0..self.shots {
            line.clear();
            line.extend((0..self.slots).map(|k| if self.bit(s, k) { b'1' } else { b'0' }));
            line.push(b'\n');
            w.write_all(&line)?;
        }
        w.flush()
    }

    pub fn read_text<R: BufRead>(r: R) -> io::Result<Self> {
        let mut rows = Vec::new();
        for line in r.lines() {
            let line = line?;
            let row = line
                .trim_end()
                .bytes()
                .map(|b| match b {
                    b'0' => Ok(false),
                    b'1' => Ok(true),
                    _ => Err(io::Error::new(io::ErrorKind::InvalidData, "expected 0 or 1")),
                })
                .collect::<io::Result<Vec<bool>>>()?;
            rows.push(row);
        }
        let slots = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != slots) {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "ragged shot rows"));
        }
        Ok(Self::from_rows(slots, &rows))
    }
}

#[derive(Debug, Clone)]
enum Op {
    SetZero {
        q: usize,
        p: f64,
    },
    Flip {
        q: usize,
    },
    Cx {
        c: usize,
        t: usize,
        p: f64,
    },
    Measure {
        q: usize,
        slot: usize,
        p: f64,
    },
    /// Z-basis idle, sampled in `slices` equal pieces.
    Relax {
        q: usize,
        seg: (u64, u64),
        slices: u32,
        p_up: f64,
        p_down: f64,
    },
    /// X-basis idle.
    Dephase {
        q: usize,
        seg: (u64, u64),
        p: f64,
    },
    /// Apply pending cross-talk to `q`.
    Resolve {
        q: usize,
    },
}

/// A circuit bound to a noise model, ready to sample.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    ops: Vec<Op>,
    n: usize,
    slots: usize,
    eta: f64,
    adjacent: Vec<bool>,
}

/// Resolves bases, checks the basis contract and binds error probabilities.
pub fn compile(circuit: &Circuit, noise: &NoiseModel) -> Result<CompiledCircuit, SimError> {
    let line = circuit.line();
    let n = line.len();
    for &q in line {
        if q >= noise.qubit_count() {
            return Err(SimError::UnknownQubit(q));
        }
    }
    let local = |q: usize| line.iter().position(|&l| l == q).expect("circuit qubit");
    let eta = noise.crosstalk_eta();
    let mut adjacent = vec![false; n * n];
    for (i, &a) in line.iter().enumerate() {
        for (j, &b) in line.iter().enumerate() {
            adjacent[i * n + j] = noise.neighbors(a).contains(&b);
        }
    }

    let mut x_basis = vec![false; n];
    let mut dirty = vec![false; n];
    let mut ops = Vec::with_capacity(circuit.instructions().len());
    for (index, ins) in circuit.instructions().iter().enumerate() {
        let qs: Vec<usize> = ins.qubits.iter().map(|&q| local(q)).collect();
        if !ins.kind.is_delay() {
            for &q in &qs {
                if std::mem::take(&mut dirty[q]) {
                    ops.push(Op::Resolve { q });
                }
            }
        }
        let q = qs[0];
        let need_z = |kind: &'static str, q: usize| {
            if x_basis[q] {
                Err(SimError::BasisContract {
                    index,
                    kind,
                    qubit: line[q],
                })
            } else {
                Ok(())
            }
        };
        match ins.kind {
            InstructionKind::PrepareZ0 | InstructionKind::Reset => {
                x_basis[q] = false;
                ops.push(Op::SetZero {
                    q,
                    p: noise.prep_error(),
                });
            }
            InstructionKind::X => {
                if !x_basis[q] {
                    ops.push(Op::Flip { q });
                }
            }
            InstructionKind::H => x_basis[q] ^= true,
            InstructionKind::Cx => {
                let (c, t) = (qs[0], qs[1]);
                need_z("cx", c)?;
                need_z("cx", t)?;
                let p = noise
                    .cx_error(line[c], line[t])
                    .ok_or(SimError::MissingCoupling(line[c], line[t]))?;
                ops.push(Op::Cx { c, t, p });
            }
            InstructionKind::Measure { slot } => {
                need_z("measure", q)?;
                ops.push(Op::Measure {
                    q,
                    slot,
                    p: noise.readout_error(line[q]),
                });
            }
            InstructionKind::Delay { echoed } => {
                if ins.duration_ps == 0 {
                    continue;
                }
                let seg = (ins.start_ps, ins.end_ps());
                let t_ns = ps_to_ns(ins.duration_ps);
                if x_basis[q] {
                    let p = noise.p_phaseflip(line[q], t_ns, echoed);
                    dirty[q] = eta > 0.0;
                    ops.push(Op::Dephase { q, seg, p });
                } else {
                    let slices = noise.delay_slices();
                    let piece = t_ns / f64::from(slices);
                    let p_up = noise.p_0to1(line[q], piece);
                    let p_down = noise.p_1to0(line[q], piece);
                    if p_up > 0.0 || p_down > 0.0 {
                        ops.push(Op::Relax {
                            q,
                            seg,
                            slices,
                            p_up,
                            p_down,
                        });
                    }
                }
            }
            InstructionKind::Fault(pauli) => {
                let flips = match pauli {
                    Pauli::Y => true,
                    Pauli::X => !x_basis[q],
                    Pauli::Z => x_basis[q],
                };
                if flips {
                    ops.push(Op::Flip { q });
                }
            }
        }
    }
    Ok(CompiledCircuit {
        ops,
        n,
        slots: circuit.slot_count(),
        eta,
        adjacent,
    })
}

#[derive(Default)]
struct Scratch {
    bits: Vec<bool>,
    events: Vec<(usize, u64, u64)>,
    pending: Vec<Vec<(u64, u64)>>,
    consumed: Vec<Vec<usize>>,
}

fn hit(rng: &mut ChaCha8Rng, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

impl CompiledCircuit {
    pub fn slot_count(&self) -> usize {
        self.slots
    }

    fn shot(&self, rng: &mut ChaCha8Rng, s: &mut Scratch, out: &mut [u64]) {
        s.bits.clear();
        s.bits.resize(self.n, false);
        s.events.clear();
        s.pending.resize_with(self.n, Vec::new);
        s.consumed.resize_with(self.n, Vec::new);
        s.pending.iter_mut().for_each(Vec::clear);
        s.consumed.iter_mut().for_each(Vec::clear);
        let track = self.eta > 0.0;
        for op in &self.ops {
            match *op {
                Op::SetZero { q, p } => s.bits[q] = hit(rng, p),
                Op::Flip { q } => s.bits[q] ^= true,
                Op::Cx { c, t, p } => {
                    s.bits[t] ^= s.bits[c];
                    if hit(rng, p) {
                        // Uniform over the 15 non-identity two-qubit Paulis,
                        // encoded as (control, target) in base 4: I, X, Y, Z.
                        let k = rng.random_range(1..16u32);
                        s.bits[c] ^= matches!(k >> 2, 1 | 2);
                        s.bits[t] ^= matches!(k & 3, 1 | 2);
                    }
                }
                Op::Measure { q, slot, p } => {
                    if s.bits[q] ^ hit(rng, p) {
                        out[slot / 64] |= 1 << (slot % 64);
                    }
                }
                Op::Relax {
                    q,
                    seg,
                    slices,
                    p_up,
                    p_down,
                } => {
                    let mut decayed = false;
                    for _ in 0..slices {
                        if s.bits[q] {
                            if hit(rng, p_down) {
                                s.bits[q] = false;
                                decayed = true;
                            }
                        } else if hit(rng, p_up) {
                            s.bits[q] = true;
                        }
                    }
                    if decayed && track {
                        s.events.push((q, seg.0, seg.1));
                    }
                }
                Op::Dephase { q, seg, p } => {
                    if hit(rng, p) {
                        s.bits[q] ^= true;
                    }
                    if track {
                        s.pending[q].push(seg);
                    }
                }
                Op::Resolve { q } => {
                    for k in 0..s.pending[q].len() {
                        let (start, end) = s.pending[q][k];
                        for (id, &(src, es, ee)) in s.events.iter().enumerate() {
                            let overlaps = es < end && start < ee;
                            if overlaps && self.adjacent[src * self.n + q] && !s.consumed[q].contains(&id) {
                                s.consumed[q].push(id);
                                if hit(rng, self.eta) {
                                    s.bits[q] ^= true;
                                }
                            }
                        }
                    }
                    s.pending[q].clear();
                }
            }
        }
    }

    /// Samples `shots` shots. Shots are drawn in fixed batches, each from its
    /// own random stream, so results do not depend on the worker count.
    pub fn run(&self, shots: usize, seed: u64) -> ShotTable {
        let words = self.slots.div_ceil(64).max(1);
        let batches = par::map_indexed(rng::batch_count(shots), |b| {
            let range = rng::batch_range(shots, b);
            let mut rng = rng::stream_rng(seed, b as u64);
            let mut scratch = Scratch::default();
            let mut data = vec![0u64; range.len() * words];
            for row in data.chunks_mut(words) {
                self.shot(&mut rng, &mut scratch, row);
            }
            data
        });
        ShotTable {
            slots: self.slots,
            words,
            shots,
            data: batches.concat(),
        }
    }
}

/// Compiles and samples `circuit` under `noise`.
pub fn run_shots(circuit: &Circuit, noise: &NoiseModel, shots: usize, seed: u64) -> Result<ShotTable, SimError> {
    Ok(compile(circuit, noise)?.run(shots, seed))
}
