//! Loop diagrams, their fully time-ordered decompositions and compiled forms.
//!
//! A loop has a ket strand and a bra strand. Interactions on each strand are
//! totally ordered (earliest first); the order across strands is free. The
//! observation vertex at time t is the latest interaction of the loop.
//!
//! Field conventions: a `Raise` vertex (V^dagger in the operator string) always
//! pairs with the field E, a `Lower` vertex (V) with E*. On the ket a raise is
//! an absorption, on the bra a lower is an absorption.

mod compile;
mod render;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{partition_dipole, DipolePartition, LevelScheme};

pub use compile::{
    compile_frequency, compile_time, feynman_frequency_value, loop_integrand, Factor, FreqArg, FreqExpression,
    TimeIntegrand,
};
pub(crate) use compile::{minus_i_pow, op};
pub use render::{listing_json, render, Format, Listing, ListingEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strand {
    Ket,
    Bra,
}

impl Strand {
    pub fn other(self) -> Strand {
        match self {
            Strand::Ket => Strand::Bra,
            Strand::Bra => Strand::Ket,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vertex {
    Raise,
    Lower,
}

impl Vertex {
    pub fn flip(self) -> Vertex {
        match self {
            Vertex::Raise => Vertex::Lower,
            Vertex::Lower => Vertex::Raise,
        }
    }

    /// Sign of the mode frequency carried into the cumulative argument.
    pub fn freq_sign(self) -> i32 {
        match self {
            Vertex::Raise => 1,
            Vertex::Lower => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrow {
    Inward,
    Outward,
}

/// Which time variable an interaction carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    /// The observation time t.
    Observation,
    /// The detected-mode partner time tau.
    Probe,
    /// Expansion time tau_{k+1}.
    Expansion(usize),
}

impl Slot {
    pub fn label(self) -> String {
        match self {
            Slot::Observation => "t".into(),
            Slot::Probe => "tau".into(),
            Slot::Expansion(k) => format!("tau{}", k + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interaction {
    pub strand: Strand,
    pub vertex: Vertex,
    pub arrow: Arrow,
    pub mode: usize,
    pub slot: Slot,
    pub time_label: String,
}

impl Interaction {
    pub fn new(strand: Strand, vertex: Vertex, mode: usize, slot: Slot) -> Self {
        let inward = matches!((strand, vertex), (Strand::Ket, Vertex::Raise) | (Strand::Bra, Vertex::Lower));
        Interaction {
            strand,
            vertex,
            arrow: if inward { Arrow::Inward } else { Arrow::Outward },
            mode,
            slot,
            time_label: slot.label(),
        }
    }

    /// True when the field factor is E* rather than E.
    pub fn conjugate_field(&self) -> bool {
        self.vertex == Vertex::Lower
    }

    pub fn is_expansion(&self) -> bool {
        matches!(self.slot, Slot::Expansion(_))
    }

    /// The same interaction mirrored onto the other strand.
    pub fn reflected(&self) -> Interaction {
        Interaction::new(self.strand.other(), self.vertex.flip(), self.mode, self.slot)
    }
}

/// How the loop is closed at the observation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// V^dagger(t) with E_d(t), partner V on the bra at tau with E_d*(tau).
    Absorptive,
    /// V(t) with E_d*(t), partner V^dagger on the bra at tau with E_d(tau).
    Emissive,
    /// V(t) without a partner; the loop value is the polarization.
    Polarization,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldFactor {
    pub mode: usize,
    pub vertex: Vertex,
}

impl FieldFactor {
    pub fn field(mode: usize) -> Self {
        FieldFactor { mode, vertex: Vertex::Raise }
    }

    pub fn conj(mode: usize) -> Self {
        FieldFactor { mode, vertex: Vertex::Lower }
    }

    pub fn conjugated(self) -> Self {
        FieldFactor { mode: self.mode, vertex: self.vertex.flip() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Stimulated emission into an occupied mode: both loop heads.
    Stimulated { mode: usize },
    /// Spontaneous emission into a vacuum mode: emissive head only.
    Spontaneous { mode: usize },
    /// Induced polarization radiating into the given mode.
    Polarization { mode: usize },
}

impl Detection {
    pub fn mode(&self) -> usize {
        match *self {
            Detection::Stimulated { mode } | Detection::Spontaneous { mode } | Detection::Polarization { mode } => mode,
        }
    }

    pub fn heads(&self) -> &'static [Head] {
        match self {
            Detection::Stimulated { .. } => &[Head::Absorptive, Head::Emissive],
            Detection::Spontaneous { .. } => &[Head::Emissive],
            Detection::Polarization { .. } => &[Head::Polarization],
        }
    }
}

/// A process: the field factors of the perturbative expansion plus the detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Process {
    pub expansion: Vec<FieldFactor>,
    pub detection: Detection,
}

impl Process {
    /// Spontaneous emission into `signal` driven by `pump` (E* at tau1, E at tau2).
    pub fn sle(pump: usize, signal: usize) -> Self {
        Process {
            expansion: vec![FieldFactor::conj(pump), FieldFactor::field(pump)],
            detection: Detection::Spontaneous { mode: signal },
        }
    }

    /// Probe transmission change to second order in the pump.
    pub fn pump_probe(pump: usize, probe: usize) -> Self {
        Process {
            expansion: vec![FieldFactor::conj(pump), FieldFactor::field(pump)],
            detection: Detection::Stimulated { mode: probe },
        }
    }

    pub fn linear_absorption(probe: usize) -> Self {
        Process { expansion: vec![], detection: Detection::Stimulated { mode: probe } }
    }

    pub fn polarization(incoming: Vec<FieldFactor>, signal: usize) -> Self {
        Process { expansion: incoming, detection: Detection::Polarization { mode: signal } }
    }

    /// Incoherent spontaneous signal: every incoming factor and its conjugate.
    pub fn incoherent(incoming: &[FieldFactor], signal: usize) -> Self {
        let mut expansion: Vec<FieldFactor> = incoming.iter().map(|f| f.conjugated()).collect();
        expansion.extend_from_slice(incoming);
        Process { expansion, detection: Detection::Spontaneous { mode: signal } }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopDiagram {
    /// Ket interactions, earliest first.
    pub ket: Vec<Interaction>,
    /// Bra interactions, earliest first.
    pub bra: Vec<Interaction>,
    /// (-1)^{N_R}, N_R = number of bra expansion interactions.
    pub sign: i8,
    pub head: Head,
}

impl LoopDiagram {
    pub fn new(ket: Vec<Interaction>, bra: Vec<Interaction>, head: Head) -> Self {
        let nr = bra.iter().filter(|i| i.is_expansion()).count();
        LoopDiagram { ket, bra, sign: if nr % 2 == 0 { 1 } else { -1 }, head }
    }

    pub fn n_bra_expansion(&self) -> usize {
        self.bra.iter().filter(|i| i.is_expansion()).count()
    }

    pub fn n_expansion(&self) -> usize {
        self.ket.iter().chain(&self.bra).filter(|i| i.is_expansion()).count()
    }

    pub fn n_vertices(&self) -> usize {
        self.ket.len() + self.bra.len()
    }

    pub fn observation(&self) -> &Interaction {
        self.ket
            .iter()
            .chain(&self.bra)
            .find(|i| i.slot == Slot::Observation)
            .expect("loop has an observation vertex")
    }

    pub fn observation_strand(&self) -> Strand {
        self.observation().strand
    }

    /// Mirror image through the center line.
    pub fn reflected(&self) -> LoopDiagram {
        let ket = self.bra.iter().map(Interaction::reflected).collect();
        let bra = self.ket.iter().map(Interaction::reflected).collect();
        LoopDiagram::new(ket, bra, self.head)
    }

    fn canonical_key(&self) -> (usize, String) {
        let cell = |i: &Interaction| {
            let a = if i.arrow == Arrow::Inward { 'i' } else { 'o' };
            let s = match i.slot {
                Slot::Observation => "t".to_string(),
                Slot::Probe => "p".to_string(),
                Slot::Expansion(k) => format!("e{k}"),
            };
            format!("{a}{}{s}", i.mode)
        };
        let k: Vec<String> = self.ket.iter().map(cell).collect();
        let b: Vec<String> = self.bra.iter().map(cell).collect();
        let h = match self.head {
            Head::Absorptive => 'A',
            Head::Emissive => 'E',
            Head::Polarization => 'P',
        };
        (self.n_bra_expansion(), format!("{}|{}|{h}", k.join(","), b.join(",")))
    }
}

/// A fully time-ordered interleaving of a loop's two strands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeynmanDiagram {
    /// All interactions, earliest first; the observation vertex is last.
    pub sequence: Vec<Interaction>,
    pub parent: LoopDiagram,
}

impl FeynmanDiagram {
    pub fn sign(&self) -> i8 {
        self.parent.sign
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Exp(usize, Vertex),
    Probe(usize, Vertex),
}

/// Every distinct loop for the process that survives the selection rules.
pub fn generate_loops(scheme: &LevelScheme, process: &Process) -> Result<Vec<LoopDiagram>> {
    let part = partition_dipole(scheme)?;
    let n = process.expansion.len();
    let d = process.detection.mode();
    let mut seen: BTreeSet<(Head, Vec<Key>, Vec<Key>)> = BTreeSet::new();
    let mut out = Vec::new();
    for &head in process.detection.heads() {
        let (obs_vertex, probe) = match head {
            Head::Absorptive => (Vertex::Raise, Some(Vertex::Lower)),
            Head::Emissive => (Vertex::Lower, Some(Vertex::Raise)),
            Head::Polarization => (Vertex::Lower, None),
        };
        for mask in 0u32..(1u32 << n) {
            let mut ket_keys = Vec::new();
            let mut bra_keys = Vec::new();
            for (k, f) in process.expansion.iter().enumerate() {
                let key = Key::Exp(f.mode, f.vertex);
                if mask & (1 << k) == 0 {
                    ket_keys.push(key);
                } else {
                    bra_keys.push(key);
                }
            }
            if let Some(v) = probe {
                bra_keys.push(Key::Probe(d, v));
            }
            let ket_perms = unique_permutations(ket_keys);
            let bra_perms = unique_permutations(bra_keys);
            for kp in &ket_perms {
                let Some(kr) = reach(&part, scheme.ground, Strand::Ket, kp, Some(obs_vertex)) else { continue };
                for bp in &bra_perms {
                    let id = (head, kp.clone(), bp.clone());
                    if seen.contains(&id) {
                        continue;
                    }
                    let Some(br) = reach(&part, scheme.ground, Strand::Bra, bp, None) else { continue };
                    if !kr.iter().zip(&br).any(|(a, b)| *a && *b) {
                        continue;
                    }
                    seen.insert(id);
                    out.push(build_loop(process, head, kp, bp, d, obs_vertex));
                }
            }
        }
    }
    out.sort_by_key(|l| l.canonical_key());
    Ok(out)
}

/// Levels structurally reachable from ground after the given strand operations.
fn reach(
    part: &DipolePartition,
    ground: usize,
    strand: Strand,
    keys: &[Key],
    fin: Option<Vertex>,
) -> Option<Vec<bool>> {
    let n = part.lowering.nrows();
    let mut r = vec![false; n];
    r[ground] = true;
    let vertices = keys
        .iter()
        .map(|k| match *k {
            Key::Exp(_, v) | Key::Probe(_, v) => v,
        })
        .chain(fin);
    for v in vertices {
        // On the bra, the operator X acts as X^dagger on the bra state vector.
        let raise = match strand {
            Strand::Ket => v == Vertex::Raise,
            Strand::Bra => v == Vertex::Lower,
        };
        let m = if raise { &part.raising } else { &part.lowering };
        let mut next = vec![false; n];
        for j in 0..n {
            next[j] = (0..n).any(|i| r[i] && m[(j, i)].norm() > 0.0);
        }
        if !next.iter().any(|&x| x) {
            return None;
        }
        r = next;
    }
    Some(r)
}

fn build_loop(process: &Process, head: Head, kp: &[Key], bp: &[Key], d: usize, obs: Vertex) -> LoopDiagram {
    let mut used = vec![false; process.expansion.len()];
    let mut take = |mode: usize, vertex: Vertex| -> usize {
        let k = process
            .expansion
            .iter()
            .enumerate()
            .position(|(k, f)| !used[k] && f.mode == mode && f.vertex == vertex)
            .expect("factor available");
        used[k] = true;
        k
    };
    let mut conv = |strand: Strand, keys: &[Key]| -> Vec<Interaction> {
        keys.iter()
            .map(|key| match *key {
                Key::Exp(m, v) => Interaction::new(strand, v, m, Slot::Expansion(take(m, v))),
                Key::Probe(m, v) => Interaction::new(strand, v, m, Slot::Probe),
            })
            .collect()
    };
    let mut ket = conv(Strand::Ket, kp);
    let bra = conv(Strand::Bra, bp);
    ket.push(Interaction::new(Strand::Ket, obs, d, Slot::Observation));
    LoopDiagram::new(ket, bra, head)
}

fn unique_permutations<T: Ord + Clone>(mut v: Vec<T>) -> Vec<Vec<T>> {
    v.sort();
    let mut out = vec![v.clone()];
    while next_permutation(&mut v) {
        out.push(v.clone());
    }
    out
}

fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every interleaving of the strands with the observation vertex last.
pub fn decompose(lp: &LoopDiagram) -> Vec<FeynmanDiagram> {
    let obs_strand = lp.observation_strand();
    let (own, other) = match obs_strand {
        Strand::Ket => (&lp.ket, &lp.bra),
        Strand::Bra => (&lp.bra, &lp.ket),
    };
    let free = &own[..own.len() - 1];
    let fin = own.last().expect("observation vertex").clone();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(lp.n_vertices());
    interleave(free, other, &mut cur, &mut |seq| {
        let mut s = seq.to_vec();
        s.push(fin.clone());
        out.push(FeynmanDiagram { sequence: s, parent: lp.clone() });
    });
    out
}

fn interleave(a: &[Interaction], b: &[Interaction], cur: &mut Vec<Interaction>, emit: &mut dyn FnMut(&[Interaction])) {
    if a.is_empty() && b.is_empty() {
        emit(cur);
        return;
    }
    if let Some((x, rest)) = a.split_first() {
        cur.push(x.clone());
        interleave(rest, b, cur, emit);
        cur.pop();
    }
    if let Some((x, rest)) = b.split_first() {
        cur.push(x.clone());
        interleave(a, rest, cur, emit);
        cur.pop();
    }
}

/// Binomial coefficient C(n, k).
pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn sle_single_loop() {
        let loops = generate_loops(&presets::kh_raman(), &Process::sle(0, 1)).unwrap();
        assert_eq!(loops.len(), 1);
        let l = &loops[0];
        assert_eq!(l.sign, -1);
        assert_eq!(l.ket.len(), 2);
        assert_eq!(l.bra.len(), 2);
        assert_eq!(decompose(l).len(), 3);
    }

    #[test]
    fn pump_probe_eight_loops() {
        let loops = generate_loops(&presets::pump_probe_ladder(), &Process::pump_probe(0, 1)).unwrap();
        assert_eq!(loops.len(), 8);
        let counts: Vec<usize> = loops.iter().map(|l| decompose(l).len()).collect();
        assert_eq!(counts, vec![3, 3, 3, 3, 1, 1, 1, 1]);
    }

    #[test]
    fn two_level_pump_probe_pruned() {
        let s = presets::pump_probe_ladder().truncated(&[0, 1]).unwrap();
        let loops = generate_loops(&s, &Process::pump_probe(0, 1)).unwrap();
        assert_eq!(loops.len(), 4);
    }

    #[test]
    fn empty_process() {
        let s = presets::two_level(1.0, 0.1);
        let p = Process::polarization(vec![], 0);
        assert!(generate_loops(&s, &p).unwrap().is_empty());
    }

    #[test]
    fn arrows_follow_vertex() {
        assert_eq!(Interaction::new(Strand::Ket, Vertex::Raise, 0, Slot::Probe).arrow, Arrow::Inward);
        assert_eq!(Interaction::new(Strand::Bra, Vertex::Raise, 0, Slot::Probe).arrow, Arrow::Outward);
        assert_eq!(Interaction::new(Strand::Bra, Vertex::Lower, 0, Slot::Probe).arrow, Arrow::Inward);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(3, 1), 3);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(4, 0), 1);
    }
}
