use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{FeynmanDiagram, Head, Interaction, LoopDiagram, Slot, Strand, Vertex};
use crate::error::{Error, Result};
use crate::model::{partition_dipole, DipolePartition, LevelScheme, CMatrix, C64};
use crate::propagators::{Branch, FreeEvolution};

/// Cumulative frequency argument of a propagator segment, omega_g implied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqArg {
    /// Signed mode frequencies in the order they were encountered.
    pub terms: Vec<(usize, i32)>,
    /// Numerical value of the signed sum.
    pub omega: f64,
}

impl FreqArg {
    /// Coefficient of each mode after collecting terms.
    pub fn coefficients(&self, n_modes: usize) -> Vec<i32> {
        let mut c = vec![0; n_modes];
        for &(m, s) in &self.terms {
            if m < n_modes {
                c[m] += s;
            }
        }
        c
    }

    /// Collected form such as `w_g+w1-w2`; a sum that cancels keeps its raw terms.
    pub fn display(&self) -> String {
        let n = self.terms.iter().map(|t| t.0 + 1).max().unwrap_or(0);
        let c = self.coefficients(n);
        let mut s = String::from("w_g");
        if c.iter().all(|&x| x == 0) {
            for &(m, sg) in &self.terms {
                let _ = write!(s, "{}w{}", if sg > 0 { '+' } else { '-' }, m + 1);
            }
            return s;
        }
        let mut order: Vec<usize> = Vec::new();
        for &(m, _) in &self.terms {
            if !order.contains(&m) {
                order.push(m);
            }
        }
        for m in order {
            let k = c[m];
            if k == 0 {
                continue;
            }
            let sign = if k > 0 { '+' } else { '-' };
            if k.abs() == 1 {
                let _ = write!(s, "{sign}w{}", m + 1);
            } else {
                let _ = write!(s, "{sign}{}w{}", k.abs(), m + 1);
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Vertex { vertex: Vertex, label: String },
    Propagator { branch: Branch, argument: FreqArg },
}

/// Alternating product of vertices and resolvents read along a loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqExpression {
    /// Factors in printed order, left to right.
    pub factors: Vec<Factor>,
    /// (-1)^{N_R} times +i per forward segment and -i per backward segment.
    pub scalar_prefactor: C64,
    /// Segment arguments, left to right.
    pub frequency_arguments: Vec<FreqArg>,
    pub n_expansion: usize,
    pub head: Head,
}

pub(crate) fn op(part: &DipolePartition, v: Vertex) -> &CMatrix {
    match v {
        Vertex::Raise => &part.raising,
        Vertex::Lower => &part.lowering,
    }
}

/// Compiles a loop into its frequency-domain resolvent product.
pub fn compile_frequency(lp: &LoopDiagram, freqs: &[f64]) -> Result<FreqExpression> {
    // Right-to-left reading: ket earliest to latest, then bra latest to earliest.
    let chain: Vec<&Interaction> = lp.ket.iter().chain(lp.bra.iter().rev()).collect();
    let obs = chain.iter().position(|i| i.slot == Slot::Observation).expect("observation vertex");
    let mut terms = Vec::new();
    let mut omega = 0.0;
    let mut right_to_left = Vec::with_capacity(2 * chain.len());
    let mut prefactor = C64::new(lp.sign as f64, 0.0);
    for (k, int) in chain.iter().enumerate() {
        right_to_left.push(Factor::Vertex { vertex: int.vertex, label: int.time_label.clone() });
        if k + 1 == chain.len() {
            break;
        }
        let w = *freqs
            .get(int.mode)
            .ok_or_else(|| Error::Config(format!("no frequency for mode {}", int.mode + 1)))?;
        let s = int.vertex.freq_sign();
        terms.push((int.mode, s));
        omega += s as f64 * w;
        let branch = if k < obs { Branch::Retarded } else { Branch::Advanced };
        prefactor *= if branch == Branch::Retarded { C64::i() } else { -C64::i() };
        right_to_left.push(Factor::Propagator { branch, argument: FreqArg { terms: terms.clone(), omega } });
    }
    right_to_left.reverse();
    let frequency_arguments = right_to_left
        .iter()
        .filter_map(|f| match f {
            Factor::Propagator { argument, .. } => Some(argument.clone()),
            _ => None,
        })
        .collect();
    Ok(FreqExpression {
        factors: right_to_left,
        scalar_prefactor: prefactor,
        frequency_arguments,
        n_expansion: lp.n_expansion(),
        head: lp.head,
    })
}

impl FreqExpression {
    /// Ground-state expectation of the operator string.
    pub fn bracket(&self, scheme: &LevelScheme) -> Result<C64> {
        let part = partition_dipole(scheme)?;
        Ok(self.bracket_with(scheme, &part))
    }

    pub fn bracket_with(&self, scheme: &LevelScheme, part: &DipolePartition) -> C64 {
        let free = FreeEvolution::new(scheme);
        let n = free.dim();
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[scheme.ground] = C64::new(1.0, 0.0);
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        for f in self.factors.iter().rev() {
            match f {
                Factor::Vertex { vertex, .. } => {
                    let m = op(part, *vertex);
                    for (j, t) in tmp.iter_mut().enumerate() {
                        *t = (0..n).map(|i| m[(j, i)] * v[i]).sum();
                    }
                    std::mem::swap(&mut v, &mut tmp);
                }
                Factor::Propagator { branch, argument } => {
                    for (k, x) in v.iter_mut().enumerate() {
                        let g = C64::new(argument.omega - free.energies[k], free.widths[k]).inv();
                        *x *= if *branch == Branch::Retarded { g } else { g.conj() };
                    }
                }
            }
        }
        v[scheme.ground]
    }

    /// scalar_prefactor times the bracket.
    pub fn value(&self, scheme: &LevelScheme) -> Result<C64> {
        Ok(self.scalar_prefactor * self.bracket(scheme)?)
    }

    /// (-i)^n times `value`: the loop's correlation amplitude without field factors.
    pub fn correlation(&self, scheme: &LevelScheme) -> Result<C64> {
        Ok(minus_i_pow(self.n_expansion) * self.value(scheme)?)
    }

    pub fn vertex_count(&self) -> usize {
        self.factors.iter().filter(|f| matches!(f, Factor::Vertex { .. })).count()
    }

    /// Human-readable operator string, e.g. `V G+(w_g+w1) V+ G(w_g+w1) V+`.
    pub fn printed(&self) -> String {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Vertex { vertex: Vertex::Raise, .. } => "V+".to_string(),
                Factor::Vertex { vertex: Vertex::Lower, .. } => "V".to_string(),
                Factor::Propagator { branch, argument } => {
                    let g = if *branch == Branch::Retarded { "G" } else { "G+" };
                    format!("{g}({})", argument.display())
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub(crate) fn minus_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// Frequency-domain value of one fully ordered diagram in Liouville space.
///
/// Summed over a loop's decomposition this equals the loop's compiled `value`.
pub fn feynman_frequency_value(d: &FeynmanDiagram, scheme: &LevelScheme, freqs: &[f64]) -> Result<C64> {
    let part = partition_dipole(scheme)?;
    let free = FreeEvolution::new(scheme);
    let n = free.dim();
    let mut rho = CMatrix::zeros(n, n);
    rho[(scheme.ground, scheme.ground)] = C64::new(1.0, 0.0);
    let (mut kt, mut bt) = (false, false);
    let mut omega = 0.0;
    let last = d.sequence.len() - 1;
    for int in &d.sequence[..last] {
        let m = op(&part, int.vertex);
        match int.strand {
            Strand::Ket => {
                rho = m * &rho;
                kt = true;
            }
            Strand::Bra => {
                rho = &rho * m;
                bt = true;
            }
        }
        let w = *freqs
            .get(int.mode)
            .ok_or_else(|| Error::Config(format!("no frequency for mode {}", int.mode + 1)))?;
        omega += int.vertex.freq_sign() as f64 * w;
        for k in 0..n {
            for b in 0..n {
                let width = free.width(k, kt) + free.width(b, bt);
                let den = C64::new(omega - (free.energies[k] - free.energies[b]), width);
                rho[(k, b)] *= C64::i() / den;
            }
        }
    }
    let f = &d.sequence[last];
    let m = op(&part, f.vertex);
    let tr = match f.strand {
        Strand::Ket => (m * &rho).trace(),
        Strand::Bra => (&rho * m).trace(),
    };
    Ok(d.sign() as f64 * tr)
}

/// Evaluable description of a fully ordered time-domain term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegrand {
    /// Interactions, earliest first.
    pub sequence: Vec<Interaction>,
    /// Step-function chain as (later, earlier) label pairs.
    pub theta_chain: Vec<(String, String)>,
    /// Field correlation pairing: (E label, E* label) per mode.
    pub pairing: Vec<(String, String)>,
    pub sign: i8,
}

pub fn compile_time(d: &FeynmanDiagram) -> TimeIntegrand {
    let seq = d.sequence.clone();
    let theta_chain = seq
        .windows(2)
        .rev()
        .map(|w| (w[1].time_label.clone(), w[0].time_label.clone()))
        .collect();
    let mut pairing = Vec::new();
    let mut used = vec![false; seq.len()];
    for (i, a) in seq.iter().enumerate() {
        if a.vertex != Vertex::Raise {
            continue;
        }
        if let Some(j) = (0..seq.len()).find(|&j| !used[j] && seq[j].vertex == Vertex::Lower && seq[j].mode == a.mode) {
            used[j] = true;
            pairing.push((a.time_label.clone(), seq[j].time_label.clone()));
        }
        used[i] = true;
    }
    TimeIntegrand { sequence: seq, theta_chain, pairing, sign: d.sign() }
}

pub(crate) fn theta(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x == 0.0 {
        0.5
    } else {
        0.0
    }
}

impl TimeIntegrand {
    /// `theta(t-tau)theta(tau-tau1)... <V_L V+_R ...>` with the latest vertex leftmost.
    pub fn describe(&self) -> String {
        let th: String = self.theta_chain.iter().map(|(a, b)| format!("theta({a}-{b})")).collect();
        let ops: Vec<String> = self
            .sequence
            .iter()
            .rev()
            .map(|i| {
                let v = if i.vertex == Vertex::Raise { "V+" } else { "V" };
                let s = if i.strand == Strand::Ket { "L" } else { "R" };
                format!("{v}_{s}({})", i.time_label)
            })
            .collect();
        format!("{th} <{}>", ops.join(" "))
    }

    /// Sign times theta chain times Liouville correlator times field factors.
    pub fn evaluate(
        &self,
        free: &FreeEvolution,
        part: &DipolePartition,
        times: &dyn Fn(Slot) -> f64,
        field: &dyn Fn(&Interaction, f64) -> C64,
    ) -> C64 {
        let x: Vec<f64> = self.sequence.iter().map(|i| times(i.slot)).collect();
        let mut th = 1.0;
        for w in x.windows(2) {
            th *= theta(w[1] - w[0]);
            if th == 0.0 {
                return C64::new(0.0, 0.0);
            }
        }
        let n = free.dim();
        let mut rho = CMatrix::zeros(n, n);
        rho[(free.ground, free.ground)] = C64::new(1.0, 0.0);
        let (mut kt, mut bt) = (false, false);
        let mut f = C64::new(self.sign as f64 * th, 0.0);
        for (j, int) in self.sequence.iter().enumerate() {
            if j > 0 {
                rho.component_mul_assign(&free.liouville_diag(x[j] - x[j - 1], kt, bt));
            }
            let m = op(part, int.vertex);
            match int.strand {
                Strand::Ket => {
                    rho = m * &rho;
                    kt = true;
                }
                Strand::Bra => {
                    rho = &rho * m;
                    bt = true;
                }
            }
            f *= field(int, x[j]);
        }
        f * rho.trace()
    }
}

/// Partially ordered loop integrand in Hilbert space: strand step functions
/// times the ket and bra amplitudes joined at the observation time.
pub fn loop_integrand(
    lp: &LoopDiagram,
    free: &FreeEvolution,
    part: &DipolePartition,
    times: &dyn Fn(Slot) -> f64,
    field: &dyn Fn(&Interaction, f64) -> C64,
) -> C64 {
    let t = times(Slot::Observation);
    let n = free.dim();
    let mut th = 1.0;
    let mut f = C64::new(lp.sign as f64, 0.0);
    let mut psi = vec![C64::new(0.0, 0.0); n];
    psi[free.ground] = C64::new(1.0, 0.0);
    let mut row = psi.clone();
    for (strand, seq) in [(Strand::Ket, &lp.ket), (Strand::Bra, &lp.bra)] {
        let mut prev: Option<f64> = None;
        for int in seq.iter() {
            let x = times(int.slot);
            if let Some(p) = prev {
                th *= theta(x - p);
                let u = free.strand_diag(x - p);
                advance(strand, if strand == Strand::Ket { &mut psi } else { &mut row }, &u);
            }
            let m = op(part, int.vertex);
            let v = if strand == Strand::Ket { &mut psi } else { &mut row };
            apply(strand, m, v);
            f *= field(int, x);
            prev = Some(x);
        }
        let ends_at_t = seq.last().is_some_and(|i| i.slot == Slot::Observation);
        if let (Some(p), false) = (prev, ends_at_t) {
            th *= theta(t - p);
            if p < t {
                let u = free.strand_diag(t - p);
                advance(strand, if strand == Strand::Ket { &mut psi } else { &mut row }, &u);
            }
        }
        if th == 0.0 {
            return C64::new(0.0, 0.0);
        }
    }
    let overlap: C64 = row.iter().zip(&psi).map(|(a, b)| a * b).sum();
    f * th * overlap
}

fn advance(strand: Strand, v: &mut [C64], u: &[C64]) {
    for (x, w) in v.iter_mut().zip(u) {
        *x *= if strand == Strand::Ket { *w } else { w.conj() };
    }
}

/// Ket: v <- M v. Bra row: v <- v M.
fn apply(strand: Strand, m: &CMatrix, v: &mut [C64]) {
    let n = v.len();
    let old = v.to_vec();
    for j in 0..n {
        v[j] = match strand {
            Strand::Ket => (0..n).map(|i| m[(j, i)] * old[i]).sum(),
            Strand::Bra => (0..n).map(|i| old[i] * m[(i, j)]).sum(),
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::{decompose, generate_loops, Process};
    use crate::model::presets;

    #[test]
    fn sle_printed_string() {
        let s = presets::kh_raman();
        let lp = &generate_loops(&s, &Process::sle(0, 1)).unwrap()[0];
        let e = compile_frequency(lp, &[1.5, 1.0]).unwrap();
        assert_eq!(e.printed(), "V G+(w_g+w1) V+ G+(w_g+w1-w2) V G(w_g+w1) V+");
        assert_eq!(e.vertex_count(), 4);
    }

    #[test]
    fn linear_loop_single_resolvent() {
        let s = presets::two_level(1.0, 0.1);
        let lp = &generate_loops(&s, &Process::polarization(vec![crate::diagrams::FieldFactor::field(0)], 0)).unwrap()[0];
        let e = compile_frequency(lp, &[1.0]).unwrap();
        assert_eq!(e.printed(), "V G(w_g+w1) V+");
    }

    #[test]
    fn feynman_sum_matches_loop() {
        let s = presets::pump_probe_ladder();
        let freqs = [1.02, 0.77];
        for lp in generate_loops(&s, &Process::pump_probe(0, 1)).unwrap() {
            let e = compile_frequency(&lp, &freqs).unwrap().value(&s).unwrap();
            let f: C64 = decompose(&lp).iter().map(|d| feynman_frequency_value(d, &s, &freqs).unwrap()).sum();
            assert!((e - f).norm() <= 1e-10 * e.norm(), "{e} vs {f}");
        }
    }

    #[test]
    fn first_sle_time_term() {
        let s = presets::kh_raman();
        let lp = &generate_loops(&s, &Process::sle(0, 1)).unwrap()[0];
        let ds = decompose(lp);
        let descr: Vec<String> = ds.iter().map(|d| compile_time(d).describe()).collect();
        assert!(descr.contains(&"theta(t-tau)theta(tau-tau1)theta(tau1-tau2) <V_L(t) V+_R(tau) V_R(tau1) V+_L(tau2)>".to_string()), "{descr:?}");
    }
}
