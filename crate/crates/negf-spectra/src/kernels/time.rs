//! Time-domain signals from strand and density-matrix recursions.
//!
//! Every integrated time variable runs on its own grid t0 + (k + delta) h with
//! a distinct offset delta, so no two interaction times ever coincide. The
//! partially ordered loop form and the fully ordered form then sum exactly the
//! same integrand samples. Romberg extrapolation in h removes the offset error.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::head_weight;
use crate::diagrams::{
    decompose, generate_loops, minus_i_pow, op, Detection, FieldFactor, Interaction, LoopDiagram, Process, Slot,
    Strand, Vertex,
};
use crate::error::{Error, Result};
use crate::model::{partition_dipole, CMatrix, DipolePartition, Drive, LevelScheme, ModelConstants, C64};
use crate::propagators::{FreeEvolution, GreenKind};

/// Field entering a mode: a classical drive or an empty mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Classical(Drive),
    /// Unit amplitude exp(-i omega t) with no envelope.
    Vacuum { omega: f64 },
}

impl Source {
    pub fn omega(&self) -> f64 {
        match self {
            Source::Classical(d) => d.omega,
            Source::Vacuum { omega } => *omega,
        }
    }

    pub fn field(&self, t: f64) -> C64 {
        match self {
            Source::Classical(d) => d.field(t),
            Source::Vacuum { omega } => C64::from_polar(1.0, -omega * t),
        }
    }

    fn start(&self) -> Option<f64> {
        match self {
            Source::Classical(d) => Some(d.envelope.start()),
            Source::Vacuum { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Coarsest step; defaults to 1/40 of the shortest period.
    pub step: Option<f64>,
    /// Number of step halvings.
    pub max_refinements: usize,
    /// Relative change between successive extrapolants accepted as converged.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { step: None, max_refinements: 3, tolerance: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpProbeForm {
    /// Partially ordered loop integrands.
    #[default]
    Loops,
    /// Fully time-ordered integrands.
    Feynman,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldStatistics {
    #[default]
    Classical,
    /// Coherent-state pump in a quantization volume; adds the vacuum pairings.
    Quantum { volume: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpProbeTime {
    /// Probe absorption without the pump.
    pub linear: f64,
    /// Pump-induced change.
    pub nonlinear: f64,
    pub total: f64,
}

/// Observation grid t_k = t0 + k h, k = 0..=cells.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Grid {
    pub t0: f64,
    pub h: f64,
    pub cells: usize,
}

impl Grid {
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }
}

fn coarse_grid(scheme: &LevelScheme, sources: &[Source], t_end: f64, cfg: &QuadratureConfig) -> Result<Grid> {
    let wmax = sources.iter().map(|s| s.omega().abs()).fold(scheme.max_bohr(), f64::max);
    if !(wmax > 0.0) {
        return Err(Error::Config("no nonzero frequency to resolve".into()));
    }
    let period = 2.0 * std::f64::consts::PI / wmax;
    let h = match cfg.step {
        None => period / 40.0,
        Some(h) if !(h > 0.0) => return Err(Error::Config(format!("quadrature step must be positive, got {h}"))),
        Some(h) if h > period / 20.0 => {
            return Err(Error::Numerical(format!(
                "quadrature step {h} under-resolves the shortest period {period:.6}; use a step of at most {:.6}",
                period / 20.0
            )))
        }
        Some(h) => h,
    };
    let t0 = sources.iter().filter_map(Source::start).fold(f64::INFINITY, f64::min);
    if !t0.is_finite() {
        return Err(Error::Config("at least one classical drive is required".into()));
    }
    if t_end <= t0 {
        return Ok(Grid { t0: t_end, h, cells: 0 });
    }
    let cells = ((t_end - t0) / h).ceil() as usize;
    Ok(Grid { t0, h: (t_end - t0) / cells as f64, cells })
}

/// Halves the step up to `max_refinements` times and extrapolates the trace.
fn romberg(grid: Grid, cfg: &QuadratureConfig, eval: &(dyn Fn(&Grid) -> Vec<C64> + Sync)) -> Result<Vec<C64>> {
    let mut table: Vec<Vec<Vec<C64>>> = Vec::new();
    let mut prev: Option<Vec<C64>> = None;
    for level in 0..=cfg.max_refinements {
        let r = 1usize << level;
        let g = Grid { t0: grid.t0, h: grid.h / r as f64, cells: grid.cells * r };
        let raw = eval(&g);
        let mut row = vec![(0..=grid.cells).map(|k| raw[k * r]).collect::<Vec<C64>>()];
        for j in 1..=level {
            let f = (1u64 << j) as f64;
            let next = row[j - 1]
                .iter()
                .zip(&table[level - 1][j - 1])
                .map(|(a, b)| (f * a - b) / (f - 1.0))
                .collect();
            row.push(next);
        }
        let best = row[level].clone();
        if let Some(p) = &prev {
            let scale = best.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = best.iter().zip(p).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if diff <= cfg.tolerance * scale {
                return Ok(best);
            }
        }
        prev = Some(best);
        table.push(row);
    }
    match (cfg.max_refinements, prev) {
        (0, Some(p)) => Ok(p),
        _ => Err(Error::Numerical(format!(
            "time quadrature did not converge to {} after {} halvings; use a smaller step",
            cfg.tolerance, cfg.max_refinements
        ))),
    }
}

/// Offset of an integrated slot within a cell; `d` exceeds every slot index.
fn offset(slot: Slot, d: usize) -> f64 {
    let j = match slot {
        Slot::Probe => 0,
        Slot::Expansion(k) => k + 1,
        Slot::Observation => unreachable!("the observation time is not integrated"),
    };
    (j as f64 + 0.5) / d as f64
}

type FieldFn<'a> = dyn Fn(&Interaction, f64) -> C64 + Sync + 'a;

struct Engine<'a> {
    free: &'a FreeEvolution,
    part: &'a DipolePartition,
    /// Offset denominator shared by all terms of one signal.
    d: usize,
}

fn diag(v: Vec<C64>) -> DVector<C64> {
    DVector::from_vec(v)
}

/// Events of one cell, sorted by offset, and the gaps between them in units of h.
fn cell_events(seq: &[Interaction], d: usize) -> (Vec<(f64, usize)>, Vec<f64>) {
    let mut ev: Vec<(f64, usize)> = seq.iter().enumerate().map(|(j, i)| (offset(i.slot, d), j)).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gaps = Vec::with_capacity(ev.len() + 1);
    let mut last = 0.0;
    for e in &ev {
        gaps.push(e.0 - last);
        last = e.0;
    }
    gaps.push(1.0 - last);
    (ev, gaps)
}

impl Engine<'_> {
    /// Integrated amplitude of one strand at every grid time.
    ///
    /// State j holds the sum over strictly ordered samples of the first j
    /// vertices; state 0 is the untouched ground state.
    fn strand_states(&self, seq: &[Interaction], strand: Strand, grid: &Grid, field: &FieldFn) -> Vec<DVector<C64>> {
        let n = self.free.dim();
        let mut ground = DVector::zeros(n);
        ground[self.free.ground] = C64::new(1.0, 0.0);
        let m = seq.len();
        if m == 0 {
            return vec![ground; grid.cells + 1];
        }
        let mats: Vec<CMatrix> = seq
            .iter()
            .map(|i| {
                let a = op(self.part, i.vertex);
                if strand == Strand::Bra {
                    a.transpose()
                } else {
                    a.clone()
                }
            })
            .collect();
        let (ev, gaps) = cell_events(seq, self.d);
        let props: Vec<DVector<C64>> = gaps
            .iter()
            .map(|&g| {
                let u = self.free.strand_diag(g * grid.h);
                diag(if strand == Strand::Bra { u.iter().map(|z| z.conj()).collect() } else { u })
            })
            .collect();
        let mut states = vec![DVector::zeros(n); m + 1];
        states[0] = ground;
        let mut out = Vec::with_capacity(grid.cells + 1);
        out.push(states[m].clone());
        for k in 0..grid.cells {
            for (e, &(off, j)) in ev.iter().enumerate() {
                for s in states.iter_mut().skip(1) {
                    s.component_mul_assign(&props[e]);
                }
                let f = field(&seq[j], grid.t0 + (k as f64 + off) * grid.h) * grid.h;
                if f != C64::new(0.0, 0.0) {
                    let add = &mats[j] * &states[j] * f;
                    states[j + 1] += add;
                }
            }
            for s in states.iter_mut().skip(1) {
                s.component_mul_assign(&props[ev.len()]);
            }
            out.push(states[m].clone());
        }
        out
    }

    /// sign times the loop integral, observation time on every grid point.
    fn loop_trace(&self, lp: &LoopDiagram, grid: &Grid, field: &FieldFn) -> Vec<C64> {
        let obs = lp.observation();
        let strip = |seq: &[Interaction]| -> Vec<Interaction> {
            seq.iter().filter(|i| i.slot != Slot::Observation).cloned().collect()
        };
        let ket = self.strand_states(&strip(&lp.ket), Strand::Ket, grid, field);
        let bra = self.strand_states(&strip(&lp.bra), Strand::Bra, grid, field);
        let a = op(self.part, obs.vertex);
        (0..=grid.cells)
            .map(|k| {
                let t = grid.time(k);
                let v = match obs.strand {
                    Strand::Ket => bra[k].dot(&(a * &ket[k])),
                    Strand::Bra => (a.transpose() * &bra[k]).dot(&ket[k]),
                };
                lp.sign as f64 * field(obs, t) * v
            })
            .collect()
    }

    /// sign times the fully ordered density-matrix integral; the last vertex sits at t.
    fn chain_trace(&self, seq: &[Interaction], sign: i8, grid: &Grid, field: &FieldFn) -> Vec<C64> {
        let n = self.free.dim();
        let m = seq.len() - 1;
        let (body, fin) = (&seq[..m], &seq[m]);
        let mut ground = CMatrix::zeros(n, n);
        ground[(self.free.ground, self.free.ground)] = C64::new(1.0, 0.0);
        let touched: Vec<(bool, bool)> = (0..=m)
            .map(|j| {
                let kt = body[..j].iter().any(|i| i.strand == Strand::Ket);
                let bt = body[..j].iter().any(|i| i.strand == Strand::Bra);
                (kt, bt)
            })
            .collect();
        let (ev, gaps) = cell_events(body, self.d);
        let props: Vec<Vec<CMatrix>> = gaps
            .iter()
            .map(|&g| touched.iter().map(|&(kt, bt)| self.free.liouville_diag(g * grid.h, kt, bt)).collect())
            .collect();
        let mut rho = vec![CMatrix::zeros(n, n); m + 1];
        rho[0] = ground;
        let a_fin = op(self.part, fin.vertex);
        let close = |r: &CMatrix, t: f64| -> C64 {
            let tr: C64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a_fin[(i, j)] * r[(j, i)]).sum();
            sign as f64 * field(fin, t) * tr
        };
        let mut out = Vec::with_capacity(grid.cells + 1);
        out.push(close(&rho[m], grid.t0));
        for k in 0..grid.cells {
            for (e, &(off, j)) in ev.iter().enumerate() {
                for (s, r) in rho.iter_mut().enumerate().skip(1) {
                    r.component_mul_assign(&props[e][s]);
                }
                let f = field(&body[j], grid.t0 + (k as f64 + off) * grid.h) * grid.h;
                if f != C64::new(0.0, 0.0) {
                    let a = op(self.part, body[j].vertex);
                    let add = match body[j].strand {
                        Strand::Ket => a * &rho[j],
                        Strand::Bra => &rho[j] * a,
                    };
                    rho[j + 1] += add * f;
                }
            }
            for (s, r) in rho.iter_mut().enumerate().skip(1) {
                r.component_mul_assign(&props[ev.len()][s]);
            }
            out.push(close(&rho[m], grid.time(k + 1)));
        }
        out
    }

    /// Sum of weight times (-i)^{n_int} times each loop integral.
    fn amplitude(&self, terms: &[(LoopDiagram, f64)], form: PumpProbeForm, grid: &Grid, field: &FieldFn) -> Vec<C64> {
        let zero = vec![C64::new(0.0, 0.0); grid.cells + 1];
        terms
            .par_iter()
            .map(|(lp, w)| {
                let c = minus_i_pow(lp.n_vertices() - 1) * *w;
                let tr = match form {
                    PumpProbeForm::Loops => self.loop_trace(lp, grid, field),
                    PumpProbeForm::Feynman => {
                        let mut acc = vec![C64::new(0.0, 0.0); grid.cells + 1];
                        for fd in decompose(lp) {
                            for (a, b) in acc.iter_mut().zip(self.chain_trace(&fd.sequence, fd.sign(), grid, field)) {
                                *a += b;
                            }
                        }
                        acc
                    }
                };
                tr.into_iter().map(|z| z * c).collect::<Vec<C64>>()
            })
            .reduce(|| zero.clone(), |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }
}

fn source_field<'a>(sources: &'a [Source], detection: Detection) -> impl Fn(&Interaction, f64) -> C64 + Sync + 'a {
    move |int: &Interaction, x: f64| {
        if matches!(detection, Detection::Polarization { .. }) && int.slot == Slot::Observation {
            return C64::new(1.0, 0.0);
        }
        let v = sources[int.mode].field(x);
        if int.conjugate_field() {
            v.conj()
        } else {
            v
        }
    }
}

struct Prepared {
    free: FreeEvolution,
    part: DipolePartition,
}

fn prepare(scheme: &LevelScheme) -> Result<Prepared> {
    let part = partition_dipole(scheme)?;
    Ok(Prepared { free: FreeEvolution::new(scheme), part })
}

/// Romberg-extrapolated sum of weighted loop amplitudes over a grid ending at `t_end`.
#[allow(clippy::too_many_arguments)]
fn weighted_trace(
    p: &Prepared,
    grid: Grid,
    terms: &[(LoopDiagram, f64)],
    d: usize,
    sources: &[Source],
    detection: Detection,
    form: PumpProbeForm,
    cfg: &QuadratureConfig,
) -> Result<Vec<C64>> {
    if terms.is_empty() {
        return Ok(vec![C64::new(0.0, 0.0); grid.cells + 1]);
    }
    let engine = Engine { free: &p.free, part: &p.part, d };
    let field = source_field(sources, detection);
    romberg(grid, cfg, &|g| engine.amplitude(terms, form, g, &field))
}

fn check_order(incoming: usize) -> Result<()> {
    if incoming == 0 {
        return Err(Error::Config("at least one incoming drive is required".into()));
    }
    Ok(())
}

/// Spontaneous emission rate into omega2 at every grid time up to `t_end`.
pub fn sle_time_trace(
    scheme: &LevelScheme,
    pump: &Drive,
    omega2: f64,
    t_end: f64,
    cfg: &QuadratureConfig,
    constants: &ModelConstants,
) -> Result<Vec<(f64, f64)>> {
    constants.check()?;
    let p = prepare(scheme)?;
    let sources = [Source::Classical(*pump), Source::Vacuum { omega: omega2 }];
    let process = Process::sle(0, 1);
    let grid = coarse_grid(scheme, &sources, t_end, cfg)?;
    let terms: Vec<(LoopDiagram, f64)> = generate_loops(scheme, &process)?.into_iter().map(|l| (l, 1.0)).collect();
    let d = process.expansion.len() + 1;
    let z = weighted_trace(&p, grid, &terms, d, &sources, process.detection, PumpProbeForm::Loops, cfg)?;
    let c = constants.spontaneous_constant();
    Ok(z.iter().enumerate().map(|(k, z)| (grid.time(k), -omega2 * c * z.im)).collect())
}

/// Spontaneous emission rate into omega2 at time t.
pub fn sle_time(
    scheme: &LevelScheme,
    pump: &Drive,
    omega2: f64,
    t: f64,
    cfg: &QuadratureConfig,
    constants: &ModelConstants,
) -> Result<f64> {
    Ok(sle_time_trace(scheme, pump, omega2, t, cfg, constants)?.last().map_or(0.0, |x| x.1))
}

/// Net photon flux into a detected mode at time t: the stimulated part
/// 2 Im[sum_A Z - sum_B Z] plus, when requested, spontaneous emission.
///
/// Each incoming drive enters the expansion once as E* and once as E.
#[allow(clippy::too_many_arguments)]
pub fn stimulated_rate(
    scheme: &LevelScheme,
    detected: &Drive,
    incoming: &[Drive],
    t: f64,
    spontaneous: bool,
    cfg: &QuadratureConfig,
    constants: &ModelConstants,
) -> Result<f64> {
    check_order(incoming.len())?;
    constants.check()?;
    let p = prepare(scheme)?;
    let det = incoming.len();
    let expansion: Vec<FieldFactor> =
        (0..det).flat_map(|k| [FieldFactor::conj(k), FieldFactor::field(k)]).collect();
    let d = expansion.len() + 1;
    let mut sources: Vec<Source> = incoming.iter().map(|x| Source::Classical(*x)).collect();
    sources.push(Source::Classical(*detected));
    let grid = coarse_grid(scheme, &sources, t, cfg)?;
    let stim = Process { expansion: expansion.clone(), detection: Detection::Stimulated { mode: det } };
    let terms: Vec<(LoopDiagram, f64)> =
        generate_loops(scheme, &stim)?.into_iter().map(|l| { let w = 2.0 * head_weight(&l); (l, w) }).collect();
    let mut rate = if detected.is_off() {
        0.0
    } else {
        weighted_trace(&p, grid, &terms, d, &sources, stim.detection, PumpProbeForm::Loops, cfg)?[grid.cells].im
    };
    if spontaneous {
        sources[det] = Source::Vacuum { omega: detected.omega };
        let spont = Process { expansion, detection: Detection::Spontaneous { mode: det } };
        let terms: Vec<(LoopDiagram, f64)> = generate_loops(scheme, &spont)?.into_iter().map(|l| (l, 1.0)).collect();
        let z = weighted_trace(&p, grid, &terms, d, &sources, spont.detection, PumpProbeForm::Loops, cfg)?;
        rate -= detected.omega * constants.spontaneous_constant() * z[grid.cells].im;
    }
    Ok(rate)
}

/// Whether a loop's pump pair acquires a vacuum pairing when the pump is quantized.
///
/// Same strand: ket needs the raise after the lower, bra the raise before the
/// lower. Across strands only a bra raise with a ket lower pairs.
pub(crate) fn pump_pair_is_vacuum(lp: &LoopDiagram, pump: usize) -> bool {
    let find = |v: Vertex| -> Option<(Strand, usize)> {
        for (s, seq) in [(Strand::Ket, &lp.ket), (Strand::Bra, &lp.bra)] {
            if let Some(p) = seq.iter().position(|i| i.is_expansion() && i.mode == pump && i.vertex == v) {
                return Some((s, p));
            }
        }
        None
    };
    match (find(Vertex::Raise), find(Vertex::Lower)) {
        (Some((Strand::Ket, r)), Some((Strand::Ket, l))) => r > l,
        (Some((Strand::Bra, r)), Some((Strand::Bra, l))) => r < l,
        (Some((Strand::Bra, _)), Some((Strand::Ket, _))) => true,
        _ => false,
    }
}

/// Pump-probe signal at time t from the eight loops or their sixteen orderings.
#[allow(clippy::too_many_arguments)]
pub fn pump_probe_time(
    scheme: &LevelScheme,
    pump: &Drive,
    probe: &Drive,
    t: f64,
    form: PumpProbeForm,
    stats: FieldStatistics,
    cfg: &QuadratureConfig,
) -> Result<PumpProbeTime> {
    let p = prepare(scheme)?;
    let sources = [Source::Classical(*pump), Source::Classical(*probe)];
    let grid = coarse_grid(scheme, &sources, t, cfg)?;
    let weigh = |loops: Vec<LoopDiagram>| -> Vec<(LoopDiagram, f64)> {
        loops.into_iter().map(|l| { let w = 2.0 * head_weight(&l); (l, w) }).collect()
    };
    let lin = Process::linear_absorption(1);
    let lin_terms = weigh(generate_loops(scheme, &lin)?);
    let linear = weighted_trace(&p, grid, &lin_terms, 1, &sources, lin.detection, form, cfg)?[grid.cells].im;
    let pp = Process::pump_probe(0, 1);
    let terms = weigh(generate_loops(scheme, &pp)?);
    let mut nonlinear = weighted_trace(&p, grid, &terms, 3, &sources, pp.detection, form, cfg)?[grid.cells].im;
    if let FieldStatistics::Quantum { volume } = stats {
        let constants = ModelConstants::physical(volume);
        constants.check()?;
        let g2 = constants.coupling_sq(pump.omega);
        let vac: Vec<(LoopDiagram, f64)> = terms
            .iter()
            .filter(|(l, _)| pump_pair_is_vacuum(l, 0))
            .map(|(l, w)| (l.clone(), w * g2))
            .collect();
        let vsources = [Source::Vacuum { omega: pump.omega }, Source::Classical(*probe)];
        nonlinear += weighted_trace(&p, grid, &vac, 3, &vsources, pp.detection, form, cfg)?[grid.cells].im;
    }
    Ok(PumpProbeTime { linear, nonlinear, total: linear + nonlinear })
}

/// Orderings of V(tau) E2*, V^dagger E1 and V E1* on either side, each closed
/// by V^dagger(t) E2 on the ket, with sign (-1)^{number on the bra}. Slots
/// follow the pump-probe loops so both forms share sample points.
fn chi3_chains(part: &DipolePartition, ground: usize) -> Vec<(Vec<Interaction>, i8)> {
    let base = [(Vertex::Lower, 1, Slot::Probe), (Vertex::Raise, 0, Slot::Expansion(1)), (Vertex::Lower, 0, Slot::Expansion(0))];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let abs = |v: Vertex| op(part, v).map(|z| z.norm());
    let n = part.lowering.nrows();
    let mut out = Vec::new();
    for perm in perms {
        for mask in 0u32..8 {
            let mut seq: Vec<Interaction> = perm
                .iter()
                .map(|&i| {
                    let strand = if mask & (1 << i) != 0 { Strand::Bra } else { Strand::Ket };
                    // tau on the ket mirrors an emissive loop, whose pump slots are swapped.
                    let slot = match (mask & 1 == 0, base[i].2) {
                        (true, Slot::Expansion(k)) => Slot::Expansion(1 - k),
                        (_, s) => s,
                    };
                    Interaction::new(strand, base[i].0, base[i].1, slot)
                })
                .collect();
            seq.push(Interaction::new(Strand::Ket, Vertex::Raise, 1, Slot::Observation));
            let mut pat = nalgebra::DMatrix::<f64>::zeros(n, n);
            pat[(ground, ground)] = 1.0;
            for i in &seq[..3] {
                pat = match i.strand {
                    Strand::Ket => abs(i.vertex) * &pat,
                    Strand::Bra => &pat * abs(i.vertex),
                };
            }
            if (abs(Vertex::Raise) * &pat).trace() == 0.0 {
                continue;
            }
            let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
            out.push((seq, sign));
        }
    }
    out
}

/// Pump-probe signal from the classical third-order response form.
pub fn pp_chi3(scheme: &LevelScheme, pump: &Drive, probe: &Drive, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let p = prepare(scheme)?;
    let sources = [Source::Classical(*pump), Source::Classical(*probe)];
    let grid = coarse_grid(scheme, &sources, t, cfg)?;
    let chains = chi3_chains(&p.part, p.free.ground);
    if chains.is_empty() {
        return Ok(0.0);
    }
    let engine = Engine { free: &p.free, part: &p.part, d: 3 };
    let field = source_field(&sources, Detection::Stimulated { mode: 1 });
    let z = romberg(grid, cfg, &|g| {
        let zero = vec![C64::new(0.0, 0.0); g.cells + 1];
        chains
            .par_iter()
            .map(|(seq, sign)| engine.chain_trace(seq, *sign, g, &field))
            .reduce(|| zero.clone(), |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect())
    })?;
    Ok(-2.0 * z[grid.cells].re)
}

/// Induced polarization P(t) of the given order from classical drives.
///
/// `incoming` refers to `drives` by index; the observation vertex V(t) carries
/// no field.
pub fn heterodyne_time(
    scheme: &LevelScheme,
    incoming: &[FieldFactor],
    drives: &[Drive],
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<C64> {
    check_order(incoming.len())?;
    if incoming.iter().any(|f| f.mode >= drives.len()) {
        return Err(Error::Config("incoming factor refers to an unknown drive".into()));
    }
    let p = prepare(scheme)?;
    let omega_s: f64 = incoming.iter().map(|f| f.vertex.freq_sign() as f64 * drives[f.mode].omega).sum();
    let mut sources: Vec<Source> = drives.iter().map(|d| Source::Classical(*d)).collect();
    sources.push(Source::Vacuum { omega: omega_s });
    let process = Process::polarization(incoming.to_vec(), drives.len());
    let grid = coarse_grid(scheme, &sources, t, cfg)?;
    let terms: Vec<(LoopDiagram, f64)> = generate_loops(scheme, &process)?.into_iter().map(|l| (l, 1.0)).collect();
    let d = process.expansion.len() + 1;
    Ok(weighted_trace(&p, grid, &terms, d, &sources, process.detection, PumpProbeForm::Loops, cfg)?[grid.cells])
}

/// Second-order system Green's function D_XY(t, tau) = -i <T V_X(t) V^dagger_Y(tau)>
/// for a density matrix `rho` given at the earlier of the two times.
#[derive(Clone, Debug)]
pub struct SystemGreen {
    pub kind: GreenKind,
    free: FreeEvolution,
    part: DipolePartition,
    rho: CMatrix,
}

pub fn system_green(scheme: &LevelScheme, kind: GreenKind, rho: CMatrix) -> Result<SystemGreen> {
    let n = scheme.dim();
    if rho.shape() != (n, n) {
        return Err(Error::Config(format!("density matrix must be {n}x{n}")));
    }
    Ok(SystemGreen { kind, free: FreeEvolution::new(scheme), part: partition_dipole(scheme)?, rho })
}

impl SystemGreen {
    fn apply(&self, strand: Strand, v: Vertex, x: &CMatrix) -> CMatrix {
        let a = op(&self.part, v);
        match strand {
            Strand::Ket => a * x,
            Strand::Bra => x * a,
        }
    }

    /// <T A_X(a) B_Y(b)> by regression from the earlier time; ties keep the written order.
    pub fn ordered(&self, first: (Strand, Vertex, f64), second: (Strand, Vertex, f64)) -> C64 {
        let (late, early) = if second.2 > first.2 { (second, first) } else { (first, second) };
        let r = self.apply(early.0, early.1, &self.rho);
        let r = r.component_mul(&self.free.liouville_diag(late.2 - early.2, true, true));
        self.apply(late.0, late.1, &r).trace()
    }

    pub fn eval(&self, t: f64, tau: f64) -> C64 {
        let (x, y) = match self.kind {
            GreenKind::LR => (Strand::Ket, Strand::Bra),
            GreenKind::RL => (Strand::Bra, Strand::Ket),
        };
        -C64::i() * self.ordered((x, Vertex::Lower, t), (y, Vertex::Raise, tau))
    }
}

/// Residual |D_RL(tau,t) - D_LR(tau,t) - i <T V+^dagger(t) V-(tau)>| for tau <= t.
///
/// The right-hand side is built from explicit Liouville-space matrices,
/// independently of the Hilbert-space regression used for D.
pub fn eq22_check(scheme: &LevelScheme, rho: &CMatrix, t: f64, tau: f64) -> Result<f64> {
    if tau > t {
        return Err(Error::Config("the identity holds for tau <= t".into()));
    }
    let lr = system_green(scheme, GreenKind::LR, rho.clone())?;
    let rl = system_green(scheme, GreenKind::RL, rho.clone())?;
    let lhs = rl.eval(tau, t) - lr.eval(tau, t);
    let n = scheme.dim();
    let id = CMatrix::identity(n, n);
    let left = |a: &CMatrix| id.kronecker(a);
    let right = |a: &CMatrix| a.transpose().kronecker(&id);
    let s2 = std::f64::consts::SQRT_2;
    let v = &lr.part.lowering;
    let vd = &lr.part.raising;
    let plus_dag = (left(vd) + right(vd)) / C64::new(s2, 0.0);
    let minus = (left(v) - right(v)) / C64::new(s2, 0.0);
    let g = lr.free.liouville_diag(t - tau, true, true);
    let prop = CMatrix::from_diagonal(&DVector::from_iterator(n * n, (0..n * n).map(|i| g[(i % n, i / n)])));
    let vec_rho = DVector::from_iterator(n * n, (0..n * n).map(|i| rho[(i % n, i / n)]));
    let vec_id = DVector::from_iterator(n * n, (0..n * n).map(|i| if i % n == i / n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }));
    let rhs = C64::i() * vec_id.dot(&(plus_dag * prop * minus * vec_rho));
    Ok((lhs - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::sle_frequency;
    use crate::model::presets;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn coarse_step_refused() {
        let s = presets::kh_raman();
        let cfg = QuadratureConfig { step: Some(1.0), ..Default::default() };
        let e = sle_time(&s, &Drive::cw(1.5, one(), 10.0), 1.0, 50.0, &cfg, &ModelConstants::default()).unwrap_err();
        assert!(matches!(e, Error::Numerical(_)), "{e}");
    }

    #[test]
    fn drive_off_gives_zero() {
        let s = presets::kh_raman();
        let v = sle_time(&s, &Drive::cw(1.5, C64::new(0.0, 0.0), 10.0), 1.0, 40.0, &QuadratureConfig::default(), &ModelConstants::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn stationary_sle_rate_matches_frequency_value() {
        // Broad Raman lines so that the stationary regime is reached quickly.
        let s = LevelScheme::from_real(&[0.0, 1.5, 0.5], &[(0, 1, 1.0), (1, 2, 1.0)], &[(1, 0.2), (2, 0.1)]).unwrap();
        let c = ModelConstants::default();
        let pump = Drive::cw(1.5, one(), 10.0);
        let tr = sle_time_trace(&s, &pump, 1.0, 150.0, &QuadratureConfig::default(), &c).unwrap();
        let f = sle_frequency(&s, 1.5, 1.0, one(), &c).unwrap();
        let late: Vec<f64> = tr.iter().filter(|x| x.0 > 100.0).map(|x| x.1).collect();
        let avg = late.iter().sum::<f64>() / late.len() as f64;
        assert!((avg - f).abs() < 0.02 * f, "{avg} vs {f}");
    }

    #[test]
    fn loop_and_ordered_forms_agree() {
        let s = presets::pump_probe_ladder();
        let pump = Drive::cw(1.0, C64::new(0.3, 0.1), 4.0);
        let probe = Drive::cw(0.8, C64::new(0.2, -0.05), 4.0);
        let cfg = QuadratureConfig { max_refinements: 0, ..Default::default() };
        let a = pump_probe_time(&s, &pump, &probe, 30.0, PumpProbeForm::Loops, FieldStatistics::Classical, &cfg).unwrap();
        let b = pump_probe_time(&s, &pump, &probe, 30.0, PumpProbeForm::Feynman, FieldStatistics::Classical, &cfg).unwrap();
        assert!((a.nonlinear - b.nonlinear).abs() <= 1e-10 * a.nonlinear.abs(), "{a:?} {b:?}");
        assert!((a.linear - b.linear).abs() <= 1e-10 * a.linear.abs());
    }

    #[test]
    fn chi3_matches_classical_time_signal() {
        let s = presets::pump_probe_ladder();
        let pump = Drive::cw(1.0, C64::new(0.3, 0.1), 4.0);
        let probe = Drive::cw(0.8, C64::new(0.2, -0.05), 4.0);
        let cfg = QuadratureConfig { max_refinements: 0, ..Default::default() };
        let a = pump_probe_time(&s, &pump, &probe, 30.0, PumpProbeForm::Feynman, FieldStatistics::Classical, &cfg).unwrap();
        let b = pp_chi3(&s, &pump, &probe, 30.0, &cfg).unwrap();
        assert!((a.nonlinear - b).abs() <= 1e-9 * b.abs(), "{} vs {b}", a.nonlinear);
    }

    #[test]
    fn eq22_identity() {
        let s = presets::pump_probe_ladder();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(0, 0)] = C64::new(0.7, 0.0);
        rho[(1, 1)] = C64::new(0.3, 0.0);
        rho[(0, 1)] = C64::new(0.1, 0.2);
        rho[(1, 0)] = C64::new(0.1, -0.2);
        assert!(eq22_check(&s, &rho, 3.0, 1.2).unwrap() <= 1e-12);
    }
}
