//! Brute-force reference: the emitter plus one quantized signal mode,
//! propagated as a joint density matrix.
//!
//! Incoming drives are classical. Level widths enter as decay of each excited
//! level to the ground level, so coherences rho_{ig} decay at gamma_i exactly
//! as in the diagrammatic propagators while the trace stays one. The signal is
//! the growth rate of the photon number in the signal mode.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Axis, Spectrum, SpectrumMeta, Values};
use crate::model::{partition_dipole, CMatrix, Drive, LevelScheme, ModelConstants, PrefactorMode, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_max: usize,
    pub dt: f64,
    /// Total propagation time.
    pub t_total: f64,
    /// Quantization volume of the signal mode.
    pub volume: f64,
    /// The rate is fitted over t >= fit_from * t_total.
    pub fit_from: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { n_max: 2, dt: 0.1, t_total: 600.0, volume: 1e6, fit_from: 0.5 }
    }
}

/// Product basis |level i, n photons>, index i + levels * n.
#[derive(Clone, Debug)]
pub struct JointSpace {
    pub levels: usize,
    pub n_max: usize,
    pub dim: usize,
    pub ground: usize,
    pub omega_s: f64,
    /// Vacuum coupling g = sqrt(2 pi omega_s / Omega).
    pub g: f64,
    pub level_energy: Vec<f64>,
    pub widths: Vec<f64>,
    /// Joint lowering operator V and the photon operators.
    pub v: CMatrix,
    pub v_dag: CMatrix,
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub number: CMatrix,
}

impl JointSpace {
    pub fn index(&self, level: usize, n: usize) -> usize {
        level + self.levels * n
    }

    fn split(&self, k: usize) -> (usize, usize) {
        (k % self.levels, k / self.levels)
    }
}

pub fn build_joint(scheme: &LevelScheme, omega_s: f64, n_max: usize, volume: f64) -> Result<JointSpace> {
    if n_max < 1 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    ModelConstants::physical(volume).check()?;
    let part = partition_dipole(scheme)?;
    let l = scheme.dim();
    let dim = l * (n_max + 1);
    let id_f = CMatrix::identity(n_max + 1, n_max + 1);
    let id_m = CMatrix::identity(l, l);
    let mut af = CMatrix::zeros(n_max + 1, n_max + 1);
    for n in 1..=n_max {
        af[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    // index i + l*n corresponds to kron(field, molecule)
    let v = id_f.kronecker(&part.lowering);
    let a = af.kronecker(&id_m);
    let a_dag = a.adjoint();
    Ok(JointSpace {
        levels: l,
        n_max,
        dim,
        ground: scheme.ground,
        omega_s,
        g: ModelConstants::physical(volume).coupling_sq(omega_s).sqrt(),
        level_energy: scheme.levels.clone(),
        widths: scheme.level_widths(),
        v_dag: v.adjoint(),
        v,
        number: &a_dag * &a,
        a,
        a_dag,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub photon_number: Vec<f64>,
    /// Centered differences of the photon number (one-sided at the ends).
    pub rate: Vec<f64>,
}

impl Trajectory {
    /// Least-squares slope of the photon number over t >= from.
    pub fn fitted_rate(&self, from: f64) -> f64 {
        let pts: Vec<(f64, f64)> =
            self.times.iter().zip(&self.photon_number).filter(|p| *p.0 >= from).map(|(t, n)| (*t, *n)).collect();
        let m = pts.len() as f64;
        let (st, sn) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mt, mn) = (st / m, sn / m);
        let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - mn), a.1 + (p.0 - mt) * (p.0 - mt)));
        num / den
    }
}

/// Coupling term with its residual phase exp(i delta t) in the rotating frame.
#[derive(Clone, Copy, Debug)]
struct Edge {
    row: usize,
    col: usize,
    value: C64,
    delta: f64,
    driven: bool,
}

/// Rotating frame and the time-dependent generator of one propagation.
struct Generator<'a> {
    js: &'a JointSpace,
    drive: Drive,
    diag: Vec<C64>,
    edges: Vec<Edge>,
    /// (ground index, excited index, 2 gamma) per jump, with frame phases.
    jumps: Vec<(usize, usize, f64)>,
    frame: Vec<f64>,
}

impl<'a> Generator<'a> {
    fn new(js: &'a JointSpace, drive: Drive) -> Self {
        let dim = js.dim;
        let mut raw: Vec<(usize, usize, C64, f64, bool)> = Vec::new();
        // (to, from, matrix element, frequency absorbed, driven)
        for k in 0..dim {
            for j in 0..dim {
                let (lk, nk) = js.split(k);
                let (lj, nj) = js.split(j);
                let m = js.v_dag[(k, j)];
                if m != C64::new(0.0, 0.0) && nk == nj {
                    raw.push((k, j, m * drive.amplitude, drive.omega, true));
                }
                if nk == nj + 1 && lk != lj {
                    let vm = js.v[(js.index(lk, nj), js.index(lj, nj))];
                    if vm != C64::new(0.0, 0.0) {
                        raw.push((k, j, vm * js.g * (nk as f64).sqrt(), 0.0, false));
                    }
                }
            }
        }
        let mut frame: Vec<Option<f64>> = vec![None; dim];
        let start = js.index(js.ground, 0);
        frame[start] = Some(0.0);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            let fx = frame[x].expect("visited");
            for &(to, from, _, w, driven) in &raw {
                // emission moves energy into the mode, so the frame phase is unchanged
                let shift = if driven { w } else { 0.0 };
                if from == x && frame[to].is_none() {
                    frame[to] = Some(fx + shift);
                    queue.push_back(to);
                } else if to == x && frame[from].is_none() {
                    frame[from] = Some(fx - shift);
                    queue.push_back(from);
                }
            }
        }
        let frame: Vec<f64> = (0..dim)
            .map(|k| {
                let (l, n) = js.split(k);
                frame[k].unwrap_or(js.level_energy[l] - js.level_energy[js.ground] + n as f64 * js.omega_s)
            })
            .collect();
        let e0 = js.level_energy[js.ground];
        let diag = (0..dim)
            .map(|k| {
                let (l, n) = js.split(k);
                C64::new(js.level_energy[l] - e0 + n as f64 * js.omega_s - frame[k], -js.widths[l])
            })
            .collect();
        let edges = raw
            .iter()
            .map(|&(to, from, value, w, driven)| Edge {
                row: to,
                col: from,
                value,
                delta: frame[to] - frame[from] - if driven { w } else { 0.0 },
                driven,
            })
            .collect();
        let mut jumps = Vec::new();
        for n in 0..=js.n_max {
            for l in 0..js.levels {
                if l != js.ground && js.widths[l] > 0.0 {
                    jumps.push((js.index(js.ground, n), js.index(l, n), 2.0 * js.widths[l]));
                }
            }
        }
        Generator { js, drive, diag, edges, jumps, frame }
    }

    fn max_frequency(&self) -> f64 {
        let mut e: Vec<f64> = self.diag.iter().map(|z| z.re).collect();
        e.extend(self.edges.iter().map(|x| x.delta.abs()));
        let hi = e.iter().cloned().fold(f64::MIN, f64::max);
        let lo = e.iter().cloned().fold(f64::MAX, f64::min);
        (hi - lo).max(self.edges.iter().map(|x| x.delta.abs()).fold(0.0, f64::max))
    }

    fn hamiltonian(&self, t: f64) -> CMatrix {
        let mut h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.diag.clone()));
        let env = self.drive.envelope.value(t);
        for e in &self.edges {
            let mut v = e.value * C64::from_polar(1.0, e.delta * t);
            if e.driven {
                v *= env;
            }
            h[(e.row, e.col)] += v;
            h[(e.col, e.row)] += v.conj();
        }
        h
    }

    fn rhs(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let h = self.hamiltonian(t);
        let mut out = (&h * rho - rho * h.adjoint()) * C64::new(0.0, -1.0);
        for &(g1, e1, r1) in &self.jumps {
            for &(g2, e2, _) in &self.jumps {
                if e1 % self.js.levels != e2 % self.js.levels {
                    continue;
                }
                let phase = (self.frame[g1] - self.frame[e1]) - (self.frame[g2] - self.frame[e2]);
                out[(g1, g2)] += r1 * rho[(e1, e2)] * C64::from_polar(1.0, phase * t);
            }
        }
        out
    }

    fn rk4(&self, t: f64, dt: f64, rho: &CMatrix) -> CMatrix {
        let k1 = self.rhs(t, rho);
        let k2 = self.rhs(t + 0.5 * dt, &(rho + &k1 * C64::new(0.5 * dt, 0.0)));
        let k3 = self.rhs(t + 0.5 * dt, &(rho + &k2 * C64::new(0.5 * dt, 0.0)));
        let k4 = self.rhs(t + dt, &(rho + &k3 * C64::new(dt, 0.0)));
        rho + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
    }
}

fn run(gen: &Generator, dt: f64, t_total: f64, t0: f64) -> Result<Trajectory> {
    let js = gen.js;
    let steps = (t_total / dt).round() as usize;
    let mut rho = CMatrix::zeros(js.dim, js.dim);
    let start = js.index(js.ground, 0);
    rho[(start, start)] = C64::new(1.0, 0.0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut photons = Vec::with_capacity(steps + 1);
    let number = |r: &CMatrix| -> f64 { (0..js.dim).map(|k| (js.number[(k, k)] * r[(k, k)]).re).sum() };
    times.push(t0);
    photons.push(0.0);
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        rho = gen.rk4(t, dt, &rho);
        let tr = rho.trace();
        if (tr - 1.0).norm() > 1e-9 {
            return Err(Error::Numerical(format!("trace drifted to {tr} at t = {:.3}", t + dt)));
        }
        let n = number(&rho);
        if n > 0.5 * js.n_max as f64 {
            return Err(Error::Numerical(format!(
                "photon number {n:.3} exceeds half of n_max = {}; raise n_max or weaken the drive",
                js.n_max
            )));
        }
        times.push(t + dt);
        photons.push(n);
    }
    let m = photons.len();
    let rate = (0..m)
        .map(|k| {
            if m < 2 {
                0.0
            } else if k == 0 {
                (photons[1] - photons[0]) / dt
            } else if k == m - 1 {
                (photons[k] - photons[k - 1]) / dt
            } else {
                (photons[k + 1] - photons[k - 1]) / (2.0 * dt)
            }
        })
        .collect();
    Ok(Trajectory { times, photon_number: photons, rate })
}

/// RK4 propagation from the joint ground state, checked against half the step.
pub fn propagate(joint: &JointSpace, drive: &Drive, cfg: &OracleConfig) -> Result<Trajectory> {
    if !(cfg.dt > 0.0) || !(cfg.t_total > 0.0) {
        return Err(Error::Config("dt and t_total must be positive".into()));
    }
    let gen = Generator::new(joint, *drive);
    let w = gen.max_frequency();
    if w > 0.0 && cfg.dt > 2.0 * std::f64::consts::PI / w / 20.0 {
        return Err(Error::Numerical(format!(
            "dt = {} gives fewer than 20 steps per period of the fastest rotating-frame frequency {w:.4}",
            cfg.dt
        )));
    }
    let t0 = drive.envelope.start();
    let fine = run(&gen, 0.5 * cfg.dt, cfg.t_total, t0)?;
    let coarse = run(&gen, cfg.dt, cfg.t_total, t0)?;
    let (a, b) = (coarse.photon_number.last().copied().unwrap_or(0.0), fine.photon_number.last().copied().unwrap_or(0.0));
    if (a - b).abs() > 1e-4 * b.abs().max(1e-300) {
        return Err(Error::Numerical(format!("step halving changed the photon number from {a:e} to {b:e}; reduce dt")));
    }
    Ok(coarse)
}

/// Steady emission rate into a single mode at each omega_s.
pub fn oracle_spectrum(scheme: &LevelScheme, drive: &Drive, omegas: &[f64], cfg: &OracleConfig) -> Result<Spectrum> {
    let rates: Result<Vec<f64>> = omegas
        .par_iter()
        .map(|&w| {
            let js = build_joint(scheme, w, cfg.n_max, cfg.volume)?;
            let tr = propagate(&js, drive, cfg)?;
            Ok(tr.fitted_rate(drive.envelope.start() + cfg.fit_from * cfg.t_total))
        })
        .collect();
    let meta = SpectrumMeta {
        quantity: "oracle photon emission rate".into(),
        prefactor_mode: PrefactorMode::Physical,
        scheme_digest: scheme.digest(),
        mode_digest: format!("omega1={} volume={} n_max={}", drive.omega, cfg.volume, cfg.n_max),
        notes: vec![format!("dt={} t_total={}", cfg.dt, cfg.t_total)],
    };
    Spectrum::new(vec![Axis { name: "omega_s".into(), values: omegas.to_vec() }], Values::Real(rates?), meta)
}

/// i <T V+^dagger(t) V-(tau)> for tau <= t by the regression procedure: apply
/// the commutator with V at tau, propagate the molecule master equation with
/// RK4, close with V^dagger.
pub fn regression_commutator(scheme: &LevelScheme, rho: &CMatrix, t: f64, tau: f64, dt: f64) -> Result<C64> {
    if tau > t || !(dt > 0.0) {
        return Err(Error::Config("need tau <= t and a positive dt".into()));
    }
    let part = partition_dipole(scheme)?;
    let n = scheme.dim();
    let e: Vec<f64> = scheme.shifted_levels();
    let w = scheme.level_widths();
    let g = scheme.ground;
    let rhs = |x: &CMatrix| -> CMatrix {
        let mut o = CMatrix::from_fn(n, n, |i, j| C64::new(-(w[i] + w[j]), -(e[i] - e[j])) * x[(i, j)]);
        for l in 0..n {
            if l != g {
                o[(g, g)] += 2.0 * w[l] * x[(l, l)];
            }
        }
        o
    };
    let mut x = &part.lowering * rho - rho * &part.lowering;
    let steps = ((t - tau) / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { (t - tau) / steps as f64 };
    let c = |s: f64| C64::new(s, 0.0);
    for _ in 0..steps {
        let k1 = rhs(&x);
        let k2 = rhs(&(&x + &k1 * c(0.5 * h)));
        let k3 = rhs(&(&x + &k2 * c(0.5 * h)));
        let k4 = rhs(&(&x + &k3 * c(h)));
        x += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0);
    }
    Ok(C64::i() * (&part.raising * x).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn joint_dimensions() {
        let js = build_joint(&presets::two_level(1.0, 0.1), 1.0, 1, 1.0).unwrap();
        assert_eq!(js.dim, 4);
        let ev: Vec<f64> = (0..4).map(|k| js.number[(k, k)].re).collect();
        assert_eq!(ev, vec![0.0, 0.0, 1.0, 1.0]);
        assert!(build_joint(&presets::two_level(1.0, 0.1), 1.0, 0, 1.0).is_err());
        let js = build_joint(&presets::kh_raman(), 1.0, 2, 1e6).unwrap();
        assert!((js.g * js.g - 2.0 * std::f64::consts::PI / 1e6).abs() < 1e-20);
    }

    #[test]
    fn undriven_ground_state_does_not_emit() {
        let js = build_joint(&presets::kh_raman(), 1.0, 2, 1e6).unwrap();
        let d = Drive::cw(1.5, C64::new(0.0, 0.0), 10.0);
        let tr = propagate(&js, &d, &OracleConfig { t_total: 50.0, ..Default::default() }).unwrap();
        assert!(tr.rate.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn resonant_two_level_emits() {
        let s = presets::two_level(1.0, 0.1);
        let js = build_joint(&s, 1.0, 2, 1e6).unwrap();
        let d = Drive::cw(1.0, C64::new(1e-3, 0.0), 10.0);
        let tr = propagate(&js, &d, &OracleConfig { t_total: 200.0, ..Default::default() }).unwrap();
        assert!(tr.fitted_rate(100.0) > 0.0);
    }
}
