//! Signals of N noninteracting molecules: incoherent and coherent parts,
//! phase matching and heterodyne detection.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{partition_dipole, FieldMode, LevelScheme, ModelConstants, Role, C64};
use crate::propagators::{resolvent_diag, Branch};

pub const DEFAULT_SEED: u64 = 0x5eed_2011;

/// Pair sums above this size are split across threads.
const PARALLEL_PAIRS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub positions: Vec<[f64; 3]>,
    /// Signal wavevector minus the signed sum of incoming wavevectors.
    pub delta_k: [f64; 3],
}

impl EnsembleConfig {
    pub fn new(positions: Vec<[f64; 3]>, delta_k: [f64; 3]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("an ensemble needs at least one molecule".into()));
        }
        if positions.iter().flatten().chain(&delta_k).any(|x| !x.is_finite()) {
            return Err(Error::Config("positions and delta_k must be finite".into()));
        }
        Ok(EnsembleConfig { positions, delta_k })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    fn phase(&self, r: &[f64; 3]) -> f64 {
        self.delta_k.iter().zip(r).map(|(k, x)| k * x).sum()
    }
}

/// `n` positions drawn uniformly from the cube [0, extent]^3.
pub fn random_positions(n: usize, extent: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| [rng.gen::<f64>() * extent, rng.gen::<f64>() * extent, rng.gen::<f64>() * extent]).collect()
}

/// k_s minus the signed sum of incoming wavevectors.
pub fn delta_k(signal: [f64; 3], incoming: &[([f64; 3], i32)]) -> [f64; 3] {
    let mut d = signal;
    for (k, s) in incoming {
        for i in 0..3 {
            d[i] -= *s as f64 * k[i];
        }
    }
    d
}

/// F(dk) = sum over alpha != beta of exp(-i dk.(r_alpha - r_beta)), summed as cosines.
pub fn phase_matching(config: &EnsembleConfig) -> f64 {
    let ph: Vec<f64> = config.positions.iter().map(|r| config.phase(r)).collect();
    let row = |a: usize| -> f64 { ph[a + 1..].iter().map(|p| (ph[a] - p).cos()).sum() };
    let half: f64 = if ph.len() > PARALLEL_PAIRS {
        (0..ph.len()).into_par_iter().map(row).sum()
    } else {
        (0..ph.len()).map(row).sum()
    };
    2.0 * half
}

/// The same double sum evaluated term by term in complex arithmetic.
pub fn pair_sum(config: &EnsembleConfig) -> C64 {
    let ph: Vec<f64> = config.positions.iter().map(|r| config.phase(r)).collect();
    let mut s = C64::new(0.0, 0.0);
    for (a, pa) in ph.iter().enumerate() {
        for (b, pb) in ph.iter().enumerate() {
            if a != b {
                s += C64::from_polar(1.0, -(pa - pb));
            }
        }
    }
    s
}

/// f(dk) = sum over alpha of exp(-i dk.r_alpha).
pub fn structure_factor(config: &EnsembleConfig) -> C64 {
    config.positions.iter().map(|r| C64::from_polar(1.0, -config.phase(r))).sum()
}

/// N S_I + F(dk) S_C.
pub fn total_spontaneous(s_i: f64, s_c: f64, config: &EnsembleConfig) -> f64 {
    config.n() as f64 * s_i + phase_matching(config) * s_c
}

/// Heterodyne rate 2 Im[E_lo* P f(dk)] with the local oscillator taken from `modes`.
pub fn heterodyne_signal(
    polarization: C64,
    modes: &[FieldMode],
    t: f64,
    constants: &ModelConstants,
    config: &EnsembleConfig,
) -> Result<f64> {
    let lo = modes
        .iter()
        .find(|m| m.role == Role::LocalOscillator)
        .ok_or_else(|| Error::Config("heterodyne detection needs a local_oscillator mode".into()))?;
    let env = lo.envelope.map_or(1.0, |e| e.value(t));
    let field = constants.field_amplitude(lo) * env * C64::from_polar(1.0, -lo.omega * t);
    Ok(2.0 * (field.conj() * polarization * structure_factor(config)).im)
}

/// First-order expectation <V> of one molecule under a stationary drive,
/// evaluated with V acting from the left or from the right.
fn first_order_dipole(scheme: &LevelScheme, omega: f64, amp: C64, x: f64, from_right: bool, dagger: bool) -> Result<C64> {
    let part = partition_dipole(scheme)?;
    let n = scheme.dim();
    let g = resolvent_diag(scheme, omega, Branch::Retarded);
    let e = amp * C64::from_polar(1.0, -omega * x);
    let psi: Vec<C64> = (0..n).map(|i| e * g[i] * part.raising[(i, scheme.ground)]).collect();
    let mut rho = crate::model::CMatrix::zeros(n, n);
    for i in 0..n {
        rho[(i, scheme.ground)] += psi[i];
        rho[(scheme.ground, i)] += psi[i].conj();
    }
    let v = if dagger { &part.raising } else { &part.lowering };
    Ok(if from_right { (&rho * v).trace() } else { (v * &rho).trace() })
}

/// Stationary drive and detection settings for the distinct-molecule terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDrive {
    pub omega: f64,
    pub amplitude: C64,
    pub detected_omega: f64,
    pub detected_amplitude: C64,
    /// Observation time and length of the tau window before it.
    pub t: f64,
    pub window: f64,
}

fn tau_grid(p: &PairDrive) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = 2000;
    let h = p.window / n as f64;
    (0..=n).map(move |k| (p.t - p.window + k as f64 * h, if k == 0 || k == n { 0.5 * h } else { h }))
}

/// Distinct-molecule part of the stimulated signal. The correlators factorize
/// into single-molecule expectations, which do not depend on the side the
/// vertex acts on, so A_R B_L - A_L B_R vanishes.
pub fn stimulated_coherent_term(a: &LevelScheme, b: &LevelScheme, p: &PairDrive) -> Result<f64> {
    let et = p.detected_amplitude * C64::from_polar(1.0, -p.detected_omega * p.t);
    let bl = first_order_dipole(b, p.omega, p.amplitude, p.t, false, true)?;
    let br = first_order_dipole(b, p.omega, p.amplitude, p.t, true, true)?;
    let mut s = C64::new(0.0, 0.0);
    for (tau, w) in tau_grid(p) {
        let ar = first_order_dipole(a, p.omega, p.amplitude, tau, true, false)?;
        let al = first_order_dipole(a, p.omega, p.amplitude, tau, false, false)?;
        let etau = p.detected_amplitude * C64::from_polar(1.0, -p.detected_omega * tau);
        s += w * (ar * bl - al * br) * et * etau.conj();
    }
    Ok(2.0 * s.im)
}

/// Distinct-molecule part of spontaneous emission, which survives factorization.
pub fn spontaneous_pair_term(a: &LevelScheme, b: &LevelScheme, p: &PairDrive, constants: &ModelConstants) -> Result<f64> {
    let at = first_order_dipole(a, p.omega, p.amplitude, p.t, false, false)?;
    let mut s = C64::new(0.0, 0.0);
    for (tau, w) in tau_grid(p) {
        let bt = first_order_dipole(b, p.omega, p.amplitude, tau, true, true)?;
        s += w * C64::from_polar(1.0, p.detected_omega * (p.t - tau)) * at * bt;
    }
    Ok(-p.detected_omega * constants.spontaneous_constant() * s.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn small_sums() {
        let c = EnsembleConfig::new(vec![[0.0; 3]; 7], [0.0; 3]).unwrap();
        assert_eq!(phase_matching(&c), 42.0);
        let c = EnsembleConfig::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], [std::f64::consts::PI, 0.0, 0.0]).unwrap();
        assert!((phase_matching(&c) + 2.0).abs() < 1e-12);
        assert!(structure_factor(&c).norm() < 1e-12);
        assert!(EnsembleConfig::new(vec![], [0.0; 3]).is_err());
    }

    #[test]
    fn stimulated_pair_cancels_spontaneous_does_not() {
        let s = presets::kh_raman();
        let p = PairDrive { omega: 1.45, amplitude: C64::new(0.3, 0.1), detected_omega: 1.4, detected_amplitude: C64::new(1.0, 0.0), t: 20.0, window: 20.0 };
        assert!(stimulated_coherent_term(&s, &s, &p).unwrap().abs() <= 1e-12);
        assert!(spontaneous_pair_term(&s, &s, &p, &ModelConstants::default()).unwrap().abs() > 1e-6);
    }
}
