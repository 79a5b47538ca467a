//! Resolvents, free time propagators and coherent-state field Green's functions.
//!
//! The free Hamiltonian is diagonal in the level basis, so every propagator
//! is diagonal and evaluated in closed form. Each excited level i carries a
//! width gamma_i = Gamma_{i,g} plus the floor `ETA_MIN`.

use serde::{Deserialize, Serialize};

use crate::model::{FieldMode, LevelScheme, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Retarded,
    Advanced,
}

/// Diagonal of G(omega + omega_g) = (omega + omega_g - H0 + i gamma)^-1.
pub fn resolvent_diag(scheme: &LevelScheme, omega: f64, branch: Branch) -> Vec<C64> {
    let w = scheme.shifted_levels();
    let g = scheme.effective_widths();
    w.iter()
        .zip(&g)
        .map(|(&wi, &gi)| {
            let z = C64::new(omega - wi, gi).inv();
            match branch {
                Branch::Retarded => z,
                Branch::Advanced => z.conj(),
            }
        })
        .collect()
}

pub fn resolvent(scheme: &LevelScheme, omega: f64, branch: Branch) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(resolvent_diag(scheme, omega, branch)))
}

/// Resolvent of an explicit diagonal Hamiltonian with explicit widths, no floor.
pub fn resolvent_from_parts(h0: &[f64], widths: &[f64], omega: f64, branch: Branch) -> CMatrix {
    let d: Vec<C64> = h0
        .iter()
        .zip(widths)
        .map(|(&e, &w)| {
            let z = C64::new(omega - e, w).inv();
            if branch == Branch::Advanced {
                z.conj()
            } else {
                z
            }
        })
        .collect();
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
}

/// Left-hand operator of the resolvent equation, omega + omega_g - H0 + i gamma.
pub fn resolvent_operator(scheme: &LevelScheme, omega: f64) -> CMatrix {
    let w = scheme.shifted_levels();
    let g = scheme.effective_widths();
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        w.len(),
        w.iter().zip(&g).map(|(&wi, &gi)| C64::new(omega - wi, gi)),
    ))
}

/// Diagonal of exp(-i (H0 - i gamma) s) for s >= 0, zero for s < 0.
pub fn time_propagator_diag(scheme: &LevelScheme, s: f64) -> Vec<C64> {
    if s < 0.0 {
        return vec![C64::new(0.0, 0.0); scheme.dim()];
    }
    scheme
        .levels
        .iter()
        .zip(scheme.effective_widths())
        .map(|(&w, g)| C64::from_polar((-g * s).exp(), -w * s))
        .collect()
}

pub fn time_propagator(scheme: &LevelScheme, s: f64) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(time_propagator_diag(scheme, s)))
}

/// Same as `time_propagator_diag` with energies measured from the ground level.
pub fn shifted_propagator_diag(scheme: &LevelScheme, s: f64) -> Vec<C64> {
    if s < 0.0 {
        return vec![C64::new(0.0, 0.0); scheme.dim()];
    }
    scheme
        .shifted_levels()
        .iter()
        .zip(scheme.effective_widths())
        .map(|(&w, g)| C64::from_polar((-g * s).exp(), -w * s))
        .collect()
}

/// Free evolution seen by diagram evaluators.
///
/// Energies are measured from the ground level. A strand that has not yet
/// interacted sits in the stationary ground state and does not decay; once a
/// strand has interacted, a return to the ground level carries the floor width.
#[derive(Clone, Debug)]
pub struct FreeEvolution {
    pub energies: Vec<f64>,
    pub widths: Vec<f64>,
    pub ground: usize,
}

impl FreeEvolution {
    pub fn new(scheme: &LevelScheme) -> Self {
        FreeEvolution { energies: scheme.shifted_levels(), widths: scheme.effective_widths(), ground: scheme.ground }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn width(&self, level: usize, touched: bool) -> f64 {
        if level == self.ground && !touched {
            0.0
        } else {
            self.widths[level]
        }
    }

    /// exp(-i E_k s - w_k s) for an interacted strand, s >= 0.
    pub fn strand_diag(&self, s: f64) -> Vec<C64> {
        self.energies
            .iter()
            .zip(&self.widths)
            .map(|(&e, &w)| C64::from_polar((-w * s).exp(), -e * s))
            .collect()
    }

    /// Propagation factors of rho_{kb} over s for the given strand states.
    pub fn liouville_diag(&self, s: f64, ket_touched: bool, bra_touched: bool) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |k, b| {
            let w = self.width(k, ket_touched) + self.width(b, bra_touched);
            C64::from_polar((-w * s).exp(), -(self.energies[k] - self.energies[b]) * s)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreenKind {
    LR,
    RL,
}

/// Field Green's function d^{ss'}_{XY}(t, tau) for coherent-state modes.
pub fn field_green(modes: &[FieldMode], kind: GreenKind, s: usize, sp: usize, t: f64, tau: f64) -> C64 {
    let (a, b) = (&modes[s], &modes[sp]);
    let phase = C64::from_polar(1.0, -a.omega * t + b.omega * tau);
    let mut occ = a.alpha * b.alpha.conj();
    if kind == GreenKind::RL && s == sp {
        occ += 1.0;
    }
    -C64::i() * phase * occ
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, Role};

    #[test]
    fn scalar_resolvent() {
        let g = resolvent_from_parts(&[0.0], &[0.1], 0.0, Branch::Retarded);
        assert!((g[(0, 0)] - C64::new(0.0, -10.0)).norm() < 1e-12);
    }

    #[test]
    fn raman_resonant_entry() {
        let g = resolvent(&presets::kh_raman(), 1.5, Branch::Retarded);
        assert!((g[(1, 1)] - C64::new(0.0, -20.0)).norm() < 1e-6);
    }

    #[test]
    fn propagator_limits() {
        let s = presets::two_level(1.0, 0.0);
        let u0 = time_propagator(&s, 0.0);
        assert_eq!(u0, CMatrix::identity(2, 2));
        assert_eq!(time_propagator(&s, -1.0), CMatrix::zeros(2, 2));
        let u = time_propagator(&s, std::f64::consts::PI);
        assert!((u[(1, 1)] + 1.0).norm() < 1e-8);
    }

    #[test]
    fn field_green_values() {
        let vac = vec![FieldMode::new([0.0; 3], 1.0, C64::new(0.0, 0.0), Role::Signal)];
        assert_eq!(field_green(&vac, GreenKind::LR, 0, 0, 0.3, 0.1), C64::new(0.0, 0.0));
        let rl = field_green(&vac, GreenKind::RL, 0, 0, 0.7, 0.7);
        assert!((rl - C64::new(0.0, -1.0)).norm() < 1e-15);
        let m = vec![
            FieldMode::new([0.0; 3], 1.0, C64::new(2.0, 0.0), Role::Incoming),
            FieldMode::new([0.0; 3], 2.0, C64::new(0.0, 1.0), Role::Incoming),
        ];
        let v = field_green(&m, GreenKind::LR, 0, 1, 0.0, 0.0);
        assert!((v - C64::new(-2.0, 0.0)).norm() < 1e-15);
    }
}
