//! Direct tensor-grid quadrature of loop and fully ordered integrands.
//!
//! Independent of the recursions in `time`: every integrated slot gets its
//! own offset grid below t and the integrands are evaluated point by point.

use serde::{Deserialize, Serialize};

use super::time::Source;
use crate::diagrams::{compile_time, decompose, generate_loops, loop_integrand, minus_i_pow, Interaction, Process, Slot};
use crate::error::{Error, Result};
use crate::model::{partition_dipole, LevelScheme, C64};
use crate::propagators::FreeEvolution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub step: f64,
    /// Points per integrated slot.
    pub cells: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridComparison {
    /// Sum of (-i)^{n_int} times the loop integrals.
    pub loops: C64,
    /// The same from every fully ordered term.
    pub feynman: C64,
    pub points: usize,
}

impl GridComparison {
    pub fn relative_difference(&self) -> f64 {
        (self.loops - self.feynman).norm() / self.loops.norm().max(f64::MIN_POSITIVE)
    }
}

/// Loop-form and ordered-form totals of a process on the same sample points.
pub fn grid_loops_vs_feynman(
    scheme: &LevelScheme,
    process: &Process,
    sources: &[Source],
    t: f64,
    cfg: &GridConfig,
) -> Result<GridComparison> {
    if !(cfg.step > 0.0) || cfg.cells == 0 {
        return Err(Error::Config("grid needs a positive step and at least one cell".into()));
    }
    let part = partition_dipole(scheme)?;
    let free = FreeEvolution::new(scheme);
    let loops = generate_loops(scheme, process)?;
    let d = process.expansion.len() + 1;
    let n_slots = if matches!(process.detection, crate::diagrams::Detection::Polarization { .. }) { d - 1 } else { d };
    let slot_of = |j: usize| if n_slots == d { if j == 0 { Slot::Probe } else { Slot::Expansion(j - 1) } } else { Slot::Expansion(j) };
    let delta = |j: usize| (j as f64 + 0.5) / n_slots as f64;
    let field = |int: &Interaction, x: f64| -> C64 {
        if int.slot == Slot::Observation && matches!(process.detection, crate::diagrams::Detection::Polarization { .. }) {
            return C64::new(1.0, 0.0);
        }
        let v = sources[int.mode].field(x);
        if int.conjugate_field() {
            v.conj()
        } else {
            v
        }
    };
    let total = cfg.cells.pow(n_slots as u32);
    let weight = cfg.step.powi(n_slots as i32);
    let mut idx = vec![0usize; n_slots];
    let (mut a, mut b) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let ordered: Vec<_> = loops
        .iter()
        .flat_map(|lp| decompose(lp).into_iter().map(move |fd| (minus_i_pow(lp.n_vertices() - 1), compile_time(&fd))))
        .collect();
    for flat in 0..total {
        let mut r = flat;
        for x in idx.iter_mut() {
            *x = r % cfg.cells;
            r /= cfg.cells;
        }
        let times = |s: Slot| -> f64 {
            match s {
                Slot::Observation => t,
                other => {
                    let j = (0..n_slots).find(|&j| slot_of(j) == other).expect("slot in range");
                    t - (idx[j] as f64 + delta(j)) * cfg.step
                }
            }
        };
        for lp in &loops {
            a += minus_i_pow(lp.n_vertices() - 1) * loop_integrand(lp, &free, &part, &times, &field);
        }
        for (c, ti) in &ordered {
            b += c * ti.evaluate(&free, &part, &times, &field);
        }
    }
    Ok(GridComparison { loops: a * weight, feynman: b * weight, points: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, Drive};

    #[test]
    fn sle_reshuffling_identity() {
        let s = presets::kh_raman();
        let sources = [Source::Classical(Drive::cw(1.5, C64::new(0.5, 0.2), 2.0)), Source::Vacuum { omega: 1.0 }];
        let c = grid_loops_vs_feynman(&s, &Process::sle(0, 1), &sources, 12.0, &GridConfig { step: 0.25, cells: 40 }).unwrap();
        assert!(c.loops.norm() > 0.0);
        assert!(c.relative_difference() <= 1e-8, "{c:?}");
    }
}
