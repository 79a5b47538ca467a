//! Stationary-beam signals from compiled loop expressions.

use serde::{Deserialize, Serialize};

use super::{head_weight, stationary_field};
use crate::diagrams::{compile_frequency, generate_loops, minus_i_pow, FieldFactor, FreqExpression, LoopDiagram, Process};
use crate::error::{Error, Result};
use crate::model::{partition_dipole, LevelScheme, ModelConstants, C64};

/// One loop's compiled expression and its amplitude including fields.
#[derive(Clone, Debug)]
pub struct LoopTerm {
    pub lp: LoopDiagram,
    pub expression: FreqExpression,
    /// Ground-state bracket of the operator string.
    pub bracket: C64,
    /// (-i)^{m} times prefactor, bracket and field factors; m = number of integrated times.
    pub amplitude: C64,
}

/// Enumerates, compiles and evaluates every loop of a process.
pub fn loop_terms(scheme: &LevelScheme, process: &Process, freqs: &[f64], amps: &[C64]) -> Result<Vec<LoopTerm>> {
    let part = partition_dipole(scheme)?;
    let loops = generate_loops(scheme, process)?;
    let mut out = Vec::with_capacity(loops.len());
    for lp in loops {
        let expression = compile_frequency(&lp, freqs)?;
        let bracket = expression.bracket_with(scheme, &part);
        let fields: C64 = lp
            .ket
            .iter()
            .chain(&lp.bra)
            .map(|i| stationary_field(i, process.detection, amps))
            .product();
        let amplitude = minus_i_pow(lp.n_vertices() - 1) * expression.scalar_prefactor * bracket * fields;
        out.push(LoopTerm { lp, expression, bracket, amplitude });
    }
    Ok(out)
}

/// Spontaneous rate from emissive loop amplitudes: -omega_s C Im sum Z.
fn spontaneous_rate(terms: &[LoopTerm], omega_s: f64, constants: &ModelConstants) -> f64 {
    let z: C64 = terms.iter().map(|t| t.amplitude).sum();
    -omega_s * constants.spontaneous_constant() * z.im
}

/// Spontaneous light emission at (omega1, omega2) for a stationary drive of field amplitude `e1`.
pub fn sle_frequency(
    scheme: &LevelScheme,
    omega1: f64,
    omega2: f64,
    e1: C64,
    constants: &ModelConstants,
) -> Result<f64> {
    constants.check()?;
    let terms = loop_terms(scheme, &Process::sle(0, 1), &[omega1, omega2], &[e1, C64::new(0.0, 0.0)])?;
    Ok(spontaneous_rate(&terms, omega2, constants))
}

/// Closed-form Raman line of a three-level scheme a < c < b with couplings a-b and b-c.
pub fn kramers_heisenberg(
    scheme: &LevelScheme,
    omega1: f64,
    omega2: f64,
    e1: C64,
    constants: &ModelConstants,
) -> Result<f64> {
    constants.check()?;
    partition_dipole(scheme)?;
    let bad = || Error::Physics("kramers_heisenberg needs a sequential three-level scheme (a-b, b-c, no a-c)".into());
    if scheme.dim() != 3 {
        return Err(bad());
    }
    let a = scheme.ground;
    let coupled: Vec<usize> = (0..3).filter(|&j| j != a && scheme.dipole[(a, j)].norm() > 0.0).collect();
    if coupled.len() != 1 {
        return Err(bad());
    }
    let b = coupled[0];
    let c = 3 - a - b;
    if scheme.dipole[(b, c)].norm() == 0.0 || scheme.levels[c] >= scheme.levels[b] {
        return Err(bad());
    }
    let w = scheme.shifted_levels();
    let g = scheme.effective_widths();
    let chi_sq = (scheme.dipole[(a, b)] * scheme.dipole[(b, c)]).norm_sqr() / C64::new(omega1 - w[b], g[b]).norm_sqr();
    let d = omega1 - omega2 - w[c];
    let lorentz = g[c] / std::f64::consts::PI / (d * d + g[c] * g[c]);
    Ok(constants.spontaneous_constant() * std::f64::consts::PI * omega2 * e1.norm_sqr() * chi_sq * lorentz)
}

/// Stimulated rate 2 Im[sum_A Z - sum_B Z] for any stimulated process.
pub fn stimulated_frequency(scheme: &LevelScheme, process: &Process, freqs: &[f64], amps: &[C64]) -> Result<f64> {
    let terms = loop_terms(scheme, process, freqs, amps)?;
    Ok(terms.iter().map(|t| 2.0 * head_weight(&t.lp) * t.amplitude.im).sum())
}

#[derive(Clone, Debug)]
pub struct PumpProbeSpectrum {
    pub total: f64,
    /// Each loop with its contribution to `total`.
    pub terms: Vec<(LoopTerm, f64)>,
}

/// Pump (mode 1) induced change of probe (mode 2) absorption, stationary beams.
pub fn pump_probe_frequency(scheme: &LevelScheme, omega1: f64, omega2: f64, e1: C64, e2: C64) -> Result<PumpProbeSpectrum> {
    let terms = loop_terms(scheme, &Process::pump_probe(0, 1), &[omega1, omega2], &[e1, e2])?;
    let terms: Vec<(LoopTerm, f64)> = terms
        .into_iter()
        .map(|t| {
            let c = 2.0 * head_weight(&t.lp) * t.amplitude.im;
            (t, c)
        })
        .collect();
    Ok(PumpProbeSpectrum { total: terms.iter().map(|t| t.1).sum(), terms })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingKind {
    Polarization,
    Incoherent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveMixing {
    Polarization { omega_s: f64, value: C64, vertex_count: usize },
    Incoherent { omega_s: f64, value: f64, vertex_count: usize },
}

/// (n+1)-wave mixing for n incoming field factors, n in {1, 2, 3}.
///
/// `freqs` and `amps` are indexed by mode; the signal mode is appended
/// internally. Polarization kind returns P^(n) at omega_s = sum of signed
/// frequencies. Incoherent kind returns the spontaneous signal at `omega_s`.
pub fn wave_mixing(
    scheme: &LevelScheme,
    kind: MixingKind,
    incoming: &[FieldFactor],
    freqs: &[f64],
    amps: &[C64],
    omega_s: Option<f64>,
    constants: &ModelConstants,
) -> Result<WaveMixing> {
    let n = incoming.len();
    if !(1..=3).contains(&n) {
        return Err(Error::Config(format!("wave mixing order must be 1, 2 or 3, got {n}")));
    }
    if freqs.len() != amps.len() || incoming.iter().any(|f| f.mode >= freqs.len()) {
        return Err(Error::Config("incoming factor refers to an unknown mode".into()));
    }
    let sig = freqs.len();
    let mut f = freqs.to_vec();
    let mut a = amps.to_vec();
    a.push(C64::new(0.0, 0.0));
    match kind {
        MixingKind::Polarization => {
            let ws: f64 = incoming.iter().map(|x| x.vertex.freq_sign() as f64 * freqs[x.mode]).sum();
            f.push(ws);
            let terms = loop_terms(scheme, &Process::polarization(incoming.to_vec(), sig), &f, &a)?;
            let value = terms.iter().map(|t| t.amplitude).sum();
            Ok(WaveMixing::Polarization { omega_s: ws, value, vertex_count: n + 1 })
        }
        MixingKind::Incoherent => {
            let ws = omega_s.ok_or_else(|| Error::Config("incoherent signal needs omega_s".into()))?;
            f.push(ws);
            let terms = loop_terms(scheme, &Process::incoherent(incoming, sig), &f, &a)?;
            constants.check()?;
            Ok(WaveMixing::Incoherent {
                omega_s: ws,
                value: spontaneous_rate(&terms, ws, constants),
                vertex_count: 2 * (n + 1),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn kh_values() {
        let s = presets::kh_raman();
        let c = ModelConstants::default();
        let v = kramers_heisenberg(&s, 1.5, 1.0, one(), &c).unwrap();
        let expect = 400.0 * 1.0 / (std::f64::consts::PI * 0.02);
        assert!((v - expect).abs() < 1e-5 * expect, "{v} {expect}");
        assert!(kramers_heisenberg(&presets::pump_probe_ladder(), 1.0, 0.5, one(), &c).is_err());
    }

    #[test]
    fn sle_matches_kh_at_peak() {
        let s = presets::kh_raman();
        let c = ModelConstants::default();
        let a = sle_frequency(&s, 1.5, 1.0, one(), &c).unwrap();
        let b = kramers_heisenberg(&s, 1.5, 1.0, one(), &c).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() <= 1e-10 * b, "{a} {b}");
    }

    #[test]
    fn zero_dipole_gives_zero() {
        let mut s = presets::kh_raman();
        s.dipole.fill(C64::new(0.0, 0.0));
        assert_eq!(sle_frequency(&s, 1.5, 1.0, one(), &ModelConstants::default()).unwrap(), 0.0);
    }

    #[test]
    fn mixing_order_checked() {
        let s = presets::two_level(1.0, 0.05);
        let r = wave_mixing(&s, MixingKind::Polarization, &[], &[1.0], &[one()], None, &ModelConstants::default());
        assert!(r.is_err());
    }

    #[test]
    fn incoherent_first_order_is_sle() {
        let s = presets::kh_raman();
        let c = ModelConstants::default();
        let w = wave_mixing(&s, MixingKind::Incoherent, &[FieldFactor::field(0)], &[1.5], &[one()], Some(0.97), &c).unwrap();
        let WaveMixing::Incoherent { value, vertex_count, .. } = w else { panic!() };
        assert_eq!(vertex_count, 4);
        let sle = sle_frequency(&s, 1.5, 0.97, one(), &c).unwrap();
        assert!((value - sle).abs() <= 1e-12 * sle.abs());
    }
}
