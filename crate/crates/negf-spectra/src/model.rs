//! Level schemes, dipole partition, field modes and drives.
//!
//! hbar = 1 throughout. Frequencies are angular, wavevectors are in inverse
//! model length.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Broadening floor added to every level width.
pub const ETA_MIN: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LevelScheme {
    pub levels: Vec<f64>,
    pub ground: usize,
    pub dipole: CMatrix,
    pub dephasing: DMatrix<f64>,
}

/// A failed scheme invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Empty,
    ShapeMismatch,
    NonFiniteLevel,
    GroundOutOfRange,
    GroundNotMinimum,
    DipoleNotHermitian,
    DipoleDiagonalNonzero,
    DephasingNotSymmetric,
    DephasingNegative,
    DephasingDiagonalNonzero,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::Empty => "no levels",
            Violation::ShapeMismatch => "matrix shape mismatch",
            Violation::NonFiniteLevel => "level frequency not finite",
            Violation::GroundOutOfRange => "ground index out of range",
            Violation::GroundNotMinimum => "ground not minimum",
            Violation::DipoleNotHermitian => "dipole not Hermitian",
            Violation::DipoleDiagonalNonzero => "dipole diagonal nonzero",
            Violation::DephasingNotSymmetric => "dephasing not symmetric",
            Violation::DephasingNegative => "dephasing negative",
            Violation::DephasingDiagonalNonzero => "dephasing diagonal nonzero",
        };
        f.write_str(s)
    }
}

/// Lists every violated invariant; empty when the scheme is valid.
pub fn validate_scheme(scheme: &LevelScheme) -> Vec<Violation> {
    let n = scheme.levels.len();
    let mut out = Vec::new();
    if n == 0 {
        out.push(Violation::Empty);
        return out;
    }
    if scheme.dipole.shape() != (n, n) || scheme.dephasing.shape() != (n, n) {
        out.push(Violation::ShapeMismatch);
        return out;
    }
    if scheme.levels.iter().any(|w| !w.is_finite()) {
        out.push(Violation::NonFiniteLevel);
    }
    if scheme.ground >= n {
        out.push(Violation::GroundOutOfRange);
    } else {
        let wg = scheme.levels[scheme.ground];
        if scheme.levels.iter().any(|&w| w < wg) {
            out.push(Violation::GroundNotMinimum);
        }
    }
    let scale = scheme.dipole.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut herm = true;
    let mut diag = false;
    for i in 0..n {
        if scheme.dipole[(i, i)].norm() > 0.0 {
            diag = true;
        }
        for j in 0..n {
            if (scheme.dipole[(i, j)] - scheme.dipole[(j, i)].conj()).norm() > HERMITIAN_TOL * scale {
                herm = false;
            }
        }
    }
    if !herm {
        out.push(Violation::DipoleNotHermitian);
    }
    if diag {
        out.push(Violation::DipoleDiagonalNonzero);
    }
    let g = &scheme.dephasing;
    if (0..n).any(|i| (0..n).any(|j| g[(i, j)] != g[(j, i)])) {
        out.push(Violation::DephasingNotSymmetric);
    }
    if g.iter().any(|&x| x < 0.0 || x.is_nan()) {
        out.push(Violation::DephasingNegative);
    }
    if (0..n).any(|i| g[(i, i)] != 0.0) {
        out.push(Violation::DephasingDiagonalNonzero);
    }
    out
}

impl LevelScheme {
    /// Builds a scheme and checks every invariant.
    pub fn new(levels: Vec<f64>, ground: usize, dipole: CMatrix, dephasing: DMatrix<f64>) -> Result<Self> {
        let s = LevelScheme { levels, ground, dipole, dephasing };
        let v = validate_scheme(&s);
        if v.is_empty() {
            Ok(s)
        } else {
            Err(Error::InvalidScheme(v))
        }
    }

    /// Real symmetric couplings and ground-referenced widths, a common shorthand.
    pub fn from_real(levels: &[f64], couplings: &[(usize, usize, f64)], widths: &[(usize, f64)]) -> Result<Self> {
        let n = levels.len();
        let mut mu = CMatrix::zeros(n, n);
        for &(i, j, m) in couplings {
            mu[(i, j)] = C64::new(m, 0.0);
            mu[(j, i)] = C64::new(m, 0.0);
        }
        let ground = argmin(levels);
        let mut gam = DMatrix::zeros(n, n);
        for &(i, w) in widths {
            gam[(i, ground)] = w;
            gam[(ground, i)] = w;
        }
        LevelScheme::new(levels.to_vec(), ground, mu, gam)
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn ground_frequency(&self) -> f64 {
        self.levels[self.ground]
    }

    /// Level frequencies measured from the ground state.
    pub fn shifted_levels(&self) -> Vec<f64> {
        let wg = self.ground_frequency();
        self.levels.iter().map(|w| w - wg).collect()
    }

    /// Decay rate of each level's amplitude, gamma_i = Gamma_{i,g}, without the floor.
    pub fn level_widths(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| if i == self.ground { 0.0 } else { self.dephasing[(i, self.ground)] })
            .collect()
    }

    /// Level widths including the broadening floor.
    pub fn effective_widths(&self) -> Vec<f64> {
        self.level_widths().into_iter().map(|g| g + ETA_MIN).collect()
    }

    /// Largest Bohr frequency between any two levels.
    pub fn max_bohr(&self) -> f64 {
        let lo = self.levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Relabels levels: new level k is old level perm[k].
    pub fn permuted(&self, perm: &[usize]) -> LevelScheme {
        let n = self.dim();
        let levels = perm.iter().map(|&p| self.levels[p]).collect();
        let ground = perm.iter().position(|&p| p == self.ground).unwrap_or(0);
        let dipole = CMatrix::from_fn(n, n, |i, j| self.dipole[(perm[i], perm[j])]);
        let dephasing = DMatrix::from_fn(n, n, |i, j| self.dephasing[(perm[i], perm[j])]);
        LevelScheme { levels, ground, dipole, dephasing }
    }

    /// Same scheme with the given levels removed.
    pub fn truncated(&self, keep: &[usize]) -> Result<LevelScheme> {
        let levels = keep.iter().map(|&p| self.levels[p]).collect::<Vec<_>>();
        let ground = argmin(&levels);
        let k = keep.len();
        let dipole = CMatrix::from_fn(k, k, |i, j| self.dipole[(keep[i], keep[j])]);
        let dephasing = DMatrix::from_fn(k, k, |i, j| self.dephasing[(keep[i], keep[j])]);
        LevelScheme::new(levels, ground, dipole, dephasing)
    }

    /// Short stable fingerprint used in spectrum metadata.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        self.levels.iter().for_each(|&x| eat(x));
        eat(self.ground as f64);
        self.dipole.iter().for_each(|z| {
            eat(z.re);
            eat(z.im)
        });
        self.dephasing.iter().for_each(|&x| eat(x));
        format!("{h:016x}")
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut k = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[k] {
            k = i;
        }
    }
    k
}

/// Split mu = V + V^dagger into lowering and raising parts.
#[derive(Clone, Debug, PartialEq)]
pub struct DipolePartition {
    pub lowering: CMatrix,
    pub raising: CMatrix,
}

pub fn partition_dipole(scheme: &LevelScheme) -> Result<DipolePartition> {
    let v = validate_scheme(scheme);
    if !v.is_empty() {
        return Err(Error::InvalidScheme(v));
    }
    let n = scheme.dim();
    let mut lowering = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let m = scheme.dipole[(i, j)];
            if m == C64::new(0.0, 0.0) {
                continue;
            }
            let (wi, wj) = (scheme.levels[i], scheme.levels[j]);
            if wi == wj {
                return Err(Error::DegenerateCoupling(i.min(j), i.max(j)));
            }
            if wi < wj {
                lowering[(i, j)] = m;
            }
        }
    }
    let raising = lowering.adjoint();
    Ok(DipolePartition { lowering, raising })
}

/// Whether the photon mode drives, is detected spontaneously, or serves as a reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Incoming,
    Signal,
    LocalOscillator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMode {
    #[serde(rename = "k")]
    pub wavevector: [f64; 3],
    pub omega: f64,
    #[serde(with = "pair")]
    pub alpha: C64,
    pub role: Role,
    #[serde(default)]
    pub envelope: Option<Envelope>,
}

impl FieldMode {
    pub fn new(wavevector: [f64; 3], omega: f64, alpha: C64, role: Role) -> Self {
        FieldMode { wavevector, omega, alpha, role, envelope: None }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Config(format!("mode frequency must be positive, got {}", self.omega)));
        }
        if self.role == Role::Signal && self.alpha.norm() != 0.0 {
            return Err(Error::Physics("spontaneous signal mode must start in vacuum (alpha = 0)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorMode {
    Physical,
    #[default]
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    #[serde(default)]
    pub prefactor_mode: PrefactorMode,
    /// Quantization volume Omega.
    #[serde(default = "default_volume")]
    pub volume: f64,
}

fn default_volume() -> f64 {
    1.0
}

impl Default for ModelConstants {
    fn default() -> Self {
        ModelConstants { prefactor_mode: PrefactorMode::Normalized, volume: 1.0 }
    }
}

impl ModelConstants {
    pub const HBAR: f64 = 1.0;

    pub fn physical(volume: f64) -> Self {
        ModelConstants { prefactor_mode: PrefactorMode::Physical, volume }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.volume > 0.0) || !self.volume.is_finite() {
            return Err(Error::Config(format!("quantization volume must be positive, got {}", self.volume)));
        }
        Ok(())
    }

    /// Squared vacuum coupling g^2 = 2 pi omega / Omega.
    pub fn coupling_sq(&self, omega: f64) -> f64 {
        2.0 * PI * omega / self.volume
    }

    /// Field amplitude of a coherent state, sqrt(2 pi omega / Omega) alpha.
    pub fn field_amplitude(&self, mode: &FieldMode) -> C64 {
        self.coupling_sq(mode.omega).sqrt() * mode.alpha
    }

    /// Constant multiplying a spontaneous rate: 4 pi / Omega, or 1/pi when normalized.
    pub fn spontaneous_constant(&self) -> f64 {
        match self.prefactor_mode {
            PrefactorMode::Physical => 4.0 * PI / self.volume,
            PrefactorMode::Normalized => 1.0 / PI,
        }
    }
}

/// Slowly varying envelope of a classical drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// Switched on at t = 0 with a sin^2 ramp of the given length.
    Cw { ramp: f64 },
    Gaussian { center: f64, width: f64 },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Cw { ramp } => {
                if t < 0.0 {
                    0.0
                } else if t < ramp {
                    let s = (0.5 * PI * t / ramp).sin();
                    s * s
                } else {
                    1.0
                }
            }
            Envelope::Gaussian { center, width } => {
                let x = (t - center) / width;
                (-0.5 * x * x).exp()
            }
        }
    }

    /// Time before which the envelope is treated as zero.
    pub fn start(&self) -> f64 {
        match *self {
            Envelope::Cw { .. } => 0.0,
            Envelope::Gaussian { center, width } => center - 8.0 * width,
        }
    }
}

/// A classical drive: field E(t) = amplitude * envelope(t) * exp(-i omega t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub omega: f64,
    #[serde(with = "pair")]
    pub amplitude: C64,
    pub envelope: Envelope,
}

impl Drive {
    pub fn cw(omega: f64, amplitude: C64, ramp: f64) -> Self {
        Drive { omega, amplitude, envelope: Envelope::Cw { ramp } }
    }

    pub fn from_mode(mode: &FieldMode, constants: &ModelConstants) -> Self {
        Drive {
            omega: mode.omega,
            amplitude: constants.field_amplitude(mode),
            envelope: mode.envelope.unwrap_or(Envelope::Cw { ramp: 0.0 }),
        }
    }

    pub fn field(&self, t: f64) -> C64 {
        let e = self.envelope.value(t);
        if e == 0.0 {
            return C64::new(0.0, 0.0);
        }
        self.amplitude * e * C64::from_polar(1.0, -self.omega * t)
    }

    pub fn is_off(&self) -> bool {
        self.amplitude.norm() == 0.0
    }
}

/// Complex numbers as `[re, im]` in configuration files.
pub(crate) mod pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// On-disk configuration document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigFile {
    pub levels: Vec<f64>,
    #[serde(default)]
    pub ground: Option<usize>,
    pub dipole: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub dephasing: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub modes: Vec<FieldMode>,
    #[serde(default)]
    pub constants: ModelConstants,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Scheme, modes and constants loaded from a configuration file.
#[derive(Clone, Debug)]
pub struct Model {
    pub scheme: LevelScheme,
    pub modes: Vec<FieldMode>,
    pub constants: ModelConstants,
}

impl ConfigFile {
    pub fn into_model(self) -> Result<Model> {
        let n = self.levels.len();
        if self.dipole.len() != n || self.dipole.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("dipole must be {n}x{n}")));
        }
        let dipole = CMatrix::from_fn(n, n, |i, j| C64::new(self.dipole[i][j][0], self.dipole[i][j][1]));
        let dephasing = match &self.dephasing {
            None => DMatrix::zeros(n, n),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("dephasing must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        let ground = self.ground.unwrap_or_else(|| argmin(&self.levels));
        let scheme = LevelScheme::new(self.levels, ground, dipole, dephasing)?;
        self.constants.check()?;
        for m in &self.modes {
            m.check()?;
        }
        Ok(Model { scheme, modes: self.modes, constants: self.constants })
    }
}

impl Model {
    pub fn from_json(text: &str) -> Result<Model> {
        let cfg: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.into_model()
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Model::from_json(&text)
    }

    pub fn mode_with_role(&self, role: Role) -> Option<&FieldMode> {
        self.modes.iter().find(|m| m.role == role)
    }
}

/// Ready-made level schemes.
pub mod presets {
    use super::*;

    /// Raman scheme: ground a, intermediate b at 1.5, final c at 0.5.
    pub fn kh_raman() -> LevelScheme {
        LevelScheme::from_real(&[0.0, 1.5, 0.5], &[(0, 1, 1.0), (1, 2, 1.0)], &[(1, 0.05), (2, 0.02)])
            .expect("preset is valid")
    }

    /// Ladder a < b < c with sequential couplings, used for pump-probe.
    pub fn pump_probe_ladder() -> LevelScheme {
        LevelScheme::from_real(&[0.0, 1.0, 1.8], &[(0, 1, 1.0), (1, 2, 0.8)], &[(1, 0.05), (2, 0.04)])
            .expect("preset is valid")
    }

    pub fn two_level(omega: f64, gamma: f64) -> LevelScheme {
        LevelScheme::from_real(&[0.0, omega], &[(0, 1, 1.0)], &[(1, gamma)]).expect("preset is valid")
    }

    /// Ladder with a direct a-c coupling so that two-photon processes close.
    pub fn shg_ladder(omega_b: f64, omega_c: f64) -> LevelScheme {
        LevelScheme::from_real(
            &[0.0, omega_b, omega_c],
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 0.5)],
            &[(1, 0.05), (2, 0.03)],
        )
        .expect("preset is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_partition() {
        let s = presets::two_level(1.5, 0.0);
        let p = partition_dipole(&s).unwrap();
        assert_eq!(p.lowering[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(p.lowering.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn raman_partition_entries() {
        let s = presets::kh_raman();
        let p = partition_dipole(&s).unwrap();
        let nz: Vec<_> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| p.lowering[(i, j)].norm() > 0.0)
            .collect();
        assert_eq!(nz, vec![(0, 1), (2, 1)]);
        assert_eq!(&p.lowering + &p.raising, s.dipole);
    }

    #[test]
    fn diagonal_dipole_rejected() {
        let mut s = presets::two_level(1.0, 0.1);
        s.dipole[(1, 1)] = C64::new(0.3, 0.0);
        assert!(matches!(partition_dipole(&s), Err(Error::InvalidScheme(_))));
    }

    #[test]
    fn degenerate_coupling_rejected() {
        let s = LevelScheme::from_real(&[0.0, 1.0, 1.0], &[(0, 1, 1.0), (1, 2, 1.0)], &[]).unwrap();
        assert!(matches!(partition_dipole(&s), Err(Error::DegenerateCoupling(1, 2))));
        let ok = LevelScheme::from_real(&[0.0, 1.0, 1.0], &[(0, 1, 1.0), (0, 2, 1.0)], &[]).unwrap();
        assert!(partition_dipole(&ok).is_ok());
    }

    #[test]
    fn violations_named() {
        assert!(validate_scheme(&presets::kh_raman()).is_empty());
        let mut s = presets::kh_raman();
        s.dipole[(0, 1)] = C64::new(1.0, 0.5);
        assert_eq!(validate_scheme(&s), vec![Violation::DipoleNotHermitian]);
        assert_eq!(Violation::DipoleNotHermitian.to_string(), "dipole not Hermitian");
        let mut s = presets::kh_raman();
        s.dephasing[(1, 0)] = -0.1;
        s.dephasing[(0, 1)] = -0.1;
        assert_eq!(validate_scheme(&s), vec![Violation::DephasingNegative]);
        assert_eq!(Violation::DephasingNegative.to_string(), "dephasing negative");
    }

    #[test]
    fn envelope_shapes() {
        let e = Envelope::Cw { ramp: 10.0 };
        assert_eq!(e.value(-1.0), 0.0);
        assert!((e.value(5.0) - 0.5).abs() < 1e-15);
        assert_eq!(e.value(20.0), 1.0);
        let g = Envelope::Gaussian { center: 3.0, width: 2.0 };
        assert_eq!(g.value(3.0), 1.0);
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"levels":[0,1.5,0.5],"dipole":[[[0,0],[1,0],[0,0]],[[1,0],[0,0],[1,0]],[[0,0],[1,0],[0,0]]],
            "dephasing":[[0,0.05,0.02],[0.05,0,0],[0.02,0,0]],
            "modes":[{"k":[0,0,1],"omega":1.5,"alpha":[1,0],"role":"incoming"}],
            "constants":{"prefactor_mode":"normalized","volume":1.0}}"#;
        let m = Model::from_json(text).unwrap();
        assert_eq!(m.scheme, presets::kh_raman());
        assert_eq!(m.modes[0].role, Role::Incoming);
        assert!(Model::from_json("{").is_err());
    }

    #[test]
    fn spontaneous_signal_mode_must_be_vacuum() {
        let m = FieldMode::new([0.0; 3], 1.0, C64::new(0.1, 0.0), Role::Signal);
        assert!(m.check().is_err());
    }
}
