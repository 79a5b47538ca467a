//! Heterodyne-detected third-order polarization against a local oscillator,
//! for one molecule and a phase-matched ensemble.

use negf_spectra::diagrams::FieldFactor;
use negf_spectra::ensemble::{heterodyne_signal, random_positions, EnsembleConfig};
use negf_spectra::kernels::{heterodyne_time, QuadratureConfig};
use negf_spectra::model::{presets, Drive, Envelope, FieldMode, ModelConstants, Role};
use negf_spectra::C64;

/// Returns (single-molecule signal, ten-molecule signal).
pub fn run_example() -> (f64, f64) {
    let s = presets::pump_probe_ladder();
    let c = ModelConstants::default();
    let env = Some(Envelope::Cw { ramp: 2.0 });
    let pump = FieldMode { envelope: env, ..FieldMode::new([1.0, 0.0, 0.0], 1.0, C64::new(0.05, 0.0), Role::Incoming) };
    let lo = FieldMode { envelope: env, ..FieldMode::new([0.9, 0.3, 0.0], 0.8, C64::new(0.03, 0.0), Role::LocalOscillator) };
    let drives = [Drive::from_mode(&pump, &c), Drive::from_mode(&lo, &c)];
    let q = QuadratureConfig::default();
    let t = 12.0;
    let p3 = heterodyne_time(&s, &[FieldFactor::conj(0), FieldFactor::field(0), FieldFactor::field(1)], &drives, t, &q).unwrap();
    let p1 = heterodyne_time(&s, &[FieldFactor::field(1)], &drives, t, &q).unwrap();
    let modes = [pump, lo];
    let one = EnsembleConfig::new(vec![[0.0; 3]], [0.0; 3]).unwrap();
    let ten = EnsembleConfig::new(random_positions(10, 5.0, 3), [0.0; 3]).unwrap();
    let a = heterodyne_signal(p1 + p3, &modes, t, &c, &one).unwrap();
    let b = heterodyne_signal(p1 + p3, &modes, t, &c, &ten).unwrap();
    (a, b)
}

fn main() {
    let (a, b) = run_example();
    println!("one molecule {a:.6e}, ten molecules {b:.6e}, ratio {:.6}", b / a);
}
