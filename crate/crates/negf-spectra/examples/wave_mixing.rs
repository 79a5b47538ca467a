//! Second-harmonic polarization of a resonant ladder as the drive is tuned.

use negf_spectra::diagrams::FieldFactor;
use negf_spectra::kernels::{linspace, wave_mixing, MixingKind, WaveMixing};
use negf_spectra::model::{presets, ModelConstants};
use negf_spectra::C64;

/// Returns the drive frequency of the largest |P(2 omega)|.
pub fn run_example() -> f64 {
    let s = presets::shg_ladder(1.6, 2.0);
    let c = ModelConstants::default();
    let inc = [FieldFactor::field(0), FieldFactor::field(0)];
    let mut best = (0.0, 0.0);
    for w1 in linspace(0.9, 1.1, 81) {
        let r = wave_mixing(&s, MixingKind::Polarization, &inc, &[w1], &[C64::new(0.1, 0.0)], None, &c).unwrap();
        if let WaveMixing::Polarization { omega_s, value, .. } = r {
            println!("{w1:.4} {omega_s:.4} {:.6e}", value.norm());
            if value.norm() > best.1 {
                best = (w1, value.norm());
            }
        }
    }
    best.0
}

fn main() {
    println!("second harmonic is strongest at omega1 = {:.4}", run_example());
}
