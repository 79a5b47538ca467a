//! Stationary pump-probe spectrum of a three-level ladder over a probe scan.

use negf_spectra::kernels::{linspace, pump_probe_frequency};
use negf_spectra::model::presets;
use negf_spectra::C64;

/// Returns the probe frequency of the strongest pump-induced change.
pub fn run_example() -> f64 {
    let s = presets::pump_probe_ladder();
    let (e1, e2) = (C64::new(0.1, 0.0), C64::new(0.01, 0.0));
    let mut best = (0.0, 0.0);
    for w2 in linspace(0.6, 1.0, 81) {
        let pp = pump_probe_frequency(&s, 1.0, w2, e1, e2).unwrap();
        println!("{w2:.3} {:.6e}", pp.total);
        if pp.total.abs() > best.1 {
            best = (w2, pp.total.abs());
        }
    }
    best.0
}

fn main() {
    println!("strongest change at omega2 = {:.3}", run_example());
}
