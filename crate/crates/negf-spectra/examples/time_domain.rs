//! Time-resolved spontaneous emission after a cw drive is switched on.

use negf_spectra::kernels::{sle_frequency, sle_time_trace, QuadratureConfig};
use negf_spectra::model::{presets, Drive, ModelConstants};
use negf_spectra::C64;

/// Returns (late-time signal, stationary frequency-domain signal).
pub fn run_example() -> (f64, f64) {
    let s = presets::kh_raman();
    let c = ModelConstants::default();
    let e = C64::new(1.0, 0.0);
    let trace = sle_time_trace(&s, &Drive::cw(1.5, e, 5.0), 1.0, 400.0, &QuadratureConfig::default(), &c).unwrap();
    for (t, v) in trace.iter().step_by((trace.len() / 15).max(1)) {
        println!("{t:7.2} {v:.6e}");
    }
    let late = trace.last().unwrap().1;
    (late, sle_frequency(&s, 1.5, 1.0, e, &c).unwrap())
}

fn main() {
    let (late, stationary) = run_example();
    println!("late time {late:.6e}, stationary {stationary:.6e}");
}
