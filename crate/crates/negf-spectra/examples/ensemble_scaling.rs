//! Incoherent and coherent scaling of spontaneous emission with the number
//! of molecules, with and without phase matching.

use negf_spectra::ensemble::{phase_matching, random_positions, total_spontaneous, EnsembleConfig};

/// Returns the total signal for 100 molecules, phase matched and mismatched.
pub fn run_example() -> (f64, f64) {
    let (s_i, s_c) = (1.0, 0.1);
    let mut last = (0.0, 0.0);
    for n in [1, 10, 100] {
        let pos = random_positions(n, 20.0, 7);
        let matched = EnsembleConfig::new(pos.clone(), [0.0; 3]).unwrap();
        let off = EnsembleConfig::new(pos, [2.0, 0.0, 0.0]).unwrap();
        last = (total_spontaneous(s_i, s_c, &matched), total_spontaneous(s_i, s_c, &off));
        println!("N {n:>3}: F {:>8.1} matched {:>9.2} mismatched {:>8.2}", phase_matching(&matched), last.0, last.1);
    }
    last
}

fn main() {
    run_example();
}
