//! Enumerates the pump-probe loop diagrams and their time-ordered
//! decompositions.

use negf_spectra::diagrams::{decompose, generate_loops, render, Format, Listing, Process};
use negf_spectra::model::presets;

/// Returns (loop count, ordered diagram count).
pub fn run_example() -> (usize, usize) {
    let s = presets::pump_probe_ladder();
    let loops = generate_loops(&s, &Process::pump_probe(0, 1)).unwrap();
    let listing = Listing::new("pump-probe", &loops, &[1.0, 0.8]).unwrap();
    for (lp, entry) in loops.iter().zip(&listing.loops) {
        print!("{}", render(lp, Format::Ascii));
        println!("  {} ordered, {}", entry.feynman_count, entry.expression);
    }
    let ordered = loops.iter().map(|l| decompose(l).len()).sum();
    (loops.len(), ordered)
}

fn main() {
    let (n, m) = run_example();
    println!("{n} loops, {m} time-ordered diagrams");
}
