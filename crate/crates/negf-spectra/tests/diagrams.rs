use negf_spectra::diagrams::{
    binomial, compile_frequency, decompose, feynman_frequency_value, generate_loops, listing_json, render, Format,
    Listing, Process, Strand,
};
use negf_spectra::model::{presets, LevelScheme};
use negf_spectra::C64;
use proptest::prelude::*;

fn ladder(wb: f64, wc: f64, gb: f64, gc: f64, mu: f64) -> LevelScheme {
    LevelScheme::from_real(&[0.0, wb, wc], &[(0, 1, 1.0), (1, 2, mu)], &[(1, gb), (2, gc)]).unwrap()
}

#[test]
fn pump_probe_listing_round_trips() {
    let s = presets::pump_probe_ladder();
    let loops = generate_loops(&s, &Process::pump_probe(0, 1)).unwrap();
    let listing = Listing::new("pump-probe", &loops, &[1.0, 0.8]).unwrap();
    let text = listing_json(&listing);
    let back: Listing = serde_json::from_str(&text).unwrap();
    assert_eq!(back, listing);
    assert_eq!(listing.loops.iter().map(|e| e.feynman_count).sum::<usize>(), 16);
}

#[test]
fn ascii_blocks_one_per_loop() {
    let s = presets::pump_probe_ladder();
    let loops = generate_loops(&s, &Process::pump_probe(0, 1)).unwrap();
    let text: String = loops.iter().map(|l| render(l, Format::Ascii)).collect();
    assert_eq!(text.lines().filter(|l| l.starts_with("loop")).count(), 8);
    let dot = render(&loops[0], Format::Dot);
    assert!(dot.starts_with("digraph") && dot.trim_end().ends_with('}'));
}

#[test]
fn enumeration_is_deterministic() {
    let s = presets::pump_probe_ladder();
    let a = generate_loops(&s, &Process::pump_probe(0, 1)).unwrap();
    let b = generate_loops(&s, &Process::pump_probe(0, 1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decomposition_sizes_are_binomial() {
    let s = presets::pump_probe_ladder();
    for lp in generate_loops(&s, &Process::pump_probe(0, 1)).unwrap() {
        // the observation vertex is fixed last; the others interleave freely
        let (mut k, mut b) = (lp.ket.len(), lp.bra.len());
        if lp.observation_strand() == Strand::Ket {
            k -= 1;
        } else {
            b -= 1;
        }
        assert_eq!(decompose(&lp).len(), binomial(k + b, b));
    }
}

proptest! {
    #[test]
    fn ordered_terms_sum_to_loop(
        wb in 0.9f64..1.3, wc in 1.6f64..2.2, gb in 0.01f64..0.2, gc in 0.01f64..0.2, mu in 0.2f64..1.5,
        w1 in 0.7f64..1.4, w2 in 0.5f64..1.2,
    ) {
        let s = ladder(wb, wc, gb, gc, mu);
        for lp in generate_loops(&s, &Process::pump_probe(0, 1)).unwrap() {
            let e = compile_frequency(&lp, &[w1, w2]).unwrap();
            let v = e.value(&s).unwrap();
            let sum: C64 = decompose(&lp).iter().map(|d| feynman_frequency_value(d, &s, &[w1, w2]).unwrap()).sum();
            prop_assert!((v - sum).norm() <= 1e-9 * v.norm().max(1e-12), "{v} {sum}");
        }
    }

    #[test]
    fn reflection_conjugates_loop_value(
        wb in 0.9f64..1.3, wc in 1.6f64..2.2, gb in 0.01f64..0.2, gc in 0.01f64..0.2,
        w1 in 0.7f64..1.4, w2 in 0.5f64..1.2,
    ) {
        let s = ladder(wb, wc, gb, gc, 0.8);
        for lp in generate_loops(&s, &Process::pump_probe(0, 1)).unwrap() {
            let a = compile_frequency(&lp, &[w1, w2]).unwrap().bracket(&s).unwrap();
            let b = compile_frequency(&lp.reflected(), &[w1, w2]).unwrap().bracket(&s).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-9 * a.norm().max(1e-12));
        }
    }
}
