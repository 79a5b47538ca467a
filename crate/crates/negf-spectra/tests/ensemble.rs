use negf_spectra::ensemble::{
    delta_k, heterodyne_signal, pair_sum, phase_matching, random_positions, structure_factor, total_spontaneous,
    EnsembleConfig, DEFAULT_SEED,
};
use negf_spectra::model::{FieldMode, ModelConstants, Role};
use negf_spectra::C64;
use proptest::prelude::*;

#[test]
fn coherent_part_scales_quadratically() {
    let pts: Vec<(f64, f64)> = [2usize, 4, 8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let cfg = EnsembleConfig::new(random_positions(n, 5.0, DEFAULT_SEED), [0.0; 3]).unwrap();
            let coherent = total_spontaneous(0.0, 1.0, &cfg);
            (n as f64, coherent / (1.0 - 1.0 / n as f64))
        })
        .collect();
    for w in pts.windows(2) {
        let slope = (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln();
        assert!((slope - 2.0).abs() <= 1e-6, "{slope}");
    }
}

#[test]
fn mismatch_suppresses_coherent_part() {
    let n = 2000;
    let cfg = EnsembleConfig::new(random_positions(n, 50.0, DEFAULT_SEED), [1.0, 0.5, 0.0]).unwrap();
    let ratio = phase_matching(&cfg) / (n * n) as f64;
    assert!(ratio.abs() < 0.01, "{ratio}");
    let matched = EnsembleConfig::new(cfg.positions.clone(), [0.0; 3]).unwrap();
    assert_eq!(phase_matching(&matched), (n * (n - 1)) as f64);
}

#[test]
fn delta_k_from_signed_modes() {
    let d = delta_k([1.0, 1.0, 0.0], &[([1.0, 0.0, 0.0], 1), ([0.0, 1.0, 0.0], -1), ([0.0, 1.0, 0.0], 1)]);
    assert_eq!(d, [0.0, 1.0, 0.0]);
}

#[test]
fn heterodyne_needs_local_oscillator() {
    let cfg = EnsembleConfig::new(vec![[0.0; 3]], [0.0; 3]).unwrap();
    let modes = [FieldMode::new([1.0, 0.0, 0.0], 1.0, C64::new(1.0, 0.0), Role::Incoming)];
    let c = ModelConstants::default();
    assert!(heterodyne_signal(C64::new(0.0, 1.0), &modes, 0.0, &c, &cfg).is_err());
}

#[test]
fn invalid_configurations_rejected() {
    assert!(EnsembleConfig::new(vec![[f64::NAN, 0.0, 0.0]], [0.0; 3]).is_err());
    assert!(EnsembleConfig::new(vec![[0.0; 3]], [f64::INFINITY, 0.0, 0.0]).is_err());
}

#[test]
fn positions_are_reproducible() {
    assert_eq!(random_positions(10, 2.0, 3), random_positions(10, 2.0, 3));
    assert_ne!(random_positions(10, 2.0, 3), random_positions(10, 2.0, 4));
}

proptest! {
    #[test]
    fn structure_factor_identity(n in 1usize..60, seed in 0u64..1000, kx in -3.0f64..3.0, ky in -3.0f64..3.0) {
        let cfg = EnsembleConfig::new(random_positions(n, 4.0, seed), [kx, ky, 0.3]).unwrap();
        let f = phase_matching(&cfg);
        let p = pair_sum(&cfg);
        let scale = (n * n) as f64;
        prop_assert!((structure_factor(&cfg).norm_sqr() - f - n as f64).abs() <= 1e-12 * scale);
        prop_assert!((p.re - f).abs() <= 1e-12 * scale);
        prop_assert!(p.im.abs() <= 1e-12 * scale);
    }
}
