use negf_spectra::kernels::{sle_frequency, system_green};
use negf_spectra::model::{presets, Drive, ModelConstants};
use negf_spectra::oracle::{build_joint, propagate, regression_commutator, OracleConfig};
use negf_spectra::propagators::GreenKind;
use negf_spectra::{CMatrix, Error, C64};

fn raman_rate(omega1: f64, omega_s: f64, e: f64, cfg: &OracleConfig) -> f64 {
    let s = presets::kh_raman();
    let js = build_joint(&s, omega_s, cfg.n_max, cfg.volume).unwrap();
    let tr = propagate(&js, &Drive::cw(omega1, C64::new(e, 0.0), 10.0), cfg).unwrap();
    tr.fitted_rate(cfg.fit_from * cfg.t_total)
}

#[test]
fn weak_field_rate_matches_second_order_emission() {
    let cfg = OracleConfig::default();
    let rate = raman_rate(1.5, 1.0, 1e-3, &cfg);
    let sle = sle_frequency(&presets::kh_raman(), 1.5, 1.0, C64::new(1e-3, 0.0), &ModelConstants::physical(cfg.volume)).unwrap();
    assert!((rate / sle - 1.0).abs() < 0.03, "oracle {rate:e} kernel {sle:e}");
}

#[test]
fn detuned_drive_suppresses_raman_peak() {
    // omega_s = 1.5 is resonant with a-b; a large volume keeps photon
    // reabsorption (order g^4 T) negligible
    let cfg = OracleConfig { volume: 1e9, ..OracleConfig::default() };
    let on = raman_rate(1.5, 1.0, 1e-3, &cfg);
    let off = raman_rate(2.0, 1.5, 1e-3, &cfg);
    // |chi|^2 drops to 1/101; the emitted frequency enters linearly
    let ratio = off / on / 1.5 * 101.0;
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn commutator_matches_propagator_difference() {
    let s = presets::kh_raman();
    let mut rho = CMatrix::zeros(3, 3);
    rho[(0, 0)] = C64::new(0.6, 0.0);
    rho[(1, 1)] = C64::new(0.3, 0.0);
    rho[(2, 2)] = C64::new(0.1, 0.0);
    rho[(0, 1)] = C64::new(0.1, 0.05);
    rho[(1, 0)] = C64::new(0.1, -0.05);
    rho[(1, 2)] = C64::new(-0.04, 0.02);
    rho[(2, 1)] = C64::new(-0.04, -0.02);
    let lr = system_green(&s, GreenKind::LR, rho.clone()).unwrap();
    let rl = system_green(&s, GreenKind::RL, rho.clone()).unwrap();
    for &(t, tau) in &[(1.0, 0.5), (2.0, 0.2), (1.5, 1.5)] {
        let d = rl.eval(tau, t) - lr.eval(tau, t);
        let r = regression_commutator(&s, &rho, t, tau, 1e-3).unwrap();
        assert!((d - r).norm() <= 1e-8, "t={t} tau={tau}: {d} {r}");
    }
}

#[test]
fn strong_drive_trips_saturation_guard() {
    let s = presets::two_level(1.0, 0.05);
    let js = build_joint(&s, 1.0, 1, 1.0).unwrap();
    let cfg = OracleConfig { n_max: 1, volume: 1.0, t_total: 200.0, ..OracleConfig::default() };
    let e = propagate(&js, &Drive::cw(1.0, C64::new(0.5, 0.0), 5.0), &cfg).unwrap_err();
    assert!(matches!(e, Error::Numerical(_)), "{e}");
}

#[test]
fn coarse_step_rejected() {
    let s = presets::kh_raman();
    let js = build_joint(&s, 0.2, 2, 1e6).unwrap();
    let cfg = OracleConfig { dt: 1.0, t_total: 20.0, ..OracleConfig::default() };
    let e = propagate(&js, &Drive::cw(3.0, C64::new(1e-3, 0.0), 5.0), &cfg).unwrap_err();
    assert!(matches!(e, Error::Numerical(_)), "{e}");
}

#[test]
fn photon_number_stays_in_range() {
    let s = presets::two_level(1.0, 0.1);
    let js = build_joint(&s, 1.0, 2, 1e3).unwrap();
    let cfg = OracleConfig { volume: 1e3, t_total: 100.0, ..OracleConfig::default() };
    let tr = propagate(&js, &Drive::cw(1.0, C64::new(0.05, 0.0), 5.0), &cfg).unwrap();
    assert!(tr.photon_number.iter().all(|&n| (0.0..=2.0).contains(&n)));
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    assert!(*tr.photon_number.last().unwrap() > 0.0);
}

#[test]
fn truncated_commutator_defect_only_in_top_block() {
    let js = build_joint(&presets::kh_raman(), 1.0, 2, 1e6).unwrap();
    let c = &js.a * &js.a_dag - &js.a_dag * &js.a;
    for k in 0..js.dim {
        let expect = if k / js.levels == js.n_max { -(js.n_max as f64) } else { 1.0 };
        assert!((c[(k, k)].re - expect).abs() < 1e-14);
    }
}
