//! Runs every cargo example as a test.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        #[path = $path]
        mod $name;
    };
}

example!(kramers_heisenberg, "../examples/kramers_heisenberg.rs");
example!(diagrams, "../examples/diagrams.rs");
example!(pump_probe, "../examples/pump_probe.rs");
example!(wave_mixing, "../examples/wave_mixing.rs");
example!(ensemble_scaling, "../examples/ensemble_scaling.rs");
example!(oracle_check, "../examples/oracle_check.rs");
example!(heterodyne, "../examples/heterodyne.rs");
example!(time_domain, "../examples/time_domain.rs");

#[test]
fn kramers_heisenberg_example() {
    let (peak, worst) = kramers_heisenberg::run_example();
    assert!((peak - 1.0).abs() <= 1e-3);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn diagrams_example() {
    assert_eq!(diagrams::run_example(), (8, 16));
}

#[test]
fn pump_probe_example() {
    let w = pump_probe::run_example();
    assert!((0.6..=1.0).contains(&w));
}

#[test]
fn wave_mixing_example() {
    assert!((wave_mixing::run_example() - 1.0).abs() <= 5e-3);
}

#[test]
fn ensemble_scaling_example() {
    let (matched, off) = ensemble_scaling::run_example();
    assert_eq!(matched, 100.0 + 9900.0 * 0.1);
    assert!(off < 0.2 * matched);
}

#[test]
fn oracle_check_example() {
    let r = oracle_check::run_example();
    assert!((r - 1.0).abs() <= 0.05, "{r}");
}

#[test]
fn heterodyne_example() {
    let (a, b) = heterodyne::run_example();
    assert!((b / a - 10.0).abs() <= 1e-9);
}

#[test]
fn time_domain_example() {
    let (late, stationary) = time_domain::run_example();
    assert!((late - stationary).abs() <= 0.01 * stationary, "{late} {stationary}");
}
