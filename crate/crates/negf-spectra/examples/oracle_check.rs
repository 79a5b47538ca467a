//! Brute-force density-matrix propagation of emitter plus signal mode,
//! compared with the diagrammatic spontaneous emission rate.

use negf_spectra::kernels::sle_frequency;
use negf_spectra::model::{presets, Drive, ModelConstants};
use negf_spectra::oracle::{build_joint, propagate, OracleConfig};
use negf_spectra::C64;

/// Returns the ratio of oracle rate to diagram rate at the Raman peak.
pub fn run_example() -> f64 {
    let s = presets::kh_raman();
    let cfg = OracleConfig { t_total: 300.0, ..OracleConfig::default() };
    let e = C64::new(1e-3, 0.0);
    let js = build_joint(&s, 1.0, cfg.n_max, cfg.volume).unwrap();
    let tr = propagate(&js, &Drive::cw(1.5, e, 10.0), &cfg).unwrap();
    let rate = tr.fitted_rate(cfg.fit_from * cfg.t_total);
    let diagram = sle_frequency(&s, 1.5, 1.0, e, &ModelConstants::physical(cfg.volume)).unwrap();
    println!("oracle {rate:.4e}, diagrams {diagram:.4e}");
    rate / diagram
}

fn main() {
    println!("ratio {:.4}", run_example());
}
