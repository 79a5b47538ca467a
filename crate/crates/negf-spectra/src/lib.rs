//! Nonlinear optical signals of few-level quantum emitters.
//!
//! The crate evaluates spontaneous light emission, pump-probe and general
//! (n+1)-wave-mixing signals from Keldysh-Schwinger loop diagrams. Loops are
//! enumerated automatically, split into double-sided Feynman diagrams and
//! compiled into resolvent products (frequency domain) or nested strand
//! integrals (time domain). A brute-force density-matrix propagation of the
//! emitter plus one quantized mode serves as an independent oracle.
//!
//! Units: hbar = 1, all frequencies angular, wavevectors in inverse model
//! length.
//!
//! ```
//! use negf_spectra::model::presets;
//! use negf_spectra::kernels::{kramers_heisenberg, sle_frequency};
//! use negf_spectra::model::ModelConstants;
//! use num_complex::Complex64;
//!
//! let scheme = presets::kh_raman();
//! let c = ModelConstants::default();
//! let e1 = Complex64::new(1.0, 0.0);
//! let s = sle_frequency(&scheme, 1.5, 1.0, e1, &c).unwrap();
//! let kh = kramers_heisenberg(&scheme, 1.5, 1.0, e1, &c).unwrap();
//! assert!((s - kh).abs() < 1e-9 * kh);
//! ```

pub mod diagrams;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod kernels;
pub mod model;
pub mod oracle;
pub mod propagators;

pub use error::{Error, Result};
pub use model::{C64, CMatrix};
