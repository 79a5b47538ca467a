//! Signal evaluation: frequency-domain resolvent sums, time-domain strand and
//! density-matrix recursions, and sampled spectra.

mod brute;
mod frequency;
mod spectrum;
mod time;

pub use brute::{grid_loops_vs_feynman, GridConfig, GridComparison};
pub use frequency::{
    kramers_heisenberg, loop_terms, pump_probe_frequency, sle_frequency, stimulated_frequency, wave_mixing,
    LoopTerm, MixingKind, PumpProbeSpectrum, WaveMixing,
};
pub use spectrum::{linspace, scan_1d, scan_2d, Axis, Spectrum, SpectrumMeta, Values};
pub use time::{
    eq22_check, heterodyne_time, pp_chi3, pump_probe_time, sle_time, sle_time_trace, stimulated_rate,
    system_green, FieldStatistics, PumpProbeForm, PumpProbeTime, QuadratureConfig, Source, SystemGreen,
};

use crate::diagrams::{Detection, Head, Interaction, LoopDiagram, Slot};
use crate::model::C64;

/// Field factor of an interaction given complex amplitudes per mode.
///
/// Raise vertices carry E, lower vertices E*. Detected-mode vertices of a
/// spontaneous or polarization process carry no classical amplitude.
pub(crate) fn stationary_field(int: &Interaction, detection: Detection, amps: &[C64]) -> C64 {
    let vacuum_head = matches!(detection, Detection::Spontaneous { .. } | Detection::Polarization { .. });
    if vacuum_head && matches!(int.slot, Slot::Observation | Slot::Probe) {
        return C64::new(1.0, 0.0);
    }
    let a = amps[int.mode];
    if int.conjugate_field() {
        a.conj()
    } else {
        a
    }
}

/// +1 for absorptive heads, -1 for emissive heads.
pub(crate) fn head_weight(lp: &LoopDiagram) -> f64 {
    match lp.head {
        Head::Absorptive | Head::Polarization => 1.0,
        Head::Emissive => -1.0,
    }
}
