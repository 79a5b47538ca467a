//! Command-line front end and artifact emission.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diagrams::{decompose, generate_loops, listing_json, render, FieldFactor, Format, Listing, Process};
use crate::ensemble::{
    phase_matching, random_positions, spontaneous_pair_term, EnsembleConfig, PairDrive, DEFAULT_SEED,
};
use crate::error::{Error, Result};
use crate::kernels::{
    linspace, pump_probe_frequency, scan_2d, sle_frequency, wave_mixing, Axis, MixingKind, Spectrum,
    SpectrumMeta, Values, WaveMixing,
};
use crate::model::{Drive, FieldMode, Model, ModelConstants, Role, C64};
use crate::oracle::{oracle_spectrum, OracleConfig};

/// A scan axis given as `name:start:stop:steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Grid> {
        let p: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("scan '{s}' must look like name:start:stop:steps"));
        if p.len() != 4 {
            return Err(bad());
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        let steps: usize = p[3].trim().parse().map_err(|_| bad())?;
        let g = Grid { name: p[0].trim().to_string(), start: num(p[1])?, stop: num(p[2])?, steps };
        if g.steps < 2 || !(g.stop > g.start) {
            return Err(Error::Config(format!("scan '{s}' needs steps >= 2 and stop > start")));
        }
        Ok(g)
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.steps)
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text of a spectrum: `omega,value`, `omega1,omega2,value`, or with
/// `value_re,value_im` for complex values. 2-D output is row-major with the
/// second axis fastest.
pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::new();
    let cols = match s.values {
        Values::Real(_) => "value",
        Values::Complex(_) => "value_re,value_im",
    };
    let value = |k: usize| match &s.values {
        Values::Real(v) => fmt17(v[k]),
        Values::Complex(v) => format!("{},{}", fmt17(v[k].re), fmt17(v[k].im)),
    };
    if s.axes.len() == 1 {
        let _ = writeln!(out, "omega,{cols}");
        for (k, x) in s.axes[0].values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", fmt17(*x), value(k));
        }
    } else {
        let _ = writeln!(
            out,
            "# row-major over ({}, {}), {} varies fastest",
            s.axes[0].name, s.axes[1].name, s.axes[1].name
        );
        let _ = writeln!(out, "omega1,omega2,{cols}");
        let ny = s.axes[1].values.len();
        for (i, x) in s.axes[0].values.iter().enumerate() {
            for (j, y) in s.axes[1].values.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", fmt17(*x), fmt17(*y), value(i * ny + j));
            }
        }
    }
    out
}

/// Path of the metadata document written next to a CSV file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize)]
struct Sidecar<'a> {
    meta: &'a SpectrumMeta,
    axes: Vec<AxisMeta<'a>>,
}

#[derive(Serialize)]
struct AxisMeta<'a> {
    name: &'a str,
    start: f64,
    stop: f64,
    points: usize,
}

pub fn sidecar_json(s: &Spectrum) -> String {
    let axes = s
        .axes
        .iter()
        .map(|a: &Axis| AxisMeta {
            name: &a.name,
            start: a.values[0],
            stop: a.values[a.values.len() - 1],
            points: a.values.len(),
        })
        .collect();
    serde_json::to_string_pretty(&Sidecar { meta: &s.meta, axes }).expect("metadata serializes") + "\n"
}

/// Writes the CSV and its JSON sidecar.
pub fn emit_spectrum(s: &Spectrum, path: &Path) -> Result<()> {
    std::fs::write(path, spectrum_csv(s))?;
    std::fs::write(sidecar_path(path), sidecar_json(s))?;
    Ok(())
}

#[derive(Parser, Debug)]
#[command(name = "negf", version, about = "Nonlinear optical signals of few-level emitters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scheme and mode configuration (JSON).
    #[arg(long, alias = "scheme")]
    config: PathBuf,
    /// Output CSV path; a .json sidecar is written next to it. Defaults to stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spontaneous light emission from a stationary drive.
    Sle {
        #[command(flatten)]
        common: Common,
        /// Scan axis omega1 or omega2 as name:start:stop:steps; give two for a 2-D map.
        #[arg(long, required = true)]
        scan: Vec<Grid>,
    },
    /// Pump-induced change of probe absorption, stationary beams.
    PumpProbe {
        #[command(flatten)]
        common: Common,
        /// Scan axis omega1 (pump) or omega2 (probe); give two for a 2-D map.
        #[arg(long, required = true)]
        scan: Vec<Grid>,
    },
    /// (n+1)-wave mixing with n in 1..=3.
    WaveMixing {
        #[command(flatten)]
        common: Common,
        /// Incoming field factors as mode indices, `*` for conjugate, e.g. 0,0,1*.
        #[arg(long)]
        fields: String,
        #[arg(long, value_enum, default_value_t = KindArg::Polarization)]
        kind: KindArg,
        /// Scan axis: omega1 (frequency of mode 0) or, for incoherent, omega_s.
        #[arg(long)]
        scan: Grid,
        /// Detected frequency for incoherent signals scanned over omega1.
        #[arg(long)]
        omega_s: Option<f64>,
    },
    /// Loop and Feynman diagrams of a process.
    Diagrams {
        /// Scheme configuration (JSON).
        #[arg(long, alias = "scheme")]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ProcessArg::Sle)]
        process: ProcessArg,
        /// Incoming field factors for polarization and incoherent processes.
        #[arg(long)]
        fields: Option<String>,
        #[arg(long, value_enum, default_value_t = FormatArg::Ascii)]
        format: FormatArg,
        /// Also render every fully time-ordered diagram.
        #[arg(long)]
        feynman: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Incoherent and coherent ensemble parts and phase matching.
    Ensemble {
        /// Scheme used for default single-molecule values.
        #[arg(long, alias = "scheme")]
        config: Option<PathBuf>,
        /// Number of molecules at random positions.
        #[arg(long)]
        n: Option<usize>,
        /// JSON array of [x, y, z] positions, overriding --n.
        #[arg(long)]
        positions: Option<PathBuf>,
        /// Phase mismatch as x,y,z.
        #[arg(long, default_value = "0,0,0")]
        dk: String,
        #[arg(long, default_value_t = 10.0)]
        extent: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Single-molecule incoherent signal.
        #[arg(long)]
        s_i: Option<f64>,
        /// Distinct-pair coherent signal.
        #[arg(long)]
        s_c: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Density-matrix reference spectrum of emission into one mode.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        nmax: usize,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long = "T", default_value_t = 600.0)]
        t_total: f64,
        /// Quantization volume of the signal mode.
        #[arg(long, default_value_t = 1e6)]
        volume: f64,
        /// Signal frequencies as omega_s:start:stop:steps.
        #[arg(long)]
        scan: Grid,
    },
    /// Runs the cross-module identity suite.
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Polarization,
    Incoherent,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProcessArg {
    Sle,
    PumpProbe,
    Linear,
    Polarization,
    Incoherent,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Ascii,
    Dot,
    Json,
}

/// Parses `0,0,1*` into field factors.
pub fn parse_fields(s: &str) -> Result<Vec<FieldFactor>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let (m, conj) = match t.strip_suffix('*') {
                Some(m) => (m, true),
                None => (t, false),
            };
            let mode: usize = m.parse().map_err(|_| Error::Config(format!("bad field factor '{t}'")))?;
            Ok(if conj { FieldFactor::conj(mode) } else { FieldFactor::field(mode) })
        })
        .collect()
}

fn parse_vec3(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad vector '{s}'"))))
        .collect::<Result<_>>()?;
    v.try_into().map_err(|_| Error::Config(format!("vector '{s}' needs three components")))
}

fn incoming(model: &Model) -> Vec<&FieldMode> {
    model.modes.iter().filter(|m| m.role == Role::Incoming).collect()
}

fn first_incoming(model: &Model) -> Result<&FieldMode> {
    incoming(model).first().copied().ok_or_else(|| Error::Config("config needs an incoming mode".into()))
}

fn meta(model: &Model, quantity: &str) -> SpectrumMeta {
    let modes: Vec<String> = model.modes.iter().map(|m| format!("{:?}@{}", m.role, m.omega).to_lowercase()).collect();
    SpectrumMeta {
        quantity: quantity.into(),
        prefactor_mode: model.constants.prefactor_mode,
        scheme_digest: model.scheme.digest(),
        mode_digest: modes.join(" "),
        notes: Vec::new(),
    }
}

/// Fixed defaults for (omega1, omega2) and the axes actually scanned.
fn scan_axes(scan: &[Grid], defaults: (f64, f64)) -> Result<(Vec<Axis>, Vec<f64>, Vec<f64>)> {
    let mut w1 = vec![defaults.0];
    let mut w2 = vec![defaults.1];
    let mut axes = Vec::new();
    if scan.is_empty() || scan.len() > 2 {
        return Err(Error::Config("give one or two --scan axes".into()));
    }
    for g in scan {
        match g.name.as_str() {
            "omega1" => w1 = g.values(),
            "omega2" => w2 = g.values(),
            other => return Err(Error::Config(format!("unknown scan axis '{other}' (omega1 or omega2)"))),
        }
    }
    if scan.len() == 2 {
        if scan[0].name == scan[1].name {
            return Err(Error::Config("the two scan axes must differ".into()));
        }
        axes.push(Axis { name: "omega1".into(), values: w1.clone() });
        axes.push(Axis { name: "omega2".into(), values: w2.clone() });
    } else {
        let v = if scan[0].name == "omega1" { w1.clone() } else { w2.clone() };
        axes.push(Axis { name: scan[0].name.clone(), values: v });
    }
    Ok((axes, w1, w2))
}

fn evaluate_2axis<F>(scan: &[Grid], defaults: (f64, f64), f: F) -> Result<(Vec<Axis>, Vec<f64>)>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let (axes, w1, w2) = scan_axes(scan, defaults)?;
    Ok((axes, scan_2d(&w1, &w2, f)?))
}

fn write_out(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn deliver(s: &Spectrum, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => emit_spectrum(s, p).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => {
            print!("{}", spectrum_csv(s));
            Ok(())
        }
    }
}

fn sle_cmd(common: &Common, scan: &[Grid]) -> Result<()> {
    let model = Model::load(&common.config)?;
    let pump = first_incoming(&model)?;
    let signal = model.mode_with_role(Role::Signal).map_or(pump.omega - 0.5, |m| m.omega);
    let e1 = model.constants.field_amplitude(pump);
    let (axes, v) = evaluate_2axis(scan, (pump.omega, signal), |a, b| {
        sle_frequency(&model.scheme, a, b, e1, &model.constants)
    })?;
    let mut m = meta(&model, "spontaneous light emission rate");
    m.notes.push("reported as a non-negative emission rate; the closed form is printed with a leading minus".into());
    deliver(&Spectrum::new(axes, Values::Real(v), m)?, &common.out)
}

fn pump_probe_cmd(common: &Common, scan: &[Grid]) -> Result<()> {
    let model = Model::load(&common.config)?;
    let inc = incoming(&model);
    let pump = *inc.first().ok_or_else(|| Error::Config("config needs a pump (incoming) mode".into()))?;
    let probe = inc
        .get(1)
        .copied()
        .or_else(|| model.mode_with_role(Role::LocalOscillator))
        .ok_or_else(|| Error::Config("config needs a probe (second incoming or local_oscillator) mode".into()))?;
    let (e1, e2) = (model.constants.field_amplitude(pump), model.constants.field_amplitude(probe));
    let (axes, v) = evaluate_2axis(scan, (pump.omega, probe.omega), |a, b| {
        Ok(pump_probe_frequency(&model.scheme, a, b, e1, e2)?.total)
    })?;
    deliver(&Spectrum::new(axes, Values::Real(v), meta(&model, "pump-probe differential absorption"))?, &common.out)
}

fn wave_mixing_cmd(common: &Common, fields: &str, kind: KindArg, scan: &Grid, omega_s: Option<f64>) -> Result<()> {
    let model = Model::load(&common.config)?;
    let factors = parse_fields(fields)?;
    let modes = incoming(&model);
    if modes.is_empty() {
        return Err(Error::Config("config needs incoming modes".into()));
    }
    let freqs: Vec<f64> = modes.iter().map(|m| m.omega).collect();
    let amps: Vec<C64> = modes.iter().map(|m| model.constants.field_amplitude(m)).collect();
    let xs = scan.values();
    let mk = match kind {
        KindArg::Polarization => MixingKind::Polarization,
        KindArg::Incoherent => MixingKind::Incoherent,
    };
    let eval = |x: f64| -> Result<WaveMixing> {
        let mut f = freqs.clone();
        let ws = match (scan.name.as_str(), kind) {
            ("omega1", _) => {
                f[0] = x;
                omega_s
            }
            ("omega_s", KindArg::Incoherent) => Some(x),
            (other, _) => return Err(Error::Config(format!("unknown scan axis '{other}' for this kind"))),
        };
        wave_mixing(&model.scheme, mk, &factors, &f, &amps, ws, &model.constants)
    };
    let res: Vec<WaveMixing> = xs.iter().map(|&x| eval(x)).collect::<Result<_>>()?;
    let values = match kind {
        KindArg::Polarization => Values::Complex(
            res.iter().map(|r| if let WaveMixing::Polarization { value, .. } = r { *value } else { C64::new(0.0, 0.0) }).collect(),
        ),
        KindArg::Incoherent => {
            Values::Real(res.iter().map(|r| if let WaveMixing::Incoherent { value, .. } = r { *value } else { 0.0 }).collect())
        }
    };
    let mut m = meta(&model, &format!("{:?} wave mixing, fields {fields}", kind).to_lowercase());
    m.notes.push(format!("order n = {}", factors.len()));
    deliver(&Spectrum::new(vec![Axis { name: scan.name.clone(), values: xs }], values, m)?, &common.out)
}

fn process_for(p: ProcessArg, fields: Option<&str>, n_modes: usize) -> Result<(Process, String)> {
    let need = || -> Result<Vec<FieldFactor>> {
        parse_fields(fields.ok_or_else(|| Error::Config("this process needs --fields".into()))?)
    };
    Ok(match p {
        ProcessArg::Sle => (Process::sle(0, 1), "sle".into()),
        ProcessArg::PumpProbe => (Process::pump_probe(0, 1), "pump-probe".into()),
        ProcessArg::Linear => (Process::linear_absorption(0), "linear".into()),
        ProcessArg::Polarization => (Process::polarization(need()?, n_modes), "polarization".into()),
        ProcessArg::Incoherent => (Process::incoherent(&need()?, n_modes), "incoherent".into()),
    })
}

fn diagrams_cmd(
    config: &Path,
    process: ProcessArg,
    fields: Option<&str>,
    format: FormatArg,
    feynman: bool,
    out: &Option<PathBuf>,
) -> Result<()> {
    let model = Model::load(config)?;
    let mut freqs: Vec<f64> = model.modes.iter().map(|m| m.omega).collect();
    let n_modes = fields
        .map(|f| parse_fields(f).map(|v| v.iter().map(|x| x.mode + 1).max().unwrap_or(1)))
        .transpose()?
        .unwrap_or(freqs.len());
    let (proc_, name) = process_for(process, fields, n_modes)?;
    while freqs.len() < 2.max(n_modes + 1) {
        freqs.push(1.0);
    }
    let loops = generate_loops(&model.scheme, &proc_)?;
    let text = match format {
        FormatArg::Json => listing_json(&Listing::new(&name, &loops, &freqs)?) + "\n",
        FormatArg::Ascii | FormatArg::Dot => {
            let f = if matches!(format, FormatArg::Ascii) { Format::Ascii } else { Format::Dot };
            let mut s = String::new();
            for lp in &loops {
                s.push_str(&render(lp, f));
                s.push('\n');
                if feynman {
                    for d in decompose(lp) {
                        s.push_str(&render(&d, f));
                        s.push('\n');
                    }
                }
            }
            s
        }
    };
    write_out(&text, out)
}

#[allow(clippy::too_many_arguments)]
fn ensemble_cmd(
    config: Option<&Path>,
    n: Option<usize>,
    positions: Option<&Path>,
    dk: &str,
    extent: f64,
    seed: u64,
    s_i: Option<f64>,
    s_c: Option<f64>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let pos: Vec<[f64; 3]> = match (positions, n) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        (None, Some(n)) => random_positions(n, extent, seed),
        (None, None) => return Err(Error::Config("give --n or --positions".into())),
    };
    let cfg = EnsembleConfig::new(pos, parse_vec3(dk)?)?;
    let (si, sc) = match (s_i, s_c) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let path = config.ok_or_else(|| Error::Config("give --s-i and --s-c or a --config".into()))?;
            let model = Model::load(path)?;
            let pump = first_incoming(&model)?;
            let signal = model.mode_with_role(Role::Signal).map_or(pump.omega, |m| m.omega);
            let e1 = model.constants.field_amplitude(pump);
            let si = match s_i {
                Some(v) => v,
                None => sle_frequency(&model.scheme, pump.omega, signal, e1, &model.constants)?,
            };
            let sc = match s_c {
                Some(v) => v,
                None => {
                    let p = PairDrive {
                        omega: pump.omega,
                        amplitude: e1,
                        detected_omega: signal,
                        detected_amplitude: C64::new(1.0, 0.0),
                        t: 50.0,
                        window: 50.0,
                    };
                    spontaneous_pair_term(&model.scheme, &model.scheme, &p, &model.constants)?
                }
            };
            (si, sc)
        }
    };
    let f = phase_matching(&cfg);
    let total = cfg.n() as f64 * si + f * sc;
    let text = format!("n,s_i,s_c,f,total\n{},{},{},{},{}\n", cfg.n(), fmt17(si), fmt17(sc), fmt17(f), fmt17(total));
    write_out(&text, out)
}

fn oracle_cmd(common: &Common, nmax: usize, dt: f64, t_total: f64, volume: f64, scan: &Grid) -> Result<()> {
    let model = Model::load(&common.config)?;
    if scan.name != "omega_s" {
        return Err(Error::Config("oracle scans omega_s".into()));
    }
    let pump = first_incoming(&model)?;
    let drive = Drive::from_mode(pump, &model.constants);
    let cfg = OracleConfig { n_max: nmax, dt, t_total, volume, ..OracleConfig::default() };
    let mut s = oracle_spectrum(&model.scheme, &drive, &scan.values(), &cfg)?;
    s.axes[0].name = "omega_s".into();
    deliver(&s, &common.out)
}

/// One entry of the identity suite.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Fast cross-module identities; every entry should pass.
pub fn identity_suite() -> Vec<Check> {
    use crate::diagrams::generate_loops;
    use crate::kernels::{
        eq22_check, grid_loops_vs_feynman, kramers_heisenberg, pp_chi3, pump_probe_time, GridConfig, PumpProbeForm,
        QuadratureConfig, Source,
    };
    use crate::model::presets;
    let mut out = Vec::new();
    let mut push = |name: &str, r: Result<(bool, String)>| {
        let (passed, detail) = r.unwrap_or_else(|e| (false, e.to_string()));
        out.push(Check { name: name.into(), passed, detail });
    };
    let kh = presets::kh_raman();
    let pp = presets::pump_probe_ladder();
    let one = C64::new(1.0, 0.0);
    let c = ModelConstants::default();
    push("sle equals closed-form Raman line", (|| {
        let a = sle_frequency(&kh, 1.5, 1.0, one, &c)?;
        let b = kramers_heisenberg(&kh, 1.5, 1.0, one, &c)?;
        let r = (a - b).abs() / b;
        Ok((r <= 1e-10, format!("relative difference {r:.2e}")))
    })());
    push("diagram counts", (|| {
        let s = generate_loops(&kh, &Process::sle(0, 1))?;
        let p = generate_loops(&pp, &Process::pump_probe(0, 1))?;
        let counts: Vec<usize> = p.iter().map(|l| decompose(l).len()).collect();
        let ok = s.len() == 1 && decompose(&s[0]).len() == 3 && counts == [3, 3, 3, 3, 1, 1, 1, 1];
        Ok((ok, format!("sle {} loop, pump-probe {counts:?}", s.len())))
    })());
    push("loop integrals equal ordered integrals", (|| {
        let src = [Source::Classical(Drive::cw(1.5, C64::new(0.5, 0.2), 2.0)), Source::Vacuum { omega: 1.0 }];
        let g = grid_loops_vs_feynman(&kh, &Process::sle(0, 1), &src, 8.0, &GridConfig { step: 0.25, cells: 24 })?;
        let r = g.relative_difference();
        Ok((r <= 1e-8, format!("relative difference {r:.2e}")))
    })());
    push("two-time commutator identity", (|| {
        let mut rho = crate::model::CMatrix::zeros(3, 3);
        rho[(0, 0)] = C64::new(0.7, 0.0);
        rho[(1, 1)] = C64::new(0.3, 0.0);
        rho[(0, 1)] = C64::new(0.1, 0.2);
        rho[(1, 0)] = C64::new(0.1, -0.2);
        let r = eq22_check(&kh, &rho, 3.0, 1.2)?;
        Ok((r <= 1e-12, format!("residual {r:.2e}")))
    })());
    push("third-order pump-probe limit", (|| {
        let pump = Drive::cw(1.0, C64::new(0.05, 0.0), 2.0);
        let probe = Drive::cw(0.8, C64::new(0.03, 0.0), 2.0);
        let q = QuadratureConfig::default();
        let a = pp_chi3(&pp, &pump, &probe, 12.0, &q)?;
        let b = pump_probe_time(&pp, &pump, &probe, 12.0, PumpProbeForm::Loops, crate::kernels::FieldStatistics::Classical, &q)?;
        let r = (a - b.nonlinear).abs() / b.nonlinear.abs();
        Ok((r <= 1e-8, format!("relative difference {r:.2e}")))
    })());
    push("ensemble pair identity", (|| {
        let cfg = EnsembleConfig::new(random_positions(50, 3.0, DEFAULT_SEED), [0.7, -0.2, 0.4])?;
        let f = crate::ensemble::structure_factor(&cfg).norm_sqr();
        let r = (f - phase_matching(&cfg) - 50.0).abs();
        Ok((r <= 1e-10, format!("| |f|^2 - F - N | = {r:.2e}")))
    })());
    out
}

fn validate_cmd() -> Result<()> {
    let checks = identity_suite();
    for c in &checks {
        println!("{}: {} ({})", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} identity checks failed")));
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NEGF_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("NEGF_THREADS must be a positive integer, got '{v}'")))?;
        // a pool built earlier in the same process is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Sle { common, scan } => sle_cmd(common, scan),
        Command::PumpProbe { common, scan } => pump_probe_cmd(common, scan),
        Command::WaveMixing { common, fields, kind, scan, omega_s } => {
            wave_mixing_cmd(common, fields, *kind, scan, *omega_s)
        }
        Command::Diagrams { config, process, fields, format, feynman, out } => {
            diagrams_cmd(config, *process, fields.as_deref(), *format, *feynman, out)
        }
        Command::Ensemble { config, n, positions, dk, extent, seed, s_i, s_c, out } => {
            ensemble_cmd(config.as_deref(), *n, positions.as_deref(), dk, *extent, *seed, *s_i, *s_c, out)
        }
        Command::Oracle { common, nmax, dt, t_total, volume, scan } => {
            oracle_cmd(common, *nmax, *dt, *t_total, *volume, scan)
        }
        Command::Validate => validate_cmd(),
    }
}

/// Runs the command line and returns the process exit code. Errors are
/// reported as one line on stderr: `error kind=<kind> code=<n>: <message>`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=config code=2: {first}");
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error kind={} code={code}: {}", e.kind(), e.to_string().replace('\n', " "));
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: Grid = "omega2:0.8:1.2:401".parse().unwrap();
        assert_eq!(g.values().len(), 401);
        assert!("omega2:0.8:1.2:1".parse::<Grid>().is_err());
        assert!("omega2:1.2:0.8:5".parse::<Grid>().is_err());
        assert!("omega2:0.8:1.2".parse::<Grid>().is_err());
    }

    #[test]
    fn field_parsing() {
        let f = parse_fields("0, 0*,1").unwrap();
        assert_eq!(f, vec![FieldFactor::field(0), FieldFactor::conj(0), FieldFactor::field(1)]);
        assert!(parse_fields("x").is_err());
    }

    #[test]
    fn one_point_csv_has_two_lines() {
        let s = Spectrum::new(
            vec![Axis { name: "omega2".into(), values: vec![1.0] }],
            Values::Real(vec![0.1]),
            SpectrumMeta::default(),
        )
        .unwrap();
        let csv = spectrum_csv(&s);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv, "omega,value\n1.0000000000000000e0,1.0000000000000001e-1\n");
    }
}
