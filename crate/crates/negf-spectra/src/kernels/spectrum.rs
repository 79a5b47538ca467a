use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PrefactorMode, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Values {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Real(v) => v.len(),
            Values::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub quantity: String,
    pub prefactor_mode: PrefactorMode,
    pub scheme_digest: String,
    pub mode_digest: String,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Signal samples on a 1-D or 2-D frequency grid, row-major over the axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub axes: Vec<Axis>,
    pub values: Values,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(axes: Vec<Axis>, values: Values, meta: SpectrumMeta) -> Result<Spectrum> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Config("spectrum needs one or two axes".into()));
        }
        for a in &axes {
            if a.values.is_empty() || a.values.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config(format!("axis {} must be nonempty and strictly increasing", a.name)));
            }
        }
        let n: usize = axes.iter().map(|a| a.values.len()).product();
        if values.len() != n {
            return Err(Error::Config(format!("expected {n} values, got {}", values.len())));
        }
        let finite = match &values {
            Values::Real(v) => v.iter().all(|x| x.is_finite()),
            Values::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        };
        if !finite {
            return Err(Error::Numerical("spectrum contains non-finite values".into()));
        }
        Ok(Spectrum { axes, values, meta })
    }

    pub fn real(&self) -> Option<&[f64]> {
        match &self.values {
            Values::Real(v) => Some(v),
            Values::Complex(_) => None,
        }
    }

    /// Axis value and sample at the largest |value| of a 1-D spectrum.
    pub fn peak(&self) -> (f64, f64) {
        let v = self.real().expect("real spectrum");
        let k = (0..v.len()).fold(0, |b, i| if v[i].abs() > v[b].abs() { i } else { b });
        (self.axes[0].values[k], v[k])
    }

    /// Half width at half maximum of a 1-D peak, by linear interpolation of
    /// both half-maximum crossings. None if either crossing is off the grid.
    pub fn half_width(&self) -> Option<f64> {
        let v = self.real()?;
        let x = &self.axes[0].values;
        let k = (0..v.len()).fold(0, |b, i| if v[i].abs() > v[b].abs() { i } else { b });
        let half = 0.5 * v[k].abs();
        let cross = |i: usize, j: usize| x[i] + (half - v[i].abs()) * (x[j] - x[i]) / (v[j].abs() - v[i].abs());
        let right = (k..v.len() - 1).find(|&i| v[i + 1].abs() <= half).map(|i| cross(i, i + 1))?;
        let left = (1..=k).rev().find(|&i| v[i - 1].abs() <= half).map(|i| cross(i, i - 1))?;
        Some(0.5 * (right - left))
    }

    /// Trapezoidal integral of a 1-D real spectrum over its axis.
    pub fn area(&self) -> f64 {
        let v = self.real().expect("real spectrum");
        let x = &self.axes[0].values;
        (1..v.len()).map(|i| 0.5 * (v[i] + v[i - 1]) * (x[i] - x[i - 1])).sum()
    }
}

/// `steps` equally spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![start];
    }
    let h = (stop - start) / (steps - 1) as f64;
    (0..steps).map(|k| if k + 1 == steps { stop } else { start + h * k as f64 }).collect()
}

/// Evaluates `f` on every grid point in parallel, preserving order.
pub fn scan_1d<F>(xs: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    xs.par_iter().map(|&x| f(x)).collect()
}

/// Row-major scan over (x, y): x outer, y inner.
pub fn scan_2d<F>(xs: &[f64], ys: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let pts: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    pts.par_iter().map(|&(x, y)| f(x, y)).collect()
}
