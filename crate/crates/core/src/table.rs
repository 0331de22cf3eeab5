//! Sampled functions given as two-column tables with linear interpolation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A function sampled on a strictly increasing abscissa grid, evaluated by
/// linear interpolation and clamped to the end values outside the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl SampledTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Table {
                reason: format!("column lengths differ: {} vs {}", xs.len(), ys.len()),
            });
        }
        if xs.len() < 2 {
            return Err(Error::Table { reason: "need at least two samples".into() });
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Table { reason: "non-finite entry".into() });
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table { reason: "abscissae not strictly increasing".into() });
        }
        Ok(SampledTable { xs, ys })
    }

    /// Builds a table by sampling `f` at the given abscissae.
    pub fn from_fn(xs: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let ys = xs.iter().map(|&x| f(x)).collect();
        SampledTable::new(xs, ys)
    }

    /// Parses a two-column CSV body (`x,value` per line). Lines that are empty
    /// or start with `#` are skipped; a single non-numeric header line is allowed.
    pub fn  from_csv_str(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Table {
                        reason: format!("line {}: expected two comma-separated columns", lineno + 1),
                    })
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ if xs.is_empty() => continue, // header line
                _ => {
                    return Err(Error::Table {
                        reason: format!("line {}: cannot parse '{}'", lineno + 1, line),
                    })
                }
            }
        }
        SampledTable::new(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let xs = &self.xs;
        if x <= xs[0] {
            return self.ys[0];
        }
        if x >= xs[xs.len() - 1] {
            return self.ys[xs.len() - 1];
        }
        // partition_point returns the first index with xs[i] > x
        let hi = xs.partition_point(|&v| v <= x);
        let lo = hi - 1;
        let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
        self.ys[lo] + t * (self.ys[hi] - self.ys[lo])
    }

    /// Exact integral of the linear interpolant from the first abscissa to `x`
    /// (constant extension outside the grid).
    pub fn integral_from_start(&self, x: f64) -> f64 {
        let xs = &self.xs;
        let ys = &self.ys;
        if x <= xs[0] {
            return (x - xs[0]) * ys[0];
        }
        let mut acc = 0.0;
        for i in 0..xs.len() - 1 {
            if x >= xs[i + 1] {
                acc += 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
            } else {
                let y = self.eval(x);
                acc += 0.5 * (ys[i] + y) * (x - xs[i]);
                return acc;
            }
        }
        acc + (x - xs[xs.len() - 1]) * ys[xs.len() - 1]
    }
}
