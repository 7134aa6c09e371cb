//! Higher-order periodograms and the polyspectral mean estimator.
//!
//! `M̂_g(f_k) = (2π)^k T^{-k-1} Σ_λ d(λ_1)…d(λ_k) d(-[λ]) g(λ) Φ(λ)`, summed
//! over all `k`-tuples of Fourier frequencies. `Φ` removes tuples having a
//! non-empty subset whose indices sum to `0 mod T`.
//!
//! The sum runs lexicographically over canonical indices. Each value of the
//! first index produces one partial sum and the partial sums are added in
//! index order, so serial and parallel runs give identical bits.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{center, dft, index_grid, DftTable, FreqIndex, TimeSeries};
use crate::weights::WeightFunction;

/// Largest supported estimator order.
pub const MAX_ORDER: usize = 4;

/// A `k`-tuple of Fourier indices for sample length `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreqTuple {
    pub indices: Vec<i64>,
    pub t: usize,
}

impl FreqTuple {
    pub fn new(indices: Vec<i64>, t: usize) -> Self {
        Self { indices, t }
    }

    /// Canonical index of `-[λ]`.
    pub fn closing_index(&self) -> FreqIndex {
        FreqIndex::canonical(-self.indices.iter().sum::<i64>(), self.t)
    }
}

/// A polyspectral mean estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMeanEstimate {
    pub value: Complex64,
    pub order: usize,
    pub t: usize,
    pub stderr: Option<f64>,
    pub weight_label: String,
}

/// `true` iff no non-empty subset of the indices sums to `0 mod t`.
pub fn submanifold_mask(indices: &[i64], t: usize) -> bool {
    let k = indices.len();
    let t = t as i64;
    (1u32..(1 << k)).all(|mask| {
        let s: i64 = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| indices[i]).sum();
        s.rem_euclid(t) != 0
    })
}

/// `T^{-1} d(λ_1)…d(λ_k) d(-[λ])`.
pub fn kth_periodogram(d: &DftTable, tuple: &FreqTuple) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for &l in &tuple.indices {
        p *= d.get(l);
    }
    p * d.get(-tuple.indices.iter().sum::<i64>()) / tuple.t as f64
}

/// Estimator switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorOptions {
    /// Subtract the sample mean first.
    pub center: bool,
    /// Split the outer index across the rayon pool.
    pub parallel: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            center: true,
            parallel: true,
        }
    }
}

/// Precomputed weight tables for repeated estimation at a fixed `T`.
#[derive(Debug, Clone)]
pub struct Estimator {
    t: usize,
    k: usize,
    labels: Vec<String>,
    grid: Vec<i64>,
    /// `tables[w][lex index]`, lexicographic over canonical indices.
    tables: Vec<Vec<Complex64>>,
    options: EstimatorOptions,
}

impl Estimator {
    /// Tabulates all weights (which must share one order `k <= 4`) on the
    /// Fourier grid of length `t`.
    pub fn new(t: usize, weights: &[WeightFunction], options: EstimatorOptions) -> Result<Self> {
        let k = weights
            .first()
            .map(|w| w.order)
            .ok_or_else(|| Error::Input("no weights given".into()))?;
        if weights.iter().any(|w| w.order != k) {
            return Err(Error::Input("all weights must share the same order".into()));
        }
        if k == 0 || k > MAX_ORDER {
            return Err(Error::UnsupportedOrder(k));
        }
        if t < 2 {
            return Err(Error::Input(format!("sample length {t} too short")));
        }
        let grid = index_grid(t);
        let total = t
            .checked_pow(k as u32)
            .filter(|n| n.saturating_mul(weights.len()) <= 1 << 28)
            .ok_or_else(|| Error::Input(format!("grid of {t}^{k} points is too large")))?;
        let lam_of = |ell: i64| 2.0 * PI * ell as f64 / t as f64;
        let mut tables = Vec::with_capacity(weights.len());
        for w in weights {
            let table: Vec<Complex64> = (0..total)
                .into_par_iter()
                .map(|code| {
                    let mut lam = [0.0; MAX_ORDER];
                    let mut c = code;
                    for d in (0..k).rev() {
                        lam[d] = lam_of(grid[c % t]);
                        c /= t;
                    }
                    w.evaluate(&lam[..k])
                })
                .collect();
            if let Some(pos) = table.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Evaluation(format!(
                    "weight {} is not finite at grid point {pos}",
                    w.label
                )));
            }
            tables.push(table);
        }
        Ok(Self {
            t,
            k,
            labels: weights.iter().map(|w| w.label.clone()).collect(),
            grid,
            tables,
            options,
        })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Estimates for every weight on the given series.
    pub fn estimate(&self, series: &TimeSeries) -> Result<Vec<PolyMeanEstimate>> {
        if series.len() != self.t {
            return Err(Error::Input(format!(
                "estimator built for T={}, series has T={}",
                self.t,
                series.len()
            )));
        }
        let d = if self.options.center {
            dft(&center(series))
        } else {
            dft(series)
        };
        let values = self.estimate_dft(&d);
        Ok(values
            .into_iter()
            .zip(&self.labels)
            .map(|(value, label)| PolyMeanEstimate {
                value,
                order: self.k,
                t: self.t,
                stderr: None,
                weight_label: label.clone(),
            })
            .collect())
    }

    /// Raw estimate values from a precomputed DFT.
    pub fn estimate_dft(&self, d: &DftTable) -> Vec<Complex64> {
        let t = self.t;
        let k = self.k;
        let nw = self.tables.len();
        let stride = t.pow(k as u32 - 1);
        let outer = |i0: usize| -> Vec<Complex64> {
            let mut acc = vec![Complex64::new(0.0, 0.0); nw];
            let l0 = self.grid[i0];
            if l0.rem_euclid(t as i64) == 0 {
                return acc;
            }
            let d0 = d.get(l0);
            let mut idx = [0usize; MAX_ORDER];
            idx[0] = i0;
            let mut ells = [0i64; MAX_ORDER];
            for inner in 0..stride {
                let mut c = inner;
                for dpos in (1..k).rev() {
                    idx[dpos] = c % t;
                    c /= t;
                }
                for dpos in 0..k {
                    ells[dpos] = self.grid[idx[dpos]];
                }
                if !submanifold_mask(&ells[..k], t) {
                    continue;
                }
                let mut p = d0;
                let mut s = l0;
                for &e in &ells[1..k] {
                    p *= d.get(e);
                    s += e;
                }
                p *= d.get(-s);
                let lex = i0 * stride + inner;
                for (a, tab) in acc.iter_mut().zip(&self.tables) {
                    *a += p * tab[lex];
                }
            }
            acc
        };
        let partials: Vec<Vec<Complex64>> = if self.options.parallel {
            (0..t).into_par_iter().map(outer).collect()
        } else {
            (0..t).map(outer).collect()
        };
        let scale = (2.0 * PI).powi(k as i32) / (t as f64).powi(k as i32 + 1);
        let mut total = vec![Complex64::new(0.0, 0.0); nw];
        for part in partials {
            for (a, p) in total.iter_mut().zip(part) {
                *a += p;
            }
        }
        total.into_iter().map(|v| v * scale).collect()
    }
}

/// `M̂_g(f_k)` with default options (auto-centering, parallel).
pub fn estimate_mean(series: &TimeSeries, g: &WeightFunction) -> Result<PolyMeanEstimate> {
    estimate_mean_with(series, g, EstimatorOptions::default())
}

/// `M̂_g(f_k)` with explicit options.
pub fn estimate_mean_with(
    series: &TimeSeries,
    g: &WeightFunction,
    options: EstimatorOptions,
) -> Result<PolyMeanEstimate> {
    if g.order > MAX_ORDER || g.order == 0 {
        return Err(Error::UnsupportedOrder(g.order));
    }
    let est = Estimator::new(series.len(), std::slice::from_ref(g), options)?;
    Ok(est.estimate(series)?.remove(0))
}

/// `T^{-1} Σ_t X_t X_{t+h}` over valid `t` (values used as given).
pub fn sample_autocovariance(series: &TimeSeries, h: i64) -> Result<f64> {
    let x = series.values();
    let t = x.len() as i64;
    if h.abs() >= t {
        return Err(Error::Input(format!("lag {h} out of range for T={t}")));
    }
    let (lo, hi) = (0.max(-h), t.min(t - h));
    Ok((lo..hi).map(|s| x[s as usize] * x[(s + h) as usize]).sum::<f64>() / t as f64)
}

/// `T^{-1} Σ_t X_t X_{t+h1} X_{t+h2}` over valid `t` (values used as given).
pub fn sample_autocumulant3(series: &TimeSeries, h1: i64, h2: i64) -> Result<f64> {
    let x = series.values();
    let t = x.len() as i64;
    if h1.abs() >= t || h2.abs() >= t {
        return Err(Error::Input(format!("lags ({h1},{h2}) out of range for T={t}")));
    }
    let lo = 0.max(-h1).max(-h2);
    let hi = t.min(t - h1).min(t - h2);
    Ok((lo..hi)
        .map(|s| x[s as usize] * x[(s + h1) as usize] * x[(s + h2) as usize])
        .sum::<f64>()
        / t as f64)
}

/// `η̂(h) - γ̂(h1)γ̂(h2-h3) - γ̂(h2)γ̂(h3-h1) - γ̂(h3)γ̂(h2-h1)` with
/// `η̂(h) = T^{-1} Σ_t X_t X_{t+h1} X_{t+h2} X_{t+h3}` (values used as given).
pub fn sample_autocumulant4(series: &TimeSeries, h: [i64; 3]) -> Result<f64> {
    let x = series.values();
    let t = x.len() as i64;
    let diffs = [h[1] - h[2], h[2] - h[0], h[1] - h[0]];
    if h.iter().chain(&diffs).any(|v| v.abs() >= t) {
        return Err(Error::Input(format!("lags {h:?} out of range for T={t}")));
    }
    let lo = h.iter().fold(0, |acc, &v| acc.max(-v));
    let hi = h.iter().fold(t, |acc, &v| acc.min(t - v));
    let eta = (lo..hi.max(lo))
        .map(|s| {
            let s = s as usize;
            x[s] * x[(s as i64 + h[0]) as usize] * x[(s as i64 + h[1]) as usize] * x[(s as i64 + h[2]) as usize]
        })
        .sum::<f64>()
        / t as f64;
    let g = |l: i64| sample_autocovariance(series, l);
    Ok(eta - g(h[0])? * g(diffs[0])? - g(h[1])? * g(diffs[1])? - g(h[2])? * g(diffs[2])?)
}
