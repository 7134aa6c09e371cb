//! Sample container, Fourier index bookkeeping and the DFT.
//!
//! The DFT follows the convention `d(λ) = Σ_{t=1}^{T} X_t e^{-iλt}` with the
//! time index starting at one. Frequencies are always addressed by integer
//! index `ℓ` (taken mod `T`); floating angles only appear when a weight
//! function is evaluated.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A finite, regularly spaced real sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    centered: bool,
}

impl TimeSeries {
    /// Wraps `values`; requires at least two finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Input(format!(
                "series needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value at position {pos}")));
        }
        Ok(Self {
            values,
            centered: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Subtracts the sample mean. Calling it on an already centered series is a no-op.
pub fn center(series: &TimeSeries) -> TimeSeries {
    if series.centered {
        return series.clone();
    }
    let m = series.mean();
    TimeSeries {
        values: series.values.iter().map(|v| v - m).collect(),
        centered: true,
    }
}

/// Centers a raw slice; errors on empty input.
pub fn center_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Input("cannot center an empty series".into()));
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    Ok(values.iter().map(|v| v - m).collect())
}

/// Integer Fourier index in the canonical range for sample length `t`.
///
/// Even `t` uses `{-t/2+1, ..., t/2}`, odd `t` uses `{-(t-1)/2, ..., (t-1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FreqIndex {
    pub ell: i64,
    pub t: usize,
}

impl FreqIndex {
    /// Reduces an arbitrary integer index into the canonical range.
    pub fn canonical(raw: i64, t: usize) -> Self {
        Self {
            ell: canonical_index(raw, t),
            t,
        }
    }

    /// Angular frequency `2πℓ/T` in `(-π, π]`.
    pub fn lambda(&self) -> f64 {
        2.0 * PI * self.ell as f64 / self.t as f64
    }

    /// Storage slot `ℓ mod T`.
    pub fn slot(&self) -> usize {
        self.ell.rem_euclid(self.t as i64) as usize
    }
}

/// Maps `raw` (any integer) to the canonical index range for length `t`.
pub fn canonical_index(raw: i64, t: usize) -> i64 {
    let t = t as i64;
    let r = raw.rem_euclid(t);
    if r > t / 2 {
        r - t
    } else {
        r
    }
}

/// The canonical indices in increasing order.
pub fn index_grid(t: usize) -> Vec<i64> {
    let half = (t / 2) as i64;
    let lo = if t % 2 == 0 { -half + 1 } else { -half };
    (lo..=half).collect()
}

/// DFT coefficients stored by slot `ℓ mod T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftTable {
    coefficients: Vec<Complex64>,
}

impl DftTable {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Coefficient at integer index `ell` (any representative mod T).
    pub fn get(&self, ell: i64) -> Complex64 {
        self.coefficients[ell.rem_euclid(self.coefficients.len() as i64) as usize]
    }

    /// Coefficient at storage slot `s` in `0..T`.
    #[inline]
    pub fn slot(&self, s: usize) -> Complex64 {
        self.coefficients[s]
    }

    pub fn slots(&self) -> &[Complex64] {
        &self.coefficients
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// DFT of the series with the time index starting at 1.
pub fn dft(series: &TimeSeries) -> DftTable {
    dft_values(series.values())
}

/// DFT of a raw slice (same convention as [`dft`]).
pub fn dft_values(values: &[f64]) -> DftTable {
    let t = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if t > 0 {
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(t));
        fft.process(&mut buf);
    }
    // shift from t = 0..T-1 to t = 1..T
    for (r, c) in buf.iter_mut().enumerate() {
        let ang = -2.0 * PI * r as f64 / t as f64;
        *c *= Complex64::from_polar(1.0, ang);
    }
    DftTable { coefficients: buf }
}

/// Reads a one-column numeric CSV (optional header line; if rows carry an id
/// column, the last field is used).
pub fn read_series_csv<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("csv: {e}")))?;
        let Some(field) = rec.iter().filter(|f| !f.is_empty()).next_back() else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(Error::Input(format!("non-finite value on line {}", i + 1))),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Input(format!(
                    "unparseable value {field:?} on line {}",
                    i + 1
                )))
            }
        }
    }
    TimeSeries::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(x: &[f64], ell: i64) -> Complex64 {
        let t = x.len() as f64;
        (1..=x.len())
            .map(|s| x[s - 1] * Complex64::from_polar(1.0, -2.0 * PI * ell as f64 * s as f64 / t))
            .sum()
    }

    #[test]
    fn center_examples() {
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(center(&s).values(), &[-1.0, 0.0, 1.0]);
        let z = TimeSeries::new(vec![0.0; 4]).unwrap();
        assert_eq!(center(&z).values(), &[0.0; 4]);
        let c = TimeSeries::new(vec![5.0, 5.0]).unwrap();
        assert_eq!(center(&c).values(), &[0.0, 0.0]);
        assert!(center(&c).is_centered());
        assert!(center_values(&[]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TimeSeries::new(vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn impulse_at_first_time() {
        let d = dft_values(&[1.0, 0.0, 0.0, 0.0]);
        for ell in index_grid(4) {
            let expect = Complex64::from_polar(1.0, -2.0 * PI * ell as f64 / 4.0);
            assert!((d.get(ell) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_series() {
        let d = dft_values(&[1.0; 4]);
        assert!((d.get(0) - Complex64::new(4.0, 0.0)).norm() < 1e-14);
        for ell in [1, 2, -1] {
            assert!(d.get(ell).norm() < 1e-14);
        }
    }

    #[test]
    fn canonical_ranges() {
        assert_eq!(index_grid(8), vec![-3, -2, -1, 0, 1, 2, 3, 4]);
        assert_eq!(index_grid(7), vec![-3, -2, -1, 0, 1, 2, 3]);
        assert_eq!(canonical_index(-4, 8), 4);
        assert_eq!(canonical_index(5, 8), -3);
        assert_eq!(canonical_index(4, 7), -3);
        let f = FreqIndex::canonical(12, 8);
        assert_eq!(f.ell, 4);
        assert!((f.lambda() - PI).abs() < 1e-15);
    }

    #[test]
    fn matches_definitional_sum() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 7919) % 23) as f64 / 7.0 - 1.3).collect();
        let d = dft_values(&x);
        for ell in index_grid(16) {
            let b = brute(&x, ell);
            assert!((d.get(ell) - b).norm() <= 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn csv_reader_variants() {
        let s = read_series_csv("value\n1.5\n2\n-3e-1\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.5, 2.0, -0.3]);
        let s = read_series_csv("1\n2\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
        let s = read_series_csv("t,x\n1,4\n2,5\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[4.0, 5.0]);
        assert!(read_series_csv("x\n1\nNaN\n".as_bytes()).is_err());
        assert!(read_series_csv("x\n1\ninf\n".as_bytes()).is_err());
        assert!(read_series_csv("x\n1\nfoo\n".as_bytes()).is_err());
    }
}
