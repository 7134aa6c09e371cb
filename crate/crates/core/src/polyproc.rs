//! Finite-memory polynomial processes and their exact joint cumulants.
//!
//! A process of the form `X_t = c + Σ_m a_m Π_q ε_{t-lag_q}^{p_q}` driven by
//! i.i.d. innovations has joint cumulants that can be computed exactly by
//! expanding moments into innovation moments and inverting the
//! moment/cumulant relation over set partitions. The squared Hermite process
//! and the quadratic moving average both have this form with memory one.

use std::collections::HashMap;

use crate::models::Innovation;
use crate::partitions::set_partitions;

/// One product term `coef · Π ε_{t-lag}^{power}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    /// `(lag, power)` pairs, distinct lags.
    pub factors: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn new(coef: f64, factors: Vec<(usize, u32)>) -> Self {
        Self { coef, factors }
    }

    fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.1).sum()
    }
}

/// Polynomial in current and lagged innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyProcess {
    pub monomials: Vec<Monomial>,
    pub constant: f64,
    pub innovation: Innovation,
}

/// A sparse polynomial in innovations at absolute times.
type Poly = HashMap<Vec<(i64, u32)>, f64>;

impl PolyProcess {
    pub fn new(monomials: Vec<Monomial>, constant: f64, innovation: Innovation) -> Self {
        Self {
            monomials,
            constant,
            innovation,
        }
    }

    /// Largest lag appearing in the process.
    pub fn span(&self) -> usize {
        self.monomials
            .iter()
            .flat_map(|m| m.factors.iter().map(|f| f.0))
            .max()
            .unwrap_or(0)
    }

    fn max_degree(&self) -> u32 {
        self.monomials.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// `E X_t`.
    pub fn mean(&self) -> f64 {
        let mom = self.innovation.raw_moments(self.max_degree() as usize);
        self.constant
            + self
                .monomials
                .iter()
                .map(|m| m.coef * m.factors.iter().map(|f| mom[f.1 as usize]).product::<f64>())
                .sum::<f64>()
    }

    /// `X_t` given innovations `eps`, with `eps[t - lag]` the lagged draw.
    pub fn evaluate(&self, eps: &[f64], t: usize) -> f64 {
        self.constant
            + self
                .monomials
                .iter()
                .map(|m| {
                    m.coef
                        * m.factors
                            .iter()
                            .map(|&(lag, p)| eps[t - lag].powi(p as i32))
                            .product::<f64>()
                })
                .sum::<f64>()
    }

    /// The centered polynomial `X_t - E X_t` at time `t`.
    fn centered_at(&self, t: i64, mean: f64) -> Poly {
        let mut p = Poly::new();
        for m in &self.monomials {
            let mut key: Vec<(i64, u32)> = m.factors.iter().map(|&(l, e)| (t - l as i64, e)).collect();
            key.sort_unstable();
            *p.entry(key).or_insert(0.0) += m.coef;
        }
        *p.entry(Vec::new()).or_insert(0.0) += self.constant - mean;
        p
    }

    /// Engine bound to this process that memoizes moments and cumulants.
    pub fn cumulant_engine(&self) -> CumulantEngine<'_> {
        CumulantEngine::new(self)
    }

    /// Joint cumulant `Cum(X_{t_1}, .., X_{t_n})`.
    pub fn cumulant(&self, times: &[i64]) -> f64 {
        self.cumulant_engine().cumulant(times)
    }

    /// `Cum(X_0, X_{h_1}, .., X_{h_r})`.
    pub fn autocumulant(&self, lags: &[i64]) -> f64 {
        let mut times = vec![0];
        times.extend_from_slice(lags);
        self.cumulant(&times)
    }

    /// All lag vectors `h` (length `order-1`) with a nonzero autocumulant of
    /// the given order, together with the value.
    pub fn lag_cumulants(&self, order: usize) -> Vec<(Vec<i64>, f64)> {
        let mut engine = self.cumulant_engine();
        engine.lag_table(order)
    }
}

/// Memoizing evaluator for moments and cumulants of one process.
pub struct CumulantEngine<'a> {
    process: &'a PolyProcess,
    mean: f64,
    eps_moments: Vec<f64>,
    moments: HashMap<Vec<i64>, f64>,
    cumulants: HashMap<Vec<i64>, f64>,
    partitions: HashMap<usize, Vec<Vec<Vec<usize>>>>,
}

impl<'a> CumulantEngine<'a> {
    fn new(process: &'a PolyProcess) -> Self {
        Self {
            process,
            mean: process.mean(),
            eps_moments: process.innovation.raw_moments(process.max_degree() as usize * 8),
            moments: HashMap::new(),
            cumulants: HashMap::new(),
            partitions: HashMap::new(),
        }
    }

    fn normalize(times: &[i64]) -> Vec<i64> {
        let mut v = times.to_vec();
        v.sort_unstable();
        let base = v.first().copied().unwrap_or(0);
        v.iter_mut().for_each(|x| *x -= base);
        v
    }

    fn eps_moment(&mut self, p: usize) -> f64 {
        if p >= self.eps_moments.len() {
            self.eps_moments = self.process.innovation.raw_moments(2 * p);
        }
        self.eps_moments[p]
    }

    /// `E Π (X_{t_i} - μ)` for a normalized multiset of times.
    fn central_moment(&mut self, key: &[i64]) -> f64 {
        if let Some(&v) = self.moments.get(key) {
            return v;
        }
        let mut acc: Poly = HashMap::from([(Vec::new(), 1.0)]);
        for &t in key {
            let factor = self.process.centered_at(t, self.mean);
            let mut next = Poly::with_capacity(acc.len() * factor.len());
            for (ka, ca) in &acc {
                for (kb, cb) in &factor {
                    let merged = merge_keys(ka, kb);
                    *next.entry(merged).or_insert(0.0) += ca * cb;
                }
            }
            acc = next;
        }
        let mut total = 0.0;
        for (key, c) in acc {
            let mut e = c;
            for (_, p) in key {
                e *= self.eps_moment(p as usize);
            }
            total += e;
        }
        self.moments.insert(key.to_vec(), total);
        total
    }

    /// Joint cumulant of `X` at the given times.
    pub fn cumulant(&mut self, times: &[i64]) -> f64 {
        let key = Self::normalize(times);
        if let Some(&v) = self.cumulants.get(&key) {
            return v;
        }
        let n = key.len();
        let value = if n == 0 {
            0.0
        } else if n == 1 {
            0.0
        } else {
            let parts = self
                .partitions
                .entry(n)
                .or_insert_with(|| {
                    set_partitions(n)
                        .into_iter()
                        .filter(|p| p.iter().all(|b| b.len() > 1))
                        .collect()
                })
                .clone();
            let mut total = 0.0;
            for part in parts {
                let nb = part.len();
                let sign = if nb % 2 == 1 { 1.0 } else { -1.0 };
                let fact: f64 = (1..nb).map(|x| x as f64).product();
                let mut prod = sign * fact;
                for blk in part {
                    let sub: Vec<i64> = blk.iter().map(|&i| key[i]).collect();
                    prod *= self.central_moment(&Self::normalize(&sub));
                    if prod == 0.0 {
                        break;
                    }
                }
                total += prod;
            }
            total
        };
        self.cumulants.insert(key, value);
        value
    }

    /// Nonzero autocumulants of the given order keyed by lag vector.
    pub fn lag_table(&mut self, order: usize) -> Vec<(Vec<i64>, f64)> {
        assert!(order >= 2, "autocumulant order must be at least 2");
        let d = self.process.span() as i64;
        let reach = (order as i64 - 1) * d;
        let r = order - 1;
        let width = (2 * reach + 1) as usize;
        let total = width.pow(r as u32);
        let mut out = Vec::new();
        let mut lags = vec![0i64; r];
        for code in 0..total {
            let mut c = code;
            for l in lags.iter_mut() {
                *l = (c % width) as i64 - reach;
                c /= width;
            }
            let mut times = vec![0i64];
            times.extend_from_slice(&lags);
            let key = Self::normalize(&times);
            if key.windows(2).any(|w| w[1] - w[0] > d) {
                continue;
            }
            let v = self.cumulant(&key);
            if v != 0.0 {
                out.push((lags.clone(), v));
            }
        }
        out
    }
}

fn merge_keys(a: &[(i64, u32)], b: &[(i64, u32)]) -> Vec<(i64, u32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
