//! Asymptotic covariances of polyspectral mean estimates.
//!
//! For weights `g_i`, `g_n` of order `k` the limiting covariance of
//! `√T M̂_{g_i}` and `√T M̂_{g_n}` is a sum over partition schemes
//! ([`crate::partitions`]) of
//!
//! ```text
//! (2π)^{m-1} ∫ g_i(λ) conj(g_n(ω)) Π_j f̃_{r_j}(block j arguments)
//! ```
//!
//! over `λ ∈ T^k` and the `k+1-m` free coordinates of `ω` left by the block
//! constraints `A{λ} = B{ω}`. Block arguments are the `λ` slots and the
//! negated `ω` slots of the block; `f̃_r` is the order-`r` polyspectrum
//! viewed as a symmetric function of `r+1` arguments summing to zero.
//!
//! Integrals are Riemann sums on the unshifted grid `2πs/N`, `s = 0..N-1`.
//! Dependent `ω` coordinates are solved on integer grid indices: in each row
//! of `B` the first 1 is the pivot and is expressed through that row's other
//! coordinates, all of which are free.
//!
//! Two spectra sources are supported. A [`LinearModel`] gives
//! `Π f̃ = Π κ_{r_j+1} · Ψ_ext(λ) conj(Ψ_ext(ω))`, so every scheme collapses to
//! an integral of `H_i(λ) conj(H_n(ω))` with `H = g Ψ_ext`. For lintest weights
//! built on the same filter `H` is a pure exponential and the integral is
//! evaluated in closed form. A finite-memory process supplies exact lag-domain
//! cumulants: low-order polyspectra are tabulated on the grid, and the
//! single-block term is summed in the lag domain against Fourier coefficients
//! of the weights.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{LinearModel, ModelSpec};
use crate::partitions::{all_schemes, PartitionScheme, SchemeCounting};
use crate::polymean::{Estimator, EstimatorOptions};
use crate::polyproc::PolyProcess;
use crate::series::canonical_index;
use crate::simlab::{simulate_replicate, SimSpec};
use crate::weights::{WeightFunction, WeightKind};

/// Default points per torus dimension for lagged sources at `k = 2`.
pub const DEFAULT_GRID_N: usize = 64;

/// Default grid size: linear sources are cheap per scheme (`O(N^k)`), so
/// they get fine grids that resolve sharp spectral peaks.
pub fn default_grid_n(source: &SpectraSource, k: usize) -> usize {
    match (source, k) {
        (SpectraSource::Linear(_), 1) => 4096,
        (SpectraSource::Linear(_), _) => 512,
        (SpectraSource::Lagged(_), 1) => 1024,
        (SpectraSource::Lagged(_), _) => DEFAULT_GRID_N,
    }
}

/// Nonzero joint cumulants of a process, by order, keyed by lag vector
/// `h` with `γ(h) = Cum(X_0, X_{h_1}, .., X_{h_r})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCumulants {
    pub by_order: BTreeMap<usize, Vec<(Vec<i64>, f64)>>,
}

impl LagCumulants {
    /// Exact tables of orders `2..=max_order` for a finite-memory process.
    pub fn from_process(process: &PolyProcess, max_order: usize) -> Self {
        let mut engine = process.cumulant_engine();
        let by_order = (2..=max_order).map(|o| (o, engine.lag_table(o))).collect();
        Self { by_order }
    }

    /// Order-`r` polyspectrum at angular frequencies `nu`.
    pub fn polyspectrum(&self, r: usize, nu: &[f64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        if let Some(tab) = self.by_order.get(&(r + 1)) {
            for (h, v) in tab {
                let ph: f64 = h.iter().zip(nu).map(|(a, b)| *a as f64 * b).sum();
                s += Complex64::from_polar(*v, -ph);
            }
        }
        s
    }
}

/// Where the polyspectra come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectraSource {
    Linear(LinearModel),
    Lagged(LagCumulants),
}

impl SpectraSource {
    /// Source for a tagged model, carrying cumulants through order `2k+2`.
    pub fn from_model(spec: &ModelSpec, k: usize) -> Self {
        match spec {
            ModelSpec::Linear { model, .. } => Self::Linear(model.clone()),
            ModelSpec::Poly { process, .. } => Self::Lagged(LagCumulants::from_process(process, 2 * k + 2)),
        }
    }
}

/// Inputs of a covariance computation.
#[derive(Debug, Clone)]
pub struct VarianceRequest {
    pub k: usize,
    pub weights: Vec<WeightFunction>,
    pub source: SpectraSource,
    pub grid_n: usize,
    pub counting: SchemeCounting,
}

impl VarianceRequest {
    pub fn new(weights: Vec<WeightFunction>, source: SpectraSource, grid_n: usize) -> Result<Self> {
        let k = weights
            .first()
            .map(|w| w.order)
            .ok_or_else(|| Error::Input("variance request without weights".into()))?;
        let req = Self {
            k,
            weights,
            source,
            grid_n,
            counting: SchemeCounting::Unordered,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_counting(mut self, counting: SchemeCounting) -> Self {
        self.counting = counting;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.k) {
            return Err(Error::UnsupportedOrder(self.k));
        }
        if self.weights.iter().any(|w| w.order != self.k) {
            return Err(Error::Input("all weights must have the same order".into()));
        }
        if self.grid_n < 16 || self.grid_n % 2 != 0 {
            return Err(Error::Input(format!("grid_n must be even and >= 16, got {}", self.grid_n)));
        }
        if let SpectraSource::Lagged(lc) = &self.source {
            for o in 2..=2 * self.k + 2 {
                if !lc.by_order.contains_key(&o) {
                    return Err(Error::Input(format!("lag cumulants of order {o} are missing")));
                }
            }
        }
        Ok(())
    }
}

/// A labelled symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub entries: DMatrix<f64>,
    pub weight_labels: Vec<String>,
}

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Rows as nested vectors.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Largest `|C_ij - C_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        nalgebra::SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Symmetric within `1e-9` and no eigenvalue below `-1e-8·trace`.
    pub fn check_psd(&self) -> Result<()> {
        let scale = self.entries.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if self.asymmetry() > 1e-9 * scale {
            return Err(Error::Numerical(format!("matrix asymmetric by {:e}", self.asymmetry())));
        }
        let tr = self.entries.trace().abs();
        let min = self.min_eigenvalue();
        if min < -1e-8 * tr.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!(
                "matrix not positive semidefinite: eigenvalue {min:e}, trace {tr:e}"
            )));
        }
        Ok(())
    }

    /// Correlation form `C_ij / sqrt(C_ii C_jj)`.
    pub fn correlation(&self) -> Result<CovMatrix> {
        let d = self.dim();
        for i in 0..d {
            if !(self.get(i, i) > 0.0) {
                return Err(Error::Config(format!(
                    "variance of {} is {} (must be positive)",
                    self.weight_labels[i],
                    self.get(i, i)
                )));
            }
        }
        let mut c = DMatrix::<f64>::identity(d, d);
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    c[(i, j)] = self.get(i, j) / (self.get(i, i) * self.get(j, j)).sqrt();
                }
            }
        }
        Ok(CovMatrix {
            entries: c,
            weight_labels: self.weight_labels.clone(),
        })
    }
}

struct SchemeGeom {
    scheme: PartitionScheme,
    rows_a: Vec<Vec<usize>>,
    rows_b: Vec<Vec<usize>>,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

impl SchemeGeom {
    fn new(scheme: PartitionScheme) -> Self {
        let rows_a = (0..scheme.m).map(|j| scheme.a.row_support(j)).collect();
        let rows_b = (0..scheme.m).map(|j| scheme.b.row_support(j)).collect();
        let pivots = scheme.pivots();
        let free = scheme.free_columns();
        Self {
            scheme,
            rows_a,
            rows_b,
            pivots,
            free,
        }
    }

    /// Fills the extended `ω` slots from extended `λ` slots and free values.
    #[inline]
    fn solve(&self, lam: &[usize], om: &mut [usize], n: usize) {
        for (j, &p) in self.pivots.iter().enumerate() {
            let mut v = 0usize;
            for &c in &self.rows_a[j] {
                v += lam[c];
            }
            for &c in &self.rows_b[j] {
                if c != p {
                    v += n - om[c];
                }
            }
            om[p] = v % n;
        }
    }
}

enum Prepared {
    Linear {
        kappas: Vec<f64>,
        h: Vec<Vec<Complex64>>,
    },
    Lagged {
        g: Vec<Vec<Complex64>>,
        /// `tables[r-1]` holds `f̃_r` on `N^r` slots.
        tables: Vec<Vec<Complex64>>,
        top: Vec<(Vec<i64>, f64)>,
        ghat: Vec<HashMap<Vec<i64>, Complex64>>,
    },
}

/// A request with its grid tables built, ready to produce covariance entries.
pub struct VarianceEngine<'a> {
    req: &'a VarianceRequest,
    schemes: Vec<SchemeGeom>,
    prepared: Prepared,
}

/// Sub-samples per axis when averaging an indicator weight over a grid cell.
const CELL_SUBSAMPLES: usize = 8;

/// Grid value of a weight: the point value, or the cell average for
/// indicator weights so that Riemann sums track their area.
fn grid_value(w: &WeightFunction, lam: &[f64], cell: f64) -> Complex64 {
    if !matches!(w.kind, WeightKind::Band { .. } | WeightKind::Annulus { .. }) {
        return w.evaluate(lam);
    }
    let q = CELL_SUBSAMPLES;
    let offs: Vec<f64> = (0..q).map(|i| ((i as f64 + 0.5) / q as f64 - 0.5) * cell).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut pt = lam.to_vec();
    let count = q.pow(lam.len() as u32);
    for code in 0..count {
        let mut c = code;
        for (d, p) in pt.iter_mut().enumerate() {
            *p = lam[d] + offs[c % q];
            c /= q;
        }
        acc += w.evaluate(&pt);
    }
    acc / count as f64
}

fn slot_angle(s: usize, n: usize) -> f64 {
    2.0 * PI * canonical_index(s as i64, n) as f64 / n as f64
}

fn lex(slots: &[usize], n: usize) -> usize {
    slots.iter().fold(0, |acc, &s| acc * n + s)
}

/// Grid used for the weight Fourier coefficients of the single-block term.
const FOURIER_GRID_N: usize = 512;

/// `(2π/N)^k Σ_s g(λ_s) e^{-i a·λ_s}` for each `a` in the cube `[-r, r]^k`
/// (`k <= 2`), evaluated separably on a fine grid.
fn fourier_coefficients(w: &WeightFunction, k: usize, n: usize, r: i64) -> HashMap<Vec<i64>, Complex64> {
    let width = (2 * r + 1) as usize;
    let lam: Vec<f64> = (0..n).map(|s| slot_angle(s, n)).collect();
    let phase = |a: i64, s: usize| Complex64::from_polar(1.0, -(a as f64) * lam[s]);
    let cell = 2.0 * PI / n as f64;
    let mut out = HashMap::new();
    if k == 1 {
        for ai in 0..width {
            let a = ai as i64 - r;
            let acc: Complex64 = (0..n).map(|s| grid_value(w, &[lam[s]], cell) * phase(a, s)).sum();
            out.insert(vec![a], acc * cell);
        }
        return out;
    }
    let inner: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|s1| {
            let row: Vec<Complex64> = (0..n).map(|s2| grid_value(w, &[lam[s1], lam[s2]], cell)).collect();
            (0..width)
                .map(|ai| {
                    let a = ai as i64 - r;
                    row.iter().enumerate().map(|(s2, g)| g * phase(a, s2)).sum()
                })
                .collect()
        })
        .collect();
    for a1 in 0..width {
        for a2 in 0..width {
            let acc: Complex64 = (0..n).map(|s1| inner[s1][a2] * phase(a1 as i64 - r, s1)).sum();
            out.insert(vec![a1 as i64 - r, a2 as i64 - r], acc * cell * cell);
        }
    }
    out
}

impl<'a> VarianceEngine<'a> {
    pub fn new(req: &'a VarianceRequest) -> Result<Self> {
        req.validate()?;
        let n = req.grid_n;
        let k = req.k;
        let total = n.pow(k as u32);
        let schemes: Vec<SchemeGeom> = all_schemes(k, req.counting)?.into_iter().map(SchemeGeom::new).collect();
        let slot_lams = |idx: usize| -> Vec<f64> {
            let mut lam = vec![0.0; k];
            let mut c = idx;
            for d in (0..k).rev() {
                lam[d] = slot_angle(c % n, n);
                c /= n;
            }
            lam
        };
        let weight_table = |w: &WeightFunction| -> Vec<Complex64> {
            let cell = 2.0 * PI / n as f64;
            (0..total).into_par_iter().map(|idx| grid_value(w, &slot_lams(idx), cell)).collect()
        };
        let prepared = match &req.source {
            SpectraSource::Linear(model) => {
                let psi: Vec<Complex64> = (0..n).map(|s| model.psi_hat(2.0 * PI * s as f64 / n as f64)).collect();
                let h = req
                    .weights
                    .iter()
                    .map(|w| {
                        if let Some((j, kk, wm)) = w.lintest_indices() {
                            if wm.ar() == model.ar() && wm.ma() == model.ma() {
                                return (0..total)
                                    .map(|idx| {
                                        let lam = slot_lams(idx);
                                        Complex64::from_polar(1.0, j as f64 * lam[0] + kk as f64 * lam[1])
                                    })
                                    .collect();
                            }
                        }
                        let g = weight_table(w);
                        (0..total)
                            .map(|idx| {
                                let mut c = idx;
                                let mut prod = Complex64::new(1.0, 0.0);
                                let mut sum = 0usize;
                                for _ in 0..k {
                                    let s = c % n;
                                    prod *= psi[s];
                                    sum += s;
                                    c /= n;
                                }
                                g[idx] * prod * psi[(n - sum % n) % n]
                            })
                            .collect()
                    })
                    .collect();
                Prepared::Linear {
                    kappas: model.cumulants().to_vec(),
                    h,
                }
            }
            SpectraSource::Lagged(lc) => {
                let g: Vec<Vec<Complex64>> = req.weights.iter().map(weight_table).collect();
                let max_r = if k == 1 { 1 } else { 2 * k - 1 };
                let mut tables = Vec::new();
                for r in 1..=max_r {
                    let lags = lc.by_order.get(&(r + 1)).cloned().unwrap_or_default();
                    let size = n.pow(r as u32);
                    let unit: Vec<Complex64> =
                        (0..n).map(|s| Complex64::from_polar(1.0, -2.0 * PI * s as f64 / n as f64)).collect();
                    let tab: Vec<Complex64> = (0..size)
                        .into_par_iter()
                        .map(|idx| {
                            let mut slots = vec![0usize; r];
                            let mut c = idx;
                            for d in (0..r).rev() {
                                slots[d] = c % n;
                                c /= n;
                            }
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (h, v) in &lags {
                                let e: i64 = h.iter().zip(&slots).map(|(a, &s)| a * s as i64).sum();
                                acc += unit[e.rem_euclid(n as i64) as usize] * *v;
                            }
                            acc
                        })
                        .collect();
                    tables.push(tab);
                }
                let top = lc.by_order.get(&(2 * k + 2)).cloned().unwrap_or_default();
                let reach = top.iter().flat_map(|(h, _)| h.iter()).fold(0i64, |a, v| a.max(v.abs()));
                let nf = n.max(FOURIER_GRID_N);
                let ghat = req.weights.iter().map(|w| fourier_coefficients(w, k, nf, 2 * reach)).collect();
                Prepared::Lagged { g, tables, top, ghat }
            }
        };
        Ok(Self {
            req,
            schemes,
            prepared,
        })
    }

    /// Covariance entry `V_{g_i, g_n}` as a complex number.
    pub fn entry_complex(&self, i: usize, j: usize) -> Complex64 {
        let n = self.req.grid_n;
        let k = self.req.k;
        let cell = 2.0 * PI / n as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for geom in &self.schemes {
            let m = geom.scheme.m;
            let pref = (2.0 * PI).powi(m as i32 - 1) * cell.powi((2 * k + 1 - m) as i32);
            let contrib = match &self.prepared {
                Prepared::Linear { kappas, h } => {
                    let kprod: f64 = geom.scheme.block_orders.iter().map(|&r| kappas[r - 1]).product();
                    if kprod == 0.0 {
                        continue;
                    }
                    let (hi, hn) = (&h[i], &h[j]);
                    let raw = if m == 1 {
                        let si: Complex64 = hi.iter().sum();
                        let sn: Complex64 = hn.iter().sum();
                        si * sn.conj()
                    } else {
                        let ha = form_histogram(hi, &geom.rows_a[..m - 1], k, n);
                        let hb = form_histogram(hn, &geom.rows_b[..m - 1], k, n);
                        ha.iter().zip(&hb).map(|(a, b)| a * b.conj()).sum()
                    };
                    raw * kprod * pref
                }
                Prepared::Lagged { g, tables, top, ghat } => {
                    if m == 1 {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (hv, v) in top {
                            let a: Vec<i64> = (0..k).map(|c| hv[c] - hv[k]).collect();
                            let b: Vec<i64> = (0..k).map(|c| hv[k + 1 + c]).collect();
                            acc += ghat[i][&a] * ghat[j][&b].conj() * *v;
                        }
                        acc
                    } else {
                        let (gi, gn) = (&g[i], &g[j]);
                        let orders = &geom.scheme.block_orders;
                        let raw = scheme_sum(geom, k, n, |lam, om| {
                            let mut v = gi[lex(&lam[..k], n)] * gn[lex(&om[..k], n)].conj();
                            for (jb, &r) in orders.iter().enumerate() {
                                let mut idx = 0usize;
                                let mut used = 0;
                                for &c in &geom.rows_a[jb] {
                                    if used < r {
                                        idx = idx * n + lam[c];
                                        used += 1;
                                    }
                                }
                                for &c in &geom.rows_b[jb] {
                                    if used < r {
                                        idx = idx * n + (n - om[c]) % n;
                                        used += 1;
                                    }
                                }
                                v *= tables[r - 1][idx];
                            }
                            v
                        });
                        raw * pref
                    }
                }
            };
            total += contrib;
        }
        total
    }

    /// Real covariance entry; errors when two symmetric weights leave an
    /// imaginary part above `1e-6·(1+|V|)`.
    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let v = self.entry_complex(i, j);
        let both_sym = self.req.weights[i].claims_symmetry && self.req.weights[j].claims_symmetry;
        if both_sym && v.im.abs() > 1e-6 * (1.0 + v.norm()) {
            return Err(Error::Numerical(format!(
                "covariance of {} and {} has imaginary part {:e}",
                self.req.weights[i].label, self.req.weights[j].label, v.im
            )));
        }
        Ok(v.re)
    }
}

/// `Σ_λ h(λ)` binned by the residues mod `N` of the block sums
/// `Σ_{c ∈ row} λ_ext[c]`, one histogram axis per row.
fn form_histogram(h: &[Complex64], rows: &[Vec<usize>], k: usize, n: usize) -> Vec<Complex64> {
    let mut hist = vec![Complex64::new(0.0, 0.0); n.pow(rows.len() as u32)];
    let mut ext = [0usize; 3];
    for (idx, v) in h.iter().enumerate() {
        let mut c = idx;
        for d in (0..k).rev() {
            ext[d] = c % n;
            c /= n;
        }
        let sum: usize = ext[..k].iter().sum();
        ext[k] = (n - sum % n) % n;
        let code = rows
            .iter()
            .fold(0usize, |acc, row| acc * n + row.iter().map(|&c| ext[c]).sum::<usize>() % n);
        hist[code] += v;
    }
    hist
}

/// Riemann sum over `λ` slots and the free `ω` slots of one scheme, split by
/// the first `λ` slot with partial sums added in slot order.
fn scheme_sum<F>(geom: &SchemeGeom, k: usize, n: usize, f: F) -> Complex64
where
    F: Fn(&[usize], &[usize]) -> Complex64 + Sync,
{
    let nfree = geom.free.len();
    let inner = n.pow(k as u32 - 1);
    let free_count = n.pow(nfree as u32);
    let partials: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|s0| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut lam = [0usize; 3];
            let mut om = [0usize; 3];
            for rest in 0..inner {
                lam[0] = s0;
                let mut c = rest;
                for d in (1..k).rev() {
                    lam[d] = c % n;
                    c /= n;
                }
                let s: usize = lam[..k].iter().sum();
                lam[k] = (n - s % n) % n;
                for fcode in 0..free_count {
                    let mut c = fcode;
                    for &col in geom.free.iter().rev() {
                        om[col] = c % n;
                        c /= n;
                    }
                    geom.solve(&lam[..=k], &mut om[..=k], n);
                    debug_assert_eq!(om[..=k].iter().sum::<usize>() % n, 0);
                    acc += f(&lam[..=k], &om[..=k]);
                }
            }
            acc
        })
        .collect();
    partials.into_iter().sum()
}

/// `V_{g_i, g_n}` for one pair.
pub fn variance(req: &VarianceRequest, i: usize, n: usize) -> Result<f64> {
    if i >= req.weights.len() || n >= req.weights.len() {
        return Err(Error::Input("weight index out of range".into()));
    }
    VarianceEngine::new(req)?.entry(i, n)
}

/// Full covariance matrix (upper triangle computed, then mirrored) with the
/// PSD check applied.
pub fn cov_matrix(req: &VarianceRequest) -> Result<CovMatrix> {
    let m = cov_matrix_unchecked(req)?;
    m.check_psd()?;
    Ok(m)
}

/// As [`cov_matrix`] without the PSD check.
pub fn cov_matrix_unchecked(req: &VarianceRequest) -> Result<CovMatrix> {
    let d = req.weights.len();
    let exact = lintest_pairs(req);
    let mut c = DMatrix::<f64>::zeros(d, d);
    if let Some((model, idx)) = exact {
        let e = lintest_cov_exact(&model, &idx, req.counting)?;
        c.copy_from(&e);
    } else {
        let engine = VarianceEngine::new(req)?;
        for i in 0..d {
            for j in i..d {
                let v = engine.entry(i, j)?;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
    }
    Ok(CovMatrix {
        entries: c,
        weight_labels: req.weights.iter().map(|w| w.label.clone()).collect(),
    })
}

/// When every weight is a lintest weight on the source's own filter and the
/// grid resolves all exponents, returns the model and the `(j, k)` list.
fn lintest_pairs(req: &VarianceRequest) -> Option<(LinearModel, Vec<(i64, i64)>)> {
    let SpectraSource::Linear(model) = &req.source else {
        return None;
    };
    if req.k != 2 {
        return None;
    }
    let mut idx = Vec::new();
    for w in &req.weights {
        let (j, k, wm) = w.lintest_indices()?;
        if wm.ar() != model.ar() || wm.ma() != model.ma() {
            return None;
        }
        idx.push((j, k));
    }
    let reach = idx.iter().map(|(a, b)| a.abs().max(b.abs())).max().unwrap_or(0);
    if (4 * reach) as usize >= req.grid_n {
        return None;
    }
    Some((model.clone(), idx))
}

/// Phase coefficients of one scheme for the closed-form lintest covariance.
///
/// Variables are `(λ_1, λ_2, free ω coordinates)`; `lam[c]` and `om[c]` give
/// the coefficient vectors of `{λ}_c` and `ω_c` in those variables.
struct LintestForm {
    block_sizes: Vec<usize>,
    lam: Vec<Vec<i64>>,
    om: Vec<Vec<i64>>,
}

fn lintest_forms(counting: SchemeCounting) -> Result<Vec<LintestForm>> {
    let k = 2;
    let mut out = Vec::new();
    for s in all_schemes(k, counting)? {
        let geom = SchemeGeom::new(s);
        let nvar = k + geom.free.len();
        let mut lam = vec![vec![0i64; nvar]; k + 1];
        for (c, v) in lam.iter_mut().enumerate().take(k) {
            v[c] = 1;
        }
        lam[k] = (0..nvar).map(|v| if v < k { -1 } else { 0 }).collect();
        let mut om = vec![vec![0i64; nvar]; k + 1];
        for (q, &col) in geom.free.iter().enumerate() {
            om[col][k + q] = 1;
        }
        for (j, &p) in geom.pivots.iter().enumerate() {
            let mut v = vec![0i64; nvar];
            for &c in &geom.rows_a[j] {
                v.iter_mut().zip(&lam[c]).for_each(|(a, b)| *a += b);
            }
            for &c in &geom.rows_b[j] {
                if c != p {
                    v.iter_mut().zip(&om[c]).for_each(|(a, b)| *a -= b);
                }
            }
            om[p] = v;
        }
        out.push(LintestForm {
            block_sizes: geom.scheme.block_orders.iter().map(|r| r + 1).collect(),
            lam,
            om,
        });
    }
    Ok(out)
}

/// Closed-form covariance matrix of lintest estimates under a linear model:
/// each scheme adds `(2π)^4 Π κ_{block sizes}` whenever the phase
/// `j λ_1 + k λ_2 - j' ω_1 - k' ω_2` vanishes identically on the constraint set.
pub fn lintest_cov_exact(model: &LinearModel, idx: &[(i64, i64)], counting: SchemeCounting) -> Result<DMatrix<f64>> {
    let forms = lintest_forms(counting)?;
    let weights: Vec<f64> = forms
        .iter()
        .map(|f| f.block_sizes.iter().map(|&s| model.kappa(s)).product::<f64>() * (2.0 * PI).powi(4))
        .collect();
    let d = idx.len();
    let rows: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|a| {
            let (j1, k1) = idx[a];
            (0..d)
                .map(|b| {
                    let (j2, k2) = idx[b];
                    forms
                        .iter()
                        .zip(&weights)
                        .filter(|(f, w)| {
                            **w != 0.0
                                && (0..f.lam[0].len()).all(|v| {
                                    j1 * f.lam[0][v] + k1 * f.lam[1][v] - j2 * f.om[0][v] - k2 * f.om[1][v] == 0
                                })
                        })
                        .map(|(_, w)| w)
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(d, d, |a, b| rows[a][b]))
}

/// Monte Carlo covariance `T · Cov(M̂)` from simulated replicates.
pub fn mc_cov_oracle(
    model: &ModelSpec,
    weights: &[WeightFunction],
    t: usize,
    replicates: usize,
    seed: u64,
) -> Result<CovMatrix> {
    if replicates < 2 {
        return Err(Error::Input("need at least two replicates".into()));
    }
    let est = Estimator::new(
        t,
        weights,
        EstimatorOptions {
            center: true,
            parallel: false,
        },
    )?;
    let spec = SimSpec::new(model.clone(), t, replicates, seed);
    let draws: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let s = simulate_replicate(&spec, r as u64)?;
            Ok(est.estimate(&s)?.into_iter().map(|e| e.value.re).collect())
        })
        .collect::<Result<_>>()?;
    let d = weights.len();
    let mut mean = vec![0.0; d];
    for row in &draws {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= replicates as f64);
    let mut c = DMatrix::<f64>::zeros(d, d);
    for row in &draws {
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    c *= t as f64 / (replicates - 1) as f64;
    Ok(CovMatrix {
        entries: c,
        weight_labels: weights.iter().map(|w| w.label.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{parse_model, Innovation};
    use crate::weights::{cosine_product_weight, lag_weight, lintest_weight, zero_weight};

    fn gauss_wn() -> LinearModel {
        LinearModel::white_noise([1.0, 0.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn white_noise_lag0_is_two() {
        let req = VarianceRequest::new(vec![lag_weight(1, &[0]).unwrap()], SpectraSource::Linear(gauss_wn()), 128).unwrap();
        let v = variance(&req, 0, 0).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn white_noise_lag_h_is_one() {
        // √T γ̂(h) for h ≠ 0 under i.i.d. N(0,1): variance 1
        let req = VarianceRequest::new(vec![lag_weight(1, &[3]).unwrap()], SpectraSource::Linear(gauss_wn()), 64).unwrap();
        assert!((variance(&req, 0, 0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kurtosis_enters_through_single_block() {
        // Var √T γ̂(0) = μ4 - 1 = κ4 + 2 for white noise
        let m = LinearModel::white_noise(Innovation::Exp1m1.cumulants()).unwrap();
        let req = VarianceRequest::new(vec![lag_weight(1, &[0]).unwrap()], SpectraSource::Linear(m), 32).unwrap();
        assert!((variance(&req, 0, 0).unwrap() - 8.0).abs() < 1e-10);
    }

    #[test]
    fn zero_weight_zero_variance() {
        let m = parse_model("ar2-exp").unwrap();
        let req = VarianceRequest::new(vec![zero_weight(2)], SpectraSource::from_model(&m, 2), 16).unwrap();
        assert_eq!(variance(&req, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn lagged_source_matches_linear_source_for_ma1() {
        let lin = LinearModel::from_innovation(vec![], vec![0.4], Innovation::Exp1m1).unwrap();
        let poly = crate::polyproc::PolyProcess::new(
            vec![
                crate::polyproc::Monomial::new(1.0, vec![(0, 1)]),
                crate::polyproc::Monomial::new(0.4, vec![(1, 1)]),
            ],
            0.0,
            Innovation::Exp1m1,
        );
        let w = vec![cosine_product_weight(), lag_weight(2, &[1, 0]).unwrap()];
        let a = cov_matrix(&VarianceRequest::new(w.clone(), SpectraSource::Linear(lin), 32).unwrap()).unwrap();
        let b = cov_matrix(
            &VarianceRequest::new(w, SpectraSource::Lagged(LagCumulants::from_process(&poly, 6)), 32).unwrap(),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-9 * (1.0 + a.get(i, j).abs()), "{i}{j}");
            }
        }
    }

    #[test]
    fn lintest_exact_matches_grid() {
        let m = LinearModel::from_innovation(vec![0.5], vec![], Innovation::Exp1m1).unwrap();
        let idx = [(0, 1), (1, 0), (1, 1), (2, 1)];
        let weights: Vec<_> = idx.iter().map(|&(j, k)| lintest_weight(j, k, &m).unwrap()).collect();
        let req = VarianceRequest::new(weights, SpectraSource::Linear(m.clone()), 16).unwrap();
        let engine = VarianceEngine::new(&req).unwrap();
        let exact = lintest_cov_exact(&m, &idx, SchemeCounting::Unordered).unwrap();
        for a in 0..idx.len() {
            for b in 0..idx.len() {
                let g = engine.entry(a, b).unwrap();
                assert!((g - exact[(a, b)]).abs() < 1e-8 * (1.0 + g.abs()), "{a}{b}: {g} vs {}", exact[(a, b)]);
            }
        }
    }

    #[test]
    fn ordered_counting_multiplies_by_block_factorial() {
        let req = VarianceRequest::new(vec![lag_weight(1, &[0]).unwrap()], SpectraSource::Linear(gauss_wn()), 32).unwrap();
        let ordered = req.clone().with_counting(SchemeCounting::Ordered);
        // only two-block schemes contribute for Gaussian noise: factor 2
        assert!((variance(&ordered, 0, 0).unwrap() - 2.0 * variance(&req, 0, 0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn request_validation() {
        let src = SpectraSource::Linear(gauss_wn());
        assert!(VarianceRequest::new(vec![lag_weight(1, &[0]).unwrap()], src.clone(), 15).is_err());
        assert!(VarianceRequest::new(vec![lag_weight(1, &[0]).unwrap()], src.clone(), 8).is_err());
        assert!(VarianceRequest::new(vec![lag_weight(3, &[0, 0, 0]).unwrap()], src.clone(), 16).is_err());
        assert!(VarianceRequest::new(
            vec![lag_weight(1, &[0]).unwrap(), lag_weight(2, &[0, 0]).unwrap()],
            src,
            16
        )
        .is_err());
    }
}
