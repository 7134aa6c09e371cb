//! Bispectral linearity test.
//!
//! Under the null hypothesis `X_t = ψ(B)ε_t` with known `ψ`, the bispectral
//! means with weights `g_{j,k} = e^{i(jλ_1 + kλ_2)}/Ψ(λ_1, λ_2)` vanish for
//! `(j,k) ≠ (0,0)`. The statistic `Σ T|M̂_{j,k}|² / V_{jj}` over
//! `0 <= j,k <= M`, `(j,k) ≠ (0,0)` is asymptotically a weighted sum of
//! independent `χ²₁` variables whose weights are the eigenvalues of the
//! correlation matrix of the estimates.
//!
//! Innovation cumulants enter the null covariance; by default they are
//! estimated from residuals of the inverted filter.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::asymvar::{lintest_cov_exact, CovMatrix};
use crate::error::{Error, Result};
use crate::models::{cumulants_from_moments, LinearModel};
use crate::partitions::SchemeCounting;
use crate::series::{center, dft, index_grid, TimeSeries};
use crate::weights::check_psi_nonvanishing;

/// How the weighted `χ²` tail is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    MonteCarlo,
    Imhof,
}

/// Innovation cumulants used in the null covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CumulantSource {
    /// Method-of-moments estimates from filter residuals.
    Residual,
    /// The cumulants stored in the configured model.
    Model,
}

/// Test settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LinTestConfig {
    pub m: usize,
    pub model: LinearModel,
    pub grid_n: usize,
    pub pvalue_method: PValueMethod,
    pub mc_draws: usize,
    pub seed: u64,
    pub cumulants: CumulantSource,
}

impl LinTestConfig {
    /// `M = 10`, Monte Carlo p-values with 200 000 draws, residual cumulants.
    pub fn new(model: LinearModel) -> Self {
        Self {
            m: 10,
            model,
            grid_n: crate::asymvar::DEFAULT_GRID_N,
            pvalue_method: PValueMethod::MonteCarlo,
            mc_draws: 200_000,
            seed: 42,
            cumulants: CumulantSource::Residual,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Input("M must be at least 1".into()));
        }
        if self.mc_draws == 0 && self.pvalue_method == PValueMethod::MonteCarlo {
            return Err(Error::Input("Monte Carlo p-values need at least one draw".into()));
        }
        Ok(())
    }
}

/// One `(j,k)` term of the statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct TermResult {
    pub j: i64,
    pub k: i64,
    pub estimate: Complex64,
    pub variance: f64,
    pub contribution: f64,
}

/// Outcome of the test.
#[derive(Debug, Clone, PartialEq)]
pub struct LinTestResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub per_term: Vec<TermResult>,
    pub eigenvalues: Vec<f64>,
    pub cumulants: [f64; 5],
    pub warnings: Vec<String>,
}

/// `{(j,k): 0 <= j,k <= M} \ {(0,0)}` with `j` outer, `k` inner.
pub fn index_set(m: usize) -> Vec<(i64, i64)> {
    let m = m as i64;
    (0..=m)
        .flat_map(|j| (0..=m).map(move |k| (j, k)))
        .filter(|&p| p != (0, 0))
        .collect()
}

/// `M̂_{g_{j,k}}` for every `(j,k)` in `0..=M` squared, row-major, computed
/// separably from one bispectral table.
pub fn lintest_estimates(series: &TimeSeries, model: &LinearModel, m: usize) -> Vec<Vec<Complex64>> {
    let x = center(series);
    let t = x.len();
    let d = dft(&x);
    let grid = index_grid(t);
    let lam = |l: i64| 2.0 * PI * l as f64 / t as f64;
    let psi: Vec<Complex64> = grid.iter().map(|&l| model.psi_hat(lam(l))).collect();
    let psi_at = |l: i64| model.psi_hat(lam(crate::series::canonical_index(l, t)));
    let ti = t as i64;
    let rows: Vec<Vec<Complex64>> = grid
        .par_iter()
        .enumerate()
        .map(|(i1, &l1)| {
            let mut c = vec![Complex64::new(0.0, 0.0); m + 1];
            if l1.rem_euclid(ti) == 0 {
                return c;
            }
            let step: Vec<Complex64> = grid.iter().map(|&l2| Complex64::from_polar(1.0, lam(l2))).collect();
            for (i2, &l2) in grid.iter().enumerate() {
                if l2.rem_euclid(ti) == 0 || (l1 + l2).rem_euclid(ti) == 0 {
                    continue;
                }
                let big_psi = psi[i1] * psi[i2] * psi_at(-(l1 + l2));
                let b = d.get(l1) * d.get(l2) * d.get(-(l1 + l2)) / big_psi;
                let mut e = Complex64::new(1.0, 0.0);
                for ck in c.iter_mut() {
                    *ck += b * e;
                    e *= step[i2];
                }
            }
            c
        })
        .collect();
    let scale = (2.0 * PI).powi(2) / (t as f64).powi(3);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); m + 1]; m + 1];
    for (i1, &l1) in grid.iter().enumerate() {
        let step = Complex64::from_polar(1.0, lam(l1));
        let mut e = Complex64::new(1.0, 0.0);
        for row in out.iter_mut() {
            for (o, c) in row.iter_mut().zip(&rows[i1]) {
                *o += c * e;
            }
            e *= step;
        }
    }
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    out
}

/// Innovation cumulants `(κ2..κ6)` of residuals `ε̂ = ψ(B)^{-1} X` from the
/// centered series (recursion started at zero, first `p` values skipped).
pub fn residual_cumulants(series: &TimeSeries, model: &LinearModel) -> Result<[f64; 5]> {
    let x = center(series);
    let x = x.values();
    let (ar, ma) = (model.ar(), model.ma());
    let p = ar.len();
    if x.len() <= p + 6 {
        return Err(Error::Input("series too short for residual cumulants".into()));
    }
    let mut eps = vec![0.0; x.len()];
    for t in p..x.len() {
        let mut v = x[t];
        for (i, a) in ar.iter().enumerate() {
            v -= a * x[t - i - 1];
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                v -= b * eps[t - j - 1];
            }
        }
        eps[t] = v;
    }
    let res = &eps[p..];
    let n = res.len() as f64;
    let mean = res.iter().sum::<f64>() / n;
    let mut mom = [0.0; 7];
    mom[0] = 1.0;
    for &e in res {
        let c = e - mean;
        let mut pw = 1.0;
        for m in mom.iter_mut().skip(1) {
            pw *= c;
            *m += pw / n;
        }
    }
    mom[1] = 0.0;
    let kap = cumulants_from_moments(&mom);
    if !(kap[2] > 0.0) {
        return Err(Error::Degenerate("residual variance is zero".into()));
    }
    Ok([kap[2], kap[3], kap[4], kap[5], kap[6]])
}

/// Raw null covariance of the lintest estimates over [`index_set`].
pub fn null_covariance(config: &LinTestConfig) -> Result<CovMatrix> {
    config.validate()?;
    let idx = index_set(config.m);
    let c = lintest_cov_exact(&config.model, &idx, SchemeCounting::Unordered)?;
    Ok(CovMatrix {
        entries: c,
        weight_labels: idx.iter().map(|(j, k)| format!("lintest:j={j},k={k}")).collect(),
    })
}

/// Null correlation matrix (unit diagonal).
pub fn null_cov(config: &LinTestConfig) -> Result<CovMatrix> {
    null_covariance(config)?.correlation()
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn eigenvalues_sym(matrix: &CovMatrix) -> Result<Vec<f64>> {
    let scale = matrix.entries.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if matrix.asymmetry() > 1e-9 * scale {
        return Err(Error::Input(format!("matrix is not symmetric (defect {:e})", matrix.asymmetry())));
    }
    let eig = SymmetricEigen::new(matrix.entries.clone());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Null covariance prepared once for a fixed model and `M`.
#[derive(Debug, Clone)]
pub struct PreparedNull {
    pub index: Vec<(i64, i64)>,
    pub variances: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub cumulants: [f64; 5],
    pub warnings: Vec<String>,
}

impl PreparedNull {
    pub fn new(config: &LinTestConfig) -> Result<Self> {
        let cov = null_covariance(config)?;
        let variances: Vec<f64> = (0..cov.dim()).map(|i| cov.get(i, i)).collect();
        if let Some(pos) = variances.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Config(format!(
                "null variance of {} is {} (must be positive)",
                cov.weight_labels[pos], variances[pos]
            )));
        }
        let corr = cov.correlation()?;
        let mut eig = eigenvalues_sym(&corr)?;
        let warnings = clip_eigenvalues(&mut eig)?;
        Ok(Self {
            index: index_set(config.m),
            variances,
            eigenvalues: eig,
            cumulants: config.model.cumulants(),
            warnings,
        })
    }
}

fn clip_eigenvalues(eig: &mut [f64]) -> Result<Vec<String>> {
    let max = eig.iter().copied().fold(0.0f64, f64::max);
    let mut warnings = Vec::new();
    let mut clipped = 0;
    for v in eig.iter_mut() {
        if *v < -1e-8 * max {
            return Err(Error::Numerical(format!("null covariance has eigenvalue {v:e} (max {max:e})")));
        }
        if *v < 0.0 {
            if *v < -1e-12 * max {
                clipped += 1;
            }
            *v = 0.0;
        }
    }
    if clipped > 0 {
        warnings.push(format!("clipped {clipped} small negative eigenvalue(s) to zero"));
    }
    Ok(warnings)
}

/// Runs the test.
pub fn blt_statistic(series: &TimeSeries, config: &LinTestConfig) -> Result<LinTestResult> {
    config.validate()?;
    if series.len() < 32 {
        return Err(Error::Input(format!("linearity test needs T >= 32, got {}", series.len())));
    }
    check_psi_nonvanishing(&config.model, series.len())?;
    let mut cfg = config.clone();
    if config.cumulants == CumulantSource::Residual {
        cfg.model = config.model.with_cumulants(residual_cumulants(series, &config.model)?)?;
    }
    let null = PreparedNull::new(&cfg)?;
    blt_with_null(series, &cfg, &null)
}

/// Runs the test against a prepared null (the model cumulants are not re-estimated).
pub fn blt_with_null(series: &TimeSeries, config: &LinTestConfig, null: &PreparedNull) -> Result<LinTestResult> {
    let t = series.len() as f64;
    let est = lintest_estimates(series, &config.model, config.m);
    let mut per_term = Vec::with_capacity(null.index.len());
    let mut statistic = 0.0;
    for (&(j, k), &v) in null.index.iter().zip(&null.variances) {
        let e = est[j as usize][k as usize];
        let c = t * e.norm_sqr() / v;
        statistic += c;
        per_term.push(TermResult {
            j,
            k,
            estimate: e,
            variance: v,
            contribution: c,
        });
    }
    let pvalue = weighted_chisq_pvalue(statistic, &null.eigenvalues, config.pvalue_method, config.mc_draws, config.seed)?;
    Ok(LinTestResult {
        statistic,
        pvalue,
        per_term,
        eigenvalues: null.eigenvalues.clone(),
        cumulants: null.cumulants,
        warnings: null.warnings.clone(),
    })
}

/// `P(Σ ν_j ζ_j > x)` with `ζ_j` i.i.d. `χ²₁`.
pub fn weighted_chisq_pvalue(x: f64, nu: &[f64], method: PValueMethod, draws: usize, seed: u64) -> Result<f64> {
    let max = nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if nu.is_empty() || !(max > 0.0) {
        return Err(Error::Degenerate("all weights are zero".into()));
    }
    if nu.iter().any(|v| !v.is_finite()) || !x.is_finite() {
        return Err(Error::Input("non-finite weight or threshold".into()));
    }
    let mut w = nu.to_vec();
    clip_eigenvalues(&mut w)?;
    let w: Vec<f64> = w.into_iter().filter(|v| *v > 0.0).collect();
    if x <= 0.0 {
        return Ok(1.0);
    }
    match method {
        PValueMethod::MonteCarlo => Ok(mc_tail(x, &w, draws, seed)),
        PValueMethod::Imhof => {
            let bound = chernoff_bound(x, &w);
            if bound < 1e-12 {
                return Ok(bound);
            }
            Ok(imhof_tail(x, &w))
        }
    }
}

/// `min_t e^{-tx} Π (1 - 2tν_j)^{-1/2}` over a grid of `t ∈ (0, 1/(2ν_max))`,
/// an upper bound on the tail.
fn chernoff_bound(x: f64, nu: &[f64]) -> f64 {
    let top = nu.iter().copied().fold(0.0f64, f64::max);
    (1..200)
        .map(|i| {
            let t = i as f64 / 200.0 / (2.0 * top);
            let log = -t * x - 0.5 * nu.iter().map(|v| (1.0 - 2.0 * t * v).ln()).sum::<f64>();
            log.exp()
        })
        .fold(1.0f64, f64::min)
}

fn mc_tail(x: f64, nu: &[f64], draws: usize, seed: u64) -> f64 {
    const CHUNK: usize = 4096;
    let chunks = draws.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(draws - c * CHUNK);
            (0..n)
                .filter(|_| {
                    let q: f64 = nu
                        .iter()
                        .map(|v| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            v * z * z
                        })
                        .sum();
                    q > x
                })
                .count()
        })
        .sum();
    hits as f64 / draws as f64
}

const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_1,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_0,
    0.269_266_719_309_996_4,
    0.295_524_224_714_752_9,
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Imhof inversion: `1/2 + (1/π) ∫_0^∞ sin θ(u) / (u ρ(u)) du`.
///
/// The integral is split into panels of one asymptotic half-period `2π/x`
/// (refined where the phase moves faster), each integrated by 10-point
/// Gauss-Legendre on 4 sub-panels. Partial sums at panel ends form an
/// alternating sequence, accelerated with Wynn's epsilon algorithm once the
/// envelope `1/(u ρ(u))` has decayed.
fn imhof_tail(x: f64, nu: &[f64]) -> f64 {
    let sum_nu: f64 = nu.iter().sum();
    let integrand = |u: f64| -> f64 {
        if u == 0.0 {
            return 0.5 * (sum_nu - x);
        }
        let mut theta = -0.5 * x * u;
        let mut log_rho = 0.0;
        for &v in nu {
            theta += 0.5 * (v * u).atan();
            log_rho += 0.25 * (1.0 + v * v * u * u).ln();
        }
        theta.sin() / (u * log_rho.exp())
    };
    let envelope = |u: f64| -> f64 {
        let log_rho: f64 = nu.iter().map(|&v| 0.25 * (1.0 + v * v * u * u).ln()).sum();
        1.0 / (u * log_rho.exp())
    };
    let half = 2.0 * PI / x;
    let fast = 0.5 * (sum_nu + x);
    let width = half.min(PI / fast);
    let panel = |a: f64, b: f64| -> f64 {
        let sub = 4;
        let h = (b - a) / sub as f64;
        let mut s = 0.0;
        for q in 0..sub {
            let (lo, hi) = (a + q as f64 * h, a + (q + 1) as f64 * h);
            let (mid, rad) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (n, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                s += w * integrand(mid + rad * n);
            }
        }
        s * (b - a) / (2.0 * sub as f64)
    };
    let mut u = 0.0;
    let mut total = 0.0;
    let mut partials: Vec<f64> = Vec::new();
    let max_panels = 2_000_000usize;
    for i in 0..max_panels {
        let w = if u < 8.0 * half { width } else { half };
        total += panel(u, u + w);
        u += w;
        if u >= 8.0 * half {
            partials.push(total);
        }
        let env = envelope(u);
        if env * w < 1e-12 {
            break;
        }
        if partials.len() >= 24 && i % 8 == 0 && env * w < 1e-4 {
            let tail = &partials[partials.len() - 21..];
            let a = wynn_epsilon(&tail[..tail.len() - 2]);
            let b = wynn_epsilon(tail);
            if (a - b).abs() < 1e-10 {
                total = b;
                break;
            }
        }
    }
    (0.5 + total / PI).clamp(0.0, 1.0)
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap_or(&0.0);
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            let base = prev.get(i + 1).copied().unwrap_or(0.0);
            next.push(if diff.abs() < 1e-300 { f64::INFINITY } else { base + 1.0 / diff });
        }
        col += 1;
        if col % 2 == 0 {
            if let Some(v) = next.last().copied().filter(|v| v.is_finite()) {
                best = v;
            } else {
                break;
            }
        }
        prev = cur;
        cur = next;
    }
    best
}

/// Null eigenvalues with a fixed identity correlation, for reference tails.
pub fn identity_eigenvalues(dim: usize) -> Vec<f64> {
    let c = CovMatrix {
        entries: DMatrix::identity(dim, dim),
        weight_labels: vec![String::new(); dim],
    };
    eigenvalues_sym(&c).expect("identity is symmetric")
}
