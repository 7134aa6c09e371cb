//! Simulation harness: process generators, the variance MSE study and
//! linearity-test rejection rates.
//!
//! Every replicate draws from its own ChaCha20 stream: the generator is
//! seeded with `seed` and the stream number is the replicate index, so
//! results do not depend on thread scheduling.
//!
//! Innovations: `Exp(1) - 1` by inverse CDF `-ln(1 - U) - 1`, `χ²₄ - 4` as
//! a sum of four squared standard normals minus 4, and standard normals by
//! the ziggurat sampler of `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::asymvar::{cov_matrix_unchecked, default_grid_n, SpectraSource, VarianceRequest};
use crate::error::{Error, Result};
use crate::lintest::{blt_statistic, blt_with_null, CumulantSource, LinTestConfig, PreparedNull};
use crate::models::{quadratic_ma, Innovation, ModelSpec};
use crate::polymean::{Estimator, EstimatorOptions};
use crate::series::TimeSeries;
use crate::weights::WeightFunction;

pub const DEFAULT_BURN_IN: usize = 500;

/// What to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub model: ModelSpec,
    pub t: usize,
    pub replicates: usize,
    pub seed: u64,
    pub burn_in: usize,
}

impl SimSpec {
    pub fn new(model: ModelSpec, t: usize, replicates: usize, seed: u64) -> Self {
        Self {
            model,
            t,
            replicates,
            seed,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::Input(format!("T must be at least 2, got {}", self.t)));
        }
        if self.replicates == 0 {
            return Err(Error::Input("replicates must be at least 1".into()));
        }
        if self.model.is_linear() && self.burn_in < 200 {
            return Err(Error::Input(format!("burn-in {} below 200 for a linear model", self.burn_in)));
        }
        Ok(())
    }
}

/// Random generator for replicate `r`.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

pub fn draw_innovation<R: Rng + ?Sized>(innovation: Innovation, rng: &mut R) -> f64 {
    match innovation {
        Innovation::Gauss01 => rng.sample(StandardNormal),
        Innovation::Exp1m1 => {
            let u: f64 = rng.random();
            -(1.0 - u).ln() - 1.0
        }
        Innovation::ChiSq4m4 => {
            (0..4)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z * z
                })
                .sum::<f64>()
                - 4.0
        }
    }
}

/// Replicate `r` of `spec`.
pub fn simulate_replicate(spec: &SimSpec, r: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = replicate_rng(spec.seed, r);
    let t = spec.t;
    let values = match &spec.model {
        ModelSpec::Linear { model, innovation, .. } => {
            let n = spec.burn_in + t;
            let (ar, ma) = (model.ar(), model.ma());
            let eps: Vec<f64> = (0..n).map(|_| draw_innovation(*innovation, &mut rng)).collect();
            let mut x = vec![0.0; n];
            for i in 0..n {
                let mut v = eps[i];
                for (j, b) in ma.iter().enumerate() {
                    if i > j {
                        v += b * eps[i - j - 1];
                    }
                }
                for (j, a) in ar.iter().enumerate() {
                    if i > j {
                        v += a * x[i - j - 1];
                    }
                }
                x[i] = v;
            }
            x.split_off(spec.burn_in)
        }
        ModelSpec::Poly { process, .. } => {
            let span = process.span();
            let eps: Vec<f64> = (0..t + span)
                .map(|_| draw_innovation(process.innovation, &mut rng))
                .collect();
            (span..t + span).map(|i| process.evaluate(&eps, i)).collect()
        }
    };
    TimeSeries::new(values)
}

/// First replicate of `spec`.
pub fn simulate(spec: &SimSpec) -> Result<TimeSeries> {
    simulate_replicate(spec, 0)
}

/// All replicates of `spec`, in order.
pub fn simulate_all(spec: &SimSpec) -> Result<Vec<TimeSeries>> {
    (0..spec.replicates as u64)
        .into_par_iter()
        .map(|r| simulate_replicate(spec, r))
        .collect()
}

/// One row of the MSE study.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub model: String,
    pub weight: String,
    pub variance: f64,
    pub mean_estimate: f64,
    pub mse: f64,
    pub scaled_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub t: usize,
    pub replicates: usize,
    pub outer_replicates: usize,
    pub seed: u64,
    pub rows: Vec<MseRow>,
}

/// Settings of [`mse_experiment`]; defaults are the reduced design
/// (`T = 100`, 1000 inner, 50 outer replicates).
#[derive(Debug, Clone, PartialEq)]
pub struct MseDesign {
    pub t: usize,
    pub replicates: usize,
    pub outer_replicates: usize,
    pub seed: u64,
    /// Variance grid; `None` uses [`default_grid_n`] per model.
    pub grid_n: Option<usize>,
}

impl Default for MseDesign {
    fn default() -> Self {
        Self {
            t: 100,
            replicates: 1000,
            outer_replicates: 50,
            seed: 42,
            grid_n: None,
        }
    }
}

impl MseDesign {
    /// The full design: 1000 outer replicates.
    pub fn full_scale() -> Self {
        Self {
            outer_replicates: 1000,
            ..Self::default()
        }
    }
}

/// For each model and weight: the asymptotic variance `V`, and
/// `mean_i (V̂_i - V)²`, `mean_i (V̂_i / V - 1)²` where `V̂_i` is `T` times the
/// sample variance (denominator `n - 1`) of the estimates over one outer
/// replicate's inner replicates.
pub fn mse_experiment(models: &[ModelSpec], weights: &[WeightFunction], design: &MseDesign) -> Result<MseReport> {
    if design.replicates < 2 || design.outer_replicates == 0 {
        return Err(Error::Input("MSE study needs >= 2 inner and >= 1 outer replicates".into()));
    }
    let k = weights
        .first()
        .map(|w| w.order)
        .ok_or_else(|| Error::Input("MSE study without weights".into()))?;
    let est = Estimator::new(
        design.t,
        weights,
        EstimatorOptions {
            center: true,
            parallel: false,
        },
    )?;
    let mut rows = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        let source = SpectraSource::from_model(model, k);
        let grid_n = design.grid_n.unwrap_or_else(|| default_grid_n(&source, k));
        let req = VarianceRequest::new(weights.to_vec(), source, grid_n)?;
        let cov = cov_matrix_unchecked(&req)?;
        let spec = SimSpec::new(model.clone(), design.t, design.replicates, design.seed.wrapping_add(mi as u64));
        let n = design.replicates;
        let vhat: Vec<Vec<f64>> = (0..design.outer_replicates)
            .into_par_iter()
            .map(|o| -> Result<Vec<f64>> {
                let mut sum = vec![0.0; weights.len()];
                let mut sq = vec![0.0; weights.len()];
                let mut vals = Vec::with_capacity(n);
                for i in 0..n {
                    let s = simulate_replicate(&spec, (o * n + i) as u64)?;
                    vals.push(est.estimate(&s)?);
                }
                for e in &vals {
                    for (w, v) in e.iter().enumerate() {
                        sum[w] += v.value.re;
                    }
                }
                for e in &vals {
                    for (w, v) in e.iter().enumerate() {
                        let d = v.value.re - sum[w] / n as f64;
                        sq[w] += d * d;
                    }
                }
                Ok(sq.iter().map(|s| design.t as f64 * s / (n - 1) as f64).collect())
            })
            .collect::<Result<_>>()?;
        for (w, g) in weights.iter().enumerate() {
            let v = cov.get(w, w);
            let outer = vhat.len() as f64;
            let mean_estimate = vhat.iter().map(|r| r[w]).sum::<f64>() / outer;
            let mse = vhat.iter().map(|r| (r[w] - v).powi(2)).sum::<f64>() / outer;
            let scaled_mse = if v == 0.0 {
                if mse == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                vhat.iter().map(|r| (r[w] / v - 1.0).powi(2)).sum::<f64>() / outer
            };
            rows.push(MseRow {
                model: model.tag().to_string(),
                weight: g.label.clone(),
                variance: v,
                mean_estimate,
                mse,
                scaled_mse,
            });
        }
    }
    Ok(MseReport {
        t: design.t,
        replicates: design.replicates,
        outer_replicates: design.outer_replicates,
        seed: design.seed,
        rows,
    })
}

/// Empirical rejection frequency of the linearity test on one model.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRate {
    pub rejections: usize,
    pub replicates: usize,
}

impl RejectionRate {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.replicates as f64
    }

    /// Binomial standard error at the observed rate.
    pub fn stderr(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }
}

/// Runs the test on `replicates` series of `model` (streams starting at
/// `stream_offset`) and counts `p < level`.
pub fn rejection_rate(
    model: &ModelSpec,
    t: usize,
    replicates: usize,
    level: f64,
    config: &LinTestConfig,
    seed: u64,
    stream_offset: u64,
) -> Result<RejectionRate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("level must lie in (0, 1), got {level}")));
    }
    let spec = SimSpec::new(model.clone(), t, replicates, seed);
    let null = match config.cumulants {
        CumulantSource::Model => Some(PreparedNull::new(config)?),
        CumulantSource::Residual => None,
    };
    let rejections = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let s = simulate_replicate(&spec, stream_offset + r)?;
            let res = match &null {
                Some(n) => blt_with_null(&s, config, n)?,
                None => blt_statistic(&s, config)?,
            };
            Ok(res.pvalue < level)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|b| *b)
        .count();
    Ok(RejectionRate { rejections, replicates })
}

/// One point of the power curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub theta: f64,
    pub rate: RejectionRate,
}

/// Rejection rates of the test on `quadma(θ)` data for each `θ`.
pub fn power_curve(
    thetas: &[f64],
    t: usize,
    replicates: usize,
    level: f64,
    config: &LinTestConfig,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let model = ModelSpec::Poly {
                tag: format!("quadma:theta={theta}"),
                process: quadratic_ma(theta),
            };
            let rate = rejection_rate(&model, t, replicates, level, config, seed, (i * replicates) as u64)?;
            Ok(PowerPoint { theta, rate })
        })
        .collect()
}
