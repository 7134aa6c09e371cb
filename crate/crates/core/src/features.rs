//! Bispectral features and k-means clustering of a panel of series.

use std::f64::consts::PI;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::polymean::{Estimator, EstimatorOptions};
use crate::series::TimeSeries;
use crate::weights::{
    annulus_indicator, bartlett_weight, constant_weight, cosine_product_weight_scaled, wcob_numerator_weight,
    WeightFunction,
};

/// Minimum length of a differenced series kept by [`preprocess_gdp`].
pub const MIN_DIFFERENCED_LEN: usize = 8;

/// Standardized growth series and the ids that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub series: Vec<(String, TimeSeries)>,
    pub skipped: Vec<(String, String)>,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f == ".."
}

/// Reads a wide CSV (`id, v_1, .., v_n` per row, header row first),
/// differences each row and standardizes it to mean 0, variance 1
/// (denominator `n`). Rows with missing values, fewer than
/// [`MIN_DIFFERENCED_LEN`] differences or zero variance are skipped.
pub fn preprocess_gdp<R: Read>(reader: R) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut series = Vec::new();
    let mut skipped = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Input(format!("csv: {e}")))?;
        let Some(id) = rec.get(0) else { continue };
        let id = id.trim().to_string();
        let fields: Vec<&str> = rec.iter().skip(1).collect();
        if fields.iter().any(|f| is_missing(f)) {
            skipped.push((id, "missing values".into()));
            continue;
        }
        let vals: Vec<f64> = fields
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Input(format!("id {id}: invalid value {f:?}")))
            })
            .collect::<Result<_>>()?;
        match standardized_growth(&vals) {
            Ok(s) => series.push((id, s)),
            Err(reason) => skipped.push((id, reason)),
        }
    }
    Ok(Panel { series, skipped })
}

fn standardized_growth(vals: &[f64]) -> std::result::Result<TimeSeries, String> {
    let diff: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    if diff.len() < MIN_DIFFERENCED_LEN {
        return Err(format!("only {} observations after differencing", diff.len()));
    }
    let n = diff.len() as f64;
    let mean = diff.iter().sum::<f64>() / n;
    let sd = (diff.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = diff.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(sd > 1e-12 * scale.max(f64::MIN_POSITIVE)) || sd == 0.0 {
        return Err("zero variance after differencing".into());
    }
    TimeSeries::new(diff.iter().map(|v| (v - mean) / sd).collect()).map_err(|e| e.to_string())
}

/// Ten annuli partitioning `(0, 1)` in `λ1² + λ2²`, then Bartlett and the
/// cosine product scaled by `(2π)^{-2}`.
pub fn feature_weights() -> Vec<WeightFunction> {
    let mut w: Vec<WeightFunction> = (0..10)
        .map(|i| annulus_indicator(i as f64 / 10.0, (i + 1) as f64 / 10.0).expect("valid annulus"))
        .collect();
    w.push(bartlett_weight());
    w.push(cosine_product_weight_scaled((2.0 * PI).powi(-2)));
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub features: Vec<f64>,
}

/// Real parts of the bispectral means of `series` for each weight.
pub fn extract_features(id: &str, series: &TimeSeries, weights: &[WeightFunction]) -> Result<FeatureVector> {
    let est = Estimator::new(
        series.len(),
        weights,
        EstimatorOptions {
            center: true,
            parallel: false,
        },
    )?;
    let features: Vec<f64> = est.estimate(series)?.into_iter().map(|e| e.value.re).collect();
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite feature for {id}")));
    }
    Ok(FeatureVector {
        id: id.to_string(),
        features,
    })
}

/// [`extract_features`] for every series of a panel, in parallel.
pub fn extract_panel(panel: &[(String, TimeSeries)], weights: &[WeightFunction]) -> Result<Vec<FeatureVector>> {
    panel
        .par_iter()
        .map(|(id, s)| extract_features(id, s, weights))
        .collect()
}

/// Weighted centre of bispectrum: `Re M̂_{λ_a} / Re M̂_1` for both axes.
pub fn wcob(series: &TimeSeries) -> Result<(f64, f64)> {
    let weights = [
        wcob_numerator_weight(1)?,
        wcob_numerator_weight(2)?,
        constant_weight(2, 1.0),
    ];
    let est = Estimator::new(series.len(), &weights, EstimatorOptions::default())?;
    let v = est.estimate(series)?;
    let den = v[2].value.re;
    if den.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("WCOB denominator {den:e} is zero")));
    }
    Ok((v[0].value.re / den, v[1].value.re / den))
}

/// Column-wise z-scores (columns with zero spread are left centred).
pub fn zscore_columns(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = vectors.first() else { return Vec::new() };
    let n = vectors.len() as f64;
    let d = first.len();
    let mut out = vectors.to_vec();
    for c in 0..d {
        let mean = vectors.iter().map(|v| v[c]).sum::<f64>() / n;
        let sd = (vectors.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for row in out.iter_mut() {
            row[c] -= mean;
            if sd > 0.0 {
                row[c] /= sd;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Labels in `1..=K`, one per input vector.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's algorithm from k-means++ seeding (ChaCha8 seeded by `seed`).
/// Ties go to the lowest centroid index; an emptied cluster keeps its
/// previous centroid.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    let n = vectors.len();
    if k == 0 || k > n {
        return Err(Error::Input(format!("K must lie in 1..={n}, got {k}")));
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
        return Err(Error::Input("feature vectors must be finite and of equal length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![vectors[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = vectors.iter().map(|v| dist2(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            centroids.len() % n
        };
        centroids.push(vectors[pick].clone());
        for (m, v) in nearest.iter_mut().zip(vectors) {
            *m = m.min(dist2(v, &centroids[centroids.len() - 1]));
        }
    }
    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut labels = Vec::with_capacity(n);
        let mut inertia = 0.0;
        for v in vectors {
            let (best, dist) = centroids
                .iter()
                .enumerate()
                .map(|(c, m)| (c, dist2(v, m)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            labels.push(best);
            inertia += dist;
        }
        (labels, inertia)
    };
    let (mut labels, mut inertia) = assign(&centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (v, &l) in vectors.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(v) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let (next, next_inertia) = assign(&centroids);
        history.push(next_inertia);
        inertia = next_inertia;
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(ClusterAssignment {
        labels: labels.into_iter().map(|l| l + 1).collect(),
        centroids,
        inertia,
        history,
        iterations,
    })
}

/// Adjusted Rand index of two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Input("labelings must be non-empty and of equal length".into()));
    }
    let mut table = std::collections::HashMap::<(usize, usize), u64>::new();
    let mut ra = std::collections::HashMap::<usize, u64>::new();
    let mut rb = std::collections::HashMap::<usize, u64>::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = ra.values().map(|&n| c2(n)).sum();
    let sb: f64 = rb.values().map(|&n| c2(n)).sum();
    let total = c2(a.len() as u64);
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocess_shapes_and_skips() {
        let csv = "id,y1,y2,y3,y4,y5,y6,y7,y8,y9,y10\n\
                   A,1,3,2,5,4,8,7,9,12,10\n\
                   B,1,2,3,4,5,6,7,8,9,10\n\
                   C,1,2,,4,5,6,7,8,9,10\n\
                   D,5,1,4,2,6,3,9,1,7,2\n";
        let p = preprocess_gdp(csv.as_bytes()).unwrap();
        let ids: Vec<&str> = p.series.iter().map(|(i, _)| i.as_str()).collect();
        assert_eq!(ids, vec!["A", "D"]);
        assert!(p.series.iter().all(|(_, s)| s.len() == 9));
        let skipped: Vec<&str> = p.skipped.iter().map(|(i, _)| i.as_str()).collect();
        assert_eq!(skipped, vec!["B", "C"]);
        let s = p.series[0].1.values();
        let mean = s.iter().sum::<f64>() / 9.0;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_rows_skipped() {
        let p = preprocess_gdp("id,a,b,c\nX,1,2,4\n".as_bytes()).unwrap();
        assert!(p.series.is_empty());
        assert_eq!(p.skipped.len(), 1);
    }

    #[test]
    fn zero_series_zero_features_and_degenerate_wcob() {
        let s = TimeSeries::new(vec![0.0; 24]).unwrap();
        let f = extract_features("z", &s, &feature_weights()).unwrap();
        assert_eq!(f.features.len(), 12);
        assert!(f.features.iter().all(|v| *v == 0.0));
        assert!(matches!(wcob(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn kmeans_basic_cases() {
        let mut pts = Vec::new();
        for i in 0..10 {
            let o = i as f64 * 0.01;
            pts.push(vec![o; 12]);
            pts.push(vec![10.0 + o; 12]);
        }
        let r = kmeans(&pts, 2, 3, 100).unwrap();
        for i in 0..10 {
            assert_eq!(r.labels[2 * i], r.labels[0]);
            assert_eq!(r.labels[2 * i + 1], r.labels[1]);
        }
        assert_ne!(r.labels[0], r.labels[1]);
        let small = vec![vec![0.0, 1.0], vec![2.0, 0.0], vec![5.0, 5.0]];
        assert_eq!(kmeans(&small, 3, 1, 10).unwrap().inertia, 0.0);
        assert!(kmeans(&small, 4, 1, 10).is_err());
        assert!(kmeans(&small, 0, 1, 10).is_err());
        let dup = vec![vec![1.0, 1.0]; 6];
        assert_eq!(kmeans(&dup, 2, 5, 10).unwrap(), kmeans(&dup, 2, 5, 10).unwrap());
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap(), 1.0);
        let v = adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
        assert!((v + 0.5).abs() < 1e-12, "{v}");
        assert!(adjusted_rand_index(&[1], &[1, 2]).is_err());
    }
}
