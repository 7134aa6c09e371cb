//! Weight functions on the k-torus.
//!
//! A [`WeightFunction`] is a catalog entry plus metadata. Every entry is
//! evaluated pointwise at angular frequencies in `(-π, π]^k`; the label is a
//! parseable string so weights can be named on the command line.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::LinearModel;

/// Which function a [`WeightFunction`] evaluates.
#[derive(Clone)]
pub enum WeightKind {
    /// `(2π)^{-k} exp(i Σ λ_j h_j)`.
    Lag(Vec<i64>),
    /// Closed rectangle `[a1,b1] × [a2,b2]`.
    Band { a1: f64, b1: f64, a2: f64, b2: f64 },
    /// `a < λ1² + λ2² <= b`.
    Annulus { a: f64, b: f64 },
    /// `(π - |λ1|)(π - |λ2|)`.
    Bartlett,
    /// `scale · cos(3λ1) cos(λ2)`.
    CosineProduct { scale: f64 },
    /// `1 - sqrt((λ1² + λ2²)/2)`.
    Cone,
    /// `λ_axis`.
    Wcob { axis: usize },
    /// `exp(i(jλ1 + kλ2)) / Ψ(λ1, λ2)`.
    LinTest { j: i64, k: i64, model: Box<LinearModel> },
    /// A constant.
    Constant(Complex64),
    /// Values on an `n^k` grid (lexicographic over canonical indices), looked
    /// up at the nearest grid point.
    Tabulated { n: usize, values: Arc<Vec<Complex64>> },
}

impl fmt::Debug for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tabulated { n, values } => write!(f, "Tabulated(n={n}, len={})", values.len()),
            Self::LinTest { j, k, .. } => write!(f, "LinTest(j={j}, k={k})"),
            Self::Lag(h) => write!(f, "Lag({h:?})"),
            Self::Band { a1, b1, a2, b2 } => write!(f, "Band({a1},{b1},{a2},{b2})"),
            Self::Annulus { a, b } => write!(f, "Annulus({a},{b})"),
            Self::Bartlett => write!(f, "Bartlett"),
            Self::CosineProduct { scale } => write!(f, "CosineProduct({scale})"),
            Self::Cone => write!(f, "Cone"),
            Self::Wcob { axis } => write!(f, "Wcob({axis})"),
            Self::Constant(c) => write!(f, "Constant({c})"),
        }
    }
}

/// A weight `g` of order `k`.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    pub order: usize,
    pub label: String,
    pub claims_symmetry: bool,
    pub kind: WeightKind,
}

impl WeightFunction {
    /// `g(λ)` for a `k`-vector of angular frequencies.
    pub fn evaluate(&self, lam: &[f64]) -> Complex64 {
        debug_assert_eq!(lam.len(), self.order);
        match &self.kind {
            WeightKind::Lag(h) => {
                let phase: f64 = lam.iter().zip(h).map(|(l, &hj)| l * hj as f64).sum();
                Complex64::from_polar((2.0 * PI).powi(-(self.order as i32)), phase)
            }
            &WeightKind::Band { a1, b1, a2, b2 } => {
                let inside = (a1..=b1).contains(&lam[0]) && (a2..=b2).contains(&lam[1]);
                Complex64::new(f64::from(u8::from(inside)), 0.0)
            }
            &WeightKind::Annulus { a, b } => {
                let r2 = lam[0] * lam[0] + lam[1] * lam[1];
                Complex64::new(f64::from(u8::from(a < r2 && r2 <= b)), 0.0)
            }
            WeightKind::Bartlett => Complex64::new((PI - lam[0].abs()) * (PI - lam[1].abs()), 0.0),
            &WeightKind::CosineProduct { scale } => {
                Complex64::new(scale * (3.0 * lam[0]).cos() * lam[1].cos(), 0.0)
            }
            WeightKind::Cone => {
                Complex64::new(1.0 - ((lam[0] * lam[0] + lam[1] * lam[1]) / 2.0).sqrt(), 0.0)
            }
            &WeightKind::Wcob { axis } => Complex64::new(lam[axis - 1], 0.0),
            WeightKind::LinTest { j, k, model } => {
                let phase = Complex64::from_polar(1.0, *j as f64 * lam[0] + *k as f64 * lam[1]);
                phase / psi_triple(model, lam[0], lam[1])
            }
            WeightKind::Constant(c) => *c,
            WeightKind::Tabulated { n, values } => {
                let mut idx = 0usize;
                for &l in lam {
                    let raw = (l * *n as f64 / (2.0 * PI)).round() as i64;
                    let canon = crate::series::canonical_index(raw, *n);
                    let lo = if n % 2 == 0 { -(*n as i64) / 2 + 1 } else { -(*n as i64) / 2 };
                    idx = idx * n + (canon - lo) as usize;
                }
                values[idx]
            }
        }
    }

    /// The lintest exponents `(j, k)` if this is a lintest weight.
    pub fn lintest_indices(&self) -> Option<(i64, i64, &LinearModel)> {
        match &self.kind {
            WeightKind::LinTest { j, k, model } => Some((*j, *k, model)),
            _ => None,
        }
    }

    /// Checks `g(-λ) = conj(g(λ))` on an `n^k` grid; returns the largest deviation.
    pub fn symmetry_defect(&self, n: usize) -> f64 {
        let grid = crate::series::index_grid(n);
        let mut worst = 0.0f64;
        let total = grid.len().pow(self.order as u32);
        let mut lam = vec![0.0; self.order];
        let mut neg = vec![0.0; self.order];
        for code in 0..total {
            let mut c = code;
            for d in 0..self.order {
                let ell = grid[c % grid.len()];
                c /= grid.len();
                lam[d] = 2.0 * PI * ell as f64 / n as f64;
                neg[d] = 2.0 * PI * crate::series::canonical_index(-ell, n) as f64 / n as f64;
            }
            let a = self.evaluate(&lam);
            let b = self.evaluate(&neg);
            worst = worst.max((b - a.conj()).norm() / (1.0 + a.norm()));
        }
        worst
    }

    /// Errors if the weight claims symmetry but fails it on an `n^k` grid.
    pub fn check_symmetry(&self, n: usize) -> Result<()> {
        if !self.claims_symmetry {
            return Ok(());
        }
        let d = self.symmetry_defect(n);
        if d > 1e-10 {
            return Err(Error::Evaluation(format!(
                "weight {} claims symmetry but deviates by {d:e}",
                self.label
            )));
        }
        Ok(())
    }
}

/// `Ψ(x1, x2) = ψ(e^{-ix1}) ψ(e^{-ix2}) ψ(e^{i(x1+x2)})`.
pub fn psi_triple(model: &LinearModel, x1: f64, x2: f64) -> Complex64 {
    model.psi_hat(x1) * model.psi_hat(x2) * model.psi_hat(-(x1 + x2))
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// `(2π)^{-k} exp(i Σ λ_j h_j)`.
pub fn lag_weight(k: usize, h: &[i64]) -> Result<WeightFunction> {
    if k == 0 || h.len() != k {
        return Err(Error::Input(format!("lag weight needs k >= 1 and {k} lags, got {}", h.len())));
    }
    let label = if k == 1 {
        format!("lag:h={}", h[0])
    } else {
        let parts: Vec<String> = h.iter().enumerate().map(|(i, v)| format!("h{}={v}", i + 1)).collect();
        format!("lag:{}", parts.join(","))
    };
    Ok(WeightFunction {
        order: k,
        label,
        claims_symmetry: true,
        kind: WeightKind::Lag(h.to_vec()),
    })
}

/// Indicator of the closed rectangle `[a1,b1] × [a2,b2]`.
pub fn band_indicator(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<WeightFunction> {
    if !(a1 < b1 && a2 < b2) {
        return Err(Error::Input(format!("band bounds reversed: [{a1},{b1}]x[{a2},{b2}]")));
    }
    let symmetric = a1 == -b1 && a2 == -b2;
    Ok(WeightFunction {
        order: 2,
        label: format!(
            "band:a1={},b1={},a2={},b2={}",
            fmt_num(a1),
            fmt_num(b1),
            fmt_num(a2),
            fmt_num(b2)
        ),
        claims_symmetry: symmetric,
        kind: WeightKind::Band { a1, b1, a2, b2 },
    })
}

/// Indicator of `a < λ1² + λ2² <= b`.
pub fn annulus_indicator(a: f64, b: f64) -> Result<WeightFunction> {
    if !(0.0 <= a && a < b) {
        return Err(Error::Input(format!("annulus needs 0 <= a < b, got a={a}, b={b}")));
    }
    Ok(WeightFunction {
        order: 2,
        label: format!("annulus:a={},b={}", fmt_num(a), fmt_num(b)),
        claims_symmetry: true,
        kind: WeightKind::Annulus { a, b },
    })
}

/// `(π - |λ1|)(π - |λ2|)`.
pub fn bartlett_weight() -> WeightFunction {
    WeightFunction {
        order: 2,
        label: "bartlett".into(),
        claims_symmetry: true,
        kind: WeightKind::Bartlett,
    }
}

/// `(4π)^{-2} cos(3λ1) cos(λ2)`.
pub fn cosine_product_weight() -> WeightFunction {
    cosine_product_weight_scaled((4.0 * PI).powi(-2))
}

/// `scale · cos(3λ1) cos(λ2)`.
pub fn cosine_product_weight_scaled(scale: f64) -> WeightFunction {
    let label = if scale == (4.0 * PI).powi(-2) {
        "cosprod".to_string()
    } else {
        format!("cosprod:scale={}", fmt_num(scale))
    };
    WeightFunction {
        order: 2,
        label,
        claims_symmetry: true,
        kind: WeightKind::CosineProduct { scale },
    }
}

/// `1 - sqrt((λ1² + λ2²)/2)`.
pub fn cone_weight() -> WeightFunction {
    WeightFunction {
        order: 2,
        label: "cone".into(),
        claims_symmetry: true,
        kind: WeightKind::Cone,
    }
}

/// `g(λ1, λ2) = λ_axis`; odd, so it does not claim symmetry.
pub fn wcob_numerator_weight(axis: usize) -> Result<WeightFunction> {
    if axis != 1 && axis != 2 {
        return Err(Error::Input(format!("wcob axis must be 1 or 2, got {axis}")));
    }
    Ok(WeightFunction {
        order: 2,
        label: format!("wcob:axis={axis}"),
        claims_symmetry: false,
        kind: WeightKind::Wcob { axis },
    })
}

/// Constant weight of order `k`.
pub fn constant_weight(k: usize, c: f64) -> WeightFunction {
    WeightFunction {
        order: k,
        label: if c == 0.0 {
            format!("zero:k={k}")
        } else {
            format!("const:k={k},c={}", fmt_num(c))
        },
        claims_symmetry: true,
        kind: WeightKind::Constant(Complex64::new(c, 0.0)),
    }
}

/// The zero weight of order `k`.
pub fn zero_weight(k: usize) -> WeightFunction {
    constant_weight(k, 0.0)
}

/// Weight from values on an `n^k` grid of canonical Fourier indices.
pub fn tabulated_weight(k: usize, n: usize, values: Vec<Complex64>, claims_symmetry: bool) -> Result<WeightFunction> {
    if values.len() != n.pow(k as u32) {
        return Err(Error::Input(format!("tabulated weight needs {} values, got {}", n.pow(k as u32), values.len())));
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Evaluation("tabulated weight has non-finite values".into()));
    }
    Ok(WeightFunction {
        order: k,
        label: format!("table:k={k},n={n}"),
        claims_symmetry,
        kind: WeightKind::Tabulated { n, values: Arc::new(values) },
    })
}

/// Default grid used to screen `Ψ` for near-zeros.
pub const PSI_CHECK_GRID: usize = 64;

/// `g_{j,k}(x1, x2) = exp(i(j x1 + k x2)) / Ψ(x1, x2)`, screened on the
/// default grid.
pub fn lintest_weight(j: i64, k: i64, model: &LinearModel) -> Result<WeightFunction> {
    lintest_weight_on_grid(j, k, model, PSI_CHECK_GRID)
}

/// As [`lintest_weight`], screening `|Ψ| >= 1e-8` on an `n × n` grid.
pub fn lintest_weight_on_grid(j: i64, k: i64, model: &LinearModel, n: usize) -> Result<WeightFunction> {
    check_psi_nonvanishing(model, n)?;
    Ok(WeightFunction {
        order: 2,
        label: format!("lintest:j={j},k={k}"),
        claims_symmetry: true,
        kind: WeightKind::LinTest { j, k, model: Box::new(model.clone()) },
    })
}

/// Errors if `|Ψ| < 1e-8` somewhere on the `n × n` Fourier grid.
pub fn check_psi_nonvanishing(model: &LinearModel, n: usize) -> Result<()> {
    let psi: Vec<Complex64> = (0..n).map(|l| model.psi_hat(2.0 * PI * l as f64 / n as f64)).collect();
    for a in 0..n {
        for b in 0..n {
            let v = psi[a] * psi[b] * psi[(2 * n - a - b) % n];
            if !(v.norm() >= 1e-8) {
                return Err(Error::SingularFilter(format!(
                    "|Ψ| = {:e} at grid point ({a},{b}) of {n}",
                    v.norm()
                )));
            }
        }
    }
    Ok(())
}

fn parse_kv(body: &str) -> Result<Vec<(String, String)>> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Input(format!("expected key=value in weight label, got {kv:?}")))
        })
        .collect()
}

fn get<T: std::str::FromStr>(kv: &[(String, String)], key: &str) -> Result<Option<T>> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| {
            v.parse::<T>()
                .map_err(|_| Error::Input(format!("weight parameter {key}={v:?} is malformed")))
        })
        .transpose()
}

fn require<T: std::str::FromStr>(kv: &[(String, String)], key: &str) -> Result<T> {
    get(kv, key)?.ok_or_else(|| Error::Input(format!("weight label is missing {key}=")))
}

fn only_keys(kv: &[(String, String)], allowed: &[&str]) -> Result<()> {
    match kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(Error::Input(format!("unexpected weight parameter {k:?}"))),
        None => Ok(()),
    }
}

/// Parses a weight label.
///
/// `default_k` resolves the order of `const`/`zero` labels without `k=`;
/// `model` is required for `lintest:` labels.
pub fn parse_weight(label: &str, default_k: Option<usize>, model: Option<&LinearModel>) -> Result<WeightFunction> {
    let (name, body) = label.split_once(':').unwrap_or((label, ""));
    let kv = parse_kv(body)?;
    match name {
        "lag" => {
            if kv.len() == 1 && kv[0].0 == "h" {
                return lag_weight(1, &[require(&kv, "h")?]);
            }
            let k = kv.len();
            let mut h = Vec::with_capacity(k);
            for i in 1..=k {
                h.push(require(&kv, &format!("h{i}"))?);
            }
            lag_weight(k, &h)
        }
        "band" => {
            only_keys(&kv, &["a1", "b1", "a2", "b2"])?;
            if kv.is_empty() {
                return band_indicator(-0.2, 0.2, -0.5, 0.5);
            }
            band_indicator(require(&kv, "a1")?, require(&kv, "b1")?, require(&kv, "a2")?, require(&kv, "b2")?)
        }
        "annulus" => {
            only_keys(&kv, &["a", "b"])?;
            annulus_indicator(require(&kv, "a")?, require(&kv, "b")?)
        }
        "bartlett" => {
            only_keys(&kv, &[])?;
            Ok(bartlett_weight())
        }
        "cosprod" => {
            only_keys(&kv, &["scale"])?;
            Ok(match get::<f64>(&kv, "scale")? {
                Some(s) => cosine_product_weight_scaled(s),
                None => cosine_product_weight(),
            })
        }
        "cone" => {
            only_keys(&kv, &[])?;
            Ok(cone_weight())
        }
        "wcob" => {
            only_keys(&kv, &["axis"])?;
            wcob_numerator_weight(require(&kv, "axis")?)
        }
        "lintest" => {
            only_keys(&kv, &["j", "k"])?;
            let model = model.ok_or_else(|| Error::Input("lintest weights need a model".into()))?;
            lintest_weight(require(&kv, "j")?, require(&kv, "k")?, model)
        }
        "const" | "zero" => {
            only_keys(&kv, &["k", "c"])?;
            let k = get::<usize>(&kv, "k")?
                .or(default_k)
                .ok_or_else(|| Error::Input("constant weight needs k=".into()))?;
            if k == 0 {
                return Err(Error::Input("weight order must be positive".into()));
            }
            let c = if name == "zero" { 0.0 } else { require(&kv, "c")? };
            Ok(constant_weight(k, c))
        }
        other => Err(Error::UnknownTag(format!("weight {other:?}"))),
    }
}

/// The three weights of the MSE study: cosine product, band, cone.
pub fn mse_study_weights() -> Vec<WeightFunction> {
    vec![
        cosine_product_weight(),
        band_indicator(-0.2, 0.2, -0.5, 0.5).expect("valid band"),
        cone_weight(),
    ]
}
