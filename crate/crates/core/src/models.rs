//! Innovation laws, linear filters with closed-form polyspectra, and the
//! named simulation models.
//!
//! Polyspectra follow `f_r(ν) = Σ_h γ_{r+1}(h) e^{-i h·ν}` with no `2π`
//! normalisation, so a linear process `X_t = ψ(B)ε_t` has
//! `f_r(ν) = κ_{r+1} Π_j ψ(e^{-iν_j}) · ψ(e^{i[ν]})`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::polyproc::{Monomial, PolyProcess};

/// Centered innovation distributions used by the simulation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Innovation {
    /// `Exp(1) - 1`.
    Exp1m1,
    /// `χ²₄ - 4`.
    ChiSq4m4,
    /// `N(0, 1)`.
    Gauss01,
}

impl Innovation {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "exp1m1" | "exp" => Ok(Self::Exp1m1),
            "chisq4m4" | "chisq" => Ok(Self::ChiSq4m4),
            "gauss01" | "gauss" => Ok(Self::Gauss01),
            other => Err(Error::UnknownTag(format!("innovation {other:?}"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Exp1m1 => "exp1m1",
            Self::ChiSq4m4 => "chisq4m4",
            Self::Gauss01 => "gauss01",
        }
    }

    /// Cumulant of order `n` (zero for `n = 1`).
    pub fn cumulant(&self, n: usize) -> f64 {
        if n < 2 {
            return 0.0;
        }
        let fact: f64 = (1..n).map(|x| x as f64).product();
        match self {
            Self::Exp1m1 => fact,
            Self::ChiSq4m4 => 2f64.powi(n as i32 - 1) * fact * 4.0,
            Self::Gauss01 => f64::from(u8::from(n == 2)),
        }
    }

    /// `(κ2, .., κ6)`.
    pub fn cumulants(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.cumulant(i + 2))
    }

    /// `(μ2, .., μ6)`, the central moments.
    pub fn central_moments(&self) -> [f64; 5] {
        let m = self.raw_moments(6);
        std::array::from_fn(|i| m[i + 2])
    }

    /// Raw moments `E ε^n` for `n = 0..=max` (equal to central moments).
    pub fn raw_moments(&self, max: usize) -> Vec<f64> {
        moments_from_cumulants(&(0..=max).map(|n| self.cumulant(n)).collect::<Vec<_>>())
    }
}

/// Moments `μ_0..μ_n` from cumulants `κ_0..κ_n` (entry 0 ignored) via
/// `μ_n = Σ_{j=1}^{n} C(n-1, j-1) κ_j μ_{n-j}`.
pub fn moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let n = kappa.len().saturating_sub(1);
    let mut mu = vec![0.0; n + 1];
    mu[0] = 1.0;
    for i in 1..=n {
        let mut binom = 1.0;
        let mut s = 0.0;
        for j in 1..=i {
            if j > 1 {
                binom = binom * (i - j + 1) as f64 / (j - 1) as f64;
            }
            s += binom * kappa[j] * mu[i - j];
        }
        mu[i] = s;
    }
    mu
}

/// Inverse of [`moments_from_cumulants`]: cumulants `κ_0..κ_n` (entry 0 is
/// zero) from moments `μ_0..μ_n` with `μ_0 = 1`.
pub fn cumulants_from_moments(mu: &[f64]) -> Vec<f64> {
    let n = mu.len().saturating_sub(1);
    let mut kappa = vec![0.0; n + 1];
    for i in 1..=n {
        let mut binom = 1.0;
        let mut s = mu[i];
        for j in 1..i {
            if j > 1 {
                binom = binom * (i - j + 1) as f64 / (j - 1) as f64;
            }
            s -= binom * kappa[j] * mu[i - j];
        }
        kappa[i] = s;
    }
    kappa
}

/// Which constant multiplies the linear-process polyspectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstantConvention {
    /// Innovation cumulants (correct for polyspectra).
    #[default]
    Cumulant,
    /// Innovation central moments, for comparison with tabulated constants.
    CentralMoment,
}

/// `X_t = ψ(B) ε_t` with `ψ(z) = θ(z)/φ(z)`, `φ(z) = 1 - Σ φ_j z^j`,
/// `θ(z) = 1 + Σ θ_j z^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    ar: Vec<f64>,
    ma: Vec<f64>,
    cumulants: [f64; 5],
}

impl LinearModel {
    /// Validates causality and `κ2 > 0`.
    pub fn new(ar: Vec<f64>, ma: Vec<f64>, cumulants: [f64; 5]) -> Result<Self> {
        if ar.iter().chain(&ma).chain(&cumulants).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite model coefficient".into()));
        }
        if cumulants[0] <= 0.0 {
            return Err(Error::Input(format!("innovation variance must be positive, got {}", cumulants[0])));
        }
        let min_root = min_ar_root_modulus(&ar);
        if min_root <= 1.0 + 1e-9 {
            return Err(Error::NonCausal(format!(
                "AR polynomial has a root of modulus {min_root:.6} inside or on the unit circle"
            )));
        }
        Ok(Self { ar, ma, cumulants })
    }

    pub fn from_innovation(ar: Vec<f64>, ma: Vec<f64>, innovation: Innovation) -> Result<Self> {
        Self::with_convention(ar, ma, innovation, ConstantConvention::Cumulant)
    }

    pub fn with_convention(
        ar: Vec<f64>,
        ma: Vec<f64>,
        innovation: Innovation,
        convention: ConstantConvention,
    ) -> Result<Self> {
        let c = match convention {
            ConstantConvention::Cumulant => innovation.cumulants(),
            ConstantConvention::CentralMoment => innovation.central_moments(),
        };
        Self::new(ar, ma, c)
    }

    pub fn white_noise(cumulants: [f64; 5]) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), cumulants)
    }

    pub fn ar(&self) -> &[f64] {
        &self.ar
    }

    pub fn ma(&self) -> &[f64] {
        &self.ma
    }

    /// `(κ2, .., κ6)`.
    pub fn cumulants(&self) -> [f64; 5] {
        self.cumulants
    }

    /// `κ_order` for `order` in `2..=6`.
    pub fn kappa(&self, order: usize) -> f64 {
        self.cumulants[order - 2]
    }

    /// Same filter, different innovation cumulants.
    pub fn with_cumulants(&self, cumulants: [f64; 5]) -> Result<Self> {
        Self::new(self.ar.clone(), self.ma.clone(), cumulants)
    }

    /// `ψ(e^{-iλ})` without singularity checks.
    pub fn psi_hat(&self, lambda: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, -lambda);
        let num = poly_eval(1.0, &self.ma, z);
        let den = poly_eval(1.0, &self.ar.iter().map(|a| -a).collect::<Vec<_>>(), z);
        num / den
    }

    /// `θ(e^{-iλ}) / φ(e^{-iλ})`.
    pub fn transfer(&self, lambda: f64) -> Result<Complex64> {
        let z = Complex64::from_polar(1.0, -lambda);
        let den = poly_eval(1.0, &self.ar.iter().map(|a| -a).collect::<Vec<_>>(), z);
        if den.norm() < 1e-300 {
            return Err(Error::SingularFilter(format!("φ vanishes at λ={lambda}")));
        }
        Ok(poly_eval(1.0, &self.ma, z) / den)
    }

    /// `f_r(ν) = κ_{r+1} Π ψ(e^{-iν_j}) ψ(e^{i[ν]})` for `r` in `1..=5`.
    pub fn polyspectrum(&self, r: usize, nu: &[f64]) -> Result<Complex64> {
        if !(1..=5).contains(&r) || nu.len() != r {
            return Err(Error::Input(format!(
                "polyspectrum order r must be in 1..=5 with r frequencies, got r={r}, {} values",
                nu.len()
            )));
        }
        let mut prod = Complex64::new(self.kappa(r + 1), 0.0);
        let mut sum = 0.0;
        for &v in nu {
            prod *= self.transfer(v)?;
            sum += v;
        }
        Ok(prod * self.transfer(-sum)?)
    }

    /// MA(∞) weights `ψ_0..ψ_{n-1}`.
    pub fn psi_weights(&self, n: usize) -> Vec<f64> {
        let mut psi = vec![0.0; n];
        for j in 0..n {
            let mut v = if j == 0 {
                1.0
            } else {
                self.ma.get(j - 1).copied().unwrap_or(0.0)
            };
            for (i, a) in self.ar.iter().enumerate() {
                if j > i {
                    v += a * psi[j - i - 1];
                }
            }
            psi[j] = v;
        }
        psi
    }
}

/// Free function form of [`LinearModel::transfer`].
pub fn transfer(model: &LinearModel, lambda: f64) -> Result<Complex64> {
    model.transfer(lambda)
}

/// Free function form of [`LinearModel::polyspectrum`].
pub fn linear_polyspectrum(model: &LinearModel, r: usize, nu: &[f64]) -> Result<Complex64> {
    model.polyspectrum(r, nu)
}

/// `(κ2, .., κ6)` for a named innovation law.
pub fn innovation_cumulants(tag: &str) -> Result<[f64; 5]> {
    Ok(Innovation::from_tag(tag)?.cumulants())
}

fn poly_eval(c0: f64, coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = (acc + c) * z;
    }
    acc + c0
}

/// Smallest modulus among the roots of `1 - Σ φ_j z^j` (infinity if none).
fn min_ar_root_modulus(ar: &[f64]) -> f64 {
    let p = ar.iter().rposition(|&a| a != 0.0).map_or(0, |i| i + 1);
    if p == 0 {
        return f64::INFINITY;
    }
    // eigenvalues of the companion matrix are the reciprocal roots
    let mut c = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        c[(0, j)] = ar[j];
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    let largest = c
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0f64, f64::max);
    if largest == 0.0 {
        f64::INFINITY
    } else {
        1.0 / largest
    }
}

/// How the second Hermite component is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HermiteForm {
    /// `X = J1 Z + J2 (Z² - c(0)) / √2`; with Gaussian `ε` the closed-form
    /// autocumulants hold exactly.
    Normalized,
    /// `X = J1 Z + J2 Z² - J2`, taken literally.
    Literal,
}

/// Squared Hermite process on an MA(1) driver `Z_t = ε_t + θ ε_{t-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteModel {
    pub j1: f64,
    pub j2: f64,
    pub ma1_theta: f64,
    pub innovation: Innovation,
    pub form: HermiteForm,
}

impl HermiteModel {
    /// `J1 = 2`, `J2 = 5`, `θ = 0.4`, Gaussian innovations, normalized form.
    pub fn standard() -> Self {
        Self {
            j1: 2.0,
            j2: 5.0,
            ma1_theta: 0.4,
            innovation: Innovation::Gauss01,
            form: HermiteForm::Normalized,
        }
    }

    /// `J1 = 2`, `J2 = 5`, `θ = 0.4`, `Exp(1) - 1` innovations, literal form.
    pub fn literal_exp() -> Self {
        Self {
            innovation: Innovation::Exp1m1,
            form: HermiteForm::Literal,
            ..Self::standard()
        }
    }

    /// Autocovariance of the driver `Z`.
    pub fn driver_autocov(&self, h: i64) -> f64 {
        let k2 = self.innovation.cumulant(2);
        match h.abs() {
            0 => k2 * (1.0 + self.ma1_theta * self.ma1_theta),
            1 => k2 * self.ma1_theta,
            _ => 0.0,
        }
    }

    /// The process as a polynomial in innovations.
    pub fn to_poly(&self) -> PolyProcess {
        let th = self.ma1_theta;
        let (a, c) = match self.form {
            HermiteForm::Normalized => (self.j2 / SQRT_2, -self.j2 / SQRT_2 * self.driver_autocov(0)),
            HermiteForm::Literal => (self.j2, -self.j2),
        };
        PolyProcess::new(
            vec![
                Monomial::new(self.j1, vec![(0, 1)]),
                Monomial::new(self.j1 * th, vec![(1, 1)]),
                Monomial::new(a, vec![(0, 2)]),
                Monomial::new(2.0 * a * th, vec![(0, 1), (1, 1)]),
                Monomial::new(a * th * th, vec![(1, 2)]),
            ],
            c,
            self.innovation,
        )
    }
}

/// Closed-form squared-Hermite autocumulants `(γ(h1), γ₃(h1, h2))`.
pub fn hermite_autocumulants(model: &HermiteModel, h1: i64, h2: i64) -> (f64, f64) {
    let c = |h| model.driver_autocov(h);
    let (j1, j2) = (model.j1, model.j2);
    let gamma = j1 * j1 * c(h1) + j2 * j2 * c(h1) * c(h1);
    let gamma3 = SQRT_2 * j1 * j1 * j2 * (c(h1) * c(h2) + c(h1) * c(h1 - h2) + c(h2) * c(h1 - h2))
        + (SQRT_2 * j2).powi(3) * c(h1) * c(h2) * c(h1 - h2);
    (gamma, gamma3)
}

/// `X_t = ε_t + 0.4 ε_{t-1} + θ ε²_{t-1} - θ` with Gaussian innovations.
pub fn quadratic_ma(theta: f64) -> PolyProcess {
    PolyProcess::new(
        vec![
            Monomial::new(1.0, vec![(0, 1)]),
            Monomial::new(0.4, vec![(1, 1)]),
            Monomial::new(theta, vec![(1, 2)]),
        ],
        -theta,
        Innovation::Gauss01,
    )
}

/// A model addressable by tag: either linear (closed-form spectra) or a
/// finite-memory polynomial process (exact lag-domain cumulants).
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Linear {
        tag: String,
        model: LinearModel,
        innovation: Innovation,
    },
    Poly {
        tag: String,
        process: PolyProcess,
    },
}

impl ModelSpec {
    pub fn tag(&self) -> &str {
        match self {
            Self::Linear { tag, .. } | Self::Poly { tag, .. } => tag,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear { .. })
    }

    pub fn linear(&self) -> Option<&LinearModel> {
        match self {
            Self::Linear { model, .. } => Some(model),
            Self::Poly { .. } => None,
        }
    }

    pub fn innovation(&self) -> Innovation {
        match self {
            Self::Linear { innovation, .. } => *innovation,
            Self::Poly { process, .. } => process.innovation,
        }
    }
}

const AR2: [f64; 2] = [1.0, -0.9];

fn parse_params(body: &str) -> Result<Vec<(String, String)>> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("expected key=value, got {kv:?}")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn param_f64(params: &[(String, String)], key: &str) -> Result<Option<f64>> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| {
            v.parse::<f64>()
                .map_err(|_| Error::Input(format!("parameter {key}={v:?} is not a number")))
        })
        .transpose()
}

fn check_keys(params: &[(String, String)], allowed: &[&str], tag: &str) -> Result<()> {
    for (k, _) in params {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Input(format!("unknown parameter {k:?} for model {tag:?}")));
        }
    }
    Ok(())
}

/// Parses a model tag such as `ar2-exp`, `hermite`, `quadma:theta=2.5`,
/// `ar1:phi=0.976`, `ma1:theta=0.4`, `wn-gauss`.
///
/// Linear tags with parameters accept `innov=gauss|exp|chisq` (default gauss).
pub fn parse_model(tag: &str) -> Result<ModelSpec> {
    let (name, body) = tag.split_once(':').unwrap_or((tag, ""));
    let params = parse_params(body)?;
    let linear = |ar: Vec<f64>, ma: Vec<f64>, innovation: Innovation| -> Result<ModelSpec> {
        Ok(ModelSpec::Linear {
            tag: tag.to_string(),
            model: LinearModel::from_innovation(ar, ma, innovation)?,
            innovation,
        })
    };
    let innov_param = || -> Result<Innovation> {
        match params.iter().find(|(k, _)| k == "innov") {
            Some((_, v)) => Innovation::from_tag(v),
            None => Ok(Innovation::Gauss01),
        }
    };
    match name {
        "ar2-exp" | "ar2-chisq" | "arma21-exp" | "arma21-chisq" => {
            check_keys(&params, &[], name)?;
            let innov = if name.ends_with("exp") {
                Innovation::Exp1m1
            } else {
                Innovation::ChiSq4m4
            };
            let ma = if name.starts_with("arma21") { vec![0.8] } else { vec![] };
            linear(AR2.to_vec(), ma, innov)
        }
        "wn-gauss" | "wn-exp" | "wn-chisq" => {
            check_keys(&params, &[], name)?;
            linear(vec![], vec![], Innovation::from_tag(&name[3..])?)
        }
        "ar1" => {
            check_keys(&params, &["phi", "innov"], name)?;
            let phi = param_f64(&params, "phi")?
                .ok_or_else(|| Error::Input("ar1 needs phi=<value>".into()))?;
            linear(vec![phi], vec![], innov_param()?)
        }
        "ma1" => {
            check_keys(&params, &["theta", "innov"], name)?;
            let th = param_f64(&params, "theta")?
                .ok_or_else(|| Error::Input("ma1 needs theta=<value>".into()))?;
            linear(vec![], vec![th], innov_param()?)
        }
        "hermite" | "hermite-exp" => {
            check_keys(&params, &[], name)?;
            let model = if name == "hermite" {
                HermiteModel::standard()
            } else {
                HermiteModel::literal_exp()
            };
            Ok(ModelSpec::Poly {
                tag: tag.to_string(),
                process: model.to_poly(),
            })
        }
        "quadma" => {
            check_keys(&params, &["theta"], name)?;
            let th = param_f64(&params, "theta")?
                .ok_or_else(|| Error::Input("quadma needs theta=<value>".into()))?;
            Ok(ModelSpec::Poly {
                tag: tag.to_string(),
                process: quadratic_ma(th),
            })
        }
        other => Err(Error::UnknownTag(format!("model {other:?}"))),
    }
}

/// Autocovariance at lag `h` from a Riemann sum of `f_1(λ) e^{ihλ} / 2π` on `n` points.
pub fn linear_autocovariance(model: &LinearModel, h: i64, n: usize) -> f64 {
    let mut s = 0.0;
    for l in 0..n {
        let lam = 2.0 * PI * l as f64 / n as f64;
        let f = model.kappa(2) * model.psi_hat(lam).norm_sqr();
        s += f * (h as f64 * lam).cos();
    }
    s / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn innovation_cumulant_values() {
        assert_eq!(Innovation::Exp1m1.cumulants(), [1.0, 2.0, 6.0, 24.0, 120.0]);
        assert_eq!(
            Innovation::ChiSq4m4.cumulants(),
            [8.0, 32.0, 192.0, 1536.0, 15360.0]
        );
        assert_eq!(Innovation::Gauss01.cumulants(), [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(innovation_cumulants("nope").is_err());
    }

    #[test]
    fn exp_moments() {
        let m = Innovation::Exp1m1.raw_moments(6);
        let expect = [1.0, 0.0, 1.0, 2.0, 9.0, 44.0, 265.0];
        for (a, b) in m.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let g = Innovation::Gauss01.raw_moments(8);
        assert!((g[4] - 3.0).abs() < 1e-12 && (g[6] - 15.0).abs() < 1e-12 && (g[8] - 105.0).abs() < 1e-12);
        assert_eq!(Innovation::Exp1m1.central_moments()[2], 9.0);
    }

    #[test]
    fn moment_cumulant_round_trip() {
        let k = [0.0, 0.3, 1.7, -0.4, 2.2, 5.0, -1.0];
        let back = cumulants_from_moments(&moments_from_cumulants(&k));
        for (a, b) in k.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_examples() {
        let wn = LinearModel::white_noise([1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((wn.transfer(0.7).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let ar2 = LinearModel::from_innovation(AR2.to_vec(), vec![], Innovation::Exp1m1).unwrap();
        for &lam in &[0.0, 0.3, 1.0, 2.0, PI] {
            let closed = 1.0 / (2.81 - 3.8 * lam.cos() + 1.8 * (2.0 * lam).cos());
            assert!((ar2.transfer(lam).unwrap().norm_sqr() - closed).abs() < 1e-12 * closed.max(1.0));
        }
        assert!((ar2.transfer(0.0).unwrap().norm_sqr() - 1.0 / 0.81).abs() < 1e-12);
    }

    #[test]
    fn bispectrum_matches_closed_form() {
        let ar2 = LinearModel::from_innovation(AR2.to_vec(), vec![], Innovation::Exp1m1).unwrap();
        let phi = |x: f64| {
            let z = Complex64::from_polar(1.0, -x);
            1.0 - z + 0.9 * z * z
        };
        for &(l, w) in &[(0.3, -1.1), (2.0, 0.5), (-0.4, -0.4)] {
            let closed = Complex64::new(2.0, 0.0) / (phi(l) * phi(w) * phi(-(l + w)));
            assert!((ar2.polyspectrum(2, &[l, w]).unwrap() - closed).norm() < 1e-10);
        }
        let g = LinearModel::from_innovation(AR2.to_vec(), vec![], Innovation::Gauss01).unwrap();
        assert_eq!(g.polyspectrum(2, &[0.2, 0.3]).unwrap().norm(), 0.0);
        assert!(g.polyspectrum(6, &[0.0; 6]).is_err());
        assert!(g.polyspectrum(2, &[0.0]).is_err());
    }

    #[test]
    fn causality_check() {
        assert!(LinearModel::from_innovation(vec![0.976], vec![], Innovation::Gauss01).is_ok());
        assert!(matches!(
            LinearModel::from_innovation(vec![1.0], vec![], Innovation::Gauss01),
            Err(Error::NonCausal(_))
        ));
        assert!(LinearModel::from_innovation(vec![1.2, -0.2], vec![], Innovation::Gauss01).is_err());
        assert!(LinearModel::new(vec![], vec![], [0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn psi_weights_ar1() {
        let m = LinearModel::from_innovation(vec![0.5], vec![0.3], Innovation::Gauss01).unwrap();
        let w = m.psi_weights(4);
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert!((w[1] - 0.8).abs() < 1e-15);
        assert!((w[2] - 0.4).abs() < 1e-15);
        assert!((w[3] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn hermite_reference_values() {
        let m = HermiteModel::standard();
        let (g0, _) = hermite_autocumulants(&m, 0, 0);
        assert!((g0 - 38.28).abs() < 1e-12);
        assert_eq!(hermite_autocumulants(&m, 2, 0).0, 0.0);
        assert_eq!(hermite_autocumulants(&m, 2, 4).1, 0.0);
        assert_eq!(hermite_autocumulants(&m, -2, 3).1, 0.0);
    }

    #[test]
    fn hermite_formulas_match_exact_engine() {
        let m = HermiteModel::standard();
        let p = m.to_poly();
        assert!(p.mean().abs() < 1e-12);
        for h1 in -3..=3 {
            let (g, _) = hermite_autocumulants(&m, h1, 0);
            assert!((p.autocumulant(&[h1]) - g).abs() < 1e-10);
            for h2 in -3..=3 {
                let (_, g3) = hermite_autocumulants(&m, h1, h2);
                assert!((p.autocumulant(&[h1, h2]) - g3).abs() < 1e-9, "({h1},{h2})");
            }
        }
    }

    #[test]
    fn model_tags() {
        for tag in [
            "ar2-exp", "ar2-chisq", "arma21-exp", "arma21-chisq", "hermite", "hermite-exp",
            "quadma:theta=2.5", "ar1:phi=0.976", "ma1:theta=0.4", "wn-gauss", "ar1:phi=0.5,innov=exp",
        ] {
            let m = parse_model(tag).unwrap();
            assert_eq!(m.tag(), tag);
        }
        assert!(parse_model("ar3").is_err());
        assert!(parse_model("quadma").is_err());
        assert!(parse_model("ar1:phi=1.5").is_err());
        assert!(parse_model("ar2-exp:x=1").is_err());
    }

    #[test]
    fn quadma_theta_zero_is_ma1() {
        let p = quadratic_ma(0.0);
        assert!((p.autocumulant(&[0]) - 1.16).abs() < 1e-12);
        assert!((p.autocumulant(&[1]) - 0.4).abs() < 1e-12);
        assert!(p.autocumulant(&[0, 0]).abs() < 1e-12);
    }
}
