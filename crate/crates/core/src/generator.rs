//! Generator families: the latent vectors (R, U or T) that carry the dependence structure.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, chol_logdet, chol_solve, Matrix};
use crate::mvn::{self, log_norm_cdf, norm_sf};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::river::River;

/// Which latent vector a generator describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    R,
    U,
    T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub role: Role,
    #[serde(flatten)]
    pub family: Family,
}

impl GeneratorSpec {
    pub fn new(role: Role, family: Family) -> Result<GeneratorSpec> {
        family.validate()?;
        Ok(GeneratorSpec { role, family })
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }
}

/// Parametric generator laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum Family {
    /// Independent exponentials with the given means.
    IndepExponential { scale: Vec<f64> },
    /// Independent Gumbel variables `loc + scale·G`, with `G` max-type (cdf `exp(-e^{-x})`)
    /// or, when `reversed`, min-type (cdf `1 - exp(-e^{x})`).
    IndepGumbel {
        loc: Vec<f64>,
        scale: Vec<f64>,
        #[serde(default)]
        reversed: bool,
    },
    MultivariateNormal(Gaussian),
    /// `exp(N)` with `N` multivariate normal; only meaningful for role R.
    LogNormalR(Gaussian),
    RiverNetwork(River),
    Mixture { weights: Vec<f64>, components: Vec<Family> },
    /// Degenerate law; coordinates may be `"inf"` / `"-inf"`.
    PointMass {
        #[serde(with = "ext_float")]
        point: Vec<f64>,
    },
}

/// Multivariate normal parameters with a cached Cholesky factor.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GaussianParams", into = "GaussianParams")]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: Matrix,
    chol: Matrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl TryFrom<GaussianParams> for Gaussian {
    type Error = Error;
    fn try_from(p: GaussianParams) -> Result<Gaussian> {
        Gaussian::new(p.mean, p.cov)
    }
}

impl From<Gaussian> for GaussianParams {
    fn from(g: Gaussian) -> GaussianParams {
        GaussianParams {
            mean: g.mean,
            cov: g.cov,
        }
    }
}

impl PartialEq for Gaussian {
    fn eq(&self, other: &Gaussian) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Gaussian> {
        if mean.is_empty() || cov.len() != mean.len() {
            return Err(Error::Model("mean and covariance dimensions differ".into()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Model("mean must be finite".into()));
        }
        if !linalg::is_symmetric(&cov) {
            return Err(Error::Model("covariance matrix is not symmetric".into()));
        }
        let chol = cholesky(&cov)?;
        Ok(Gaussian { mean, cov, chol })
    }

    /// Builds from a lower-triangular factor (`cov = L L'`).
    pub fn from_cholesky(mean: Vec<f64>, l: &Matrix) -> Result<Gaussian> {
        Gaussian::new(mean, linalg::outer_lower(l))
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn chol(&self) -> &Matrix {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let sol = chol_solve(&self.chol, &diff);
        let q = linalg::dot(&diff, &sol);
        let d = self.dim() as f64;
        -0.5 * q - 0.5 * chol_logdet(&self.chol) - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
    }

    /// log of `∂^{|U|} F / ∂x_U` with `U` the uncensored coordinates.
    pub fn log_partial(&self, x: &[f64], censored: &[bool]) -> Result<f64> {
        let d = self.dim();
        let unc: Vec<usize> = (0..d).filter(|&j| !censored[j]).collect();
        if unc.iter().any(|&j| !x[j].is_finite())
            || (0..d).any(|j| censored[j] && x[j] == f64::NEG_INFINITY)
        {
            return Ok(f64::NEG_INFINITY);
        }
        // A censored coordinate at +inf integrates out.
        let cen: Vec<usize> = (0..d).filter(|&j| censored[j] && x[j] < f64::INFINITY).collect();
        if cen.is_empty() {
            if unc.len() < d {
                let xa: Vec<f64> = unc.iter().map(|&j| x[j]).collect();
                let sub = Gaussian::new(
                    unc.iter().map(|&j| self.mean[j]).collect(),
                    linalg::submatrix(&self.cov, &unc, &unc),
                )?;
                return Ok(sub.log_pdf(&xa));
            }
            return Ok(self.log_pdf(x));
        }
        if unc.is_empty() {
            let p = self.cdf(x)?;
            return Ok(p.ln());
        }
        let (marg, cond) = self.condition(&unc, &cen, x)?;
        let base = marg;
        let upper: Vec<f64> = cen.iter().map(|&j| x[j]).collect();
        Ok(base + cond.log_cdf(&upper)?)
    }

    /// Log marginal density of `x_A` and the conditional law of the `B` block given it.
    fn condition(&self, a: &[usize], b: &[usize], x: &[f64]) -> Result<(f64, Gaussian)> {
        let saa = linalg::submatrix(&self.cov, a, a);
        let sba = linalg::submatrix(&self.cov, b, a);
        let sbb = linalg::submatrix(&self.cov, b, b);
        let la = cholesky(&saa)?;
        let xa: Vec<f64> = a.iter().map(|&j| x[j]).collect();
        let ma: Vec<f64> = a.iter().map(|&j| self.mean[j]).collect();
        let marginal = Gaussian {
            mean: ma.clone(),
            cov: saa,
            chol: la.clone(),
        };
        let lp = marginal.log_pdf(&xa);
        let diff: Vec<f64> = xa.iter().zip(&ma).map(|(p, q)| p - q).collect();
        let sol = chol_solve(&la, &diff);
        let mean: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(r, &j)| self.mean[j] + linalg::dot(&sba[r], &sol))
            .collect();
        let mut cov = sbb;
        for r in 0..b.len() {
            let s = chol_solve(&la, &sba[r]);
            for c in 0..b.len() {
                cov[r][c] -= linalg::dot(&sba[c], &s);
            }
        }
        for r in 0..b.len() {
            for c in 0..r {
                let v = 0.5 * (cov[r][c] + cov[c][r]);
                cov[r][c] = v;
                cov[c][r] = v;
            }
        }
        Ok((lp, Gaussian::new(mean, cov)?))
    }

    pub fn conditional(&self, j: usize, value: f64) -> Result<Gaussian> {
        let rest: Vec<usize> = (0..self.dim()).filter(|&k| k != j).collect();
        let mut x = self.mean.clone();
        x[j] = value;
        Ok(self.condition(&[j], &rest, &x)?.1)
    }

    pub fn cdf(&self, x: &[f64]) -> Result<f64> {
        let u: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        mvn::mvn_cdf(&u, &self.cov)
    }

    fn log_cdf(&self, x: &[f64]) -> Result<f64> {
        if self.dim() == 1 {
            return Ok(log_norm_cdf((x[0] - self.mean[0]) / self.cov[0][0].sqrt()));
        }
        Ok(self.cdf(x)?.ln())
    }

    pub fn sf_union(&self, x: &[f64]) -> Result<f64> {
        let u: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        mvn::mvn_sf_union(&u, &self.cov)
    }

    pub fn box_prob(&self, lower: &[f64], upper: &[f64]) -> Result<f64> {
        let l: Vec<f64> = lower.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let u: Vec<f64> = upper.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        mvn::mvn_box(&l, &u, &self.cov)
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            out[i] = self.mean[i] + (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>();
        }
    }

    pub fn marginal_sd(&self, j: usize) -> f64 {
        self.cov[j][j].sqrt()
    }

    fn marginal_log_pdf(&self, j: usize, x: f64) -> f64 {
        let s = self.marginal_sd(j);
        let z = (x - self.mean[j]) / s;
        -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// One-dimensional law of a coordinate of an independent-component family.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Margin {
    Exp(f64),
    Gumbel { m: f64, b: f64, reversed: bool },
}

impl Margin {
    pub(crate) fn cdf(self, x: f64) -> f64 {
        match self {
            Margin::Exp(l) => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / l).exp_m1()
                }
            }
            Margin::Gumbel { m, b, reversed } => {
                if reversed {
                    -(-((x - m) / b).exp()).exp_m1()
                } else {
                    (-(-(x - m) / b).exp()).exp()
                }
            }
        }
    }

    pub(crate) fn sf(self, x: f64) -> f64 {
        match self {
            Margin::Exp(l) => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x / l).exp()
                }
            }
            Margin::Gumbel { m, b, reversed } => {
                if reversed {
                    (-((x - m) / b).exp()).exp()
                } else {
                    -(-(-(x - m) / b).exp()).exp_m1()
                }
            }
        }
    }

    pub(crate) fn log_cdf(self, x: f64) -> f64 {
        match self {
            Margin::Exp(l) => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else if x < l * std::f64::consts::LN_2 {
                    (-(-x / l).exp_m1()).ln()
                } else {
                    (-(-x / l).exp()).ln_1p()
                }
            }
            Margin::Gumbel { m, b, reversed } => {
                if reversed {
                    self.cdf(x).ln()
                } else {
                    -(-(x - m) / b).exp()
                }
            }
        }
    }

    pub(crate) fn log_pdf(self, x: f64) -> f64 {
        match self {
            Margin::Exp(l) => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x / l - l.ln()
                }
            }
            Margin::Gumbel { m, b, reversed } => {
                if !x.is_finite() {
                    return f64::NEG_INFINITY;
                }
                let z = if reversed { (x - m) / b } else { -(x - m) / b };
                z - z.exp() - b.ln()
            }
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        match self {
            Margin::Exp(l) => l * e,
            Margin::Gumbel { m, b, reversed } => {
                if reversed {
                    m + b * e.ln()
                } else {
                    m - b * e.ln()
                }
            }
        }
    }
}

fn logsumexp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::IndepExponential { scale } => scale.len(),
            Family::IndepGumbel { loc, .. } => loc.len(),
            Family::MultivariateNormal(g) | Family::LogNormalR(g) => g.dim(),
            Family::RiverNetwork(r) => r.dim(),
            Family::Mixture { components, .. } => components.first().map_or(0, |c| c.dim()),
            Family::PointMass { point } => point.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Family::IndepExponential { .. } => "IndepExponential",
            Family::IndepGumbel { .. } => "IndepGumbel",
            Family::MultivariateNormal(_) => "MultivariateNormal",
            Family::LogNormalR(_) => "LogNormalR",
            Family::RiverNetwork(_) => "RiverNetwork",
            Family::Mixture { .. } => "Mixture",
            Family::PointMass { .. } => "PointMass",
        }
    }

    /// Structural checks of the parameters (positivity, dimensions, weights).
    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[f64], what: &str| -> Result<()> {
            if v.is_empty() {
                return Err(Error::Model(format!("{what} must not be empty")));
            }
            if v.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return Err(Error::Model(format!("{what} must be positive and finite")));
            }
            Ok(())
        };
        match self {
            Family::IndepExponential { scale } => positive(scale, "exponential scales"),
            Family::IndepGumbel { loc, scale, .. } => {
                positive(scale, "Gumbel scales")?;
                if loc.len() != scale.len() {
                    return Err(Error::Model("Gumbel loc and scale lengths differ".into()));
                }
                if loc.iter().any(|m| !m.is_finite()) {
                    return Err(Error::Model("Gumbel locations must be finite".into()));
                }
                Ok(())
            }
            Family::MultivariateNormal(_) | Family::LogNormalR(_) | Family::RiverNetwork(_) => Ok(()),
            Family::Mixture { weights, components } => {
                if components.is_empty() || weights.len() != components.len() {
                    return Err(Error::Model("mixture needs one weight per component".into()));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::Model("mixture weights must be nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Model(format!("mixture weights sum to {total}, not 1")));
                }
                let d = components[0].dim();
                for c in components {
                    c.validate()?;
                    if c.dim() != d {
                        return Err(Error::Model("mixture components differ in dimension".into()));
                    }
                }
                Ok(())
            }
            Family::PointMass { point } => {
                if point.is_empty() || point.iter().any(|p| p.is_nan()) {
                    return Err(Error::Model("point mass needs a non-empty, non-NaN point".into()));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn margins(&self) -> Option<Vec<Margin>> {
        match self {
            Family::IndepExponential { scale } => Some(scale.iter().map(|&l| Margin::Exp(l)).collect()),
            Family::IndepGumbel { loc, scale, reversed } => Some(
                loc.iter()
                    .zip(scale)
                    .map(|(&m, &b)| Margin::Gumbel {
                        m,
                        b,
                        reversed: *reversed,
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// True when the law has a Lebesgue density on R^d.
    pub fn has_density(&self) -> bool {
        match self {
            Family::PointMass { .. } => false,
            Family::Mixture { components, .. } => components.iter().all(|c| c.has_density()),
            _ => true,
        }
    }

    pub fn log_pdf(&self, u: &[f64]) -> Result<f64> {
        self.log_partial(u, &vec![false; u.len()])
    }

    /// log of the mixed partial derivative of the cdf in the uncensored coordinates,
    /// evaluated with the censored coordinates as upper bounds.
    pub fn log_partial(&self, u: &[f64], censored: &[bool]) -> Result<f64> {
        if let Some(margins) = self.margins() {
            let mut s = 0.0;
            for (j, m) in margins.iter().enumerate() {
                s += if censored[j] { m.log_cdf(u[j]) } else { m.log_pdf(u[j]) };
                if s == f64::NEG_INFINITY {
                    break;
                }
            }
            return Ok(s);
        }
        match self {
            Family::MultivariateNormal(g) => g.log_partial(u, censored),
            Family::LogNormalR(g) => {
                let mut logs = Vec::with_capacity(u.len());
                let mut jac = 0.0;
                for (j, &v) in u.iter().enumerate() {
                    if v <= 0.0 {
                        return Ok(f64::NEG_INFINITY);
                    }
                    logs.push(v.ln());
                    if !censored[j] {
                        jac -= v.ln();
                    }
                }
                Ok(g.log_partial(&logs, censored)? + jac)
            }
            Family::RiverNetwork(r) => {
                if censored.iter().any(|&c| c) {
                    return Err(Error::UnsupportedModel(
                        "censored densities are not available for river networks".into(),
                    ));
                }
                for j in 0..r.dim() {
                    if !(r.local_input(j, u) >= 0.0) {
                        return Ok(f64::NEG_INFINITY);
                    }
                }
                Ok(-r.outlets().map(|o| u[o]).sum::<f64>())
            }
            Family::Mixture { weights, components } => {
                let mut terms = Vec::with_capacity(weights.len());
                for (w, c) in weights.iter().zip(components) {
                    if *w > 0.0 {
                        terms.push(w.ln() + c.log_partial(u, censored)?);
                    }
                }
                Ok(logsumexp(terms.into_iter()))
            }
            Family::PointMass { .. } => Err(Error::UnsupportedModel(
                "a point-mass generator has no density".into(),
            )),
            Family::IndepExponential { .. } | Family::IndepGumbel { .. } => unreachable!(),
        }
    }

    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if let Some(margins) = self.margins() {
            let s: f64 = margins.iter().zip(u).map(|(m, &x)| m.log_cdf(x)).sum();
            return Ok(s.exp());
        }
        match self {
            Family::MultivariateNormal(g) => g.cdf(u),
            Family::LogNormalR(g) => {
                if u.iter().any(|&v| v <= 0.0) {
                    return Ok(0.0);
                }
                let logs: Vec<f64> = u.iter().map(|v| v.ln()).collect();
                g.cdf(&logs)
            }
            Family::RiverNetwork(r) => Ok(r.cdf(u)),
            Family::Mixture { weights, components } => {
                let mut s = 0.0;
                for (w, c) in weights.iter().zip(components) {
                    if *w > 0.0 {
                        s += w * c.cdf(u)?;
                    }
                }
                Ok(s.clamp(0.0, 1.0))
            }
            Family::PointMass { point } => Ok(if point.iter().zip(u).all(|(p, x)| p <= x) {
                1.0
            } else {
                0.0
            }),
            Family::IndepExponential { .. } | Family::IndepGumbel { .. } => unreachable!(),
        }
    }

    /// `P[G ≰ u]`, computed so that small values keep their relative accuracy.
    pub fn sf_union(&self, u: &[f64]) -> Result<f64> {
        if let Some(margins) = self.margins() {
            let s: f64 = margins.iter().zip(u).map(|(m, &x)| m.log_cdf(x)).sum();
            return Ok(-s.exp_m1());
        }
        match self {
            Family::MultivariateNormal(g) => g.sf_union(u),
            Family::LogNormalR(g) => {
                if u.iter().any(|&v| v <= 0.0) {
                    return Ok(1.0);
                }
                let logs: Vec<f64> = u.iter().map(|v| v.ln()).collect();
                g.sf_union(&logs)
            }
            Family::RiverNetwork(r) => {
                let union: f64 = (0..r.dim())
                    .map(|j| {
                        if u[j] <= 0.0 {
                            1.0
                        } else if u[j] == f64::INFINITY {
                            0.0
                        } else {
                            gamma_ur(r.count(j) as f64, u[j])
                        }
                    })
                    .sum();
                Ok((1.0 - r.cdf(u)).max(0.0).min(union))
            }
            Family::Mixture { weights, components } => {
                let mut s = 0.0;
                for (w, c) in weights.iter().zip(components) {
                    if *w > 0.0 {
                        s += w * c.sf_union(u)?;
                    }
                }
                Ok(s.clamp(0.0, 1.0))
            }
            Family::PointMass { .. } => Ok(1.0 - self.cdf(u)?),
            Family::IndepExponential { .. } | Family::IndepGumbel { .. } => unreachable!(),
        }
    }

    /// `F(hi) - F(lo)` for `lo ≤ hi` componentwise.
    pub fn cdf_diff(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        if let Family::Mixture { weights, components } = self {
            let mut s = 0.0;
            for (w, c) in weights.iter().zip(components) {
                if *w > 0.0 {
                    s += w * c.cdf_diff(lo, hi)?;
                }
            }
            return Ok(s.max(0.0));
        }
        if let Some(margins) = self.margins() {
            // per-component log differences keep their accuracy when one factor dominates the sum
            let mut l_hi = 0.0;
            let mut gap = 0.0;
            for ((m, &a), &b) in margins.iter().zip(lo).zip(hi) {
                let h = m.log_cdf(b);
                if h == f64::NEG_INFINITY {
                    return Ok(0.0);
                }
                l_hi += h;
                if a != b {
                    gap += m.log_cdf(a) - h;
                }
            }
            return Ok((l_hi.exp() * -gap.min(0.0).exp_m1()).max(0.0));
        }
        // near the origin both survivors are close to 1; difference the cdfs there instead
        let f_hi = self.cdf(hi)?;
        if f_hi < 0.5 {
            return Ok((f_hi - self.cdf(lo)?).max(0.0));
        }
        let a = self.sf_union(lo)?;
        let b = self.sf_union(hi)?;
        Ok((a - b).max(0.0))
    }

    /// `P[lower < G ≤ upper]`.
    pub fn box_prob(&self, lower: &[f64], upper: &[f64]) -> Result<f64> {
        let d = lower.len();
        if (0..d).any(|j| upper[j] <= lower[j]) {
            return Ok(0.0);
        }
        if let Some(margins) = self.margins() {
            return Ok(margins
                .iter()
                .enumerate()
                .map(|(j, m)| {
                    let hi = if upper[j] == f64::INFINITY { 1.0 } else { m.cdf(upper[j]) };
                    if lower[j] == f64::NEG_INFINITY {
                        hi
                    } else if hi > 0.5 {
                        m.sf(lower[j]) - if upper[j] == f64::INFINITY { 0.0 } else { m.sf(upper[j]) }
                    } else {
                        hi - m.cdf(lower[j])
                    }
                })
                .product::<f64>()
                .max(0.0));
        }
        match self {
            Family::MultivariateNormal(g) => g.box_prob(lower, upper),
            Family::LogNormalR(g) => {
                let ln = |v: f64| if v <= 0.0 { f64::NEG_INFINITY } else { v.ln() };
                let l: Vec<f64> = lower.iter().map(|&v| ln(v)).collect();
                let u: Vec<f64> = upper.iter().map(|&v| ln(v)).collect();
                g.box_prob(&l, &u)
            }
            Family::Mixture { weights, components } => {
                let mut s = 0.0;
                for (w, c) in weights.iter().zip(components) {
                    if *w > 0.0 {
                        s += w * c.box_prob(lower, upper)?;
                    }
                }
                Ok(s)
            }
            Family::PointMass { point } => Ok(
                if point.iter().enumerate().all(|(j, p)| lower[j] < *p && *p <= upper[j]) {
                    1.0
                } else {
                    0.0
                },
            ),
            Family::RiverNetwork(_) => {
                let finite: Vec<usize> = (0..d).filter(|&j| lower[j] > 0.0).collect();
                if finite.len() > 12 {
                    return Err(Error::UnsupportedEvent("box with too many lower bounds".into()));
                }
                let mut total = 0.0;
                for mask in 0..(1usize << finite.len()) {
                    let mut point = upper.to_vec();
                    let mut sign = 1.0;
                    for (b, &j) in finite.iter().enumerate() {
                        if mask & (1 << b) != 0 {
                            point[j] = lower[j];
                            sign = -sign;
                        }
                    }
                    total += sign * self.cdf(&point)?;
                }
                Ok(total.max(0.0))
            }
            Family::IndepExponential { .. } | Family::IndepGumbel { .. } => unreachable!(),
        }
    }

    /// `P[Σ a_j G_j > c]` for nonnegative weights.
    pub fn halfspace_sf(&self, a: &[f64], c: f64, cfg: &QuadratureConfig) -> Result<f64> {
        match self {
            Family::IndepExponential { scale } => {
                let w: Vec<f64> = a.iter().zip(scale).map(|(x, l)| x * l).collect();
                weighted_exp_sum_sf(&w, c, cfg)
            }
            Family::RiverNetwork(r) => weighted_exp_sum_sf(&r.input_weights(a), c, cfg),
            Family::MultivariateNormal(g) => {
                let m = linalg::dot(a, g.mean());
                let v = linalg::dot(a, &linalg::mat_vec(g.cov(), a));
                if v <= 0.0 {
                    return Ok(if m > c { 1.0 } else { 0.0 });
                }
                Ok(norm_sf((c - m) / v.sqrt()))
            }
            Family::PointMass { point } => {
                let s: f64 = a.iter().zip(point).filter(|(w, _)| **w != 0.0).map(|(w, p)| w * p).sum();
                Ok(if s > c { 1.0 } else { 0.0 })
            }
            Family::Mixture { weights, components } => {
                let mut s = 0.0;
                for (w, comp) in weights.iter().zip(components) {
                    if *w > 0.0 {
                        s += w * comp.halfspace_sf(a, c, cfg)?;
                    }
                }
                Ok(s)
            }
            _ => Err(Error::UnsupportedEvent(format!(
                "half-space probabilities are not available for {}",
                self.kind()
            ))),
        }
    }

    /// Marginal log density of coordinate `j`.
    pub fn marginal_log_pdf(&self, j: usize, x: f64) -> Result<f64> {
        if let Some(m) = self.margins() {
            return Ok(m[j].log_pdf(x));
        }
        match self {
            Family::MultivariateNormal(g) => Ok(g.marginal_log_pdf(j, x)),
            Family::LogNormalR(g) => Ok(if x > 0.0 {
                g.marginal_log_pdf(j, x.ln()) - x.ln()
            } else {
                f64::NEG_INFINITY
            }),
            Family::RiverNetwork(r) => {
                let n = r.count(j) as f64;
                Ok(if x > 0.0 {
                    (n - 1.0) * x.ln() - x - ln_gamma(n)
                } else {
                    f64::NEG_INFINITY
                })
            }
            Family::Mixture { weights, components } => {
                let mut terms = Vec::new();
                for (w, c) in weights.iter().zip(components) {
                    if *w > 0.0 {
                        terms.push(w.ln() + c.marginal_log_pdf(j, x)?);
                    }
                }
                Ok(logsumexp(terms.into_iter()))
            }
            _ => Err(Error::UnsupportedModel(format!(
                "{} has no marginal density",
                self.kind()
            ))),
        }
    }

    /// Law of the other coordinates given `G_j = value`.
    pub fn conditional_given(&self, j: usize, value: f64) -> Result<Family> {
        let drop = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, x)| *x)
                .collect()
        };
        match self {
            Family::IndepExponential { scale } => Ok(Family::IndepExponential { scale: drop(scale) }),
            Family::IndepGumbel { loc, scale, reversed } => Ok(Family::IndepGumbel {
                loc: drop(loc),
                scale: drop(scale),
                reversed: *reversed,
            }),
            Family::MultivariateNormal(g) => Ok(Family::MultivariateNormal(g.conditional(j, value)?)),
            Family::LogNormalR(g) => {
                if !(value > 0.0) {
                    return Err(Error::Domain("log-normal generator conditioned on a nonpositive value".into()));
                }
                Ok(Family::LogNormalR(g.conditional(j, value.ln())?))
            }
            Family::Mixture { weights, components } => {
                let mut logs = Vec::new();
                let mut comps = Vec::new();
                for (w, c) in weights.iter().zip(components) {
                    if *w > 0.0 {
                        logs.push(w.ln() + c.marginal_log_pdf(j, value)?);
                        comps.push(c.conditional_given(j, value)?);
                    }
                }
                let norm = logsumexp(logs.iter().copied());
                if !norm.is_finite() {
                    return Err(Error::Domain("conditioning value has zero density".into()));
                }
                Ok(Family::Mixture {
                    weights: logs.iter().map(|l| (l - norm).exp()).collect(),
                    components: comps,
                })
            }
            _ => Err(Error::UnsupportedModel(format!(
                "no analytic conditional law for {}",
                self.kind()
            ))),
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Family::IndepExponential { .. } | Family::IndepGumbel { .. } => {
                for (o, m) in out.iter_mut().zip(self.margins().unwrap()) {
                    *o = m.sample(rng);
                }
            }
            Family::MultivariateNormal(g) => g.sample_into(rng, out),
            Family::LogNormalR(g) => {
                g.sample_into(rng, out);
                for v in out.iter_mut() {
                    *v = v.exp();
                }
            }
            Family::RiverNetwork(r) => {
                for &j in r.topological() {
                    let e: f64 = rng.sample(Exp1);
                    out[j] = e + r.children(j).iter().map(|&c| out[c]).sum::<f64>();
                }
            }
            Family::Mixture { weights, components } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = components.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                components[pick].sample_into(rng, out);
            }
            Family::PointMass { point } => out.copy_from_slice(point),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// Survival function of `Σ w_k E_k` for independent unit exponentials and `w_k ≥ 0`.
pub fn weighted_exp_sum_sf(weights: &[f64], c: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for &w in weights.iter().filter(|w| **w > 0.0) {
        match groups.iter_mut().find(|g| (g.0 - w).abs() <= 1e-12 * w) {
            Some(g) => g.1 += 1.0,
            None => groups.push((w, 1.0)),
        }
    }
    if groups.is_empty() {
        return Ok(if c < 0.0 { 1.0 } else { 0.0 });
    }
    if c <= 0.0 {
        return Ok(1.0);
    }
    gamma_groups_sf(&groups, c, cfg)
}

fn gamma_groups_sf(groups: &[(f64, f64)], c: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if c <= 0.0 {
        return Ok(1.0);
    }
    let (w, n) = groups[0];
    if w == f64::INFINITY {
        return Ok(1.0);
    }
    if groups.len() == 1 {
        let x = c / w;
        return Ok(if x == f64::INFINITY { 0.0 } else { gamma_ur(n, x) });
    }
    if groups.len() > 4 {
        return Err(Error::UnsupportedEvent("weighted sums with more than four distinct weights".into()));
    }
    let rest = &groups[1..];
    let lg = ln_gamma(n);
    let mut failure = None;
    let (inner, _) = integrate(
        |x| {
            let dens = ((n - 1.0) * (x / w).ln() - x / w - lg).exp() / w;
            match gamma_groups_sf(rest, c - x, cfg) {
                Ok(v) => dens * v,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        c,
        cfg,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let head = if c / w == f64::INFINITY { 0.0 } else { gamma_ur(n, c / w) };
    Ok((head + inner).clamp(0.0, 1.0))
}

/// Serde helpers for floats that may be infinite, written as `"inf"` / `"-inf"`.
pub mod ext_float {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let out: Vec<Ext> = v
            .iter()
            .map(|&x| {
                if x == f64::INFINITY {
                    Ext::Text("inf".into())
                } else if x == f64::NEG_INFINITY {
                    Ext::Text("-inf".into())
                } else {
                    Ext::Num(x)
                }
            })
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        let raw = Vec::<Ext>::deserialize(d)?;
        raw.into_iter()
            .map(|e| match e {
                Ext::Num(x) => Ok(x),
                Ext::Text(t) => match t.as_str() {
                    "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                    "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                    other => Err(D::Error::custom(format!("invalid number {other:?}"))),
                },
            })
            .collect()
    }
}
