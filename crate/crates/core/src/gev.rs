//! GEV margins and joint cdfs, and the GEV → GP map.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Family, Role};
use crate::integrals::{self, Line};
use crate::model::{is_zero_shape, MarginParams};
use crate::quadrature::QuadratureConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl GevParams {
    pub fn new(mu: Vec<f64>, alpha: Vec<f64>, gamma: Vec<f64>) -> Result<GevParams> {
        let d = mu.len();
        if d == 0 || alpha.len() != d || gamma.len() != d {
            return Err(Error::Model("GEV parameter vectors must be non-empty and equally long".into()));
        }
        if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Model("GEV scales must be positive and finite".into()));
        }
        if mu.iter().chain(&gamma).any(|v| !v.is_finite()) {
            return Err(Error::Model("GEV locations and shapes must be finite".into()));
        }
        Ok(GevParams { mu, alpha, gamma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `σ = α − γμ`, the GP scale at threshold 0.
    pub fn sigma(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.alpha[j] - self.gamma[j] * self.mu[j]).collect()
    }

    /// Lower endpoint `μ − α/γ` for γ > 0, else `-∞`.
    pub fn eta(&self, j: usize) -> f64 {
        let g = self.gamma[j];
        if g > 0.0 && !is_zero_shape(g) {
            self.mu[j] - self.alpha[j] / g
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Upper endpoint `μ − α/γ` for γ < 0, else `+∞`.
    pub fn omega(&self, j: usize) -> f64 {
        let g = self.gamma[j];
        if g < 0.0 && !is_zero_shape(g) {
            self.mu[j] - self.alpha[j] / g
        } else {
            f64::INFINITY
        }
    }

    /// GP margins `(σ, γ)` implied by these parameters.
    pub fn gp_margins(&self) -> Result<MarginParams> {
        MarginParams::new(self.sigma(), self.gamma.clone())
    }
}

/// Marginal GEV cdf `exp{−(1 + γ(x−μ)/α)^{−1/γ}}`, `0`/`1` outside the support.
pub fn gev_margin_cdf(params: &GevParams, j: usize, x: f64) -> f64 {
    (-margin_exceedance(params, j, x)).exp()
}

/// `−log G_j(x)`.
fn margin_exceedance(params: &GevParams, j: usize, x: f64) -> f64 {
    let (m, a, g) = (params.mu[j], params.alpha[j], params.gamma[j]);
    let z = (x - m) / a;
    if is_zero_shape(g) {
        return (-z).exp();
    }
    let base = 1.0 + g * z;
    if base <= 0.0 {
        return if g > 0.0 { f64::INFINITY } else { 0.0 };
    }
    (-base.ln() / g).exp()
}

/// Black-box joint cdf.
pub type CdfFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Dependence {
    /// Explicit joint cdf `G`.
    Evaluator(CdfFn),
    /// Role-R generator used through `G(x) = exp{−∫ P[R ≰ t^γ(x + σ/γ)] dt}`.
    Generator(Family),
}

impl fmt::Debug for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dependence::Evaluator(_) => f.write_str("Evaluator(..)"),
            Dependence::Generator(fam) => f.debug_tuple("Generator").field(fam).finish(),
        }
    }
}

/// Multivariate GEV distribution, optionally raised to a power `t` (`G^t`).
#[derive(Clone, Debug)]
pub struct GevModel {
    params: GevParams,
    dependence: Dependence,
    power: f64,
    cfg: QuadratureConfig,
}

impl GevModel {
    pub fn from_evaluator(params: GevParams, cdf: CdfFn) -> Result<GevModel> {
        GevModel {
            params,
            dependence: Dependence::Evaluator(cdf),
            power: 1.0,
            cfg: QuadratureConfig::default(),
        }
        .checked()
    }

    /// GEV generated by a role-R generator. The margin parameters are derived from the
    /// generator so that the margins are exactly GEV(μ, α, γ) with `α − γμ = σ`.
    pub fn from_generator(margins: &MarginParams, family: Family, cfg: &QuadratureConfig) -> Result<GevModel> {
        margins.validate()?;
        family.validate()?;
        cfg.validate()?;
        let d = margins.dim();
        if family.dim() != d {
            return Err(Error::Model("generator dimension differs from margins".into()));
        }
        let mut mu = vec![0.0; d];
        let mut alpha = vec![0.0; d];
        for j in 0..d {
            let mut x = vec![f64::INFINITY; d];
            x[j] = 0.0;
            let c = integrals::lambda(&family, &Line::new(margins, Role::R, &x), cfg)?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Model(format!("component {j} has exceedance mass {c}")));
            }
            let (s, g) = (margins.sigma[j], margins.gamma[j]);
            if is_zero_shape(g) {
                alpha[j] = s;
                mu[j] = s * c.ln();
            } else {
                alpha[j] = s * c.powf(g);
                mu[j] = s * (c.powf(g) - 1.0) / g;
            }
        }
        GevModel {
            params: GevParams::new(mu, alpha, margins.gamma.clone())?,
            dependence: Dependence::Generator(family),
            power: 1.0,
            cfg: *cfg,
        }
        .checked()
    }

    fn checked(self) -> Result<GevModel> {
        let zero = vec![0.0; self.params.dim()];
        let lg0 = -self.nu_unchecked(&zero)?;
        if !(lg0 < -1e-12) || lg0 == f64::NEG_INFINITY {
            return Err(Error::Model(format!("G(0) = {} is not inside (0, 1)", lg0.exp())));
        }
        Ok(self)
    }

    pub fn params(&self) -> &GevParams {
        &self.params
    }

    pub fn dependence(&self) -> &Dependence {
        &self.dependence
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// The model for `G^t`.
    pub fn powered(&self, t: f64) -> Result<GevModel> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config("power must be positive and finite".into()));
        }
        let p = &self.params;
        let d = p.dim();
        let mut mu = vec![0.0; d];
        let mut alpha = vec![0.0; d];
        for j in 0..d {
            let g = p.gamma[j];
            if is_zero_shape(g) {
                alpha[j] = p.alpha[j];
                mu[j] = p.mu[j] + p.alpha[j] * t.ln();
            } else {
                alpha[j] = p.alpha[j] * t.powf(g);
                mu[j] = p.mu[j] + p.alpha[j] * (t.powf(g) - 1.0) / g;
            }
        }
        Ok(GevModel {
            params: GevParams::new(mu, alpha, p.gamma.clone())?,
            dependence: self.dependence.clone(),
            power: self.power * t,
            cfg: self.cfg,
        })
    }

    fn nu_unchecked(&self, x: &[f64]) -> Result<f64> {
        let v = match &self.dependence {
            Dependence::Evaluator(g) => -g(x).ln(),
            Dependence::Generator(fam) => {
                let m = self.params.gp_margins()?;
                integrals::lambda(fam, &Line::new(&m, Role::R, x), &self.cfg)?
            }
        };
        Ok(self.power * v.max(0.0))
    }

    /// Joint cdf `G(x)`.
    pub fn cdf(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        if (0..x.len()).any(|j| x[j] < self.params.eta(j)) {
            return Ok(0.0);
        }
        Ok((-self.nu_unchecked(x)?).exp())
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Config(format!(
                "point has length {}, model dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Marginal cdf of the coordinates in `subset`, the others sent to their upper limit.
    fn marginal_nu(&self, subset: &[usize], x_sub: &[f64]) -> Result<f64> {
        let d = self.dim();
        let mut x = vec![f64::INFINITY; d];
        if let Dependence::Evaluator(_) = self.dependence {
            // the black box is not assumed to accept infinities
            let m = self.params.gp_margins()?;
            for (j, xj) in x.iter_mut().enumerate() {
                let surrogate = m.destd_one(j, 1e15).min(1e300);
                *xj = self.params.mu[j] + surrogate;
            }
        }
        for (&j, &v) in subset.iter().zip(x_sub) {
            x[j] = v;
        }
        self.nu_unchecked(&x)
    }
}

/// `ν{y : y ≰ x} = −log G(x)`.
pub fn nu_exceedance(model: &GevModel, x: &[f64]) -> Result<f64> {
    model.check_len(x)?;
    for (j, &v) in x.iter().enumerate() {
        if v < model.params.eta(j) {
            return Err(Error::Domain(format!("x[{j}] = {v} is below the lower endpoint")));
        }
    }
    model.nu_unchecked(x)
}

/// GP cdf obtained from a GEV: `log(G(x∧0)/G(x)) / log G(0)`.
pub fn gp_cdf_from_gev(model: &GevModel, x: &[f64]) -> Result<f64> {
    let all: Vec<usize> = (0..model.dim()).collect();
    conditional_subset_cdf(model, &all, x)
}

/// GP cdf of the sub-vector `X_J` conditioned on `X_J ≰ 0`.
pub fn conditional_subset_cdf(model: &GevModel, subset: &[usize], x: &[f64]) -> Result<f64> {
    if subset.len() != x.len() || subset.is_empty() {
        return Err(Error::Config("subset and point must be non-empty and equally long".into()));
    }
    if subset.iter().any(|&j| j >= model.dim()) {
        return Err(Error::Config("subset index out of range".into()));
    }
    if subset.iter().zip(x).any(|(&j, &v)| v < model.params.eta(j)) {
        return Ok(0.0);
    }
    let zero = vec![0.0; x.len()];
    let nu0 = model.marginal_nu(subset, &zero)?;
    if !(nu0 > 1e-12 && nu0.is_finite()) {
        return Err(Error::Model(format!("log G_J(0) = {} leaves the GP map undefined", -nu0)));
    }
    let lo: Vec<f64> = x.iter().map(|v| v.min(0.0)).collect();
    let h = (model.marginal_nu(subset, &lo)? - model.marginal_nu(subset, x)?) / nu0;
    Ok(crate::repr::clamp_probability(h))
}

/// Conditional GP margin `1 − (1 + γx/σ)^{−1/γ}` of a positive excess.
pub fn conditional_margin_cdf(margins: &MarginParams, j: usize, x: f64) -> Result<f64> {
    if j >= margins.dim() {
        return Err(Error::Config(format!("component {j} out of range")));
    }
    let (s, g) = (margins.sigma[j], margins.gamma[j]);
    if s + g * x <= 0.0 && !is_zero_shape(g) {
        return Err(Error::Domain(format!("sigma + gamma*x <= 0 in component {j}")));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let z = margins.std_ext(j, x);
    Ok(-(-z).exp_m1())
}

/// Normalizing sequences `a_t = t^γ`, `b_t = σ(t^γ − 1)/γ` (`σ log t` for γ = 0).
pub fn max_stability_params(margins: &MarginParams, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config("t must be positive and finite".into()));
    }
    let lt = t.ln();
    let a = margins.gamma.iter().map(|g| (g * lt).exp()).collect();
    let b = margins
        .sigma
        .iter()
        .zip(&margins.gamma)
        .map(|(s, g)| if is_zero_shape(*g) { s * lt } else { s * (g * lt).exp_m1() / g })
        .collect();
    Ok((a, b))
}

/// `G(x) = exp{−∫₀^∞ P[R ≰ t^γ(x + σ/γ)] dt}` for a role-R generator.
pub fn gev_from_generator(family: &Family, margins: &MarginParams, x: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    if x.len() != margins.dim() || family.dim() != margins.dim() {
        return Err(Error::Config("dimension mismatch".into()));
    }
    if (0..x.len()).any(|j| x[j] < margins.eta(j)) {
        return Ok(0.0);
    }
    let nu = integrals::lambda(family, &Line::new(margins, Role::R, x), cfg)?;
    Ok((-nu).exp())
}
