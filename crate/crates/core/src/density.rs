//! Densities and censored densities of GP models in the (R), (U) and (S)/(T) forms.

use crate::error::{Error, Result};
use crate::generator::Role;
use crate::integrals::{self, Line};
use crate::model::{is_zero_shape, GpModel};
use crate::quadrature::QuadratureConfig;

/// Evaluates densities of one model; the normalizing constant is computed once.
#[derive(Clone, Debug)]
pub struct DensityEvaluator {
    model: GpModel,
    cfg: QuadratureConfig,
    log_norm: f64,
}

impl DensityEvaluator {
    pub fn new(model: &GpModel, cfg: &QuadratureConfig) -> Result<DensityEvaluator> {
        cfg.validate()?;
        if !model.family().has_density() {
            return Err(Error::UnsupportedModel(format!(
                "{} generator has no density",
                model.family().kind()
            )));
        }
        let role = model.generator().role;
        let log_norm = match role {
            Role::T => 0.0,
            Role::R | Role::U => {
                let zero = vec![0.0; model.dim()];
                let d = integrals::lambda(model.family(), &Line::new(model.margins(), role, &zero), cfg)?;
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::Model(format!(
                        "exceedance normalizer is {d}; the generator violates the moment condition"
                    )));
                }
                d.ln()
            }
        };
        Ok(DensityEvaluator {
            model: model.clone(),
            cfg: *cfg,
            log_norm,
        })
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    /// Log of the exceedance normalizer (`0` for the (T) form).
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if x.iter().all(|&v| v <= 0.0) || !self.model.margins().in_support(x) {
            return Ok(f64::NEG_INFINITY);
        }
        self.eval(x, &vec![false; x.len()])
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Log density integrated over `(-∞, x_j]` for the censored coordinates; `x_j` carries the
    /// censoring threshold there and must be `≤ 0`.
    pub fn log_censored_density(&self, x: &[f64], censored: &[bool]) -> Result<f64> {
        self.check_dim(x)?;
        if censored.len() != x.len() {
            return Err(Error::Config("censoring mask length differs from dimension".into()));
        }
        if censored.iter().all(|&c| c) {
            return Err(Error::Config(
                "fully censored observation has no density contribution".into(),
            ));
        }
        if !censored.iter().any(|&c| c) {
            return self.log_density(x);
        }
        for (j, (&v, &c)) in x.iter().zip(censored).enumerate() {
            if c && v > 0.0 {
                return Err(Error::Config(format!(
                    "censoring threshold {v} for component {j} is positive"
                )));
            }
        }
        let margins = self.model.margins();
        let unc_max = (0..x.len())
            .filter(|&j| !censored[j])
            .map(|j| x[j])
            .fold(f64::NEG_INFINITY, f64::max);
        if unc_max <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        for j in 0..x.len() {
            let g = margins.gamma[j];
            let inside = is_zero_shape(g) || g * x[j] + margins.sigma[j] > 0.0;
            if !censored[j] && !inside {
                return Ok(f64::NEG_INFINITY);
            }
            if censored[j] && x[j] < margins.eta(j) {
                return Ok(f64::NEG_INFINITY);
            }
        }
        self.eval(x, censored)
    }

    pub fn censored_density(&self, x: &[f64], censored: &[bool]) -> Result<f64> {
        Ok(self.log_censored_density(x, censored)?.exp())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.model.dim() {
            return Err(Error::Config(format!(
                "point has length {}, model dimension is {}",
                x.len(),
                self.model.dim()
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Data("point contains NaN".into()));
        }
        Ok(())
    }

    fn eval(&self, x: &[f64], censored: &[bool]) -> Result<f64> {
        let margins = self.model.margins();
        let role = self.model.generator().role;
        let line = Line::new(margins, role, x);
        let unc = (0..x.len()).filter(|&j| !censored[j]);
        let log_jac: f64 = unc.clone().map(|j| margins.log_jac(j, x[j])).sum();
        let (s, prefactor) = match role {
            Role::R => {
                let s = 1.0 + unc.map(|j| margins.gamma[j]).filter(|g| !is_zero_shape(*g)).sum::<f64>();
                (s, -self.log_norm)
            }
            Role::U => (1.0, -log_jac - self.log_norm),
            Role::T => {
                let zmax = unc
                    .map(|j| margins.std_ext(j, x[j]))
                    .fold(f64::NEG_INFINITY, f64::max);
                (0.0, -log_jac - zmax)
            }
        };
        let n = integrals::log_numerator(self.model.family(), &line, censored, s, &self.cfg)?;
        Ok(n + prefactor)
    }
}

/// Density of the model at `x`; exactly `0` for `x ≤ 0` and off the support.
pub fn density(model: &GpModel, x: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    DensityEvaluator::new(model, cfg)?.density(x)
}

pub fn log_density(model: &GpModel, x: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    DensityEvaluator::new(model, cfg)?.log_density(x)
}

/// Density integrated over `(-∞, v_j]` for `j ∈ censored`, with `v_j` passed in `x`.
pub fn censored_density(model: &GpModel, x: &[f64], censored: &[usize], cfg: &QuadratureConfig) -> Result<f64> {
    let mut mask = vec![false; x.len()];
    for &j in censored {
        if j >= x.len() {
            return Err(Error::Config(format!("censored index {j} out of range")));
        }
        mask[j] = true;
    }
    DensityEvaluator::new(model, cfg)?.censored_density(x, &mask)
}
