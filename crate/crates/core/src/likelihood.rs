//! Censored log-likelihoods and maximum-likelihood fitting.

use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityEvaluator;
use crate::error::{Error, Result};
use crate::generator::{Family, Gaussian, Role};
use crate::linalg::{cholesky, chol_inverse, outer_lower};
use crate::model::{is_zero_shape, ExceedanceData, GpModel, MarginParams};
use crate::optim::{nelder_mead, SimplexOptions};
use crate::quadrature::QuadratureConfig;
use crate::sim::RandomStream;

/// Sum with a fixed pairwise tree, independent of how the terms were computed.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Per-row censoring mask and the point passed to the censored density.
fn censor_row(row: &[f64], censor: Option<&[f64]>) -> (Vec<f64>, Vec<bool>) {
    match censor {
        None => (row.to_vec(), vec![false; row.len()]),
        Some(v) => {
            let mask: Vec<bool> = row.iter().zip(v).map(|(x, t)| x <= t).collect();
            let point = row.iter().zip(v).zip(&mask).map(|((x, t), c)| if *c { *t } else { *x }).collect();
            (point, mask)
        }
    }
}

/// Log-likelihood contributions of every row (fully censored rows give `None`).
pub fn row_logliks(model: &GpModel, data: &ExceedanceData, cfg: &QuadratureConfig) -> Result<Vec<Option<f64>>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    if data.dim() != Some(model.dim()) {
        return Err(Error::Data(format!(
            "data has {} columns, model dimension is {}",
            data.dim().unwrap_or(0),
            model.dim()
        )));
    }
    let ev = DensityEvaluator::new(model, cfg)?;
    let censor = data.censor();
    data.rows()
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let (point, mask) = censor_row(row, censor);
            if mask.iter().all(|&c| c) {
                return Ok(None);
            }
            ev.log_censored_density(&point, &mask).map(Some).map_err(|e| e.at_row(i))
        })
        .collect()
}

/// Censored log-likelihood; components at or below their censoring threshold enter through
/// the integrated density.
pub fn loglik(model: &GpModel, data: &ExceedanceData, cfg: &QuadratureConfig) -> Result<f64> {
    let rows = row_logliks(model, data, cfg)?;
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        warn!("{skipped} fully censored rows excluded from the likelihood");
    }
    if let Some(i) = rows.iter().position(|r| *r == Some(f64::NEG_INFINITY)) {
        warn!("row {i} has zero density");
        return Ok(f64::NEG_INFINITY);
    }
    let terms: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(pairwise_sum(&terms))
}

/// Which parameters of a template are estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeParams {
    pub sigma: Vec<bool>,
    pub gamma: Vec<bool>,
    /// Estimate a single γ shared by all components (requires every γ free).
    #[serde(default)]
    pub shared_gamma: bool,
    /// One flag per generator parameter, in the order of [`generator_parameter_names`].
    pub generator: Vec<bool>,
}

/// Starting model plus the parameters to estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTemplate {
    pub model: GpModel,
    pub free: FreeParams,
}

impl FitTemplate {
    /// Every parameter free except those in [`unidentified_parameters`]: the pinned one and, for
    /// Gaussian-type generators whose law enters only through differences, the first Cholesky
    /// column.
    pub fn all_free(model: &GpModel) -> FitTemplate {
        let d = model.dim();
        let mut generator = vec![true; generator_params(model.family()).len()];
        for p in unidentified_parameters(model) {
            generator[p] = false;
        }
        FitTemplate {
            model: model.clone(),
            free: FreeParams {
                sigma: vec![true; d],
                gamma: vec![true; d],
                shared_gamma: false,
                generator,
            },
        }
    }

    pub fn frozen(model: &GpModel) -> FitTemplate {
        let d = model.dim();
        FitTemplate {
            model: model.clone(),
            free: FreeParams {
                sigma: vec![false; d],
                gamma: vec![false; d],
                shared_gamma: false,
                generator: vec![false; generator_params(model.family()).len()],
            },
        }
    }

    pub fn with_shared_gamma(mut self) -> FitTemplate {
        self.free.shared_gamma = true;
        self.free.gamma.iter_mut().for_each(|g| *g = true);
        self
    }

    fn validate(&self) -> Result<()> {
        let d = self.model.dim();
        let np = generator_params(self.model.family()).len();
        if self.free.sigma.len() != d || self.free.gamma.len() != d || self.free.generator.len() != np {
            return Err(Error::Config(format!(
                "free-parameter flags need {d} sigma, {d} gamma and {np} generator entries"
            )));
        }
        if self.free.shared_gamma {
            if !self.free.gamma.iter().all(|&g| g) {
                return Err(Error::Config("a shared gamma must be free in every component".into()));
            }
            let g0 = self.model.margins().gamma[0];
            if self.model.margins().gamma.iter().any(|g| (g - g0).abs() > 1e-10) {
                return Err(Error::Config("a shared gamma needs equal starting values".into()));
            }
        }
        if let Some(p) = pinned_parameter(&self.model) {
            if self.free.generator[p] {
                return Err(Error::Config(format!(
                    "generator parameter {} is pinned for identifiability and cannot be free",
                    generator_parameter_names(self.model.family())[p]
                )));
            }
        }
        Ok(())
    }
}

fn shift_invariant(model: &GpModel) -> bool {
    match model.generator().role {
        Role::U | Role::T => true,
        Role::R => model.margins().gamma.iter().all(|g| is_zero_shape(*g)),
    }
}

/// Index of the generator parameter fixed by the identifiability convention, if any.
pub fn pinned_parameter(model: &GpModel) -> Option<usize> {
    let all_nonzero = model.margins().gamma.iter().all(|g| !is_zero_shape(*g));
    match (model.generator().role, model.family()) {
        (_, Family::IndepGumbel { .. } | Family::MultivariateNormal(_)) if shift_invariant(model) => Some(0),
        (Role::R, Family::IndepExponential { .. } | Family::LogNormalR(_)) if all_nonzero => Some(0),
        _ => None,
    }
}

/// Generator parameters that do not affect the law: the pinned one plus the Cholesky entries
/// of the first column for Gaussian generators under a shift-invariant role and for lognormal
/// R generators with every γ ≠ 0 (`log R_j / γ_j` is then a Gaussian U generator).
pub fn unidentified_parameters(model: &GpModel) -> Vec<usize> {
    let mut out: Vec<usize> = pinned_parameter(model).into_iter().collect();
    let all_nonzero = model.margins().gamma.iter().all(|g| !is_zero_shape(*g));
    let gaussian = match model.family() {
        Family::MultivariateNormal(g) if shift_invariant(model) => Some(g),
        Family::LogNormalR(g) if model.generator().role == Role::R && all_nonzero => Some(g),
        _ => None,
    };
    if let Some(g) = gaussian {
        let d = g.dim();
        // Cholesky entries follow the means row by row: row i starts at d + i(i+1)/2
        out.extend((0..d).map(|i| d + i * (i + 1) / 2));
    }
    out
}

/// Unconstrained generator parameters: logs of scales, Cholesky factors with log diagonal,
/// mixture logits relative to the first component.
fn generator_params(fam: &Family) -> Vec<(String, f64)> {
    match fam {
        Family::IndepExponential { scale } => scale
            .iter()
            .enumerate()
            .map(|(j, s)| (format!("log_scale[{j}]"), s.ln()))
            .collect(),
        Family::IndepGumbel { loc, scale, .. } => loc
            .iter()
            .enumerate()
            .map(|(j, m)| (format!("loc[{j}]"), *m))
            .chain(scale.iter().enumerate().map(|(j, s)| (format!("log_scale[{j}]"), s.ln())))
            .collect(),
        Family::MultivariateNormal(g) | Family::LogNormalR(g) => {
            let mut out: Vec<(String, f64)> =
                g.mean().iter().enumerate().map(|(j, m)| (format!("mean[{j}]"), *m)).collect();
            let l = g.chol();
            for i in 0..g.dim() {
                for k in 0..=i {
                    if k == i {
                        out.push((format!("log_chol[{i}][{i}]"), l[i][i].ln()));
                    } else {
                        out.push((format!("chol[{i}][{k}]"), l[i][k]));
                    }
                }
            }
            out
        }
        Family::RiverNetwork(_) => Vec::new(),
        Family::PointMass { point } => point.iter().enumerate().map(|(j, p)| (format!("point[{j}]"), *p)).collect(),
        Family::Mixture { weights, components } => {
            let mut out: Vec<(String, f64)> = weights
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, w)| (format!("logit[{i}]"), (w / weights[0]).ln()))
                .collect();
            for (i, c) in components.iter().enumerate() {
                out.extend(generator_params(c).into_iter().map(|(n, v)| (format!("component[{i}].{n}"), v)));
            }
            out
        }
    }
}

pub fn generator_parameter_names(fam: &Family) -> Vec<String> {
    generator_params(fam).into_iter().map(|p| p.0).collect()
}

fn set_generator_params(fam: &Family, p: &[f64]) -> Result<Family> {
    let d = fam.dim();
    Ok(match fam {
        Family::IndepExponential { .. } => Family::IndepExponential {
            scale: p.iter().map(|v| v.exp()).collect(),
        },
        Family::IndepGumbel { reversed, .. } => Family::IndepGumbel {
            loc: p[..d].to_vec(),
            scale: p[d..].iter().map(|v| v.exp()).collect(),
            reversed: *reversed,
        },
        Family::MultivariateNormal(_) | Family::LogNormalR(_) => {
            let mut l = vec![vec![0.0; d]; d];
            let mut idx = d;
            for i in 0..d {
                for k in 0..=i {
                    l[i][k] = if k == i { p[idx].exp() } else { p[idx] };
                    idx += 1;
                }
            }
            let g = Gaussian::new(p[..d].to_vec(), outer_lower(&l))?;
            if matches!(fam, Family::LogNormalR(_)) {
                Family::LogNormalR(g)
            } else {
                Family::MultivariateNormal(g)
            }
        }
        Family::RiverNetwork(_) => fam.clone(),
        Family::PointMass { .. } => Family::PointMass { point: p.to_vec() },
        Family::Mixture { weights, components } => {
            let k = weights.len();
            let logits: Vec<f64> = std::iter::once(0.0).chain(p[..k - 1].iter().copied()).collect();
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = raw.iter().sum();
            let mut offset = k - 1;
            let mut comps = Vec::with_capacity(k);
            for c in components {
                let n = generator_params(c).len();
                comps.push(set_generator_params(c, &p[offset..offset + n])?);
                offset += n;
            }
            Family::Mixture {
                weights: raw.iter().map(|w| w / total).collect(),
                components: comps,
            }
        }
    })
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    LogSigma(usize),
    Gamma(usize),
    SharedGamma,
    Generator(usize),
}

struct Layout {
    template: GpModel,
    slots: Vec<Slot>,
    names: Vec<String>,
    gen_base: Vec<f64>,
}

const GAMMA_BOX: (f64, f64) = (-0.95, 5.0);

impl Layout {
    fn new(t: &FitTemplate) -> Layout {
        let m = t.model.margins();
        let mut slots = Vec::new();
        let mut names = Vec::new();
        for j in 0..m.dim() {
            if t.free.sigma[j] {
                slots.push(Slot::LogSigma(j));
                names.push(format!("log_sigma[{j}]"));
            }
        }
        if t.free.shared_gamma {
            slots.push(Slot::SharedGamma);
            names.push("gamma".into());
        } else {
            for j in 0..m.dim() {
                if t.free.gamma[j] {
                    slots.push(Slot::Gamma(j));
                    names.push(format!("gamma[{j}]"));
                }
            }
        }
        let gp = generator_params(t.model.family());
        for (i, (name, _)) in gp.iter().enumerate() {
            if t.free.generator[i] {
                slots.push(Slot::Generator(i));
                names.push(format!("generator.{name}"));
            }
        }
        Layout {
            template: t.model.clone(),
            slots,
            names,
            gen_base: gp.into_iter().map(|p| p.1).collect(),
        }
    }

    fn initial(&self) -> Vec<f64> {
        let m = self.template.margins();
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::LogSigma(j) => m.sigma[j].ln(),
                Slot::Gamma(j) => m.gamma[j],
                Slot::SharedGamma => m.gamma[0],
                Slot::Generator(i) => self.gen_base[i],
            })
            .collect()
    }

    fn build(&self, theta: &[f64]) -> Result<GpModel> {
        let m = self.template.margins();
        let mut sigma = m.sigma.clone();
        let mut gamma = m.gamma.clone();
        let mut gen = self.gen_base.clone();
        for (s, &v) in self.slots.iter().zip(theta) {
            match *s {
                Slot::LogSigma(j) => sigma[j] = v.exp(),
                Slot::Gamma(j) => gamma[j] = v,
                Slot::SharedGamma => gamma.iter_mut().for_each(|g| *g = v),
                Slot::Generator(i) => gen[i] = v,
            }
        }
        if gamma.iter().any(|&g| !(g > GAMMA_BOX.0 && g < GAMMA_BOX.1)) {
            return Err(Error::Domain("gamma outside the search box".into()));
        }
        let fam = set_generator_params(self.template.family(), &gen)?;
        let mut spec = self.template.generator().clone();
        spec.family = fam;
        GpModel::new(self.template.representation(), MarginParams::new(sigma, gamma)?, spec)
    }

    /// Natural-scale value and derivative of the natural parameter w.r.t. the transformed one.
    fn natural(&self, i: usize, v: f64) -> (String, f64, f64) {
        let name = &self.names[i];
        let is_log = matches!(self.slots[i], Slot::LogSigma(_))
            || name.contains("log_scale")
            || name.contains("log_chol");
        if is_log {
            let e = v.exp();
            (name.replacen("log_", "", 1), e, e)
        } else {
            (name.clone(), v, 1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub starts: usize,
    pub xtol: f64,
    pub max_evals: usize,
    pub seed: u64,
    pub standard_errors: bool,
    pub trace: bool,
    pub quadrature: QuadratureConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: 5,
            xtol: 1e-8,
            max_evals: 20_000,
            seed: 0x5eed,
            standard_errors: true,
            trace: false,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub start: usize,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: GpModel,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Standard errors of the free parameters on their natural scale, in the order of
    /// `parameters`: finite-difference observed information, or the score outer product for
    /// role T.
    pub stderr: Option<Vec<f64>>,
    pub parameters: Vec<FitParameter>,
    pub trace: Option<Vec<TraceEntry>>,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Maximum-likelihood fit by a multi-start simplex search in transformed coordinates.
pub fn fit(template: &FitTemplate, data: &ExceedanceData, opts: &FitOptions) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::Data("cannot fit an empty data set".into()));
    }
    template.validate()?;
    opts.quadrature.validate()?;
    if opts.starts == 0 {
        return Err(Error::Config("at least one start is needed".into()));
    }
    let layout = Layout::new(template);
    let cfg = opts.quadrature;
    let objective = |theta: &[f64]| -> f64 {
        match layout.build(theta).and_then(|m| loglik(&m, data, &cfg)) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let x0 = layout.initial();
    if objective(&x0) == f64::INFINITY {
        // surface the real problem when the template itself cannot be evaluated
        let ll = loglik(&layout.build(&x0)?, data, &cfg)?;
        if !ll.is_finite() {
            return Err(Error::Data("the starting model gives the data zero likelihood".into()));
        }
    }
    let mut rng = RandomStream::new(opts.seed, 0xf17).rng(0);
    let simplex = SimplexOptions {
        xtol: opts.xtol,
        max_evals: opts.max_evals,
    };
    let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
    let mut trace = Vec::new();
    for start in 0..opts.starts {
        let init: Vec<f64> = if start == 0 {
            x0.clone()
        } else {
            let mut x = x0.clone();
            for _ in 0..100 {
                x = x0.iter().map(|v| v + 0.2 * (rng.gen::<f64>() - 0.5) * (1.0 + v.abs())).collect();
                if objective(&x).is_finite() {
                    break;
                }
            }
            x
        };
        let step: Vec<f64> = init.iter().map(|v| 0.1 * (1.0 + v.abs()).min(2.0)).collect();
        let r = nelder_mead(&objective, &init, &step, simplex);
        debug!("start {start}: -loglik {} after {} iterations", r.fx, r.iterations);
        trace.push(TraceEntry {
            start,
            loglik: -r.fx,
            iterations: r.iterations,
            converged: r.converged,
        });
        if best.as_ref().is_none_or(|b| r.fx < b.1) {
            best = Some((r.x, r.fx, r.iterations, r.converged));
        }
    }
    let (theta, fx, iterations, converged) = best.expect("at least one start");
    let model = layout.build(&theta)?;
    let ll = loglik(&model, data, &cfg)?;
    if !ll.is_finite() {
        return Err(Error::Data(format!("no parameter value gives finite likelihood (best {})", -fx)));
    }
    let se_transformed = if !opts.standard_errors || theta.is_empty() {
        None
    } else if model.generator().role == Role::T {
        // e^{-max z} makes the T-form likelihood kinked wherever a row's argmax switches, so
        // small-step Hessians pick up individual kinks; the score outer product does not.
        score_stderr(&layout, &theta, data, &cfg)
    } else {
        hessian_stderr(&objective, &theta).or_else(|| {
            warn!("observed information is not positive definite; using the score outer product");
            score_stderr(&layout, &theta, data, &cfg)
        })
    };
    let mut parameters = Vec::with_capacity(theta.len());
    for (i, &v) in theta.iter().enumerate() {
        let (name, value, deriv) = layout.natural(i, v);
        parameters.push(FitParameter {
            name,
            value,
            stderr: se_transformed.as_ref().map(|s| s[i] * deriv),
        });
    }
    let stderr = se_transformed.map(|_| parameters.iter().map(|p| p.stderr.unwrap()).collect());
    Ok(FitResult {
        model,
        loglik: ll,
        iterations,
        converged,
        stderr,
        parameters,
        trace: opts.trace.then_some(trace),
    })
}

/// Standard errors from the inverse of a central finite-difference Hessian (step 1e-4).
fn hessian_stderr<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let h = 1e-4;
    let f0 = f(x);
    let mut hess = vec![vec![0.0; n]; n];
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut y = x.to_vec();
        y[di] += si * h;
        y[dj] += sj * h;
        f(&y)
    };
    for i in 0..n {
        let fp = at(i, 1.0, i, 0.0);
        let fm = at(i, -1.0, i, 0.0);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    if hess.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    let l = cholesky(&hess).ok()?;
    let inv = chol_inverse(&l);
    Some((0..n).map(|i| inv[i][i].sqrt()).collect())
}

/// Standard errors from the outer product of per-row scores (central differences, step 1e-4).
fn score_stderr(layout: &Layout, x: &[f64], data: &ExceedanceData, cfg: &QuadratureConfig) -> Option<Vec<f64>> {
    let n = x.len();
    let h = 1e-4;
    let rows_at = |k: usize, sign: f64| -> Option<Vec<Option<f64>>> {
        let mut y = x.to_vec();
        y[k] += sign * h;
        row_logliks(&layout.build(&y).ok()?, data, cfg).ok()
    };
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let (up, down) = (rows_at(k, 1.0)?, rows_at(k, -1.0)?);
        let g: Vec<f64> = up
            .iter()
            .zip(&down)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?) / (2.0 * h)))
            .collect();
        if g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        scores.push(g);
    }
    let mut info = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let prods: Vec<f64> = scores[i].iter().zip(&scores[j]).map(|(a, b)| a * b).collect();
            info[i][j] = pairwise_sum(&prods);
            info[j][i] = info[i][j];
        }
    }
    let l = cholesky(&info).ok()?;
    let inv = chol_inverse(&l);
    Some((0..n).map(|i| inv[i][i].sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Representation;
    use crate::river::River;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn empty_data_and_river_row() {
        let m = GpModel::from_family(
            Representation::R,
            vec![1.0; 3],
            vec![1.0; 3],
            Family::RiverNetwork(River::new(vec![Some(2), Some(2), None]).unwrap()),
        )
        .unwrap();
        let empty = ExceedanceData::new(Vec::new(), None).unwrap();
        assert_eq!(loglik(&m, &empty, &cfg()).unwrap(), 0.0);
        let one = ExceedanceData::new(vec![vec![-0.6, -0.6, 0.5]], None).unwrap();
        let ll = loglik(&m, &one, &cfg()).unwrap();
        assert!((ll - (2.0 / 1.5f64.powi(4)).ln()).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }

    #[test]
    fn frozen_fit_returns_template_loglik() {
        let m = GpModel::from_family(
            Representation::T,
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            Family::IndepGumbel {
                loc: vec![0.0, 0.0],
                scale: vec![1.0, 1.0],
                reversed: false,
            },
        )
        .unwrap();
        let data = ExceedanceData::new(vec![vec![0.5, 0.2], vec![-0.3, 1.0]], None).unwrap();
        let r = fit(&FitTemplate::frozen(&m), &data, &FitOptions::default()).unwrap();
        assert_eq!(r.loglik, loglik(&m, &data, &cfg()).unwrap());
        assert!(r.parameters.is_empty());
    }

    #[test]
    fn pinned_parameter_cannot_be_freed() {
        let m = GpModel::from_family(
            Representation::U,
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            Family::IndepGumbel {
                loc: vec![0.0, 0.0],
                scale: vec![0.5, 0.5],
                reversed: false,
            },
        )
        .unwrap();
        let mut t = FitTemplate::all_free(&m);
        assert!(!t.free.generator[0]);
        t.free.generator[0] = true;
        let data = ExceedanceData::new(vec![vec![0.5, 0.2]], None).unwrap();
        assert!(matches!(fit(&t, &data, &FitOptions::default()), Err(Error::Config(_))));
    }

    #[test]
    fn generator_parameters_round_trip() {
        let g = Gaussian::new(vec![0.1, -0.2], vec![vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap();
        let fam = Family::Mixture {
            weights: vec![0.3, 0.7],
            components: vec![
                Family::MultivariateNormal(g),
                Family::IndepGumbel {
                    loc: vec![0.0, 1.0],
                    scale: vec![0.5, 2.0],
                    reversed: true,
                },
            ],
        };
        let p: Vec<f64> = generator_params(&fam).into_iter().map(|x| x.1).collect();
        let back = set_generator_params(&fam, &p).unwrap();
        let q: Vec<f64> = generator_params(&back).into_iter().map(|x| x.1).collect();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
