//! Event probabilities, conditional laws given one component, and weighted sums.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{ext_float, Role};
use crate::integrals::{self, Line};
use crate::model::{is_zero_shape, GpModel, MarginParams, Representation};
use crate::quadrature::{integrate_log, QuadratureConfig};
use crate::repr::{self, clamp_probability};
use crate::sim::{self, Method, RandomStream, TiltEnvelope};

/// Inclusion–exclusion is used for boxes with at most this many finite lower bounds.
const MAX_BOX_LOWER: usize = 12;

pub type PredicateFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A set of points `x ∈ ℝ^d`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EventSpec {
    /// `lower < x ≤ upper` componentwise; bounds may be infinite.
    Box {
        #[serde(with = "ext_float")]
        lower: Vec<f64>,
        #[serde(with = "ext_float")]
        upper: Vec<f64>,
    },
    /// `Σ a_j x_j > level` with `a ≥ 0`, `a ≠ 0`.
    #[serde(rename = "halfspace")]
    HalfSpace { weights: Vec<f64>, level: f64 },
    /// `x ≰ 0`, the whole support.
    Exceedance,
    /// Black-box membership test; Monte Carlo only.
    #[serde(skip)]
    Predicate(PredicateFn),
}

impl fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventSpec::Box { lower, upper } => f.debug_struct("Box").field("lower", lower).field("upper", upper).finish(),
            EventSpec::HalfSpace { weights, level } => f
                .debug_struct("HalfSpace")
                .field("weights", weights)
                .field("level", level)
                .finish(),
            EventSpec::Exceedance => f.write_str("Exceedance"),
            EventSpec::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

impl EventSpec {
    pub fn predicate<F: Fn(&[f64]) -> bool + Send + Sync + 'static>(f: F) -> EventSpec {
        EventSpec::Predicate(Arc::new(f))
    }

    /// `{x : x ≤ upper}`.
    pub fn lower_orthant(upper: Vec<f64>) -> EventSpec {
        let lower = vec![f64::NEG_INFINITY; upper.len()];
        EventSpec::Box { lower, upper }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            EventSpec::Box { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(Error::Config(format!("box bounds need length {d}")));
                }
                if lower.iter().chain(upper).any(|v| v.is_nan()) {
                    return Err(Error::Config("box bounds contain NaN".into()));
                }
            }
            EventSpec::HalfSpace { weights, level } => {
                if weights.len() != d {
                    return Err(Error::Config(format!("half-space weights need length {d}")));
                }
                if weights.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) || weights.iter().all(|a| *a == 0.0) {
                    return Err(Error::Config("half-space weights must be nonnegative, finite and not all zero".into()));
                }
                if !level.is_finite() {
                    return Err(Error::Config("half-space level must be finite".into()));
                }
            }
            EventSpec::Exceedance | EventSpec::Predicate(_) => {}
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            EventSpec::Box { lower, upper } => x.iter().zip(lower).zip(upper).all(|((v, l), u)| l < v && v <= u),
            EventSpec::HalfSpace { weights, level } => {
                weights.iter().zip(x).filter(|(a, _)| **a != 0.0).map(|(a, v)| a * v).sum::<f64>() > *level
            }
            EventSpec::Exceedance => x.iter().any(|v| *v > 0.0),
            EventSpec::Predicate(f) => f(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProbMethod {
    Quadrature,
    MonteCarlo { n: usize, stream: RandomStream },
}

/// A probability with its error estimate: the quadrature tolerance, or the binomial standard
/// error of a Monte Carlo proportion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Monte Carlo sample size (`None` for quadrature).
    pub n: Option<usize>,
}

/// `P[X ∈ A]`.
pub fn prob_event(model: &GpModel, event: &EventSpec, method: ProbMethod, cfg: &QuadratureConfig) -> Result<ProbEstimate> {
    event.validate(model.dim())?;
    match method {
        ProbMethod::Quadrature => {
            let p = quadrature_prob(model, event, cfg)?;
            Ok(ProbEstimate {
                estimate: p,
                std_error: cfg.rel_tol * p.max(cfg.abs_tol),
                n: None,
            })
        }
        ProbMethod::MonteCarlo { n, stream } => monte_carlo_prob(model, event, n, stream, cfg),
    }
}

fn quadrature_prob(model: &GpModel, event: &EventSpec, cfg: &QuadratureConfig) -> Result<f64> {
    match event {
        EventSpec::Exceedance => Ok(1.0),
        EventSpec::Box { lower, upper } => box_prob(model, lower, upper, cfg),
        EventSpec::HalfSpace { weights, level } => {
            let r_model = if model.generator().role == Role::R {
                model.clone()
            } else {
                repr::convert(model, Representation::R).map_err(|_| {
                    Error::UnsupportedEvent(
                        "half-space probabilities by quadrature need a model with a role-R form; use Monte Carlo".into(),
                    )
                })?
            };
            halfspace_prob(&r_model, weights, *level, cfg)
        }
        EventSpec::Predicate(_) => Err(Error::UnsupportedEvent(
            "predicate events are only available by Monte Carlo".into(),
        )),
    }
}

/// `P[lower < X ≤ upper]` by inclusion–exclusion over the cdf.
fn box_prob(model: &GpModel, lower: &[f64], upper: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let d = model.dim();
    if (0..d).any(|j| upper[j] <= lower[j]) {
        return Ok(0.0);
    }
    let m = model.margins();
    // lower bounds at or below the support bottom carry no information
    let finite: Vec<usize> = (0..d).filter(|&j| lower[j] > m.eta(j) && lower[j] > f64::NEG_INFINITY).collect();
    if finite.len() > MAX_BOX_LOWER {
        return Err(Error::UnsupportedEvent(format!(
            "box with {} finite lower bounds; at most {MAX_BOX_LOWER} are supported",
            finite.len()
        )));
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
        total += sign * repr::cdf(model, &point, cfg)?;
    }
    Ok(clamp_probability(total))
}

/// Weights and level of the generator half-space at `w = log t`: `Σ a_j y_j > s` becomes
/// `Σ a_j e^{-γ_j w} R_j > s + Σ_{γ_j≠0} a_j σ_j/γ_j + Σ_{γ_j=0} a_j σ_j w`.
fn generator_halfspace(m: &MarginParams, a: &[f64], s: f64, w: f64) -> (Vec<f64>, f64) {
    let mut weights = Vec::with_capacity(a.len());
    let mut level = s;
    for j in 0..a.len() {
        let g = m.gamma[j];
        if is_zero_shape(g) {
            weights.push(a[j]);
            level += a[j] * m.sigma[j] * w;
        } else {
            weights.push(a[j] * (-g * w).exp());
            level += a[j] * m.sigma[j] / g;
        }
    }
    (weights, level)
}

fn halfspace_prob(model: &GpModel, a: &[f64], s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::UnsupportedEvent(
            "half-space probabilities by quadrature need level ≥ 0; use Monte Carlo".into(),
        ));
    }
    let m = model.margins();
    let fam = model.family();
    let zero = vec![0.0; model.dim()];
    let line = Line::new(m, Role::R, &zero);
    let total = integrals::lambda(fam, &line, cfg)?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Model(format!("exceedance normalizer is {total}")));
    }
    // with a ≥ 0 and s ≥ 0 the half-space lies inside {y ≰ 0}
    let mut err = None;
    let log_num = integrate_log(
        |w| {
            let (wts, c) = generator_halfspace(m, a, s, w);
            match fam.halfspace_sf(&wts, c, cfg) {
                Ok(p) => w + p.ln(),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &integrals::breakpoints(fam, &line),
        cfg,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(clamp_probability(log_num.exp() / total))
}

/// Draws used for Monte Carlo estimates: exact samplers where available (Method 1 for T,
/// Method 2 for U, U-conversion for R), otherwise the representation's default method.
pub fn monte_carlo_samples(model: &GpModel, n: usize, stream: RandomStream, cfg: &QuadratureConfig) -> Result<sim::Samples> {
    let try_rejection = |m: &GpModel| -> Option<Result<sim::Samples>> {
        let env = TiltEnvelope::new(m, cfg).ok()?;
        Some(sim::sample_method2(m, n, stream, &env, cfg))
    };
    match model.generator().role {
        Role::T => sim::sample_method1(model, n, stream),
        Role::U => try_rejection(model).unwrap_or_else(|| sim::simulate(model, n, stream, Method::Metropolis, cfg)),
        Role::R => {
            if let Ok(u) = repr::convert(model, Representation::U) {
                if let Some(r) = try_rejection(&u) {
                    return r;
                }
            }
            sim::simulate(model, n, stream, Method::Truncated, cfg)
        }
    }
}

fn monte_carlo_prob(model: &GpModel, event: &EventSpec, n: usize, stream: RandomStream, cfg: &QuadratureConfig) -> Result<ProbEstimate> {
    if n == 0 {
        return Err(Error::Config("Monte Carlo needs n > 0".into()));
    }
    let samples = monte_carlo_samples(model, n, stream, cfg)?;
    let hits = samples.rows.iter().filter(|x| event.contains(x)).count();
    let p = hits as f64 / n as f64;
    Ok(ProbEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        n: Some(n),
    })
}

fn require_r(model: &GpModel, j: usize, xj: f64) -> Result<()> {
    if model.generator().role != Role::R {
        return Err(Error::UnsupportedModel("conditional laws need a role-R generator".into()));
    }
    if j >= model.dim() {
        return Err(Error::Config(format!("component {j} out of range")));
    }
    if !(xj > 0.0) || !xj.is_finite() {
        return Err(Error::Domain(format!("conditioning value {xj} must be positive and finite")));
    }
    Ok(())
}

fn single_margin(m: &MarginParams, j: usize) -> MarginParams {
    MarginParams {
        sigma: vec![m.sigma[j]],
        gamma: vec![m.gamma[j]],
    }
}

fn drop_index(m: &MarginParams, j: usize) -> MarginParams {
    let keep = |v: &[f64]| v.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, x)| *x).collect();
    MarginParams {
        sigma: keep(&m.sigma),
        gamma: keep(&m.gamma),
    }
}

fn shape_exponent(g: f64) -> f64 {
    if is_zero_shape(g) {
        0.0
    } else {
        g
    }
}

/// Log of `∫ t^{γ_j} f_{R_j}(t^{γ_j}(x_j + σ_j/γ_j)) dt` times `P[rest | R_j]` via `inner`.
fn conditional_integral<F>(model: &GpModel, j: usize, xj: f64, mut inner: F, cfg: &QuadratureConfig) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let m = model.margins();
    let fam = model.family();
    let line = Line::new(&single_margin(m, j), Role::R, &[xj]);
    let arg = line.args[0];
    let s = 1.0 + shape_exponent(m.gamma[j]);
    let mut err = None;
    let v = integrate_log(
        |w| {
            let r = arg.at(w);
            if !r.is_finite() {
                return f64::NEG_INFINITY;
            }
            let log_f = match fam.marginal_log_pdf(j, r) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    return f64::NEG_INFINITY;
                }
            };
            if log_f == f64::NEG_INFINITY {
                return log_f;
            }
            match inner(w, r) {
                Ok(p) => s * w + log_f + p,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &[],
        cfg,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Density of the other components at `rest` given `X_j = x_j > 0`.
pub fn conditional_density_given(model: &GpModel, j: usize, xj: f64, rest: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    require_r(model, j, xj)?;
    let d = model.dim();
    if rest.len() + 1 != d {
        return Err(Error::Config(format!("rest needs length {}", d - 1)));
    }
    let m = model.margins();
    let mut x = rest.to_vec();
    x.insert(j, xj);
    for k in 0..d {
        let g = m.gamma[k];
        if !is_zero_shape(g) && g * x[k] + m.sigma[k] <= 0.0 {
            return Ok(0.0);
        }
    }
    let line = Line::new(m, Role::R, &x);
    let s = 1.0 + m.gamma.iter().map(|g| shape_exponent(*g)).sum::<f64>();
    let log_num = integrals::log_numerator(model.family(), &line, &vec![false; d], s, cfg)?;
    let log_den = conditional_integral(model, j, xj, |_, _| Ok(0.0), cfg)?;
    if log_den == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("component {j} has zero density at {xj}")));
    }
    Ok((log_num - log_den).exp())
}

/// `P[X ∈ A | X_j = x_j]` for box and half-space events (and the whole support).
pub fn conditional_prob_given(model: &GpModel, j: usize, xj: f64, event: &EventSpec, cfg: &QuadratureConfig) -> Result<f64> {
    require_r(model, j, xj)?;
    let d = model.dim();
    event.validate(d)?;
    let m = model.margins();
    let rest_m = drop_index(m, j);
    let fam = model.family();
    let log_den = conditional_integral(model, j, xj, |_, _| Ok(0.0), cfg)?;
    if log_den == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("component {j} has zero density at {xj}")));
    }
    let log_num = match event {
        EventSpec::Exceedance => return Ok(1.0),
        EventSpec::Predicate(_) => {
            return Err(Error::UnsupportedEvent("conditional probabilities of predicate events".into()))
        }
        EventSpec::Box { lower, upper } => {
            if !(lower[j] < xj && xj <= upper[j]) {
                return Ok(0.0);
            }
            if d == 1 {
                return Ok(1.0);
            }
            let drop = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, x)| *x).collect() };
            let lo_line = Line::new(&rest_m, Role::R, &drop(lower));
            let hi_line = Line::new(&rest_m, Role::R, &drop(upper));
            let mut lo = vec![0.0; d - 1];
            let mut hi = vec![0.0; d - 1];
            conditional_integral(
                model,
                j,
                xj,
                |w, r| {
                    lo_line.eval_into(w, &mut lo);
                    hi_line.eval_into(w, &mut hi);
                    Ok(fam.conditional_given(j, r)?.box_prob(&lo, &hi)?.ln())
                },
                cfg,
            )?
        }
        EventSpec::HalfSpace { weights, level } => {
            if d == 1 {
                return Ok(if weights[0] * xj > *level { 1.0 } else { 0.0 });
            }
            let a_rest: Vec<f64> = weights.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, a)| *a).collect();
            let s_rest = level - weights[j] * xj;
            conditional_integral(
                model,
                j,
                xj,
                |w, r| {
                    let (wts, c) = generator_halfspace(&rest_m, &a_rest, s_rest, w);
                    if wts.iter().all(|v| *v == 0.0) {
                        return Ok(if c < 0.0 { 0.0 } else { f64::NEG_INFINITY });
                    }
                    Ok(fam.conditional_given(j, r)?.halfspace_sf(&wts, c, cfg)?.ln())
                },
                cfg,
            )?
        }
    };
    Ok(clamp_probability((log_num - log_den).exp()))
}

/// Shapes agreeing within this tolerance count as a common shape.
pub const SHAPE_TOL: f64 = 1e-10;

/// `P[Σ a_j X_j > s | Σ a_j X_j > 0]` for margins with a common shape: GP with scale `Σ a_j σ_j`.
pub fn weighted_sum_survival(margins: &MarginParams, a: &[f64], s: f64) -> Result<f64> {
    margins.validate()?;
    let d = margins.dim();
    if a.len() != d {
        return Err(Error::Config(format!("weights need length {d}")));
    }
    if a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || a.iter().all(|v| *v == 0.0) {
        return Err(Error::Config("weights must be nonnegative, finite and not all zero".into()));
    }
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("level {s} must be nonnegative")));
    }
    let g = margins.gamma[0];
    if let Some(k) = margins.gamma.iter().position(|x| (x - g).abs() > SHAPE_TOL) {
        return Err(Error::MixedShape(format!(
            "gamma[{k}] = {} differs from gamma[0] = {g}",
            margins.gamma[k]
        )));
    }
    let sigma: f64 = a.iter().zip(&margins.sigma).map(|(w, s)| w * s).sum();
    if is_zero_shape(g) {
        return Ok((-s / sigma).exp());
    }
    let base = 1.0 + g * s / sigma;
    Ok(if base <= 0.0 { 0.0 } else { base.powf(-1.0 / g) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Family;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn two_exponentials(gamma: f64) -> GpModel {
        GpModel::from_family(
            Representation::R,
            vec![1.0, 1.0],
            vec![gamma, gamma],
            Family::IndepExponential { scale: vec![1.0, 1.0] },
        )
        .unwrap()
    }

    #[test]
    fn sum_of_two_exponential_tributaries() {
        let m = two_exponentials(1.0);
        let ev = EventSpec::HalfSpace {
            weights: vec![1.0, 1.0],
            level: 0.0,
        };
        let p = prob_event(&m, &ev, ProbMethod::Quadrature, &cfg()).unwrap();
        assert!((p.estimate - 2.0 / 3.0).abs() < 1e-8, "{p:?}");
        // P[X1 + X2 > s] = c1 (1 + s/2)^{-1}
        let ev = EventSpec::HalfSpace {
            weights: vec![1.0, 1.0],
            level: 5.0,
        };
        let p = prob_event(&m, &ev, ProbMethod::Quadrature, &cfg()).unwrap();
        assert!((p.estimate - 2.0 / 3.0 / 3.5).abs() < 1e-8, "{p:?}");
    }

    #[test]
    fn conditional_closed_forms() {
        let m = two_exponentials(1.0);
        let f = conditional_density_given(&m, 0, 1.0, &[0.0], &cfg()).unwrap();
        assert!((f - 8.0 / 27.0).abs() < 1e-9, "{f}");
        let above = |x2: f64| EventSpec::Box {
            lower: vec![f64::NEG_INFINITY, x2],
            upper: vec![f64::INFINITY, f64::INFINITY],
        };
        let p = conditional_prob_given(&m, 0, 1.0, &above(0.0), &cfg()).unwrap();
        assert!((p - 4.0 / 9.0).abs() < 1e-9, "{p}");
        let p = conditional_prob_given(&m, 0, 1.0, &above(3.0), &cfg()).unwrap();
        assert!((p - 1.0 / 9.0).abs() < 1e-9, "{p}");
        let h = EventSpec::HalfSpace {
            weights: vec![0.0, 1.0],
            level: 3.0,
        };
        let p = conditional_prob_given(&m, 0, 1.0, &h, &cfg()).unwrap();
        assert!((p - 1.0 / 9.0).abs() < 1e-9, "{p}");
        assert_eq!(conditional_density_given(&m, 0, 1.0, &[-1.5], &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn weighted_sum_formula() {
        let m = MarginParams::new(vec![2.0, 0.5], vec![0.2, 0.2]).unwrap();
        let p = weighted_sum_survival(&m, &[1.0, 1.0], 2.5).unwrap();
        assert!((p - 1.2f64.powf(-5.0)).abs() < 1e-14);
        assert_eq!(weighted_sum_survival(&m, &[1.0, 1.0], 0.0).unwrap(), 1.0);
        let m0 = MarginParams::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        // exponential with scale 2
        let p = weighted_sum_survival(&m0, &[1.0, 1.0], 2.0 * 2f64.ln()).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let mixed = MarginParams::new(vec![1.0, 1.0], vec![0.2, 0.2 + 1e-9]).unwrap();
        assert!(matches!(weighted_sum_survival(&mixed, &[1.0, 1.0], 1.0), Err(Error::MixedShape(_))));
    }

    #[test]
    fn box_reproduces_cdf() {
        let m = two_exponentials(0.5);
        let x = vec![0.7, -0.2];
        let p = prob_event(&m, &EventSpec::lower_orthant(x.clone()), ProbMethod::Quadrature, &cfg()).unwrap();
        assert!((p.estimate - repr::cdf(&m, &x, &cfg()).unwrap()).abs() < 1e-12);
        let all = EventSpec::Box {
            lower: vec![f64::NEG_INFINITY; 2],
            upper: vec![f64::INFINITY; 2],
        };
        let p = prob_event(&m, &all, ProbMethod::Quadrature, &cfg()).unwrap();
        assert!((p.estimate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn event_json_round_trip() {
        let ev = EventSpec::HalfSpace {
            weights: vec![1.0, 2.0],
            level: 0.5,
        };
        let s = serde_json::to_string(&ev).unwrap();
        assert_eq!(s, r#"{"type":"halfspace","weights":[1.0,2.0],"level":0.5}"#);
        let back: EventSpec = serde_json::from_str(r#"{"type":"box","lower":["-inf",0],"upper":[1,"inf"]}"#).unwrap();
        assert!(back.contains(&[-7.0, 5.0]));
    }

    #[test]
    fn predicate_needs_monte_carlo() {
        let m = two_exponentials(1.0);
        let ev = EventSpec::predicate(|x| x[0] > 0.0);
        assert!(matches!(
            prob_event(&m, &ev, ProbMethod::Quadrature, &cfg()),
            Err(Error::UnsupportedEvent(_))
        ));
    }
}
