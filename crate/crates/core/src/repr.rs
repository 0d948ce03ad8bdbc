//! Cdf evaluation in every representation and conversion between representations.

use log::warn;

use crate::error::{Error, Result};
use crate::generator::{Family, Gaussian, GeneratorSpec, Margin, Role};
use crate::integrals::{self, Line};
use crate::model::{is_zero_shape, GpModel, MarginParams, Representation};
use crate::mvn;
use crate::quadrature::{integrate_log, integrate_pieces, QuadratureConfig};

/// `P[X ≤ x]` for a GP model in any representation.
pub fn cdf(model: &GpModel, x: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let d = model.dim();
    if x.len() != d {
        return Err(Error::Config(format!("point has length {}, model dimension is {d}", x.len())));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("point contains NaN".into()));
    }
    let m = model.margins();
    if (0..d).any(|j| x[j] < m.eta(j)) {
        return Ok(0.0);
    }
    let raw = match model.generator().role {
        Role::R | Role::U => exceedance_cdf(model, x, cfg)?,
        Role::T => {
            let z: Vec<f64> = (0..d).map(|j| m.std_ext(j, x[j])).collect();
            t_cdf(model.family(), &z, cfg)?
        }
    };
    Ok(clamp_probability(raw))
}

pub(crate) fn clamp_probability(p: f64) -> f64 {
    if !(-1e-7..=1.0 + 1e-7).contains(&p) {
        warn!("probability {p} outside [0, 1] by more than 1e-7; clamping");
    }
    p.clamp(0.0, 1.0)
}

fn exceedance_cdf(model: &GpModel, x: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let role = model.generator().role;
    let m = model.margins();
    let fam = model.family();
    let zero = vec![0.0; x.len()];
    let total = integrals::lambda(fam, &Line::new(m, role, &zero), cfg)?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Model(format!(
            "exceedance normalizer is {total}; the generator violates the moment condition"
        )));
    }
    let lo: Vec<f64> = x.iter().map(|v| v.min(0.0)).collect();
    let diff = integrals::lambda_diff(fam, &Line::new(m, role, &lo), &Line::new(m, role, x), cfg)?;
    Ok(diff / total)
}

/// Cdf of `E + T − max_j T_j` at the standardized point `z`.
fn t_cdf(fam: &Family, z: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    match fam {
        Family::Mixture { weights, components } => {
            let mut s = 0.0;
            for (w, c) in weights.iter().zip(components) {
                if *w > 0.0 {
                    s += w * t_cdf(c, z, cfg)?;
                }
            }
            return Ok(s);
        }
        Family::PointMass { point } => {
            let top = point.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let reach = z
                .iter()
                .zip(point)
                .map(|(&zj, &p)| if p == f64::NEG_INFINITY { f64::INFINITY } else { zj - (p - top) })
                .fold(f64::INFINITY, f64::min);
            return Ok(if reach > 0.0 { -(-reach).exp_m1() } else { 0.0 });
        }
        _ => {}
    }
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if zmax <= 0.0 {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = z.iter().copied().filter(|&v| v > 0.0 && v < zmax).collect();
    let mut err = None;
    let mut shifted = vec![0.0; z.len()];
    let (v, _) = integrate_pieces(
        |v| {
            for (s, &zj) in shifted.iter_mut().zip(z) {
                *s = zj - v;
            }
            match spectral_cdf(fam, &shifted, cfg) {
                Ok(p) => (-v).exp() * p,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        zmax,
        &breaks,
        cfg,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `P[T − max_j T_j ≤ s]`.
pub(crate) fn spectral_cdf(fam: &Family, s: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let d = s.len();
    let c: Vec<f64> = s.iter().map(|v| v.min(0.0)).collect();
    let mut total = 0.0;
    for k in (0..d).filter(|&k| s[k] >= 0.0) {
        total += argmax_prob(fam, k, &c, cfg)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// `P[T_j − T_k ≤ c_j for all j ≠ k]`.
fn argmax_prob(fam: &Family, k: usize, c: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let d = c.len();
    match fam {
        Family::Mixture { weights, components } => {
            let mut s = 0.0;
            for (w, comp) in weights.iter().zip(components) {
                if *w > 0.0 {
                    s += w * argmax_prob(comp, k, c, cfg)?;
                }
            }
            Ok(s)
        }
        Family::IndepGumbel { loc, scale, reversed } if scale.iter().all(|b| (b - scale[0]).abs() <= 1e-12 * scale[0]) => {
            let b = scale[0];
            if !reversed {
                let terms: Vec<f64> = (0..d)
                    .map(|j| (loc[j] - if j == k { 0.0 } else { c[j] } - loc[k]) / b)
                    .collect();
                let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = terms.iter().map(|t| (t - m).exp()).sum();
                Ok((-m).exp() / sum)
            } else {
                let others: Vec<usize> = (0..d).filter(|&j| j != k).collect();
                if others.len() > 16 {
                    return numeric_argmax(fam, k, c, cfg);
                }
                let a: Vec<f64> = others.iter().map(|&j| ((loc[k] + c[j] - loc[j]) / b).exp()).collect();
                let mut sum = 0.0;
                for mask in 0..(1usize << a.len()) {
                    let sb: f64 = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).sum();
                    let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    sum += sign / (1.0 + sb);
                }
                Ok(sum.clamp(0.0, 1.0))
            }
        }
        Family::MultivariateNormal(g) => {
            if d == 1 {
                return Ok(1.0);
            }
            let (upper, cov) = difference_law(g, k, c);
            mvn::mvn_cdf(&upper, &cov)
        }
        Family::IndepExponential { .. } | Family::IndepGumbel { .. } => numeric_argmax(fam, k, c, cfg),
        Family::PointMass { .. } => unreachable!("handled by the caller"),
        Family::LogNormalR(_) | Family::RiverNetwork(_) => Err(Error::UnsupportedModel(format!(
            "{} generator is not available in the (T) representation",
            fam.kind()
        ))),
    }
}

/// Law of `(T_j − T_k)_{j ≠ k}` as upper limits `c_j − (μ_j − μ_k)` and covariance.
fn difference_law(g: &Gaussian, k: usize, c: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mu = g.mean();
    let s = g.cov();
    let others: Vec<usize> = (0..c.len()).filter(|&j| j != k).collect();
    let upper = others.iter().map(|&j| c[j] - (mu[j] - mu[k])).collect();
    let cov = others
        .iter()
        .map(|&i| others.iter().map(|&j| s[i][j] - s[i][k] - s[j][k] + s[k][k]).collect())
        .collect();
    (upper, cov)
}

fn numeric_argmax(fam: &Family, k: usize, c: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    let margins: Vec<Margin> = fam.margins().expect("independent family");
    let mut breaks = Vec::new();
    if let Margin::Exp(_) = margins[k] {
        breaks.push(0.0);
        breaks.extend(c.iter().map(|v| -v));
    }
    let v = integrate_log(
        |t| {
            let mut s = margins[k].log_pdf(t);
            for (j, m) in margins.iter().enumerate() {
                if j != k {
                    s += m.log_cdf(t + c[j]);
                }
            }
            s
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &breaks,
        cfg,
    )?;
    Ok(v.exp())
}

/// Re-expresses a model in another representation with the same distribution.
pub fn convert(model: &GpModel, target: Representation) -> Result<GpModel> {
    use Representation::*;
    let src = model.representation();
    if src == target {
        return Ok(model.clone());
    }
    let unsupported = || {
        Error::UnsupportedConversion(format!(
            "no exact conversion of a {} generator from {src} to {target}",
            model.family().kind()
        ))
    };
    let m = model.margins();
    let family = match (src, target) {
        (S, T) | (T, S) => return Ok(model.with_representation(target)),
        (R, U) => r_to_u(model.family(), m).ok_or_else(unsupported)?,
        (U, R) => u_to_r(model.family(), m).ok_or_else(unsupported)?,
        (U, T) | (U, S) => u_to_t(model.family()).ok_or_else(unsupported)?,
        _ => return Err(unsupported()),
    };
    GpModel::new(target, m.clone(), GeneratorSpec::new(target.role(), family)?)
}

fn all_positive(m: &MarginParams) -> bool {
    m.gamma.iter().all(|&g| g > 0.0 && !is_zero_shape(g))
}

fn all_zero(m: &MarginParams) -> bool {
    m.gamma.iter().all(|&g| is_zero_shape(g))
}

/// `U_j = (1/γ_j) log(γ_j R_j / σ_j)`, or `R_j / σ_j` when γ_j = 0.
fn r_to_u(fam: &Family, m: &MarginParams) -> Option<Family> {
    let d = m.dim();
    match fam {
        Family::IndepExponential { scale } if all_positive(m) => Some(Family::IndepGumbel {
            loc: (0..d).map(|j| (m.gamma[j] * scale[j] / m.sigma[j]).ln() / m.gamma[j]).collect(),
            scale: m.gamma.iter().map(|g| 1.0 / g).collect(),
            reversed: true,
        }),
        Family::IndepExponential { scale } if all_zero(m) => Some(Family::IndepExponential {
            scale: (0..d).map(|j| scale[j] / m.sigma[j]).collect(),
        }),
        Family::IndepGumbel { loc, scale, reversed } if all_zero(m) => Some(Family::IndepGumbel {
            loc: (0..d).map(|j| loc[j] / m.sigma[j]).collect(),
            scale: (0..d).map(|j| scale[j] / m.sigma[j]).collect(),
            reversed: *reversed,
        }),
        Family::LogNormalR(g) if all_positive(m) => {
            let mean = (0..d)
                .map(|j| (g.mean()[j] + (m.gamma[j] / m.sigma[j]).ln()) / m.gamma[j])
                .collect();
            let cov = scale_cov(g.cov(), &m.gamma.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
            Gaussian::new(mean, cov).ok().map(Family::MultivariateNormal)
        }
        Family::MultivariateNormal(g) if all_zero(m) => {
            let inv: Vec<f64> = m.sigma.iter().map(|s| 1.0 / s).collect();
            let mean = (0..d).map(|j| g.mean()[j] * inv[j]).collect();
            Gaussian::new(mean, scale_cov(g.cov(), &inv)).ok().map(Family::MultivariateNormal)
        }
        Family::PointMass { point } => Some(Family::PointMass {
            point: (0..d).map(|j| point_r_to_u(point[j], m.sigma[j], m.gamma[j])).collect(),
        }),
        Family::Mixture { weights, components } => Some(Family::Mixture {
            weights: weights.clone(),
            components: components.iter().map(|c| r_to_u(c, m)).collect::<Option<Vec<_>>>()?,
        }),
        _ => None,
    }
}

fn point_r_to_u(p: f64, s: f64, g: f64) -> f64 {
    if is_zero_shape(g) {
        return p / s;
    }
    let v = g * p / s;
    if v <= 0.0 {
        f64::NEG_INFINITY
    } else {
        v.ln() / g
    }
}

fn point_u_to_r(u: f64, s: f64, g: f64) -> f64 {
    if is_zero_shape(g) {
        s * u
    } else {
        s / g * (g * u).exp()
    }
}

fn u_to_r(fam: &Family, m: &MarginParams) -> Option<Family> {
    let d = m.dim();
    match fam {
        Family::IndepGumbel { loc, scale, reversed: true }
            if all_positive(m) && (0..d).all(|j| (scale[j] * m.gamma[j] - 1.0).abs() < 1e-12) =>
        {
            Some(Family::IndepExponential {
                scale: (0..d).map(|j| m.sigma[j] / m.gamma[j] * (m.gamma[j] * loc[j]).exp()).collect(),
            })
        }
        Family::IndepExponential { scale } if all_zero(m) => Some(Family::IndepExponential {
            scale: (0..d).map(|j| scale[j] * m.sigma[j]).collect(),
        }),
        Family::IndepGumbel { loc, scale, reversed } if all_zero(m) => Some(Family::IndepGumbel {
            loc: (0..d).map(|j| loc[j] * m.sigma[j]).collect(),
            scale: (0..d).map(|j| scale[j] * m.sigma[j]).collect(),
            reversed: *reversed,
        }),
        Family::MultivariateNormal(g) if all_positive(m) => {
            let mean = (0..d)
                .map(|j| m.gamma[j] * g.mean()[j] - (m.gamma[j] / m.sigma[j]).ln())
                .collect();
            Gaussian::new(mean, scale_cov(g.cov(), &m.gamma)).ok().map(Family::LogNormalR)
        }
        Family::MultivariateNormal(g) if all_zero(m) => {
            let mean = (0..d).map(|j| g.mean()[j] * m.sigma[j]).collect();
            Gaussian::new(mean, scale_cov(g.cov(), &m.sigma)).ok().map(Family::MultivariateNormal)
        }
        Family::PointMass { point } => Some(Family::PointMass {
            point: (0..d).map(|j| point_u_to_r(point[j], m.sigma[j], m.gamma[j])).collect(),
        }),
        Family::Mixture { weights, components } => Some(Family::Mixture {
            weights: weights.clone(),
            components: components.iter().map(|c| u_to_r(c, m)).collect::<Option<Vec<_>>>()?,
        }),
        _ => None,
    }
}

/// Atoms only: the (T) generator is the `e^{max u}`-tilted law of U.
fn u_to_t(fam: &Family) -> Option<Family> {
    match fam {
        Family::PointMass { .. } => Some(fam.clone()),
        Family::Mixture { weights, components } => {
            let mut tilted = Vec::with_capacity(weights.len());
            for c in components {
                match c {
                    Family::PointMass { point } => {
                        tilted.push(point.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                    }
                    _ => return None,
                }
            }
            let top = tilted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = weights.iter().zip(&tilted).map(|(w, t)| w * (t - top).exp()).collect();
            let total: f64 = raw.iter().sum();
            Some(Family::Mixture {
                weights: raw.iter().map(|w| w / total).collect(),
                components: components.clone(),
            })
        }
        _ => None,
    }
}

fn scale_cov(cov: &[Vec<f64>], f: &[f64]) -> Vec<Vec<f64>> {
    cov.iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v * f[i] * f[j]).collect())
        .collect()
}
