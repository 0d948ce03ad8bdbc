//! Goodness-of-fit statistics and the threshold-stability check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::max_stability_params;
use crate::model::MarginParams;

/// Survival function of the Kolmogorov distribution, `P[K > λ]`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.0 {
        // theta-function form, fast for small λ
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=6).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value with the finite-sample correction `(√n + 0.12 + 0.11/√n) D`.
    pub p_value: f64,
    pub n: usize,
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let r = ne.sqrt();
    kolmogorov_sf((r + 0.12 + 0.11 / r) * d)
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Data("empty sample".into()));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("sample contains NaN".into()));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample Kolmogorov–Smirnov test against a continuous cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    let v = sorted(sample)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n),
        n: v.len(),
    })
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (x, y) = (sorted(a)?, sorted(b)?);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n * m / (n + m)),
        n: x.len().min(y.len()),
    })
}

/// Largest gap between the empirical cdf of `rows` and `cdf_values` at `points`.
pub fn ecdf_distance(rows: &[Vec<f64>], points: &[Vec<f64>], cdf_values: &[f64]) -> f64 {
    let n = rows.len() as f64;
    points
        .iter()
        .zip(cdf_values)
        .map(|(p, f)| {
            let below = rows.iter().filter(|r| r.iter().zip(p).all(|(a, b)| a <= b)).count();
            (below as f64 / n - f).abs()
        })
        .fold(0.0, f64::max)
}

/// Threshold-stability check at one level `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub t: f64,
    pub threshold: Vec<f64>,
    pub scale: Vec<f64>,
    pub exceedances: usize,
    pub fraction: f64,
    /// `fraction · t`; 1 under the model.
    pub fraction_ratio: f64,
    /// Two-sample KS of each rescaled-excess margin against the reference sample.
    pub margins: Vec<KsResult>,
}

/// Rows exceeding `u_t = σ(t^γ − 1)/γ`, rescaled by `s_t = t^γ`.
pub fn rescaled_excesses(rows: &[Vec<f64>], margins: &MarginParams, t: f64) -> Result<Vec<Vec<f64>>> {
    let (s, u) = max_stability_params(margins, t)?;
    Ok(rows
        .iter()
        .filter(|x| x.iter().zip(&u).any(|(a, b)| a > b))
        .map(|x| x.iter().zip(&u).zip(&s).map(|((a, b), c)| (a - b) / c).collect())
        .collect())
}

/// For each `t ≥ 1`: the fraction of `rows` exceeding `u_t` (which should be `1/t`) and per-margin
/// two-sample KS tests of the rescaled excesses against `reference`.
pub fn threshold_stability(
    rows: &[Vec<f64>],
    reference: &[Vec<f64>],
    margins: &MarginParams,
    ts: &[f64],
) -> Result<Vec<StabilityReport>> {
    let d = margins.dim();
    if rows.is_empty() || reference.is_empty() {
        return Err(Error::Data("threshold stability needs non-empty samples".into()));
    }
    if rows.iter().chain(reference).any(|r| r.len() != d) {
        return Err(Error::Data(format!("rows must have {d} columns")));
    }
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        if !(t >= 1.0 && t.is_finite()) {
            return Err(Error::Config(format!("threshold level t = {t} must be finite and at least 1")));
        }
        let (s, u) = max_stability_params(margins, t)?;
        let exc = rescaled_excesses(rows, margins, t)?;
        let fraction = exc.len() as f64 / rows.len() as f64;
        let mut ks = Vec::with_capacity(d);
        for j in 0..d {
            let a: Vec<f64> = exc.iter().map(|r| r[j]).collect();
            let b: Vec<f64> = reference.iter().map(|r| r[j]).collect();
            ks.push(if a.is_empty() {
                KsResult {
                    statistic: f64::NAN,
                    p_value: f64::NAN,
                    n: 0,
                }
            } else {
                ks_two_sample(&a, &b)?
            });
        }
        out.push(StabilityReport {
            t,
            threshold: u,
            scale: s,
            exceedances: exc.len(),
            fraction,
            fraction_ratio: fraction * t,
            margins: ks,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_matches_reference() {
        // scipy.stats.kstwobign.sf
        let cases = [
            (0.3, 0.9999906941986655),
            (0.5, 0.9639452436648751),
            (1.0, 0.26999967167735456),
            (1.36, 0.049485876755377876),
            (2.0, 0.0006709252557796953),
        ];
        for (l, p) in cases {
            assert!((kolmogorov_sf(l) - p).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn ks_statistics() {
        let x: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let r = ks_one_sample(&x, |v| v).unwrap();
        assert!((r.statistic - 0.05).abs() < 1e-15);
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5, 4.5]).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-15);
        let r = ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn exceedance_of_exact_threshold() {
        let m = MarginParams::new(vec![1.0], vec![0.0]).unwrap();
        let rows = vec![vec![0.5], vec![1.5], vec![5f64.ln() + 1.0]];
        let exc = rescaled_excesses(&rows, &m, 5.0).unwrap();
        assert_eq!(exc.len(), 1);
        assert!((exc[0][0] - 1.0).abs() < 1e-12);
    }
}
