//! Adaptive Gauss–Kronrod quadrature on finite, semi-infinite and infinite ranges.
//!
//! Infinite ends are mapped to (0, 1) with `x = a + s/(1-s)` (or its mirror) and the
//! transformed integrand is integrated by globally adaptive bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and subdivision budget for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 10 {
            return Err(Error::Config("max_subdivisions must be at least 10".into()));
        }
        Ok(())
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[derive(Clone, Copy, Debug)]
enum Map {
    Identity,
    /// x = a + s/(1-s)
    Upper(f64),
    /// x = b - s/(1-s)
    Lower(f64),
}

impl Map {
    #[inline]
    fn apply(self, s: f64) -> (f64, f64) {
        match self {
            Map::Identity => (s, 1.0),
            Map::Upper(a) => {
                let d = 1.0 - s;
                (a + s / d, 1.0 / (d * d))
            }
            Map::Lower(b) => {
                let d = 1.0 - s;
                (b - s / d, 1.0 / (d * d))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    map: Map,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn eval<F: FnMut(f64) -> f64>(f: &mut F, map: Map, s: f64) -> Result<f64> {
    let (x, jac) = map.apply(s);
    let v = f(x);
    if v.is_nan() || v.is_infinite() {
        return Err(Error::Domain(format!("integrand is not finite at {x:e}")));
    }
    if v == 0.0 {
        Ok(0.0)
    } else {
        Ok(v * jac)
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, map: Map, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = eval(f, map, center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(f, map, center - dx)?;
        let f2 = eval(f, map, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

fn pieces_for(lo: f64, hi: f64, breaks: &[f64]) -> Vec<(Map, f64, f64)> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if lo == f64::NEG_INFINITY && hi == f64::INFINITY && pts.is_empty() {
        pts.push(0.0);
    }
    let mut nodes = Vec::with_capacity(pts.len() + 2);
    nodes.push(lo);
    nodes.extend(pts);
    nodes.push(hi);
    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == f64::NEG_INFINITY {
            out.push((Map::Lower(b), 0.0, 1.0));
        } else if b == f64::INFINITY {
            out.push((Map::Upper(a), 0.0, 1.0));
        } else if b > a {
            out.push((Map::Identity, a, b));
        }
    }
    out
}

/// Integrate `f` over `(lo, hi)` (either end may be infinite), splitting at `breaks`.
/// Returns `(value, error estimate)`.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    if !(hi > lo) {
        return Ok((0.0, 0.0));
    }
    let mut pieces = Vec::new();
    for (map, a, b) in pieces_for(lo, hi, breaks) {
        let (value, error) = gk21(&mut f, map, a, b)?;
        pieces.push(Piece {
            map,
            lo: a,
            hi: b,
            value,
            error,
        });
    }
    let mut subdivisions = 0;
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok((total, err));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.partial_cmp(&b.1.error).unwrap())
            .unwrap();
        let p = pieces[worst];
        let mid = 0.5 * (p.lo + p.hi);
        let too_small = (p.hi - p.lo) <= 1e-13 * (1.0 + p.lo.abs().max(p.hi.abs()));
        if subdivisions >= cfg.max_subdivisions || too_small {
            let (xa, _) = p.map.apply(p.lo);
            let (xb, _) = p.map.apply(p.hi);
            return Err(Error::Integration {
                subdivisions,
                estimate: total,
                error: err,
                lo: xa.min(xb),
                hi: xa.max(xb),
            });
        }
        let (v1, e1) = gk21(&mut f, p.map, p.lo, mid)?;
        let (v2, e2) = gk21(&mut f, p.map, mid, p.hi)?;
        pieces[worst] = Piece {
            map: p.map,
            lo: p.lo,
            hi: mid,
            value: v1,
            error: e1,
        };
        pieces.push(Piece {
            map: p.map,
            lo: mid,
            hi: p.hi,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
}

/// Integrate `f` over `(0, ∞)` using the substitution `t = s/(1-s)`.
pub fn integrate_halfline<F: FnMut(f64) -> f64>(f: F, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    integrate_pieces(f, 0.0, f64::INFINITY, &[], cfg)
}

/// Integrate `f` over a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    if a > b {
        let (v, e) = integrate_pieces(f, b, a, &[], cfg)?;
        return Ok((-v, e));
    }
    integrate_pieces(f, a, b, &[], cfg)
}

/// Logarithm of `∫ exp(log_f(x)) dx` over `(lo, hi)`.
///
/// The integrand is rescaled by its approximate maximum (found on a coarse grid) so that
/// values far below the double-precision range still integrate accurately. Returns
/// `-inf` for an integrand that vanishes everywhere.
pub fn integrate_log<F: FnMut(f64) -> f64>(
    mut log_f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let (a, b) = (lo.max(-80.0), hi.min(80.0));
    let mut grid: Vec<f64> = if a < b {
        (0..=40).map(|i| a + (b - a) * i as f64 / 40.0).collect()
    } else {
        Vec::new()
    };
    grid.extend(breaks.iter().copied().filter(|x| *x > lo && *x < hi));
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &x in &grid {
        let v = log_f(x);
        if v.is_nan() {
            return Err(Error::Domain(format!("log-integrand is NaN at {x:e}")));
        }
        if v > best.0 {
            best = (v, x);
        }
    }
    if best.0.is_finite() {
        let step = (b - a) / 40.0;
        for i in -8..=8 {
            let x = best.1 + step * i as f64 / 8.0;
            if x > lo && x < hi {
                let v = log_f(x);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
    }
    let (offset, mut all_breaks) = if best.0.is_finite() {
        (best.0, vec![best.1])
    } else {
        (0.0, Vec::new())
    };
    all_breaks.extend_from_slice(breaks);
    let (value, _) = integrate_pieces(
        |x| {
            let v = log_f(x);
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                (v - offset).exp()
            }
        },
        lo,
        hi,
        &all_breaks,
        cfg,
    )?;
    if value > 0.0 {
        Ok(offset + value.ln())
    } else {
        Ok(f64::NEG_INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn halfline_gamma_integrals() {
        let cfg = QuadratureConfig::default();
        let (v, e) = integrate_halfline(|t| (-t).exp(), &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-10 && e <= 1e-9 * v + 1e-12);
        let (v, _) = integrate_halfline(|t| t * (-t).exp(), &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let (v, _) = integrate_halfline(|t| t.powi(3) * (-1.5 * t).exp(), &cfg).unwrap();
        assert_relative_eq!(v, 6.0 / 1.5f64.powi(4), max_relative = 1e-10);
    }

    #[test]
    fn polynomial_exactness() {
        let cfg = QuadratureConfig::default();
        let (v, _) = integrate(|x| x.powi(20), 0.0, 1.0, &cfg).unwrap();
        assert_relative_eq!(v, 1.0 / 21.0, max_relative = 1e-14);
    }

    #[test]
    fn breakpoints_handle_jumps() {
        let cfg = QuadratureConfig::default();
        let f = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let (v, _) = integrate_pieces(f, 0.0, 1.0, &[0.3], &cfg).unwrap();
        assert_relative_eq!(v, 0.3, max_relative = 1e-13);
    }

    #[test]
    fn whole_line_gaussian_in_log_space() {
        let cfg = QuadratureConfig::default();
        let v = integrate_log(|x| -0.5 * (x - 3.0).powi(2) - 900.0, f64::NEG_INFINITY, f64::INFINITY, &[], &cfg)
            .unwrap();
        let exact = -900.0 + (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn exhausted_budget_reports_diagnostics() {
        let cfg = QuadratureConfig {
            rel_tol: 1e-14,
            abs_tol: 1e-300,
            max_subdivisions: 10,
        };
        let err = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Integration { subdivisions: 10, .. }));
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        let bad = QuadratureConfig {
            max_subdivisions: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
