//! One-dimensional integrals along the generator "ray" that underlie every GP functional.
//!
//! With `w = log t`, the event `R/t^γ − σ/γ ≤ x` (and its U/T analogues) becomes `G ≤ a(w)`
//! for a componentwise nondecreasing curve `a(w)`. Densities, exceedance masses and cdfs are
//! integrals over `w ∈ ℝ` of generator quantities evaluated along that curve. Closed forms
//! are used when a family admits one; otherwise adaptive quadrature in log space.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::generator::{Family, Gaussian, Role};
use crate::linalg::{self, cholesky, chol_logdet, chol_solve, submatrix};
use crate::model::{is_zero_shape, MarginParams};
use crate::mvn;
use crate::quadrature::{integrate_log, QuadratureConfig};

/// One coordinate of the curve: `a + b w` or `y e^{g w}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Arg {
    Affine { a: f64, b: f64 },
    Power { y: f64, g: f64 },
}

impl Arg {
    pub(crate) const POS_INF: Arg = Arg::Affine {
        a: f64::INFINITY,
        b: 1.0,
    };
    pub(crate) const NEG_INF: Arg = Arg::Affine {
        a: f64::NEG_INFINITY,
        b: 1.0,
    };

    #[inline]
    pub(crate) fn at(self, w: f64) -> f64 {
        match self {
            Arg::Affine { a, b } => {
                if a.is_infinite() {
                    a
                } else {
                    a + b * w
                }
            }
            Arg::Power { y, g } => {
                if y == 0.0 || y.is_infinite() {
                    y
                } else {
                    y * (g * w).exp()
                }
            }
        }
    }

    /// `inf { w : at(w) ≥ p }` for a nondecreasing coordinate.
    pub(crate) fn threshold(self, p: f64) -> f64 {
        if p == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        match self {
            Arg::Affine { a, b } => {
                if a == f64::INFINITY {
                    if p < f64::INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    }
                } else if a == f64::NEG_INFINITY || p == f64::INFINITY {
                    f64::INFINITY
                } else {
                    (p - a) / b
                }
            }
            Arg::Power { y, g } => {
                if y == f64::INFINITY {
                    return if p < f64::INFINITY { f64::NEG_INFINITY } else { f64::INFINITY };
                }
                if p == f64::INFINITY {
                    return f64::INFINITY;
                }
                if y > 0.0 {
                    if p <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        (p / y).ln() / g
                    }
                } else if y == 0.0 {
                    if p <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    }
                } else if p >= 0.0 {
                    f64::INFINITY
                } else {
                    (p / y).ln() / g
                }
            }
        }
    }

    fn is_pos_inf(self) -> bool {
        matches!(self, Arg::Affine { a, .. } if a == f64::INFINITY) || matches!(self, Arg::Power { y, .. } if y == f64::INFINITY)
    }

    fn is_neg_inf(self) -> bool {
        matches!(self, Arg::Affine { a, .. } if a == f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Line {
    pub args: Vec<Arg>,
}

impl Line {
    /// Curve for the point `x` (data scale) under the given margins and generator role.
    /// For role R the point must not lie below a lower endpoint.
    pub(crate) fn new(margins: &MarginParams, role: Role, x: &[f64]) -> Line {
        let args = x
            .iter()
            .enumerate()
            .map(|(j, &xj)| match role {
                Role::R => {
                    let (s, g) = (margins.sigma[j], margins.gamma[j]);
                    if xj == f64::INFINITY {
                        Arg::POS_INF
                    } else if xj == f64::NEG_INFINITY {
                        Arg::NEG_INF
                    } else if is_zero_shape(g) {
                        Arg::Affine { a: xj, b: s }
                    } else {
                        let y = xj + s / g;
                        if g > 0.0 {
                            if y < 0.0 {
                                Arg::NEG_INF
                            } else {
                                Arg::Power { y, g }
                            }
                        } else if y >= 0.0 {
                            Arg::POS_INF
                        } else {
                            Arg::Power { y, g }
                        }
                    }
                }
                Role::U | Role::T => Arg::Affine {
                    a: margins.std_ext(j, xj),
                    b: 1.0,
                },
            })
            .collect();
        Line { args }
    }

    pub(crate) fn eval_into(&self, w: f64, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.args) {
            *o = a.at(w);
        }
    }

    fn dim(&self) -> usize {
        self.args.len()
    }
}

fn finish<T>(v: T, err: Option<Error>) -> Result<T> {
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `log ∫ e^{s w} ∂_U F(a(w)) dw`, where `U` are the uncensored coordinates.
pub(crate) fn log_numerator(
    fam: &Family,
    line: &Line,
    censored: &[bool],
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if let Family::Mixture { weights, components } = fam {
        let mut terms = Vec::new();
        for (w, c) in weights.iter().zip(components) {
            if *w > 0.0 {
                terms.push(w.ln() + log_numerator(c, line, censored, s, cfg)?);
            }
        }
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Ok(m);
        }
        return Ok(m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln());
    }
    if !fam.has_density() {
        return Err(Error::UnsupportedModel(format!(
            "{} generator has no density",
            fam.kind()
        )));
    }
    if let Some(v) = closed_log_numerator(fam, line, censored, s) {
        return Ok(v);
    }
    numeric_log_numerator(fam, line, censored, s, cfg)
}

pub(crate) fn numeric_log_numerator(
    fam: &Family,
    line: &Line,
    censored: &[bool],
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let mut buf = vec![0.0; line.dim()];
    let mut err = None;
    let breaks = breakpoints(fam, line);
    let v = integrate_log(
        |w| {
            line.eval_into(w, &mut buf);
            match fam.log_partial(&buf, censored) {
                Ok(lp) => s * w + lp,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &breaks,
        cfg,
    )?;
    finish(v, err)
}

/// `∫ e^w P[G ≰ a(w)] dw` (the exceedance mass).
pub(crate) fn lambda(fam: &Family, line: &Line, cfg: &QuadratureConfig) -> Result<f64> {
    if let Family::Mixture { weights, components } = fam {
        let mut total = 0.0;
        for (w, c) in weights.iter().zip(components) {
            if *w > 0.0 {
                total += w * lambda(c, line, cfg)?;
            }
        }
        return Ok(total);
    }
    if let Some(v) = closed_lambda(fam, line) {
        return Ok(v);
    }
    numeric_lambda(fam, line, cfg)
}

pub(crate) fn numeric_lambda(fam: &Family, line: &Line, cfg: &QuadratureConfig) -> Result<f64> {
    let mut buf = vec![0.0; line.dim()];
    line.eval_into(1e4, &mut buf);
    if fam.sf_union(&buf)? > 1e-12 {
        return Ok(f64::INFINITY);
    }
    let mut err = None;
    let breaks = breakpoints(fam, line);
    let v = integrate_log(
        |w| {
            line.eval_into(w, &mut buf);
            match fam.sf_union(&buf) {
                Ok(p) => w + p.ln(),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &breaks,
        cfg,
    )?;
    finish(v.exp(), err)
}

/// `Λ(lo) − Λ(hi)` for curves with `lo ≤ hi`, exact even when both masses are infinite.
pub(crate) fn lambda_diff(fam: &Family, lo: &Line, hi: &Line, cfg: &QuadratureConfig) -> Result<f64> {
    if let Family::Mixture { weights, components } = fam {
        let mut total = 0.0;
        for (w, c) in weights.iter().zip(components) {
            if *w > 0.0 {
                total += w * lambda_diff(c, lo, hi, cfg)?;
            }
        }
        return Ok(total);
    }
    if let Family::PointMass { point } = fam {
        let c_lo = point_threshold(point, lo);
        let c_hi = point_threshold(point, hi);
        if c_hi == f64::INFINITY {
            return Ok(0.0);
        }
        return Ok((c_lo.exp() - c_hi.exp()).max(0.0));
    }
    if let (Some(a), Some(b)) = (closed_lambda(fam, lo), closed_lambda(fam, hi)) {
        if a.is_finite() && b.is_finite() {
            return Ok((a - b).max(0.0));
        }
    }
    let mut blo = vec![0.0; lo.dim()];
    let mut bhi = vec![0.0; hi.dim()];
    let mut err = None;
    let mut breaks = breakpoints(fam, lo);
    breaks.extend(breakpoints(fam, hi));
    let v = integrate_log(
        |w| {
            lo.eval_into(w, &mut blo);
            hi.eval_into(w, &mut bhi);
            match fam.cdf_diff(&blo, &bhi) {
                Ok(p) => w + p.ln(),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &breaks,
        cfg,
    )?;
    finish(v.exp(), err)
}

fn point_threshold(point: &[f64], line: &Line) -> f64 {
    point
        .iter()
        .zip(&line.args)
        .map(|(&p, a)| a.threshold(p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Points where the integrand may be nonsmooth.
pub(crate) fn breakpoints(fam: &Family, line: &Line) -> Vec<f64> {
    let mut out = Vec::new();
    match fam {
        Family::IndepExponential { .. } => {
            out.extend(line.args.iter().map(|a| a.threshold(0.0)));
        }
        Family::PointMass { point } => {
            out.extend(point.iter().zip(&line.args).map(|(&p, a)| a.threshold(p)));
        }
        Family::RiverNetwork(r) => {
            out.extend(line.args.iter().map(|a| a.threshold(0.0)));
            if line.args.iter().all(|a| matches!(a, Arg::Affine { a, .. } if a.is_finite())) {
                let coef = |j: usize| match line.args[j] {
                    Arg::Affine { a, b } => (a, b),
                    _ => unreachable!(),
                };
                for j in 0..r.dim() {
                    let (mut a, mut b) = coef(j);
                    for &c in r.children(j) {
                        let (ac, bc) = coef(c);
                        a -= ac;
                        b -= bc;
                    }
                    if b != 0.0 {
                        out.push(-a / b);
                    }
                }
            }
        }
        Family::Mixture { components, .. } => {
            for c in components {
                out.extend(breakpoints(c, line));
            }
        }
        _ => {}
    }
    out.retain(|w| w.is_finite());
    out
}

fn common(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    let first = *v.first()?;
    v.iter()
        .all(|x| (x - first).abs() <= 1e-10 * first.abs().max(1e-300))
        .then_some(first)
}

fn power_params(line: &Line) -> Option<(Vec<f64>, f64)> {
    let mut ys = Vec::with_capacity(line.dim());
    let mut gs = Vec::with_capacity(line.dim());
    for a in &line.args {
        match *a {
            Arg::Power { y, g } => {
                ys.push(y);
                gs.push(g);
            }
            _ => return None,
        }
    }
    let g = common(gs.into_iter())?;
    (g > 0.0).then_some((ys, g))
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

const MAX_INCLUSION_EXCLUSION: usize = 12;

fn closed_log_numerator(fam: &Family, line: &Line, censored: &[bool], s: f64) -> Option<f64> {
    let d = line.dim();
    let unc: Vec<usize> = (0..d).filter(|&j| !censored[j]).collect();
    if unc.is_empty() {
        return None;
    }
    match fam {
        Family::IndepExponential { scale } => {
            let (ys, g) = power_params(line)?;
            if unc.iter().any(|&j| !(ys[j] > 0.0) || ys[j].is_infinite()) {
                return None;
            }
            let mut cen = Vec::new();
            for j in (0..d).filter(|&j| censored[j]) {
                if ys[j] <= 0.0 {
                    return Some(f64::NEG_INFINITY);
                }
                if ys[j].is_finite() {
                    cen.push(j);
                }
            }
            if cen.len() > MAX_INCLUSION_EXCLUSION || s <= 0.0 {
                return None;
            }
            let lu: f64 = unc.iter().map(|&j| ys[j] / scale[j]).sum();
            let e = s / g;
            let mut sum = 0.0;
            for mask in 0..(1usize << cen.len()) {
                let mut lb = 0.0;
                let mut sign = 1.0;
                for (b, &j) in cen.iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        lb += ys[j] / scale[j];
                        sign = -sign;
                    }
                }
                sum += sign * (1.0 + lb / lu).powf(-e);
            }
            if !(sum > 0.0) {
                return None;
            }
            let log_scale: f64 = unc.iter().map(|&j| scale[j].ln()).sum();
            Some(-log_scale - g.ln() + ln_gamma(e) - e * lu.ln() + sum.ln())
        }
        Family::IndepGumbel { loc, scale, reversed } => {
            let mut ab = Vec::with_capacity(d);
            for a in &line.args {
                match *a {
                    Arg::Affine { a, b } => ab.push((a, b)),
                    _ => return None,
                }
            }
            let r = common((0..d).map(|j| ab[j].1 / scale[j]))?;
            if !(r > 0.0) {
                return None;
            }
            let mut cen = Vec::new();
            for j in 0..d {
                let a = ab[j].0;
                if censored[j] {
                    if a == f64::NEG_INFINITY {
                        return Some(f64::NEG_INFINITY);
                    }
                    if a.is_finite() {
                        cen.push(j);
                    }
                } else if !a.is_finite() {
                    return Some(f64::NEG_INFINITY);
                }
            }
            let ell: Vec<f64> = (0..d).map(|j| (loc[j] - ab[j].0) / scale[j]).collect();
            let k = unc.len() as f64;
            let log_scale: f64 = unc.iter().map(|&j| scale[j].ln()).sum();
            if !reversed {
                let shape = k - s / r;
                if shape <= 0.0 {
                    return None;
                }
                let terms: Vec<f64> = unc.iter().chain(&cen).map(|&j| ell[j]).collect();
                let log_s = log_sum_exp(&terms);
                let sum_ell: f64 = unc.iter().map(|&j| ell[j]).sum();
                Some(-log_scale + sum_ell + ln_gamma(shape) - shape * log_s - r.ln())
            } else {
                if cen.len() > MAX_INCLUSION_EXCLUSION {
                    return None;
                }
                let shape = k + s / r;
                let base: Vec<f64> = unc.iter().map(|&j| -ell[j]).collect();
                let log_s0 = log_sum_exp(&base);
                let mut sum = 0.0;
                for mask in 0..(1usize << cen.len()) {
                    let mut terms = base.clone();
                    let mut sign = 1.0;
                    for (b, &j) in cen.iter().enumerate() {
                        if mask & (1 << b) != 0 {
                            terms.push(-ell[j]);
                            sign = -sign;
                        }
                    }
                    sum += sign * (-shape * (log_sum_exp(&terms) - log_s0)).exp();
                }
                if !(sum > 0.0) {
                    return None;
                }
                let sum_ell: f64 = unc.iter().map(|&j| ell[j]).sum();
                Some(-log_scale - sum_ell + ln_gamma(shape) - r.ln() - shape * log_s0 + sum.ln())
            }
        }
        Family::MultivariateNormal(gauss) => {
            let mut alpha = Vec::with_capacity(d);
            let mut beta = Vec::with_capacity(d);
            for a in &line.args {
                match *a {
                    Arg::Affine { a, b } => {
                        alpha.push(a);
                        beta.push(b);
                    }
                    _ => return None,
                }
            }
            gaussian_log_integral(gauss, &alpha, &beta, censored, s)
        }
        Family::LogNormalR(gauss) => {
            let mut alpha = Vec::with_capacity(d);
            let mut beta = Vec::with_capacity(d);
            for a in &line.args {
                match *a {
                    Arg::Power { y, g } => {
                        alpha.push(if y > 0.0 { y.ln() } else if y == 0.0 { f64::NEG_INFINITY } else { return None });
                        beta.push(g);
                    }
                    Arg::Affine { a, .. } if a.is_infinite() => {
                        alpha.push(a);
                        beta.push(1.0);
                    }
                    _ => return None,
                }
            }
            if unc.iter().any(|&j| !alpha[j].is_finite()) {
                return Some(f64::NEG_INFINITY);
            }
            // dR = R d(log R): the uncensored Jacobian contributes e^{-Σ_U (α_j + β_j w)}.
            let s_eff = s - unc.iter().map(|&j| beta[j]).sum::<f64>();
            let shift: f64 = unc.iter().map(|&j| alpha[j]).sum();
            Some(gaussian_log_integral(gauss, &alpha, &beta, censored, s_eff)? - shift)
        }
        Family::RiverNetwork(river) => {
            if censored.iter().any(|&c| c) {
                return None;
            }
            let (ys, g) = power_params(line)?;
            if ys.iter().any(|y| !y.is_finite()) {
                return None;
            }
            for j in 0..d {
                if !(river.local_input(j, &ys) >= 0.0) {
                    return Some(f64::NEG_INFINITY);
                }
            }
            let l: f64 = river.outlets().map(|o| ys[o]).sum();
            if !(l > 0.0) || s <= 0.0 {
                return None;
            }
            let e = s / g;
            Some(ln_gamma(e) - e * l.ln() - g.ln())
        }
        _ => None,
    }
}

/// `log ∫ e^{s w} φ_U(α_U + β_U w) Φ_C(α_C + β_C w | ·) dw` for a Gaussian vector, where the
/// censored block enters through its conditional cdf.
fn gaussian_log_integral(g: &Gaussian, alpha: &[f64], beta: &[f64], censored: &[bool], s: f64) -> Option<f64> {
    let d = alpha.len();
    let unc: Vec<usize> = (0..d).filter(|&j| !censored[j]).collect();
    if unc.iter().any(|&j| !alpha[j].is_finite()) {
        return Some(f64::NEG_INFINITY);
    }
    let mut cen = Vec::new();
    for j in (0..d).filter(|&j| censored[j]) {
        if alpha[j] == f64::NEG_INFINITY {
            return Some(f64::NEG_INFINITY);
        }
        if alpha[j].is_finite() {
            cen.push(j);
        }
    }
    let mu = g.mean();
    let cov = g.cov();
    let suu = submatrix(cov, &unc, &unc);
    let l = cholesky(&suu).ok()?;
    let k: Vec<f64> = unc.iter().map(|&j| alpha[j] - mu[j]).collect();
    let bu: Vec<f64> = unc.iter().map(|&j| beta[j]).collect();
    let ak = chol_solve(&l, &k);
    let ab = chol_solve(&l, &bu);
    let q = linalg::dot(&bu, &ab);
    if !(q > 0.0) {
        return None;
    }
    let m = (s - linalg::dot(&bu, &ak)) / q;
    let nu = unc.len() as f64;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut out = -0.5 * nu * ln2pi - 0.5 * chol_logdet(&l) - 0.5 * linalg::dot(&k, &ak) + 0.5 * q * m * m
        + 0.5 * (ln2pi - q.ln());
    if !cen.is_empty() {
        let scu = submatrix(cov, &cen, &unc);
        let scc = submatrix(cov, &cen, &cen);
        let nc = cen.len();
        let mut upper = vec![0.0; nc];
        let mut h = vec![0.0; nc];
        let mut bmat = Vec::with_capacity(nc);
        for r in 0..nc {
            // row of B = Σ_CU Σ_UU^{-1}
            let brow = chol_solve(&l, &scu[r]);
            let j = cen[r];
            let gr = alpha[j] - mu[j] - linalg::dot(&brow, &k);
            h[r] = beta[j] - linalg::dot(&brow, &bu);
            upper[r] = gr + h[r] * m;
            bmat.push(brow);
        }
        let mut cmat = scc;
        for r in 0..nc {
            for c in 0..nc {
                cmat[r][c] += -linalg::dot(&bmat[r], &scu[c]) + h[r] * h[c] / q;
            }
        }
        let lp = if nc == 1 {
            mvn::log_norm_cdf(upper[0] / cmat[0][0].sqrt())
        } else {
            mvn::mvn_cdf(&upper, &cmat).ok()?.ln()
        };
        out += lp;
    }
    Some(out)
}

fn closed_lambda(fam: &Family, line: &Line) -> Option<f64> {
    let d = line.dim();
    if line.args.iter().any(|a| a.is_neg_inf()) {
        return match fam {
            Family::PointMass { .. } | Family::Mixture { .. } => None,
            _ => Some(f64::INFINITY),
        };
    }
    let keep: Vec<usize> = (0..d).filter(|&j| !line.args[j].is_pos_inf()).collect();
    if keep.is_empty() {
        return Some(0.0);
    }
    match fam {
        Family::PointMass { point } => {
            let c = point_threshold(point, line);
            Some(c.exp())
        }
        Family::IndepExponential { scale } => {
            let sub = Line {
                args: keep.iter().map(|&j| line.args[j]).collect(),
            };
            let (ys, g) = power_params(&sub)?;
            if ys.iter().any(|&y| y <= 0.0) {
                return Some(f64::INFINITY);
            }
            if keep.len() > MAX_INCLUSION_EXCLUSION {
                return None;
            }
            let ls: Vec<f64> = keep.iter().zip(&ys).map(|(&j, y)| y / scale[j]).collect();
            let e = 1.0 / g;
            let mut sum = 0.0;
            for mask in 1..(1usize << ls.len()) {
                let lb: f64 = (0..ls.len()).filter(|b| mask & (1 << b) != 0).map(|b| ls[b]).sum();
                let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
                sum += sign * lb.powf(-e);
            }
            Some((ln_gamma(e) - g.ln()).exp() * sum.max(0.0))
        }
        Family::IndepGumbel { loc, scale, reversed } => {
            let mut ab = Vec::new();
            for &j in &keep {
                match line.args[j] {
                    Arg::Affine { a, b } => ab.push((j, a, b)),
                    _ => return None,
                }
            }
            let r = common(ab.iter().map(|&(j, _, b)| b / scale[j]))?;
            let ell: Vec<f64> = ab.iter().map(|&(j, a, _)| (loc[j] - a) / scale[j]).collect();
            if !reversed {
                if r <= 1.0 {
                    return Some(f64::INFINITY);
                }
                let log_s = log_sum_exp(&ell);
                Some((log_s / r + ln_gamma(1.0 - 1.0 / r)).exp())
            } else {
                if ell.len() > MAX_INCLUSION_EXCLUSION {
                    return None;
                }
                let neg: Vec<f64> = ell.iter().map(|l| -l).collect();
                let mut sum = 0.0;
                for mask in 1..(1usize << neg.len()) {
                    let terms: Vec<f64> = (0..neg.len()).filter(|b| mask & (1 << b) != 0).map(|b| neg[b]).collect();
                    let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
                    sum += sign * (-log_sum_exp(&terms) / r).exp();
                }
                Some(ln_gamma(1.0 + 1.0 / r).exp() * sum.max(0.0))
            }
        }
        Family::MultivariateNormal(g) => {
            let mut alpha = Vec::new();
            let mut beta = Vec::new();
            for &j in &keep {
                match line.args[j] {
                    Arg::Affine { a, b } => {
                        alpha.push(a);
                        beta.push(b);
                    }
                    _ => return None,
                }
            }
            gaussian_lambda(g, &keep, &alpha, &beta)
        }
        Family::LogNormalR(g) => {
            let mut alpha = Vec::new();
            let mut beta = Vec::new();
            for &j in &keep {
                match line.args[j] {
                    Arg::Power { y, g } if y > 0.0 => {
                        alpha.push(y.ln());
                        beta.push(g);
                    }
                    Arg::Power { y, .. } if y == 0.0 => return Some(f64::INFINITY),
                    _ => return None,
                }
            }
            gaussian_lambda(g, &keep, &alpha, &beta)
        }
        Family::RiverNetwork(river) => {
            if keep.len() != d {
                return None;
            }
            let (ys, g) = power_params(line)?;
            if ys.iter().any(|&y| y <= 0.0) {
                return Some(f64::INFINITY);
            }
            let outlets: Vec<usize> = river.outlets().collect();
            if outlets.len() != 1 {
                return None;
            }
            let o = outlets[0];
            if ys.iter().any(|&y| y < ys[o]) {
                return None;
            }
            let n = river.count(o) as f64;
            Some((-ys[o].ln() / g + ln_gamma(n + 1.0 / g) - ln_gamma(n)).exp())
        }
        Family::Mixture { .. } => None,
    }
}

/// `E[e^{max_j V_j}]` with `V_j = (N_j − α_j)/β_j` for the kept coordinates.
fn gaussian_lambda(g: &Gaussian, keep: &[usize], alpha: &[f64], beta: &[f64]) -> Option<f64> {
    if beta.iter().any(|b| !(*b > 0.0)) {
        return None;
    }
    let n = keep.len();
    let nu: Vec<f64> = (0..n).map(|i| (g.mean()[keep[i]] - alpha[i]) / beta[i]).collect();
    let om: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| g.cov()[keep[i]][keep[j]] / (beta[i] * beta[j])).collect())
        .collect();
    let mut total = 0.0;
    for k in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != k).collect();
        let upper: Vec<f64> = others
            .iter()
            .map(|&j| -(nu[j] - nu[k] + om[j][k] - om[k][k]))
            .collect();
        let cov: Vec<Vec<f64>> = others
            .iter()
            .map(|&i| {
                others
                    .iter()
                    .map(|&j| om[i][j] - om[i][k] - om[j][k] + om[k][k])
                    .collect()
            })
            .collect();
        let p = if others.is_empty() { 1.0 } else { mvn::mvn_cdf(&upper, &cov).ok()? };
        total += (nu[k] + 0.5 * om[k][k]).exp() * p;
    }
    Some(total)
}
