//! Univariate and multivariate normal distribution functions.
//!
//! Orthant and box probabilities use exact low-dimensional algorithms for up to three
//! coordinates (Genz's bivariate method, and a one-dimensional integral of it for
//! trivariate) and a seeded randomized lattice rule in higher dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::Result;
use crate::linalg::{cholesky, submatrix};
use crate::quadrature::{integrate_pieces, QuadratureConfig};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

/// log Φ(x), accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        let p = norm_cdf(x);
        if p > 0.5 {
            (-norm_cdf(-x)).ln_1p()
        } else {
            p.ln()
        }
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        // Asymptotic Mills-ratio series.
        let z2 = 1.0 / (x * x);
        let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2 + 105.0 * z2.powi(4);
        -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
    }
}

const GL_X: [&[f64]; 3] = [
    &[-0.932469514203152, -0.6612093864662645, -0.23861918608319693],
    &[
        -0.9815606342467192,
        -0.9041172563704748,
        -0.7699026741943047,
        -0.5873179542866175,
        -0.3678314989981802,
        -0.1252334085114689,
    ],
    &[
        -0.9931285991850949,
        -0.9639719272779138,
        -0.9122344282513258,
        -0.8391169718222188,
        -0.7463319064601508,
        -0.636053680726515,
        -0.5108670019508271,
        -0.37370608871541955,
        -0.2277858511416451,
        -0.07652652113349734,
    ],
];

const GL_W: [&[f64]; 3] = [
    &[0.17132449237916975, 0.36076157304813894, 0.46791393457269137],
    &[
        0.04717533638651202,
        0.10693932599531888,
        0.1600783285433461,
        0.20316742672306565,
        0.23349253653835464,
        0.2491470458134027,
    ],
    &[
        0.017614007139153273,
        0.04060142980038622,
        0.06267204833410944,
        0.08327674157670467,
        0.10193011981724026,
        0.11819453196151825,
        0.13168863844917653,
        0.14209610931838187,
        0.14917298647260366,
        0.15275338713072578,
    ],
];

/// P[X > h, Y > k] for a standard bivariate normal with correlation `r`.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return norm_sf(k);
    }
    if k == f64::NEG_INFINITY {
        return norm_sf(h);
    }
    let ng = if r.abs() < 0.3 {
        0
    } else if r.abs() < 0.75 {
        1
    } else {
        2
    };
    let (xs_gl, ws_gl) = (GL_X[ng], GL_W[ng]);
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in xs_gl.iter().zip(ws_gl) {
            for sgn in [1.0, -1.0] {
                let sn = (asr * (sgn * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (bvn * asr / (4.0 * PI) + norm_sf(h) * norm_sf(k)).clamp(0.0, 1.0);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * (2.0 * PI).sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (x, w) in xs_gl.iter().zip(ws_gl) {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = as_ * (1.0 - x).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * (-(bs / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / (2.0 * PI);
    }
    if r > 0.0 {
        bvn += norm_cdf(-h.max(k));
    } else {
        bvn = -bvn + (norm_cdf(-h) - norm_cdf(-k)).max(0.0);
    }
    bvn.clamp(0.0, 1.0)
}

/// P[X ≤ h, Y ≤ k] for a standard bivariate normal with correlation `r`.
pub fn bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    bvn_upper(-h, -k, r)
}

fn tvn_cdf(h: [f64; 3], r12: f64, r13: f64, r23: f64) -> Result<f64> {
    let s12 = (1.0 - r12 * r12).sqrt();
    let s13 = (1.0 - r13 * r13).sqrt();
    let rho = ((r23 - r12 * r13) / (s12 * s13)).clamp(-1.0, 1.0);
    let cfg = QuadratureConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-15,
        max_subdivisions: 200,
    };
    let (v, _) = integrate_pieces(
        |x| norm_pdf(x) * bvn_cdf((h[1] - r12 * x) / s12, (h[2] - r13 * x) / s13, rho),
        f64::NEG_INFINITY,
        h[0].min(40.0),
        &[],
        &cfg,
    )?;
    Ok(v.clamp(0.0, 1.0))
}

fn correlation(cov: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sd: Vec<f64> = (0..cov.len()).map(|i| cov[i][i].sqrt()).collect();
    let corr = (0..cov.len())
        .map(|i| (0..cov.len()).map(|j| cov[i][j] / (sd[i] * sd[j])).collect())
        .collect();
    (sd, corr)
}

/// P[N ≤ upper] for N ~ N(0, cov). Infinite bounds are marginalized out.
pub fn mvn_cdf(upper: &[f64], cov: &[Vec<f64>]) -> Result<f64> {
    if upper.contains(&f64::NEG_INFINITY) {
        return Ok(0.0);
    }
    let keep: Vec<usize> = (0..upper.len()).filter(|&i| upper[i] < f64::INFINITY).collect();
    if keep.len() < upper.len() {
        let u: Vec<f64> = keep.iter().map(|&i| upper[i]).collect();
        return mvn_cdf(&u, &submatrix(cov, &keep, &keep));
    }
    let (sd, corr) = correlation(cov);
    let h: Vec<f64> = upper.iter().zip(&sd).map(|(u, s)| u / s).collect();
    let near_singular = |r: f64| 1.0 - r.abs() < 1e-10;
    match h.len() {
        0 => Ok(1.0),
        1 => Ok(norm_cdf(h[0])),
        2 => Ok(bvn_cdf(h[0], h[1], corr[0][1])),
        3 if !near_singular(corr[0][1]) && !near_singular(corr[0][2]) => {
            tvn_cdf([h[0], h[1], h[2]], corr[0][1], corr[0][2], corr[1][2])
        }
        _ => {
            let lower = vec![f64::NEG_INFINITY; h.len()];
            lattice_box(&lower, &h, &corr)
        }
    }
}

/// P[N ∈ (lower, upper]] for N ~ N(0, cov).
pub fn mvn_box(lower: &[f64], upper: &[f64], cov: &[Vec<f64>]) -> Result<f64> {
    let d = lower.len();
    if (0..d).any(|i| upper[i] <= lower[i]) {
        return Ok(0.0);
    }
    let finite_lower: Vec<usize> = (0..d).filter(|&i| lower[i] > f64::NEG_INFINITY).collect();
    if finite_lower.is_empty() {
        return mvn_cdf(upper, cov);
    }
    if d <= 3 {
        let m = finite_lower.len();
        let mut total = 0.0;
        for mask in 0..(1usize << m) {
            let mut point = upper.to_vec();
            let mut sign = 1.0;
            for (b, &i) in finite_lower.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    point[i] = lower[i];
                    sign = -sign;
                }
            }
            total += sign * mvn_cdf(&point, cov)?;
        }
        return Ok(total.clamp(0.0, 1.0));
    }
    let (sd, corr) = correlation(cov);
    let lo: Vec<f64> = lower.iter().zip(&sd).map(|(u, s)| u / s).collect();
    let hi: Vec<f64> = upper.iter().zip(&sd).map(|(u, s)| u / s).collect();
    lattice_box(&lo, &hi, &corr)
}

/// P[N_j > x_j for some j] for N ~ N(0, cov), by inclusion–exclusion over upper orthants
/// so that small tail probabilities keep full relative accuracy.
pub fn mvn_sf_union(x: &[f64], cov: &[Vec<f64>]) -> Result<f64> {
    let d = x.len();
    if d > 3 {
        return Ok((1.0 - mvn_cdf(x, cov)?).clamp(0.0, 1.0));
    }
    let mut total = 0.0;
    for mask in 1..(1usize << d) {
        let idx: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let neg: Vec<f64> = idx.iter().map(|&i| -x[i]).collect();
        let p = mvn_cdf(&neg, &submatrix(cov, &idx, &idx))?;
        if idx.len() % 2 == 1 {
            total += p;
        } else {
            total -= p;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

const PRIMES: [f64; 24] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0, 59.0, 61.0,
    67.0, 71.0, 73.0, 79.0, 83.0, 89.0,
];

/// Genz separation of variables with a randomly shifted Richtmyer lattice; standardized
/// bounds and a correlation matrix. The random shifts are drawn from a fixed seed.
fn lattice_box(lower: &[f64], upper: &[f64], corr: &[Vec<f64>]) -> Result<f64> {
    let d = lower.len();
    let l = cholesky(corr)?;
    let shifts = 12;
    let points = 2048usize;
    let mut rng = ChaCha20Rng::seed_from_u64(0x6d76_6e5f_6c61_7474);
    let alphas: Vec<f64> = (0..d).map(|i| PRIMES[i % PRIMES.len()].sqrt().fract()).collect();
    let mut estimates = Vec::with_capacity(shifts);
    let mut y = vec![0.0; d];
    for _ in 0..shifts {
        let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let mut acc = 0.0;
        for k in 1..=points {
            let mut f = 1.0;
            for i in 0..d {
                let s: f64 = (0..i).map(|j| l[i][j] * y[j]).sum();
                let a = norm_cdf((lower[i] - s) / l[i][i]);
                let b = norm_cdf((upper[i] - s) / l[i][i]);
                f *= b - a;
                if f <= 0.0 {
                    f = 0.0;
                    break;
                }
                if i + 1 < d {
                    let u = (k as f64 * alphas[i] + shift[i]).fract();
                    let w = (2.0 * u - 1.0).abs();
                    y[i] = norm_quantile(a + w * (b - a)).clamp(-40.0, 40.0);
                }
            }
            acc += f;
        }
        estimates.push(acc / points as f64);
    }
    Ok((estimates.iter().sum::<f64>() / shifts as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    /// Independent oracle: P[X ≤ h, Y ≤ k] = ∫_{-∞}^h φ(x) Φ((k − r x)/√(1−r²)) dx.
    fn bvn_oracle(h: f64, k: f64, r: f64) -> f64 {
        let s = (1.0 - r * r).sqrt();
        let cfg = QuadratureConfig {
            rel_tol: 1e-13,
            abs_tol: 1e-16,
            max_subdivisions: 500,
        };
        integrate_pieces(|x| norm_pdf(x) * norm_cdf((k - r * x) / s), f64::NEG_INFINITY, h, &[], &cfg)
            .unwrap()
            .0
    }

    #[test]
    fn univariate_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((log_norm_cdf(-40.0) - (-804.6084420137539)).abs() < 1e-8);
        assert!((log_norm_cdf(-29.9) - norm_cdf(-29.9).ln()).abs() < 1e-9);
        assert!((norm_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn bivariate_against_oracle() {
        for &r in &[-0.99, -0.95, -0.8, -0.5, -0.1, 0.0, 0.2, 0.6, 0.9, 0.93, 0.999] {
            for &(h, k) in &[(0.0, 0.0), (1.0, -0.5), (-2.0, 1.5), (2.5, 2.0), (-1.0, -1.2)] {
                let got = bvn_cdf(h, k, r);
                let want = bvn_oracle(h, k, r);
                assert!((got - want).abs() < 1e-12, "r={r} h={h} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn orthant_formula() {
        let r: f64 = 0.4;
        let want = 0.25 + r.asin() / (2.0 * std::f64::consts::PI);
        assert!((bvn_cdf(0.0, 0.0, r) - want).abs() < 1e-15);
        let cov = vec![vec![1.0, 0.3, 0.2], vec![0.3, 1.0, 0.5], vec![0.2, 0.5, 1.0]];
        let pi = std::f64::consts::PI;
        let want3 = 0.125 + (0.3f64.asin() + 0.2f64.asin() + 0.5f64.asin()) / (4.0 * pi);
        assert!((mvn_cdf(&[0.0, 0.0, 0.0], &cov).unwrap() - want3).abs() < 1e-11);
    }

    #[test]
    fn lattice_matches_trivariate() {
        let cov = vec![vec![2.0, 0.3, 0.2], vec![0.3, 1.0, -0.4], vec![0.2, -0.4, 1.5]];
        let x = [0.4, -0.2, 1.1];
        let exact = mvn_cdf(&x, &cov).unwrap();
        let (sd, corr) = correlation(&cov);
        let h: Vec<f64> = x.iter().zip(&sd).map(|(a, s)| a / s).collect();
        let qmc = lattice_box(&[f64::NEG_INFINITY; 3], &h, &corr).unwrap();
        assert!((exact - qmc).abs() < 2e-5, "{exact} vs {qmc}");
    }

    #[test]
    fn union_survival_matches_complement() {
        let cov = vec![vec![1.0, 0.5], vec![0.5, 2.0]];
        let x = [0.3, -0.1];
        let a = mvn_sf_union(&x, &cov).unwrap();
        let b = 1.0 - mvn_cdf(&x, &cov).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn box_probability_by_quadrature() {
        let cov = vec![vec![1.0, 0.6], vec![0.6, 1.0]];
        let p = mvn_box(&[-0.5, 0.1], &[1.0, 2.0], &cov).unwrap();
        let s = 0.8f64;
        let cfg = QuadratureConfig::default();
        let (want, _) = integrate(
            |x| norm_pdf(x) * (norm_cdf((2.0 - 0.6 * x) / s) - norm_cdf((0.1 - 0.6 * x) / s)),
            -0.5,
            1.0,
            &cfg,
        )
        .unwrap();
        assert!((p - want).abs() < 1e-12);
    }
}
