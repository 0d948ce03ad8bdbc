use std::sync::Arc;

use mgpd::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn exp_r(sigma: &[f64], gamma: &[f64], scale: &[f64]) -> GpModel {
    GpModel::from_family(
        Representation::R,
        sigma.to_vec(),
        gamma.to_vec(),
        Family::IndepExponential { scale: scale.to_vec() },
    )
    .unwrap()
}

fn gev_of(model: &GpModel) -> GevModel {
    GevModel::from_generator(model.margins(), model.family().clone(), &cfg()).unwrap()
}

/// Logistic dependence with Fréchet margins shifted to `(−1, ∞)`.
fn logistic(a: f64) -> GevModel {
    let p = GevParams::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
    GevModel::from_evaluator(
        p,
        Arc::new(move |x: &[f64]| {
            let (y0, y1) = (x[0] + 1.0, x[1] + 1.0);
            if y0 <= 0.0 || y1 <= 0.0 {
                return 0.0;
            }
            (-(y0.powf(-1.0 / a) + y1.powf(-1.0 / a)).powf(a)).exp()
        }),
    )
    .unwrap()
}

/// `a_t x + b_t` in GEV coordinates: `σ = α − γμ` plays the role of the GP scale.
fn affine(p: &GevParams, t: f64, x: &[f64]) -> Vec<f64> {
    let m = p.gp_margins().unwrap();
    let (a, b) = max_stability_params(&m, t).unwrap();
    x.iter().zip(a.iter().zip(&b)).map(|(v, (a, b))| a * v + b).collect()
}

fn random_points(p: &GevParams, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..p.dim())
                .map(|j| {
                    let lo = p.eta(j).max(-2.0) + 0.05;
                    rng.gen_range(lo..lo + 4.0)
                })
                .collect()
        })
        .collect()
}

#[test]
fn max_stability_of_generated_gev() {
    let model = exp_r(&[1.0, 2.0], &[0.3, 0.1], &[1.0, 0.5]);
    let g = gev_of(&model);
    for t in [0.5, 2.0, 5.0] {
        for x in random_points(g.params(), 50, 1) {
            let lhs = g.cdf(&affine(g.params(), t, &x)).unwrap().powf(t);
            let rhs = g.cdf(&x).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "t={t} x={x:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn max_stability_of_explicit_gev() {
    let g = logistic(0.6);
    for t in [0.5, 2.0, 5.0] {
        for x in random_points(g.params(), 50, 2) {
            let lhs = g.cdf(&affine(g.params(), t, &x)).unwrap().powf(t);
            let rhs = g.cdf(&x).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "t={t} x={x:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn gp_cdf_from_gev_matches_model_cdf() {
    let river = GpModel::from_family(
        Representation::R,
        vec![1.0, 1.5],
        vec![0.5, 0.5],
        Family::RiverNetwork(River::new(vec![Some(1), None]).unwrap()),
    )
    .unwrap();
    let lognormal = GpModel::from_family(
        Representation::R,
        vec![1.0, 1.0],
        vec![0.3, 0.3],
        Family::LogNormalR(Gaussian::new(vec![0.0, 0.2], vec![vec![0.3, 0.1], vec![0.1, 0.2]]).unwrap()),
    )
    .unwrap();
    for model in [exp_r(&[1.0, 2.0], &[0.3, 0.6], &[1.0, 0.5]), river, lognormal] {
        let g = gev_of(&model);
        let m = model.margins();
        for i in 0..10 {
            for k in 0..10 {
                let x = [
                    (m.eta(0).max(-3.0) + 0.01).max(-3.0 + 0.6 * i as f64),
                    (m.eta(1).max(-3.0) + 0.01).max(-3.0 + 0.6 * k as f64),
                ];
                let want = cdf(&model, &x, &cfg()).unwrap();
                let got = gp_cdf_from_gev(&g, &x).unwrap();
                assert!((got - want).abs() < 1e-6, "{} at {x:?}: {got} vs {want}", model.family().kind());
            }
        }
    }
}

#[test]
fn associated_gp_is_invariant_under_powers() {
    let model = exp_r(&[1.0, 2.0], &[0.3, 0.1], &[1.0, 0.5]);
    for g in [gev_of(&model), logistic(0.5)] {
        for t in [0.5, 3.0] {
            let gt = g.powered(t).unwrap();
            for x in random_points(g.params(), 30, 3) {
                let a = gp_cdf_from_gev(&g, &x).unwrap();
                let b = gp_cdf_from_gev(&gt, &x).unwrap();
                assert!((a - b).abs() < 1e-10, "t={t} x={x:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn values_below_zero_follow_from_the_positive_orthant() {
    let model = exp_r(&[1.0, 2.0], &[0.3, 0.1], &[1.0, 0.5]);
    for g in [gev_of(&model), logistic(0.7)] {
        let p = g.params();
        let x: Vec<f64> = (0..2).map(|j| (p.eta(j) + 0.3).max(-0.5)).collect();
        assert!(x.iter().any(|v| *v < 0.0));
        // raise t until a_t x + b_t lands in the positive orthant
        let mut t = 2.0;
        while affine(p, t, &x).iter().any(|v| *v < 0.0) {
            t *= 2.0;
        }
        let y = affine(p, t, &x);
        let rebuilt = g.cdf(&y).unwrap().powf(t);
        let direct = g.cdf(&x).unwrap();
        assert!((rebuilt - direct).abs() < 1e-8, "{rebuilt} vs {direct}");
    }
}

#[test]
fn conditional_margins_are_gp() {
    let model = exp_r(&[1.0, 2.0], &[0.3, 0.6], &[1.0, 0.5]);
    let g = gev_of(&model);
    for j in 0..2 {
        for x in [0.1, 0.7, 2.0] {
            let want = conditional_margin_cdf(model.margins(), j, x).unwrap();
            let got = conditional_subset_cdf(&g, &[j], &[x]).unwrap();
            assert!((got - want).abs() < 1e-8, "component {j} at {x}: {got} vs {want}");
        }
    }
}
