use mgpd::quadrature::integrate_pieces;
use mgpd::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn gauss(mean: &[f64], cov: &[&[f64]]) -> Gaussian {
    Gaussian::new(mean.to_vec(), cov.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn models() -> Vec<GpModel> {
    vec![
        GpModel::from_family(
            Representation::R,
            vec![1.0, 2.0],
            vec![0.5, 0.5],
            Family::IndepExponential { scale: vec![1.0, 0.7] },
        )
        .unwrap(),
        GpModel::from_family(
            Representation::R,
            vec![1.0, 2.0],
            vec![0.3, 0.6],
            Family::IndepExponential { scale: vec![1.0, 0.7] },
        )
        .unwrap(),
        GpModel::from_family(
            Representation::T,
            vec![2.0, 0.5],
            vec![0.2, -0.1],
            Family::IndepGumbel {
                loc: vec![0.0, 0.4],
                scale: vec![1.0, 0.6],
                reversed: false,
            },
        )
        .unwrap(),
        GpModel::from_family(
            Representation::U,
            vec![1.0, 1.5],
            vec![0.1, 0.0],
            Family::MultivariateNormal(gauss(&[0.0, 0.3], &[&[1.0, 0.4], &[0.4, 0.8]])),
        )
        .unwrap(),
        GpModel::from_family(
            Representation::R,
            vec![1.0, 1.5],
            vec![0.5, 0.5],
            Family::RiverNetwork(River::new(vec![Some(1), None]).unwrap()),
        )
        .unwrap(),
        GpModel::from_family(
            Representation::R,
            vec![1.0, 1.5],
            vec![0.4, 0.3],
            Family::LogNormalR(gauss(&[0.0, 0.3], &[&[0.5, 0.2], &[0.2, 0.4]])),
        )
        .unwrap(),
    ]
}

/// `∫ f(y) dy` over the support of component `j`, up to `hi`.
fn integrate_component<F: FnMut(f64) -> f64>(model: &GpModel, j: usize, hi: f64, breaks: &[f64], f: F) -> f64 {
    let lo = model.margins().eta(j).max(-80.0);
    let hi = hi.min(model.margins().omega(j));
    let inside: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
    integrate_pieces(f, lo, hi, &inside, &cfg().with_rel_tol(1e-10)).unwrap().0
}

#[test]
fn censoring_integrates_the_density() {
    // river networks have no censored density
    for model in models().into_iter().filter(|m| !matches!(m.family(), Family::RiverNetwork(_))) {
        let ev = DensityEvaluator::new(&model, &cfg()).unwrap();
        for (x1, v) in [(0.7, 0.0), (0.7, -0.3), (2.5, -1.0)] {
            let want = integrate_component(&model, 1, v, &[0.0, x1], |y| ev.density(&[x1, y]).unwrap());
            let got = censored_density(&model, &[x1, v], &[1], &cfg()).unwrap();
            let rel = (got - want).abs() / want;
            assert!(rel < 1e-5, "{} at ({x1}, {v}): {got} vs {want}", model.family().kind());
        }
    }
}

#[test]
fn conditional_density_integrates_to_one() {
    for model in models().into_iter().filter(|m| m.representation() == Representation::R) {
        for x1 in [0.3, 1.5] {
            let total = integrate_component(&model, 1, f64::INFINITY, &[0.0, x1], |y| {
                conditional_density_given(&model, 0, x1, &[y], &cfg()).unwrap()
            });
            assert!((total - 1.0).abs() < 1e-6, "{} at {x1}: {total}", model.family().kind());
        }
    }
}

#[test]
fn evaluator_matches_free_functions() {
    for model in models() {
        let ev = DensityEvaluator::new(&model, &cfg()).unwrap();
        for x in [[0.5, 0.2], [-0.4, 1.1], [2.0, 3.0]] {
            let a = ev.density(&x).unwrap();
            let b = density(&model, &x, &cfg()).unwrap();
            assert_eq!(a, b);
            assert!((ev.log_density(&x).unwrap() - a.ln()).abs() < 1e-12);
        }
    }
}

#[test]
fn density_vanishes_off_the_support() {
    for model in models() {
        let ev = DensityEvaluator::new(&model, &cfg()).unwrap();
        assert_eq!(ev.density(&[-0.1, -0.2]).unwrap(), 0.0);
        assert_eq!(ev.density(&[0.0, 0.0]).unwrap(), 0.0);
        let m = model.margins();
        if m.eta(0).is_finite() {
            assert_eq!(ev.density(&[m.eta(0) - 0.1, 1.0]).unwrap(), 0.0);
        }
        if m.omega(1).is_finite() {
            assert_eq!(ev.density(&[1.0, m.omega(1) + 0.1]).unwrap(), 0.0);
        }
    }
}
