use mgpd::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn mvn_u(sigma: &[f64], gamma: &[f64]) -> GpModel {
    let g = Gaussian::new(vec![0.0, 0.4], vec![vec![1.0, 0.5], vec![0.5, 0.8]]).unwrap();
    GpModel::from_family(Representation::U, sigma.to_vec(), gamma.to_vec(), Family::MultivariateNormal(g)).unwrap()
}

fn sample(model: &GpModel, n: usize, seed: u64) -> Vec<Vec<f64>> {
    simulate(model, n, RandomStream::new(seed, 0), Method::Rejection, &cfg()).unwrap().rows
}

fn with_margins(model: &GpModel, sigma: Vec<f64>, gamma: Vec<f64>) -> GpModel {
    GpModel::new(
        model.representation(),
        MarginParams::new(sigma, gamma).unwrap(),
        model.generator().clone(),
    )
    .unwrap()
}

#[test]
fn loglik_is_the_sum_of_row_densities() {
    let model = mvn_u(&[1.0, 2.0], &[0.1, -0.1]);
    let rows = sample(&model, 200, 1);
    let data = ExceedanceData::new(rows.clone(), None).unwrap();
    let want: f64 = rows.iter().map(|r| log_density(&model, r, &cfg()).unwrap()).sum();
    let got = loglik(&model, &data, &cfg()).unwrap();
    assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");

    let v = [-0.5, 0.0];
    let data = ExceedanceData::new(rows.clone(), Some(v.to_vec())).unwrap();
    let want: f64 = rows
        .iter()
        .map(|r| {
            let cens: Vec<usize> = (0..2).filter(|&j| r[j] <= v[j]).collect();
            let point: Vec<f64> = (0..2).map(|j| if r[j] <= v[j] { v[j] } else { r[j] }).collect();
            censored_density(&model, &point, &cens, &cfg()).unwrap().ln()
        })
        .sum();
    let got = loglik(&model, &data, &cfg()).unwrap();
    assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
}

#[test]
fn data_outside_the_support_has_zero_likelihood() {
    let model = mvn_u(&[1.0, 2.0], &[-0.5, 0.0]);
    // upper endpoint of the first margin is σ/|γ| = 2
    let data = ExceedanceData::new(vec![vec![0.5, 0.5], vec![2.5, 0.1]], None).unwrap();
    assert_eq!(loglik(&model, &data, &cfg()).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn wrong_dimension_is_a_data_error() {
    let model = mvn_u(&[1.0, 2.0], &[0.0, 0.0]);
    let data = ExceedanceData::new(vec![vec![0.5, 0.5, 0.5]], None).unwrap();
    assert!(matches!(loglik(&model, &data, &cfg()), Err(Error::Data(_))));
}

#[test]
fn gradient_vanishes_at_the_maximum() {
    let truth = mvn_u(&[1.0, 2.0], &[0.1, -0.1]);
    let rows = sample(&truth, 1000, 2);
    let data = ExceedanceData::new(rows, None).unwrap();
    let mut template = FitTemplate::all_free(&truth);
    template.free.generator.iter_mut().for_each(|g| *g = false);
    let opts = FitOptions {
        starts: 1,
        standard_errors: false,
        ..FitOptions::default()
    };
    let r = fit(&template, &data, &opts).unwrap();
    assert!(r.converged);
    let n = data.len() as f64;
    let m = r.model.margins().clone();
    let ll = |sigma: Vec<f64>, gamma: Vec<f64>| loglik(&with_margins(&truth, sigma, gamma), &data, &cfg()).unwrap();
    let h = 1e-5;
    let mut grad = Vec::new();
    for j in 0..2 {
        let bump = |s: f64| {
            let mut v = m.sigma.clone();
            v[j] *= (s * h).exp();
            v
        };
        grad.push((ll(bump(1.0), m.gamma.clone()) - ll(bump(-1.0), m.gamma.clone())) / (2.0 * h));
        let bump = |s: f64| {
            let mut v = m.gamma.clone();
            v[j] += s * h;
            v
        };
        grad.push((ll(m.sigma.clone(), bump(1.0)) - ll(m.sigma.clone(), bump(-1.0))) / (2.0 * h));
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / n;
    assert!(norm < 1e-3, "scaled gradient {grad:?} / {n}");
    assert!(r.loglik >= loglik(&truth, &data, &cfg()).unwrap());
}

#[test]
fn shared_shape_stays_shared() {
    let truth = mvn_u(&[1.0, 2.0], &[0.2, 0.2]);
    let data = ExceedanceData::new(sample(&truth, 300, 3), None).unwrap();
    let template = FitTemplate::all_free(&truth).with_shared_gamma();
    let opts = FitOptions {
        starts: 1,
        xtol: 1e-6,
        ..FitOptions::default()
    };
    let r = fit(&template, &data, &opts).unwrap();
    let g = &r.model.margins().gamma;
    assert_eq!(g[0], g[1]);
    let named: Vec<&str> = r.parameters.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(named.iter().filter(|n| n.starts_with("gamma")).count(), 1, "{named:?}");
    assert!(r.stderr.is_some());
}

#[test]
fn fit_is_deterministic() {
    let truth = mvn_u(&[1.0, 2.0], &[0.1, 0.0]);
    let data = ExceedanceData::new(sample(&truth, 200, 4), None).unwrap();
    let opts = FitOptions {
        starts: 2,
        xtol: 1e-6,
        standard_errors: false,
        ..FitOptions::default()
    };
    let a = fit(&FitTemplate::all_free(&truth), &data, &opts).unwrap();
    let b = fit(&FitTemplate::all_free(&truth), &data, &opts).unwrap();
    assert_eq!(a, b);
}
