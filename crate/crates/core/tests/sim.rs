use mgpd::diagnostics::ecdf_distance;
use mgpd::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn mvn_u() -> GpModel {
    let g = Gaussian::new(vec![0.0, 0.4], vec![vec![1.0, 0.5], vec![0.5, 0.8]]).unwrap();
    GpModel::from_family(Representation::U, vec![1.0, 2.0], vec![0.1, -0.1], Family::MultivariateNormal(g)).unwrap()
}

fn atoms_u() -> GpModel {
    GpModel::from_family(
        Representation::U,
        vec![1.0, 2.0],
        vec![0.2, 0.1],
        Family::Mixture {
            weights: vec![0.3, 0.7],
            components: vec![
                Family::PointMass { point: vec![0.0, -0.5] },
                Family::PointMass { point: vec![-1.0, 0.4] },
            ],
        },
    )
    .unwrap()
}

/// Ecdf gap between two samples at a set of grid points.
fn two_sample_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let grid: Vec<Vec<f64>> = (0..15)
        .flat_map(|i| (0..15).map(move |k| vec![-1.5 + 0.35 * i as f64, -1.5 + 0.35 * k as f64]))
        .collect();
    let n = b.len() as f64;
    let fb: Vec<f64> = grid
        .iter()
        .map(|p| b.iter().filter(|r| r.iter().zip(p).all(|(x, y)| x <= y)).count() as f64 / n)
        .collect();
    ecdf_distance(a, &grid, &fb)
}

#[test]
fn every_method_is_reproducible() {
    let t = convert(&atoms_u(), Representation::T).unwrap();
    let r = convert(&atoms_u(), Representation::R).unwrap();
    let cases = [
        (t, Method::Spectral),
        (mvn_u(), Method::Rejection),
        (mvn_u(), Method::Metropolis),
        (r, Method::Truncated),
    ];
    for (model, method) in &cases {
        let a = simulate(model, 2000, RandomStream::new(17, 3), *method, &cfg()).unwrap();
        let b = simulate(model, 2000, RandomStream::new(17, 3), *method, &cfg()).unwrap();
        let c = simulate(model, 2000, RandomStream::new(17, 4), *method, &cfg()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap(), "{method:?}");
        assert_ne!(a.rows, c.rows, "{method:?}");
        assert_eq!(a.diagnostics.method, method.number());
        assert_eq!(a.rows.len(), 2000);
    }
}

#[test]
fn spectral_and_truncated_samplers_agree() {
    let n = 100_000;
    let t = convert(&atoms_u(), Representation::T).unwrap();
    let r = convert(&atoms_u(), Representation::R).unwrap();
    let a = simulate(&t, n, RandomStream::new(1, 0), Method::Spectral, &cfg()).unwrap();
    let b = simulate(&r, n, RandomStream::new(1, 1), Method::Truncated, &cfg()).unwrap();
    let gap = two_sample_gap(&a.rows, &b.rows);
    assert!(gap < 0.03, "gap {gap}");
}

#[test]
fn rejection_and_metropolis_agree() {
    let n = 100_000;
    let a = simulate(&mvn_u(), n, RandomStream::new(2, 0), Method::Rejection, &cfg()).unwrap();
    let b = simulate(&mvn_u(), n, RandomStream::new(2, 1), Method::Metropolis, &cfg()).unwrap();
    let gap = two_sample_gap(&a.rows, &b.rows);
    assert!(gap < 0.03, "gap {gap}");
    assert!(b.diagnostics.effective_sample_size.unwrap() > 0.0);
    assert!(a.diagnostics.acceptance_rate > 0.0 && a.diagnostics.acceptance_rate <= 1.0);
}

#[test]
fn methods_that_need_another_form_are_refused() {
    let t = convert(&atoms_u(), Representation::T).unwrap();
    assert!(simulate(&mvn_u(), 10, RandomStream::new(0, 0), Method::Spectral, &cfg()).is_err());
    assert!(simulate(&t, 10, RandomStream::new(0, 0), Method::Rejection, &cfg()).is_err());
    assert!(Method::from_number(5).is_err());
    for k in 1..=4 {
        assert_eq!(Method::from_number(k).unwrap().number(), k);
    }
}

#[test]
fn point_process_exceedances_follow_the_model() {
    let r = convert(&atoms_u(), Representation::R).unwrap();
    let mut rows = Vec::new();
    let mut i = 0;
    while rows.len() < 20_000 {
        let p = sample_point_process(r.family(), r.margins(), 20.0, RandomStream::new(5, i)).unwrap();
        rows.extend(p.exceedances());
        i += 1;
    }
    let direct = simulate(&r, 50_000, RandomStream::new(6, 0), Method::Truncated, &cfg()).unwrap();
    let gap = two_sample_gap(&rows, &direct.rows);
    assert!(gap < 0.03, "gap {gap}");
}
