use mgpd::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn halfspace(weights: &[f64], level: f64) -> EventSpec {
    EventSpec::HalfSpace {
        weights: weights.to_vec(),
        level,
    }
}

fn gumbel_t(sigma: &[f64], gamma: f64) -> GpModel {
    let d = sigma.len();
    GpModel::from_family(
        Representation::T,
        sigma.to_vec(),
        vec![gamma; d],
        Family::IndepGumbel {
            loc: (0..d).map(|j| 0.3 * j as f64).collect(),
            scale: vec![1.0; d],
            reversed: false,
        },
    )
    .unwrap()
}

#[test]
fn weighted_sums_are_gp_in_simulation() {
    let n = 1_000_000;
    for (k, (model, a)) in [
        (gumbel_t(&[2.0, 0.5, 1.0], 0.2), vec![1.0, 2.0, 0.5]),
        (gumbel_t(&[1.0, 1.5], -0.2), vec![0.3, 1.0]),
    ]
    .into_iter()
    .enumerate()
    {
        let s = sample_method1(&model, n, RandomStream::new(7, k as u64)).unwrap();
        let sums: Vec<f64> = s
            .rows
            .iter()
            .map(|r| r.iter().zip(&a).map(|(x, w)| x * w).sum::<f64>())
            .filter(|v| *v > 0.0)
            .collect();
        let ks = ks_one_sample(&sums, |v| 1.0 - weighted_sum_survival(model.margins(), &a, v).unwrap()).unwrap();
        assert!(ks.statistic < 0.01, "model {k}: {ks:?}");
    }
}

#[test]
fn river_sum_closed_form() {
    let (sigma, gamma) = ([1.0, 1.5], 0.5);
    let model = GpModel::from_family(
        Representation::R,
        sigma.to_vec(),
        vec![gamma; 2],
        Family::RiverNetwork(River::new(vec![Some(1), None]).unwrap()),
    )
    .unwrap();
    let c1 = prob_event(&model, &halfspace(&[1.0, 1.0], 0.0), ProbMethod::Quadrature, &cfg())
        .unwrap()
        .estimate;
    assert!(c1 > 0.0 && c1 < 1.0);
    let s = simulate(&model, 100_000, RandomStream::new(11, 0), Method::Truncated, &cfg()).unwrap();
    let n = s.rows.len() as f64;
    for level in [0.0, 1.0, 5.0] {
        let closed = c1 * (1.0 + gamma * level / (sigma[0] + sigma[1])).powf(-1.0 / gamma);
        let quad = prob_event(&model, &halfspace(&[1.0, 1.0], level), ProbMethod::Quadrature, &cfg()).unwrap();
        assert!((quad.estimate - closed).abs() < 1e-8, "s={level}: {} vs {closed}", quad.estimate);
        let hits = s.rows.iter().filter(|r| r[0] + r[1] > level).count() as f64 / n;
        let se = (closed * (1.0 - closed) / n).sqrt();
        assert!((hits - closed).abs() < 3.0 * se, "s={level}: {hits} vs {closed} ± {se}");
    }
}

#[test]
fn sums_of_lines_through_minus_infinity_never_exceed() {
    // mass on the two half-axes {x2 = -inf} and {x1 = -inf}: a sum is never positive
    let model = GpModel::from_family(
        Representation::T,
        vec![1.0, 1.0],
        vec![0.0, 0.0],
        Family::Mixture {
            weights: vec![0.5, 0.5],
            components: vec![
                Family::PointMass {
                    point: vec![0.0, f64::NEG_INFINITY],
                },
                Family::PointMass {
                    point: vec![f64::NEG_INFINITY, 0.0],
                },
            ],
        },
    )
    .unwrap();
    let method = ProbMethod::MonteCarlo {
        n: 20_000,
        stream: RandomStream::new(3, 0),
    };
    let p = prob_event(&model, &halfspace(&[1.0, 1.0], 0.0), method, &cfg()).unwrap();
    assert_eq!(p.estimate, 0.0);
    assert_eq!(p.n, Some(20_000));
    // each coordinate alone is still a standard exponential excess half of the time
    let p = prob_event(&model, &halfspace(&[1.0, 0.0], 1.0), method, &cfg()).unwrap();
    let want = 0.5 * (-1f64).exp();
    assert!((p.estimate - want).abs() < 4.0 * p.std_error, "{p:?}");
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    let model = gumbel_t(&[2.0, 0.5, 1.0], 0.1);
    let exp_r = GpModel::from_family(
        Representation::R,
        vec![1.0, 2.0, 0.5],
        vec![0.4, 0.7, 0.5],
        Family::IndepExponential { scale: vec![1.0, 0.5, 2.0] },
    )
    .unwrap();
    let cases = [
        (
            &model,
            EventSpec::Box {
                lower: vec![0.0, f64::NEG_INFINITY, -0.5],
                upper: vec![2.0, 1.0, f64::INFINITY],
            },
        ),
        (&model, EventSpec::lower_orthant(vec![1.0, 0.5, 0.8])),
        (&exp_r, halfspace(&[1.0, 1.0, 1.0], 2.0)),
        (&exp_r, halfspace(&[0.5, 0.0, 2.0], 0.5)),
    ];
    for (k, (m, ev)) in cases.iter().enumerate() {
        let q = prob_event(m, ev, ProbMethod::Quadrature, &cfg()).unwrap();
        let method = ProbMethod::MonteCarlo {
            n: 200_000,
            stream: RandomStream::new(5, k as u64),
        };
        let mc = prob_event(m, ev, method, &cfg()).unwrap();
        assert!((q.estimate - mc.estimate).abs() < 4.0 * mc.std_error, "event {k}: {q:?} vs {mc:?}");
    }
    let p = prob_event(&model, &EventSpec::Exceedance, ProbMethod::Quadrature, &cfg()).unwrap();
    assert!((p.estimate - 1.0).abs() < 1e-12);
}

#[test]
fn predicates_run_by_simulation() {
    let model = gumbel_t(&[1.0, 1.0], 0.0);
    let ev = EventSpec::predicate(|x| x[0] > 0.0 && x[1] > 0.0);
    assert!(prob_event(&model, &ev, ProbMethod::Quadrature, &cfg()).is_err());
    let method = ProbMethod::MonteCarlo {
        n: 100_000,
        stream: RandomStream::new(9, 0),
    };
    let m = prob_event(&model, &ev, method, &cfg()).unwrap();
    let both = EventSpec::Box {
        lower: vec![0.0, 0.0],
        upper: vec![f64::INFINITY, f64::INFINITY],
    };
    let q = prob_event(&model, &both, ProbMethod::Quadrature, &cfg()).unwrap();
    assert!((q.estimate - m.estimate).abs() < 4.0 * m.std_error, "{q:?} vs {m:?}");
}
