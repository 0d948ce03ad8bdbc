use criterion::{black_box, criterion_group, criterion_main, Criterion};
use mgpd::mvn::mvn_cdf;
use mgpd::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn gumbel_t() -> GpModel {
    GpModel::from_family(
        Representation::T,
        vec![2.0, 0.5, 1.0],
        vec![0.2, 0.1, -0.1],
        Family::IndepGumbel {
            loc: vec![0.0, 0.3, -0.2],
            scale: vec![1.0, 0.8, 1.2],
            reversed: false,
        },
    )
    .unwrap()
}

fn mvn_u() -> GpModel {
    let g = Gaussian::new(vec![0.0, 0.4], vec![vec![1.0, 0.5], vec![0.5, 0.8]]).unwrap();
    GpModel::from_family(Representation::U, vec![1.0, 2.0], vec![0.1, -0.1], Family::MultivariateNormal(g)).unwrap()
}

fn lognormal_r() -> GpModel {
    let g = Gaussian::new(vec![0.0, 0.3], vec![vec![1.0, 0.5], vec![0.5, 1.5]]).unwrap();
    GpModel::from_family(Representation::R, vec![1.0, 1.5], vec![0.2, 0.4], Family::LogNormalR(g)).unwrap()
}

fn densities(c: &mut Criterion) {
    let mut g = c.benchmark_group("density");
    for (name, model, x) in [
        ("gumbel-T d=3", gumbel_t(), vec![0.5, -0.2, 1.0]),
        ("mvn-U d=2", mvn_u(), vec![0.5, -0.2]),
        ("lognormal-R d=2", lognormal_r(), vec![0.5, -0.2]),
    ] {
        let ev = DensityEvaluator::new(&model, &cfg()).unwrap();
        g.bench_function(name, |b| b.iter(|| ev.density(black_box(&x)).unwrap()));
    }
    let ev = DensityEvaluator::new(&gumbel_t(), &cfg()).unwrap();
    g.bench_function("gumbel-T d=3 censored", |b| {
        b.iter(|| ev.censored_density(black_box(&[-0.3, -0.3, 1.0]), &[true, true, false]).unwrap())
    });
    g.finish();
}

fn cdfs(c: &mut Criterion) {
    let mut g = c.benchmark_group("cdf");
    g.bench_function("mvn-U d=2", |b| b.iter(|| cdf(&mvn_u(), black_box(&[0.5, 1.0]), &cfg()).unwrap()));
    g.bench_function("lognormal-R d=2", |b| {
        b.iter(|| cdf(&lognormal_r(), black_box(&[0.5, 1.0]), &cfg()).unwrap())
    });
    let cov = vec![vec![1.0, 0.5, 0.2], vec![0.5, 1.0, 0.3], vec![0.2, 0.3, 1.0]];
    g.bench_function("mvn d=3", |b| b.iter(|| mvn_cdf(black_box(&[0.5, 0.1, -0.4]), &cov).unwrap()));
    g.finish();
}

fn likelihood(c: &mut Criterion) {
    let model = gumbel_t();
    let rows = sample_method1(&model, 1000, RandomStream::new(1, 0)).unwrap().rows;
    let plain = ExceedanceData::new(rows.clone(), None).unwrap();
    let censored = ExceedanceData::new(rows, Some(vec![-0.2; 3])).unwrap();
    let mut g = c.benchmark_group("loglik n=1000");
    g.bench_function("uncensored", |b| b.iter(|| loglik(&model, black_box(&plain), &cfg()).unwrap()));
    g.bench_function("censored", |b| b.iter(|| loglik(&model, black_box(&censored), &cfg()).unwrap()));
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate n=10000");
    g.sample_size(20);
    let t = gumbel_t();
    g.bench_function("method 1", |b| b.iter(|| sample_method1(&t, 10_000, RandomStream::new(2, 0)).unwrap()));
    let u = mvn_u();
    g.bench_function("method 3", |b| {
        b.iter(|| simulate(&u, 10_000, RandomStream::new(2, 0), Method::Metropolis, &cfg()).unwrap())
    });
    let r = GpModel::from_family(
        Representation::R,
        vec![1.0, 2.0],
        vec![0.4, 0.7],
        Family::IndepExponential { scale: vec![1.0, 0.5] },
    )
    .unwrap();
    g.bench_function("method 4", |b| {
        b.iter(|| simulate(&r, 10_000, RandomStream::new(2, 0), Method::Truncated, &cfg()).unwrap())
    });
    g.finish();
}

criterion_group!(kernels, densities, cdfs, likelihood, sampling);
criterion_main!(kernels);
