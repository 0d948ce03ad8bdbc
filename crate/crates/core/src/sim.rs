//! Exact and approximate samplers for GP models and the underlying Poisson point process.
//!
//! Work is split into fixed-size chunks, each drawing from its own ChaCha20 substream, so
//! the output depends only on the seed and stream id and not on the number of threads.

use log::warn;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp1, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Family, Role};
use crate::integrals::{self, Line};
use crate::model::{is_zero_shape, GpModel, MarginParams};
use crate::quadrature::{integrate_log, QuadratureConfig};

const CHUNK: usize = 1024;

/// Reproducible source of randomness: a seed plus an independent stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> RandomStream {
        RandomStream { seed, stream }
    }

    /// Generator for sub-stream `index` of this stream.
    pub fn rng(&self, index: u64) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..].copy_from_slice(b"mgpd-sim");
        ChaCha20Rng::from_seed(key)
    }
}

/// Sampled excesses with run statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub rows: Vec<Vec<f64>>,
    pub diagnostics: SimDiagnostics,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimDiagnostics {
    pub method: u8,
    /// Proposals drawn (rejection methods) or chain steps (Metropolis–Hastings).
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// Effective sample size of the chain (Metropolis–Hastings only).
    pub effective_sample_size: Option<f64>,
    /// Truncation level of the arrival process (method 4 only).
    pub truncation: Option<f64>,
}

fn chunks(n: usize) -> Vec<(u64, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(n - c * CHUNK)))
        .collect()
}

fn destandardize_row(m: &MarginParams, z: &mut [f64]) {
    for (j, v) in z.iter_mut().enumerate() {
        *v = m.destd_one(j, *v);
    }
}

/// Scales large enough to overflow on the data scale are reported rather than written as `inf`.
fn check_overflow(rows: &[Vec<f64>]) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if let Some(j) = r.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Overflow(format!("sample {i} is not finite in component {j}")));
        }
    }
    Ok(())
}

/// `E + T − max_j T_j` mapped to the data scale.
fn spectral_row(m: &MarginParams, t: &mut [f64], e: f64) {
    let top = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in t.iter_mut() {
        *v = e + (*v - top);
    }
    destandardize_row(m, t);
}

fn require_role(model: &GpModel, role: Role, method: u8) -> Result<()> {
    if model.generator().role != role {
        return Err(Error::Config(format!(
            "method {method} needs a model with a role-{role:?} generator, got representation {}",
            model.representation()
        )));
    }
    Ok(())
}

/// Method 1: exact draws from an (S)/(T) model.
pub fn sample_method1(model: &GpModel, n: usize, stream: RandomStream) -> Result<Samples> {
    require_role(model, Role::T, 1)?;
    let d = model.dim();
    let fam = model.family();
    let m = model.margins();
    let rows: Vec<Vec<f64>> = chunks(n)
        .into_par_iter()
        .flat_map_iter(|(c, len)| {
            let mut rng = stream.rng(c);
            (0..len)
                .map(|_| {
                    let mut t = vec![0.0; d];
                    fam.sample_into(&mut rng, &mut t);
                    let e: f64 = rng.sample(Exp1);
                    spectral_row(m, &mut t, e);
                    t
                })
                .collect::<Vec<_>>()
        })
        .collect();
    check_overflow(&rows)?;
    Ok(Samples {
        diagnostics: SimDiagnostics {
            method: 1,
            proposals: n as u64,
            accepted: n as u64,
            acceptance_rate: 1.0,
            ..Default::default()
        },
        rows,
    })
}

/// Proposal law for method 2.
pub trait Envelope: Sync {
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);
    /// `log φ(u)`.
    fn log_density(&self, u: &[f64]) -> f64;
    /// `log K` with `f_{T₀} ≤ K φ`.
    fn log_k(&self) -> f64;
}

/// The mixture over `k` of the `e^{u_k}`-tilted generator laws. Since
/// `e^{max u} ≤ Σ_k e^{u_k}` it dominates the tilted target with `K = Σ_k E[e^{U_k}] / E[e^{max U}]`.
#[derive(Clone, Debug)]
pub struct TiltEnvelope {
    family: Family,
    /// `(component, coordinate, log E[e^{U_k}] + log weight)`
    pieces: Vec<(usize, usize, f64)>,
    log_total: f64,
    log_k: f64,
}

impl TiltEnvelope {
    pub fn new(model: &GpModel, cfg: &QuadratureConfig) -> Result<TiltEnvelope> {
        require_role(model, Role::U, 2)?;
        let fam = model.family().clone();
        if !fam.has_density() {
            return Err(Error::UnsupportedModel("method 2 needs a generator density".into()));
        }
        let comps: Vec<(f64, &Family)> = match &fam {
            Family::Mixture { weights, components } => weights.iter().copied().zip(components.iter()).collect(),
            f => vec![(1.0, f)],
        };
        let mut pieces = Vec::new();
        for (i, (w, c)) in comps.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            for k in 0..c.dim() {
                let lm = log_exp_moment(c, k)?;
                pieces.push((i, k, w.ln() + lm));
            }
        }
        let top = pieces.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
        let log_total = top + pieces.iter().map(|p| (p.2 - top).exp()).sum::<f64>().ln();
        let zero = vec![0.0; model.dim()];
        let norm = integrals::lambda(&fam, &Line::new(model.margins(), Role::U, &zero), cfg)?;
        Ok(TiltEnvelope {
            family: fam,
            pieces,
            log_total,
            log_k: log_total - norm.ln(),
        })
    }

    fn component(&self, i: usize) -> &Family {
        match &self.family {
            Family::Mixture { components, .. } => &components[i],
            f => f,
        }
    }
}

/// `log E[e^{U_k}]`.
fn log_exp_moment(fam: &Family, k: usize) -> Result<f64> {
    let v = match fam {
        Family::IndepGumbel { loc, scale, reversed } => {
            let b = scale[k];
            if *reversed {
                loc[k] + statrs::function::gamma::ln_gamma(1.0 + b)
            } else if b < 1.0 {
                loc[k] + statrs::function::gamma::ln_gamma(1.0 - b)
            } else {
                f64::INFINITY
            }
        }
        Family::IndepExponential { scale } => {
            if scale[k] < 1.0 {
                -(1.0 - scale[k]).ln()
            } else {
                f64::INFINITY
            }
        }
        Family::MultivariateNormal(g) => g.mean()[k] + 0.5 * g.cov()[k][k],
        _ => {
            return Err(Error::UnsupportedModel(format!(
                "no built-in envelope for {}",
                fam.kind()
            )))
        }
    };
    if !v.is_finite() {
        return Err(Error::Model("E[exp(U_k)] is infinite".into()));
    }
    Ok(v)
}

impl Envelope for TiltEnvelope {
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = self.pieces[self.pieces.len() - 1];
        for p in &self.pieces {
            acc += (p.2 - self.log_total).exp();
            if u < acc {
                pick = *p;
                break;
            }
        }
        let (i, k, _) = pick;
        let comp = self.component(i);
        match comp {
            Family::MultivariateNormal(g) => {
                g.sample_into(rng, out);
                for (j, o) in out.iter_mut().enumerate() {
                    *o += g.cov()[j][k];
                }
            }
            _ => {
                comp.sample_into(rng, out);
                out[k] = match comp {
                    Family::IndepGumbel { loc, scale, reversed } => {
                        let b = scale[k];
                        let shape = if *reversed { 1.0 + b } else { 1.0 - b };
                        let y: f64 = rng.sample(Gamma::new(shape, 1.0).expect("positive shape"));
                        if *reversed {
                            loc[k] + b * y.ln()
                        } else {
                            loc[k] - b * y.ln()
                        }
                    }
                    Family::IndepExponential { scale } => {
                        let e: f64 = rng.sample(Exp1);
                        e * scale[k] / (1.0 - scale[k])
                    }
                    _ => unreachable!("checked at construction"),
                };
            }
        }
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        let top = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + u.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        lse + self.family.log_pdf(u).unwrap_or(f64::NEG_INFINITY) - self.log_total
    }

    fn log_k(&self) -> f64 {
        self.log_k
    }
}

/// Method 2: rejection sampling of the tilted generator, then method 1.
pub fn sample_method2(
    model: &GpModel,
    n: usize,
    stream: RandomStream,
    envelope: &dyn Envelope,
    cfg: &QuadratureConfig,
) -> Result<Samples> {
    require_role(model, Role::U, 2)?;
    let fam = model.family();
    if !fam.has_density() {
        return Err(Error::UnsupportedModel("method 2 needs a generator density".into()));
    }
    let d = model.dim();
    let m = model.margins();
    let zero = vec![0.0; d];
    let log_norm = integrals::lambda(fam, &Line::new(m, Role::U, &zero), cfg)?.ln();
    let log_k = envelope.log_k();
    let results: Vec<Result<(Vec<Vec<f64>>, u64)>> = chunks(n)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream.rng(c);
            let mut rows = Vec::with_capacity(len);
            let mut proposals = 0u64;
            let mut u = vec![0.0; d];
            while rows.len() < len {
                envelope.sample(&mut rng, &mut u);
                proposals += 1;
                let top = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let log_ratio = top + fam.log_pdf(&u)? - log_norm - log_k - envelope.log_density(&u);
                if log_ratio > (1e-12f64).ln_1p() {
                    return Err(Error::EnvelopeViolation {
                        witness: u.clone(),
                        ratio: log_ratio.exp(),
                    });
                }
                let v: f64 = rng.gen();
                if v.ln() < log_ratio {
                    let mut t = u.clone();
                    let e: f64 = rng.sample(Exp1);
                    spectral_row(m, &mut t, e);
                    rows.push(t);
                }
            }
            Ok((rows, proposals))
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut proposals = 0;
    for r in results {
        let (chunk, p) = r?;
        rows.extend(chunk);
        proposals += p;
    }
    check_overflow(&rows)?;
    Ok(Samples {
        diagnostics: SimDiagnostics {
            method: 2,
            proposals,
            accepted: n as u64,
            acceptance_rate: if proposals > 0 { n as f64 / proposals as f64 } else { 1.0 },
            ..Default::default()
        },
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            burn_in: 10_000,
            thin: 10,
        }
    }
}

/// Method 3: independence Metropolis–Hastings on the tilted generator with candidates from
/// the generator law itself, then method 1.
pub fn sample_method3(model: &GpModel, n: usize, stream: RandomStream, opts: McmcOptions) -> Result<Samples> {
    require_role(model, Role::U, 3)?;
    if opts.thin == 0 {
        return Err(Error::Config("thinning must be at least 1".into()));
    }
    let d = model.dim();
    let fam = model.family();
    let m = model.margins();
    let mut rng = stream.rng(0);
    let maxof = |u: &[f64]| u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cur = vec![0.0; d];
    fam.sample_into(&mut rng, &mut cur);
    let mut cur_max = maxof(&cur);
    let mut cand = vec![0.0; d];
    let steps = opts.burn_in + n * opts.thin;
    let mut accepted = 0u64;
    let mut window = 0u64;
    let mut tops = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for i in 0..steps {
        fam.sample_into(&mut rng, &mut cand);
        let cand_max = maxof(&cand);
        let log_a = cand_max - cur_max;
        let v: f64 = rng.gen();
        if log_a >= 0.0 || v.ln() < log_a {
            std::mem::swap(&mut cur, &mut cand);
            cur_max = cand_max;
            accepted += 1;
            window += 1;
        }
        if (i + 1) % 10_000 == 0 {
            if window < 100 {
                warn!("Metropolis-Hastings chain looks stuck: {window} acceptances in the last 10000 steps");
            }
            window = 0;
        }
        if i >= opts.burn_in && (i - opts.burn_in + 1).is_multiple_of(opts.thin) {
            tops.push(cur_max);
            states.push(cur.clone());
        }
    }
    let mut rows = states;
    for t in rows.iter_mut() {
        let e: f64 = rng.sample(Exp1);
        spectral_row(m, t, e);
    }
    let rate = accepted as f64 / steps as f64;
    if rate < 0.01 {
        warn!("Metropolis-Hastings acceptance rate {rate:.4} is below 1%");
    }
    check_overflow(&rows)?;
    Ok(Samples {
        diagnostics: SimDiagnostics {
            method: 3,
            proposals: steps as u64,
            accepted,
            acceptance_rate: rate,
            effective_sample_size: Some(effective_sample_size(&tops)),
            truncation: None,
        },
        rows,
    })
}

/// ESS from the initial positive sequence of autocorrelations.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| {
        (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n.min(1000) {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    n as f64 / (1.0 + 2.0 * sum)
}

/// Options for method 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionOptions {
    /// Truncation level `K` of the arrival times; chosen automatically when absent.
    pub truncation: Option<f64>,
    /// Cap on the total number of proposals.
    pub max_proposals: u64,
}

impl Default for RejectionOptions {
    fn default() -> Self {
        RejectionOptions {
            truncation: None,
            max_proposals: 1 << 36,
        }
    }
}

/// `R/t^γ − σ/γ` (`R − σ log t` for γ = 0).
fn excess_value(m: &MarginParams, r: &[f64], t: f64, out: &mut [f64]) {
    let lt = t.ln();
    for j in 0..r.len() {
        let (s, g) = (m.sigma[j], m.gamma[j]);
        out[j] = if is_zero_shape(g) {
            r[j] - s * lt
        } else {
            r[j] * (-g * lt).exp() - s / g
        };
    }
}

/// Smallest `K = 2^k` whose truncation bound `∫_K^∞ P[R ≰ t^γ σ/γ] dt / ∫_0^∞ (…) dt` is below 1e-3.
pub fn default_truncation(model: &GpModel, cfg: &QuadratureConfig) -> Result<f64> {
    require_role(model, Role::R, 4)?;
    let d = model.dim();
    let fam = model.family();
    let line = Line::new(model.margins(), Role::R, &vec![0.0; d]);
    let total = integrals::lambda(fam, &line, cfg)?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Model(format!("exceedance mass is {total}")));
    }
    let mut buf = vec![0.0; d];
    let mut k: f64 = 1.0;
    loop {
        let mut err = None;
        let tail = integrate_log(
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
            k.ln(),
            f64::INFINITY,
            &integrals::breakpoints(fam, &line),
            cfg,
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        if tail.exp() / total < 1e-3 {
            return Ok(k);
        }
        if k > 1e12 {
            return Err(Error::Model(
                "no truncation level reaches the 1e-3 bound; convert the model to representation U and use method 2 or 3"
                    .into(),
            ));
        }
        k *= 2.0;
    }
}

/// Method 4: approximate draws from an (R) model via uniform arrivals on `[0, K]`.
pub fn sample_method4(
    model: &GpModel,
    n: usize,
    stream: RandomStream,
    opts: RejectionOptions,
    cfg: &QuadratureConfig,
) -> Result<Samples> {
    require_role(model, Role::R, 4)?;
    let k = match opts.truncation {
        Some(k) if k > 0.0 && k.is_finite() => k,
        Some(k) => return Err(Error::Config(format!("truncation {k} must be positive and finite"))),
        None => default_truncation(model, cfg)?,
    };
    let d = model.dim();
    let fam = model.family();
    let m = model.margins();
    let parts = chunks(n);
    let per_chunk = (opts.max_proposals / parts.len().max(1) as u64).max(1);
    let results: Vec<Result<(Vec<Vec<f64>>, u64)>> = parts
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream.rng(c);
            let mut rows = Vec::with_capacity(len);
            let mut proposals = 0u64;
            let mut r = vec![0.0; d];
            let mut x = vec![0.0; d];
            while rows.len() < len {
                if proposals >= per_chunk {
                    return Err(Error::BudgetExceeded {
                        budget: opts.max_proposals,
                    });
                }
                let t: f64 = k * (1.0 - rng.gen::<f64>());
                fam.sample_into(&mut rng, &mut r);
                proposals += 1;
                excess_value(m, &r, t, &mut x);
                if x.iter().any(|&v| v > 0.0) {
                    rows.push(x.clone());
                }
            }
            Ok((rows, proposals))
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut proposals = 0;
    for r in results {
        let (chunk, p) = r?;
        rows.extend(chunk);
        proposals += p;
    }
    check_overflow(&rows)?;
    Ok(Samples {
        diagnostics: SimDiagnostics {
            method: 4,
            proposals,
            accepted: n as u64,
            acceptance_rate: if proposals > 0 { n as f64 / proposals as f64 } else { 1.0 },
            effective_sample_size: None,
            truncation: Some(k),
        },
        rows,
    })
}

/// One point `(T_i, R_i, R_i/T_i^γ − σ/γ)` of the process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessPoint {
    pub arrival: f64,
    pub mark: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointProcessRealization {
    pub points: Vec<ProcessPoint>,
    pub truncation: f64,
}

impl PointProcessRealization {
    /// Values of the points that exceed `0` in some component.
    pub fn exceedances(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .filter(|p| p.value.iter().any(|&v| v > 0.0))
            .map(|p| p.value.clone())
            .collect()
    }
}

/// Unit-rate Poisson arrivals on `[0, K]` with i.i.d. generator marks.
pub fn sample_point_process(
    family: &Family,
    margins: &MarginParams,
    truncation: f64,
    stream: RandomStream,
) -> Result<PointProcessRealization> {
    if !(truncation > 0.0 && truncation.is_finite()) {
        return Err(Error::Config("truncation must be positive and finite".into()));
    }
    if family.dim() != margins.dim() {
        return Err(Error::Config("generator dimension differs from margins".into()));
    }
    let mut rng = stream.rng(0);
    let count = rng.sample(Poisson::new(truncation).map_err(|e| Error::Config(e.to_string()))?) as u64;
    let mut arrivals: Vec<f64> = (0..count).map(|_| truncation * (1.0 - rng.gen::<f64>())).collect();
    arrivals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = margins.dim();
    let n = arrivals.len();
    // marks drawn in chunks so large realizations parallelize reproducibly
    let marks: Vec<Vec<f64>> = chunks(n)
        .into_par_iter()
        .flat_map_iter(|(c, len)| {
            let mut rng = stream.rng(c + 1);
            (0..len).map(|_| family.sample(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    let points = arrivals
        .into_iter()
        .zip(marks)
        .map(|(t, r)| {
            let mut value = vec![0.0; d];
            excess_value(margins, &r, t, &mut value);
            ProcessPoint {
                arrival: t,
                mark: r,
                value,
            }
        })
        .collect();
    Ok(PointProcessRealization { points, truncation })
}

/// Which sampler [`simulate`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Spectral,
    Rejection,
    Metropolis,
    Truncated,
}

impl Method {
    pub fn number(self) -> u8 {
        match self {
            Method::Spectral => 1,
            Method::Rejection => 2,
            Method::Metropolis => 3,
            Method::Truncated => 4,
        }
    }

    pub fn from_number(k: u8) -> Result<Method> {
        Ok(match k {
            1 => Method::Spectral,
            2 => Method::Rejection,
            3 => Method::Metropolis,
            4 => Method::Truncated,
            _ => return Err(Error::Config(format!("unknown method {k}; expected 1-4"))),
        })
    }

    /// Natural method for the model's representation.
    pub fn default_for(model: &GpModel) -> Method {
        match model.generator().role {
            Role::T => Method::Spectral,
            Role::U => Method::Metropolis,
            Role::R => Method::Truncated,
        }
    }
}

/// Draws `n` excesses with the given method and default tuning.
pub fn simulate(model: &GpModel, n: usize, stream: RandomStream, method: Method, cfg: &QuadratureConfig) -> Result<Samples> {
    match method {
        Method::Spectral => sample_method1(model, n, stream),
        Method::Rejection => {
            let env = TiltEnvelope::new(model, cfg)?;
            sample_method2(model, n, stream, &env, cfg)
        }
        Method::Metropolis => sample_method3(model, n, stream, McmcOptions::default()),
        Method::Truncated => sample_method4(model, n, stream, RejectionOptions::default(), cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Representation;
    use rand_distr::StandardNormal;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = RandomStream::new(7, 0).rng(3).next_u64();
        let b: u64 = RandomStream::new(7, 0).rng(3).next_u64();
        let c: u64 = RandomStream::new(7, 1).rng(3).next_u64();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn method1_rows_exceed() {
        let m = GpModel::from_family(
            Representation::T,
            vec![1.0, 2.0],
            vec![0.2, -0.1],
            Family::IndepGumbel {
                loc: vec![0.0, 0.5],
                scale: vec![1.0, 1.0],
                reversed: false,
            },
        )
        .unwrap();
        let s = sample_method1(&m, 5000, RandomStream::new(1, 0)).unwrap();
        assert_eq!(s.rows.len(), 5000);
        for r in &s.rows {
            assert!(r.iter().any(|&v| v > 0.0));
            assert!(m.margins().in_support(r));
        }
        let again = sample_method1(&m, 5000, RandomStream::new(1, 0)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn method4_survivor_for_unit_atom() {
        let m = GpModel::from_family(Representation::R, vec![1.0], vec![1.0], Family::PointMass { point: vec![1.0] })
            .unwrap();
        let opts = RejectionOptions {
            truncation: Some(1.0),
            ..Default::default()
        };
        let s = sample_method4(&m, 20000, RandomStream::new(3, 0), opts, &cfg()).unwrap();
        // P[X > 1] = 1/2
        let frac = s.rows.iter().filter(|r| r[0] > 1.0).count() as f64 / 20000.0;
        assert!((frac - 0.5).abs() < 4.0 * (0.25f64 / 20000.0).sqrt());
    }

    #[test]
    fn budget_is_enforced() {
        let m = GpModel::from_family(Representation::R, vec![1.0], vec![1.0], Family::PointMass { point: vec![1.0] })
            .unwrap();
        let opts = RejectionOptions {
            truncation: Some(1e6),
            max_proposals: 1000,
        };
        let r = sample_method4(&m, 100, RandomStream::new(3, 0), opts, &cfg());
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn overflow_on_the_data_scale_is_an_error() {
        let m = GpModel::from_family(
            Representation::T,
            vec![1e308, 1.0],
            vec![1.0, 1.0],
            Family::IndepGumbel {
                loc: vec![0.0, 0.0],
                scale: vec![1.0, 1.0],
                reversed: false,
            },
        )
        .unwrap();
        let r = sample_method1(&m, 1000, RandomStream::new(2, 0));
        assert!(matches!(r, Err(Error::Overflow(_))));
    }

    #[test]
    fn envelope_violation_is_reported() {
        struct Bad;
        impl Envelope for Bad {
            fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
                out[0] = rng.sample::<f64, _>(StandardNormal) * 0.1;
            }
            fn log_density(&self, u: &[f64]) -> f64 {
                -0.5 * (u[0] / 0.1).powi(2) - (0.1 * (2.0 * std::f64::consts::PI).sqrt()).ln()
            }
            fn log_k(&self) -> f64 {
                0.0
            }
        }
        let m = GpModel::from_family(
            Representation::U,
            vec![1.0],
            vec![0.0],
            Family::IndepGumbel {
                loc: vec![0.0],
                scale: vec![0.5],
                reversed: false,
            },
        )
        .unwrap();
        let r = sample_method2(&m, 100, RandomStream::new(1, 0), &Bad, &cfg());
        assert!(matches!(r, Err(Error::EnvelopeViolation { .. })));
    }

    #[test]
    fn metropolis_accepts_equal_maxima() {
        // a point mass: every candidate has the same maximum, so every step is accepted
        let m = GpModel::from_family(Representation::U, vec![1.0, 1.0], vec![0.0, 0.0], Family::PointMass {
            point: vec![0.0, -1.0],
        })
        .unwrap();
        let s = sample_method3(&m, 100, RandomStream::new(1, 0), McmcOptions { burn_in: 10, thin: 2 }).unwrap();
        assert_eq!(s.diagnostics.acceptance_rate, 1.0);
        assert_eq!(s.rows.len(), 100);
    }

    #[test]
    fn point_process_arrivals_sorted() {
        let margins = MarginParams::new(vec![1.0], vec![1.0]).unwrap();
        let p = sample_point_process(&Family::PointMass { point: vec![1.0] }, &margins, 50.0, RandomStream::new(2, 0))
            .unwrap();
        assert!(p.points.windows(2).all(|w| w[0].arrival < w[1].arrival));
        for pt in &p.points {
            assert!((pt.value[0] - (1.0 / pt.arrival - 1.0)).abs() < 1e-12);
        }
    }
}
