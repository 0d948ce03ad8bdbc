//! Margins, models, data containers and the standardizing transforms.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::generator::{Family, GeneratorSpec, Role};

/// Shapes with `|γ| < GAMMA_ZERO_TOL` use the γ = 0 limit formulas.
pub const GAMMA_ZERO_TOL: f64 = 1e-8;

pub(crate) fn is_zero_shape(g: f64) -> bool {
    g.abs() < GAMMA_ZERO_TOL
}

/// Per-component GP scale and shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl MarginParams {
    pub fn new(sigma: Vec<f64>, gamma: Vec<f64>) -> Result<MarginParams> {
        let m = MarginParams { sigma, gamma };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_empty() || self.sigma.len() != self.gamma.len() {
            return Err(Error::Model("sigma and gamma must be non-empty and of equal length".into()));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Model("sigma must be positive and finite".into()));
        }
        if self.gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::Model("gamma must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Lower endpoint of component `j`: `-σ/γ` for γ > 0, else `-∞`.
    pub fn eta(&self, j: usize) -> f64 {
        let g = self.gamma[j];
        if g > 0.0 && !is_zero_shape(g) {
            -self.sigma[j] / g
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Upper endpoint of component `j`: `-σ/γ` for γ < 0, else `+∞`.
    pub fn omega(&self, j: usize) -> f64 {
        let g = self.gamma[j];
        if g < 0.0 && !is_zero_shape(g) {
            -self.sigma[j] / g
        } else {
            f64::INFINITY
        }
    }

    /// Standardized value of one coordinate, extended by `-∞` at or below the lower endpoint
    /// and `+∞` at or above the upper endpoint.
    pub(crate) fn std_ext(&self, j: usize, x: f64) -> f64 {
        let (s, g) = (self.sigma[j], self.gamma[j]);
        if is_zero_shape(g) {
            return x / s;
        }
        let arg = g * x / s;
        if arg <= -1.0 {
            return if g > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        arg.ln_1p() / g
    }

    pub(crate) fn destd_one(&self, j: usize, z: f64) -> f64 {
        let (s, g) = (self.sigma[j], self.gamma[j]);
        if is_zero_shape(g) {
            s * z
        } else {
            s * (g * z).exp_m1() / g
        }
    }

    /// `log(γ x + σ)`, the log-Jacobian of the standardizing map (negated).
    pub(crate) fn log_jac(&self, j: usize, x: f64) -> f64 {
        (self.gamma[j] * x + self.sigma[j]).ln()
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(j, &v)| self.gamma[j] * v + self.sigma[j] > 0.0 || is_zero_shape(self.gamma[j]))
    }
}

/// Maps excesses to the standard exponential scale: `(1/γ) log(1 + γx/σ)`.
pub fn standardize(x: &[f64], margins: &MarginParams) -> Result<Vec<f64>> {
    check_len(x.len(), margins)?;
    x.iter()
        .enumerate()
        .map(|(j, &v)| {
            let (s, g) = (margins.sigma[j], margins.gamma[j]);
            if is_zero_shape(g) {
                Ok(v / s)
            } else if g * v + s <= 0.0 {
                Err(Error::Domain(format!("gamma*x + sigma <= 0 in component {j}")))
            } else {
                Ok((g * v / s).ln_1p() / g)
            }
        })
        .collect()
}

/// Inverse of [`standardize`]: `σ(e^{γ z} − 1)/γ`.
pub fn destandardize(z: &[f64], margins: &MarginParams) -> Result<Vec<f64>> {
    check_len(z.len(), margins)?;
    z.iter()
        .enumerate()
        .map(|(j, &v)| {
            let out = margins.destd_one(j, v);
            if out.is_infinite() && v.is_finite() {
                Err(Error::Overflow(format!("destandardized value overflows in component {j}")))
            } else {
                Ok(out)
            }
        })
        .collect()
}

fn check_len(n: usize, margins: &MarginParams) -> Result<()> {
    if n != margins.dim() {
        return Err(Error::Domain(format!(
            "vector has length {n}, model dimension is {}",
            margins.dim()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    R,
    U,
    S,
    T,
}

impl Representation {
    pub fn role(self) -> Role {
        match self {
            Representation::R => Role::R,
            Representation::U => Role::U,
            Representation::S | Representation::T => Role::T,
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Representation::R => "R",
            Representation::U => "U",
            Representation::S => "S",
            Representation::T => "T",
        };
        f.write_str(s)
    }
}

/// A multivariate GP distribution in one of the four representations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct GpModel {
    representation: Representation,
    margins: MarginParams,
    generator: GeneratorSpec,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    representation: Representation,
    sigma: Vec<f64>,
    gamma: Vec<f64>,
    generator: GeneratorDoc,
}

#[derive(Serialize, Deserialize)]
struct GeneratorDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    role: Option<Role>,
    #[serde(flatten)]
    family: Family,
}

impl TryFrom<ModelDoc> for GpModel {
    type Error = Error;
    fn try_from(doc: ModelDoc) -> Result<GpModel> {
        let role = doc.generator.role.unwrap_or(doc.representation.role());
        GpModel::new(
            doc.representation,
            MarginParams::new(doc.sigma, doc.gamma)?,
            GeneratorSpec::new(role, doc.generator.family)?,
        )
    }
}

impl From<GpModel> for ModelDoc {
    fn from(m: GpModel) -> ModelDoc {
        ModelDoc {
            representation: m.representation,
            sigma: m.margins.sigma,
            gamma: m.margins.gamma,
            generator: GeneratorDoc {
                role: Some(m.generator.role),
                family: m.generator.family,
            },
        }
    }
}

impl GpModel {
    pub fn new(representation: Representation, margins: MarginParams, generator: GeneratorSpec) -> Result<GpModel> {
        margins.validate()?;
        generator.family.validate()?;
        if generator.role != representation.role() {
            return Err(Error::Model(format!(
                "generator role {:?} does not match representation {representation}",
                generator.role
            )));
        }
        if generator.dim() != margins.dim() {
            return Err(Error::Model(format!(
                "generator dimension {} differs from margin dimension {}",
                generator.dim(),
                margins.dim()
            )));
        }
        Ok(GpModel {
            representation,
            margins,
            generator,
        })
    }

    /// Convenience constructor taking the family and deriving the role.
    pub fn from_family(
        representation: Representation,
        sigma: Vec<f64>,
        gamma: Vec<f64>,
        family: Family,
    ) -> Result<GpModel> {
        GpModel::new(
            representation,
            MarginParams::new(sigma, gamma)?,
            GeneratorSpec::new(representation.role(), family)?,
        )
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn margins(&self) -> &MarginParams {
        &self.margins
    }

    pub fn generator(&self) -> &GeneratorSpec {
        &self.generator
    }

    pub fn family(&self) -> &Family {
        &self.generator.family
    }

    pub fn dim(&self) -> usize {
        self.margins.dim()
    }

    pub fn from_json(text: &str) -> Result<GpModel> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid model JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub(crate) fn with_representation(&self, representation: Representation) -> GpModel {
        GpModel {
            representation,
            ..self.clone()
        }
    }

    /// Canonical representative under the generator invariance: for roles U and T (and role R
    /// with every γ_j = 0) the locations or means are shifted so the first is 0; for role R with
    /// every γ_j ≠ 0 the generator is rescaled by `Z^γ` so that its first scale parameter is 1.
    /// Other families are returned unchanged.
    pub fn pinned(&self) -> GpModel {
        let mut out = self.clone();
        let gamma = &self.margins.gamma;
        let shift = self.generator.role != Role::R || gamma.iter().all(|g| is_zero_shape(*g));
        match (self.generator.role, &mut out.generator.family) {
            (_, Family::IndepGumbel { loc, .. }) if shift => {
                let s = loc[0];
                loc.iter_mut().for_each(|m| *m -= s);
            }
            (_, Family::MultivariateNormal(g)) if shift => {
                let s = g.mean()[0];
                let mean: Vec<f64> = g.mean().iter().map(|m| m - s).collect();
                *g = crate::generator::Gaussian::new(mean, g.cov().clone()).expect("shifted mean stays valid");
            }
            (Role::R, fam) if gamma.iter().all(|g| !is_zero_shape(*g)) => match fam {
                Family::IndepExponential { scale } => {
                    // R → Z^γ R with Z = scale_0^{-1/γ_0}
                    let logz = -scale[0].ln() / gamma[0];
                    for (j, s) in scale.iter_mut().enumerate() {
                        *s *= (gamma[j] * logz).exp();
                    }
                    scale[0] = 1.0;
                }
                Family::LogNormalR(g) => {
                    let logz = -g.mean()[0] / gamma[0];
                    let mean: Vec<f64> = g.mean().iter().zip(gamma).map(|(m, gm)| m + gm * logz).collect();
                    *g = crate::generator::Gaussian::new(mean, g.cov().clone()).expect("shifted mean stays valid");
                }
                _ => {}
            },
            _ => {}
        }
        out
    }
}

/// Observed excesses with optional per-component censoring thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceData {
    rows: Vec<Vec<f64>>,
    censor: Option<Vec<f64>>,
}

impl ExceedanceData {
    pub fn new(rows: Vec<Vec<f64>>, censor: Option<Vec<f64>>) -> Result<ExceedanceData> {
        let d = rows.first().map(|r| r.len()).or(censor.as_ref().map(|c| c.len()));
        if let Some(d) = d {
            for (i, r) in rows.iter().enumerate() {
                if r.len() != d {
                    return Err(Error::Data(format!("row {i} has {} values, expected {d}", r.len())));
                }
                if r.iter().any(|v| v.is_nan()) {
                    return Err(Error::Data(format!("row {i} contains NaN")));
                }
                if !r.iter().any(|&v| v > 0.0) {
                    return Err(Error::Data(format!("row {i} is not an exceedance (no positive component)")));
                }
            }
            if let Some(c) = &censor {
                if c.len() != d {
                    return Err(Error::Config(format!("censoring vector has length {}, expected {d}", c.len())));
                }
                if c.iter().any(|v| *v > 0.0 || v.is_nan()) {
                    return Err(Error::Config("censoring thresholds must satisfy v_j <= 0".into()));
                }
            }
        }
        Ok(ExceedanceData { rows, censor })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn censor(&self) -> Option<&[f64]> {
        self.censor.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.rows.first().map(|r| r.len())
    }

    pub fn with_censor(&self, censor: Option<Vec<f64>>) -> Result<ExceedanceData> {
        ExceedanceData::new(self.rows.clone(), censor)
    }
}

/// Outcome of the per-component generator checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentCheck {
    pub component: usize,
    pub passed: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub components: Vec<ComponentCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.components.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ComponentCheck> {
        self.components.iter().filter(|c| !c.passed).collect()
    }
}

/// Sign of the support of one generator coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Support {
    /// Contained in `[0, ∞)`.
    Nonnegative,
    /// Contained in `[-∞, 0)`.
    Negative,
    Real,
}

/// Support sign and the Condition-1 moment for one coordinate of a single family. The
/// moment is `E[(γ R/σ)^{1/γ}]` (γ > 0), `E[(-γ R/σ)^{1/γ}]` (γ < 0), `E[e^{R/σ}]` (γ = 0) for
/// role R and `E[e^U]` for role U; `None` when no finite closed value is known.
fn coordinate_moment(fam: &Family, role: Role, j: usize, sigma: f64, gamma: f64) -> (Support, Option<f64>, String) {
    let zero = is_zero_shape(gamma);
    match (fam, role) {
        (Family::IndepExponential { scale }, Role::R) => {
            let l = scale[j];
            let m = if zero {
                (l < sigma).then(|| 1.0 / (1.0 - l / sigma))
            } else if gamma > 0.0 {
                Some((gamma * l / sigma).powf(1.0 / gamma) * gamma_fn(1.0 + 1.0 / gamma))
            } else {
                None
            };
            (Support::Nonnegative, m, format!("exponential scale {l}"))
        }
        (Family::IndepExponential { scale }, Role::U) => {
            let l = scale[j];
            (Support::Nonnegative, (l < 1.0).then(|| 1.0 / (1.0 - l)), format!("exponential scale {l}"))
        }
        (Family::IndepGumbel { loc, scale, reversed }, role) => {
            let (m, b) = (loc[j], scale[j]);
            let c = match role {
                Role::R if zero => sigma,
                Role::R => f64::NAN,
                _ => 1.0,
            };
            let moment = if c.is_nan() {
                None
            } else if *reversed {
                Some((m / c).exp() * gamma_fn(1.0 + b / c))
            } else {
                (b < c).then(|| (m / c).exp() * gamma_fn(1.0 - b / c))
            };
            (Support::Real, moment, format!("Gumbel location {m}, scale {b}"))
        }
        (Family::MultivariateNormal(g), role) => {
            let c = match role {
                Role::R if zero => sigma,
                Role::R => f64::NAN,
                _ => 1.0,
            };
            let mu = g.mean()[j];
            let v = g.cov()[j][j];
            let moment = (!c.is_nan()).then(|| (mu / c + 0.5 * v / (c * c)).exp());
            (Support::Real, moment, "normal".into())
        }
        (Family::LogNormalR(g), Role::R) => {
            let (mu, v) = (g.mean()[j], g.cov()[j][j]);
            let moment = (gamma > 0.0 && !zero).then(|| {
                let k = 1.0 / gamma;
                (k * (gamma / sigma).ln() + k * mu + 0.5 * k * k * v).exp()
            });
            (Support::Nonnegative, moment, "log-normal".into())
        }
        (Family::RiverNetwork(r), Role::R) => {
            let n = r.count(j) as f64;
            let moment = if zero {
                (sigma > 1.0).then(|| (1.0 - 1.0 / sigma).powf(-n))
            } else if gamma > 0.0 {
                Some(((gamma / sigma).ln() / gamma + ln_gamma(n + 1.0 / gamma) - ln_gamma(n)).exp())
            } else {
                None
            };
            (Support::Nonnegative, moment, format!("river node with {n} inputs"))
        }
        (Family::PointMass { point }, role) => {
            let p = point[j];
            let support = if p >= 0.0 {
                Support::Nonnegative
            } else if p < 0.0 {
                Support::Negative
            } else {
                Support::Real
            };
            let moment = match role {
                Role::R if zero => Some((p / sigma).exp()),
                Role::R if gamma > 0.0 => Some((gamma * p.max(0.0) / sigma).powf(1.0 / gamma)),
                Role::R => Some((gamma * p / sigma).powf(1.0 / gamma)),
                _ => Some(p.exp()),
            };
            (support, moment, format!("atom at {p}"))
        }
        (_, role) => (Support::Real, None, format!("{} is not usable for role {role:?}", fam.kind())),
    }
}

fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

fn check_component(fam: &Family, role: Role, j: usize, sigma: f64, gamma: f64) -> ComponentCheck {
    let fail = |reason: String| ComponentCheck {
        component: j,
        passed: false,
        reason,
    };
    if role == Role::T {
        return ComponentCheck {
            component: j,
            passed: true,
            reason: "no moment condition for role T".into(),
        };
    }
    // Mixtures: the support is the union and the moment the weighted average.
    let parts: Vec<(f64, &Family)> = match fam {
        Family::Mixture { weights, components } => weights
            .iter()
            .copied()
            .zip(components.iter())
            .filter(|(w, _)| *w > 0.0)
            .collect(),
        other => vec![(1.0, other)],
    };
    let mut moment = 0.0;
    for (w, part) in parts {
        if let Family::Mixture { .. } = part {
            let inner = check_component(part, role, j, sigma, gamma);
            if !inner.passed {
                return inner;
            }
            continue;
        }
        let (support, m, what) = coordinate_moment(part, role, j, sigma, gamma);
        if role == Role::R {
            let zero = is_zero_shape(gamma);
            let sign_ok = if zero {
                true
            } else if gamma > 0.0 {
                support == Support::Nonnegative
            } else {
                support == Support::Negative
            };
            if !sign_ok {
                return fail(format!(
                    "{what}: support sign is incompatible with gamma = {gamma} (needs {})",
                    if gamma > 0.0 { "[0, inf)" } else { "[-inf, 0)" }
                ));
            }
        }
        match m {
            Some(v) if v.is_finite() => moment += w * v,
            _ => return fail(format!("{what}: moment condition fails (infinite or undefined moment)")),
        }
    }
    if !(moment > 0.0) || !moment.is_finite() {
        return fail(format!("moment {moment} is not strictly positive and finite"));
    }
    ComponentCheck {
        component: j,
        passed: true,
        reason: format!("moment {moment:.6}"),
    }
}

/// Checks the generator sign constraints and the finiteness and positivity of the
/// per-component moments, analytically per family.
pub fn validate_model(model: &GpModel) -> ValidationReport {
    let m = model.margins();
    let components = (0..model.dim())
        .map(|j| check_component(model.family(), model.generator().role, j, m.sigma[j], m.gamma[j]))
        .collect();
    ValidationReport { components }
}
