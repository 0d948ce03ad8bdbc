pub mod density;
pub mod diagnostics;
pub mod error;
pub mod generator;
pub mod gev;
pub(crate) mod integrals;
pub mod likelihood;
pub mod linalg;
pub mod model;
pub mod mvn;
pub mod optim;
pub mod prob;
pub mod quadrature;
pub mod repr;
pub mod river;
pub mod sim;

pub use density::{censored_density, density, log_density, DensityEvaluator};
pub use error::{Error, Result};
pub use diagnostics::{ks_one_sample, ks_two_sample, threshold_stability, KsResult, StabilityReport};
pub use generator::{Family, Gaussian, GeneratorSpec, Role};
pub use gev::{
    conditional_margin_cdf, conditional_subset_cdf, gev_from_generator, gev_margin_cdf, gp_cdf_from_gev,
    max_stability_params, nu_exceedance, GevModel, GevParams,
};
pub use model::{
    destandardize, standardize, validate_model, ExceedanceData, GpModel, MarginParams, Representation,
    ValidationReport,
};
pub use likelihood::{fit, loglik, FitOptions, FitParameter, FitResult, FitTemplate, FreeParams};
pub use prob::{
    conditional_density_given, conditional_prob_given, prob_event, weighted_sum_survival, EventSpec, ProbEstimate,
    ProbMethod,
};
pub use quadrature::QuadratureConfig;
pub use repr::{cdf, convert};
pub use river::River;
pub use sim::{
    sample_method1, sample_method2, sample_method3, sample_method4, sample_point_process, simulate, Envelope,
    McmcOptions, Method, PointProcessRealization, RandomStream, RejectionOptions, Samples, TiltEnvelope,
};
