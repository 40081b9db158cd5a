//! Exact inference for a two-regime clustered point process: background
//! events arrive as a homogeneous Poisson process while at most one cluster
//! at a time produces offspring around its mother event.
//!
//! The crate provides simulation, the normalized forward likelihood,
//! Viterbi decoding, closed-form filtering and smoothing of cluster-membership
//! probabilities, maximum likelihood fitting, and a brute-force enumeration
//! oracle for small catalogs. All numerics are generic over [`Scalar`]
//! (`f64` or `f32`); the `*64` aliases below fix the common choice.

pub mod decoder;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod likelihood;
pub mod model;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod simulate;
mod transition;

pub use decoder::{path_weight, viterbi_decode, viterbi_decode_with, viterbi_matrix, ViterbiMatrix};
pub use error::{Error, Result};
pub use estimator::{fit_mle, nelder_mead, FitConfig, FitResult, NelderMeadConfig};
pub use filter::{
    init_filter, smoothed_report, smoothed_report_tracked, track_functional, BaseFilterState,
    FunctionalState, Posteriors, TargetFunctional,
};
pub use likelihood::{forward_init, forward_pass, forward_step, log_likelihood, ForwardMatrix};
pub use model::{
    Catalog, ClusterIntensity, Event, GaussianModel, HiddenLabel, LabeledPath, Location,
    ModelParams, NuConvention, Region, TabulatedIntensity,
};
pub use oracle::{enumerate_paths, oracle_loglik, oracle_posteriors, OraclePosteriors, WeightedPath};
pub use report::{PosteriorReport, Summary};
pub use scalar::Scalar;
pub use simulate::{simulate, simulate_replicate, SimConfig};

pub type Region64 = Region<f64>;
pub type Location64 = Location<f64>;
pub type Event64 = Event<f64>;
pub type Catalog64 = Catalog<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type GaussianModel64 = GaussianModel<f64>;
pub type Posteriors64 = Posteriors<f64>;
pub type FitConfig64 = FitConfig<f64>;
pub type FitResult64 = FitResult<f64>;
pub type SimConfig64 = SimConfig<f64>;

pub type Region32 = Region<f32>;
pub type Catalog32 = Catalog<f32>;
pub type ModelParams32 = ModelParams<f32>;
pub type GaussianModel32 = GaussianModel<f32>;
