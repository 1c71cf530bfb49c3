//! Simple and two-component mixture parametric survival models for
//! right-censored clinical-trial data.

pub mod cli;
pub mod dist;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod io;
pub mod mixture;
pub mod modality;
pub mod optim;
pub mod simulate;
pub mod special;
pub mod stream;

pub use dist::{DistributionSpec, Family};
pub use error::{Error, Result};
pub use estimation::{
    aic, e_step, em_fit, fit_simple, fit_treatment_model, m_step, mixture_loglik, simple_loglik,
    Arm, Dataset, FitOptions, FitResult, Observation, TreatmentModelSpec, Variant,
};
pub use mixture::{Component, MixtureModel};
