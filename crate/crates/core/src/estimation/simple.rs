//! Maximum-likelihood fits of a single family.

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::estimation::data::Dataset;
use crate::estimation::likelihood::{fit_component, Prepared};
use crate::estimation::{aic, FitOptions, FitResult, Variant};
use crate::mixture::MixtureModel;
use crate::optim::NelderMeadOptions;

/// Fits one family by Nelder–Mead on log-transformed positive parameters.
///
/// Non-convergence of the optimizer is reported through `converged`, not as
/// an error.
pub fn fit_simple(family: Family, data: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    if data.n_events() == 0 {
        return Err(Error::Fit("no observed events".into()));
    }
    if data.len() < family.n_params() {
        return Err(Error::Fit(format!(
            "{} observations cannot identify {} {family} parameters",
            data.len(),
            family.n_params()
        )));
    }
    let prep = Prepared::new(data);
    let fit = fit_component(family, &prep, None, None, &NelderMeadOptions::default())?;
    let n_params = family.n_params();
    Ok(FitResult {
        variant: Variant::V0,
        families: vec![family],
        model: MixtureModel::single(fit.spec)?,
        treatment: None,
        loglik: fit.loglik,
        n_params,
        aic: aic(fit.loglik, n_params),
        responsibilities: vec![1.0; data.len()],
        iterations: fit.evals,
        converged: fit.converged,
        loglik_trace: vec![fit.loglik],
        boundary_flag: false,
        start_index: 0,
        seed: opts.seed,
    })
}
