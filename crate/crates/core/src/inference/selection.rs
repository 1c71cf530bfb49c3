use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{FitResult, Variant};
use crate::special::chi_square_sf;

/// Indices of `(aic, n_params)` pairs in ascending AIC order; ties go to
/// fewer parameters, then to input order.
pub fn rank_by_aic(entries: &[(f64, usize)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| {
        entries[a]
            .0
            .total_cmp(&entries[b].0)
            .then(entries[a].1.cmp(&entries[b].1))
    });
    idx
}

/// Indices of `fits`, best (lowest AIC) first.
pub fn rank_models(fits: &[FitResult]) -> Vec<usize> {
    let entries: Vec<(f64, usize)> = fits.iter().map(|f| (f.aic, f.n_params)).collect();
    rank_by_aic(&entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    /// 2(ℓ_full − ℓ_reduced), clamped at 0.
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Chi-square likelihood-ratio test from raw log-likelihoods.
pub fn lr_test_values(loglik_full: f64, loglik_reduced: f64, df: usize) -> Result<LrtResult> {
    if df == 0 {
        return Err(Error::Usage("the full model must have more parameters".into()));
    }
    if !(loglik_full.is_finite() && loglik_reduced.is_finite()) {
        return Err(Error::Domain("log-likelihoods must be finite".into()));
    }
    if loglik_reduced > loglik_full + 1e-6 {
        return Err(Error::Fit(format!(
            "reduced model log-likelihood {loglik_reduced} exceeds the full model's {loglik_full}; \
             the full fit did not reach its optimum"
        )));
    }
    let statistic = (2.0 * (loglik_full - loglik_reduced)).max(0.0);
    Ok(LrtResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as u32)?,
    })
}

/// Compares nested fits along V1 ⊂ V2, V1 ⊂ V3, V2 ⊂ V4, V3 ⊂ V4.
pub fn lr_test(full: &FitResult, reduced: &FitResult) -> Result<LrtResult> {
    if !reduced.variant.nested_in(full.variant) {
        return Err(Error::Usage(format!(
            "{} is not nested in {}",
            reduced.variant, full.variant
        )));
    }
    if full.families != reduced.families {
        return Err(Error::Usage(format!(
            "families differ: {:?} vs {:?}",
            full.families, reduced.families
        )));
    }
    if reduced.n_params >= full.n_params {
        return Err(Error::Usage(format!(
            "reduced model has {} parameters, full model {}",
            reduced.n_params, full.n_params
        )));
    }
    lr_test_values(full.loglik, reduced.loglik, full.n_params - reduced.n_params)
}

/// True when the two variants can be compared by [`lr_test`] in some order.
pub fn comparable(a: Variant, b: Variant) -> bool {
    a.nested_in(b) || b.nested_in(a)
}
