//! Versioned JSON record of a fitted model.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::estimation::{FitResult, TreatmentModelSpec, Variant};
use crate::mixture::MixtureModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitRecord {
    schema_version: u32,
    variant: Variant,
    families: Vec<Family>,
    components: MixtureModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    treatment_coefficients: Option<TreatmentModelSpec>,
    loglik: f64,
    n_params: usize,
    aic: f64,
    converged: bool,
    iterations: usize,
    seed: u64,
    boundary_flag: bool,
    #[serde(default)]
    start_index: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    loglik_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    responsibilities: Vec<f64>,
}

/// Pretty-printed JSON with a trailing newline. Responsibilities are written
/// only when `with_responsibilities` is set.
pub fn write_fit_json<W: Write>(fit: &FitResult, mut writer: W, with_responsibilities: bool) -> Result<()> {
    let record = FitRecord {
        schema_version: SCHEMA_VERSION,
        variant: fit.variant,
        families: fit.families.clone(),
        components: fit.model.clone(),
        treatment_coefficients: fit.treatment.clone(),
        loglik: fit.loglik,
        n_params: fit.n_params,
        aic: fit.aic,
        converged: fit.converged,
        iterations: fit.iterations,
        seed: fit.seed,
        boundary_flag: fit.boundary_flag,
        start_index: fit.start_index,
        loglik_trace: fit.loglik_trace.clone(),
        responsibilities: if with_responsibilities {
            fit.responsibilities.clone()
        } else {
            Vec::new()
        },
    };
    serde_json::to_writer_pretty(&mut writer, &record)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_fit_json<R: Read>(reader: R) -> Result<FitResult> {
    let value: serde_json::Value = serde_json::from_reader(reader)?;
    let version = value
        .get("schema_version")
        .ok_or_else(|| Error::Format("missing schema_version".into()))?;
    let found = version
        .as_u64()
        .ok_or_else(|| Error::Format(format!("schema_version must be an integer, got {version}")))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::Version {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let r: FitRecord = serde_json::from_value(value).map_err(|e| Error::Validation(e.to_string()))?;
    let fit = FitResult {
        variant: r.variant,
        families: r.families,
        model: r.components,
        treatment: r.treatment_coefficients,
        loglik: r.loglik,
        n_params: r.n_params,
        aic: r.aic,
        responsibilities: r.responsibilities,
        iterations: r.iterations,
        converged: r.converged,
        loglik_trace: r.loglik_trace,
        boundary_flag: r.boundary_flag,
        start_index: r.start_index,
        seed: r.seed,
    };
    fit.validate()?;
    Ok(fit)
}
