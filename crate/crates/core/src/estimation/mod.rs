//! Censored likelihoods, simple and mixture fits, and the treatment-structured
//! variants.

pub mod data;
pub mod em;
pub mod likelihood;
pub mod simple;
pub mod treatment;

use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;

pub use data::{Arm, Dataset, Observation};
pub use em::{e_step, em_fit, m_step};
pub use likelihood::{mixture_loglik, simple_loglik};
pub use simple::fit_simple;
pub use treatment::{fit_treatment_model, TreatmentCoefficient, TreatmentModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// EM stops once |Δ log-likelihood| falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub n_starts: usize,
    pub seed: u64,
    /// Mixing weights are clamped to `[weight_floor, 1 − weight_floor]`.
    pub weight_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-6,
            max_iter: 500,
            n_starts: 10,
            seed: 0,
            weight_floor: 1e-3,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Usage(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Usage("max_iter must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Usage("n_starts must be at least 1".into()));
        }
        if !(self.weight_floor > 0.0 && self.weight_floor < 0.5) {
            return Err(Error::Usage(format!(
                "weight_floor must lie in (0, 0.5), got {}",
                self.weight_floor
            )));
        }
        Ok(())
    }
}

/// Model ladder: V0 simple, V1 mixture, V2 medians depend on arm, V3 mixing
/// proportion depends on arm, V4 both. Serializes as its number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Variant {
    V0,
    V1,
    V2,
    V3,
    V4,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::V0, Variant::V1, Variant::V2, Variant::V3, Variant::V4];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn is_mixture(self) -> bool {
        self != Variant::V0
    }

    pub fn uses_arms(self) -> bool {
        matches!(self, Variant::V2 | Variant::V3 | Variant::V4)
    }

    /// True when `self` is a restriction of `full` in the nesting lattice
    /// V1 ⊂ V2, V1 ⊂ V3, V2 ⊂ V4, V3 ⊂ V4 (and hence V1 ⊂ V4).
    pub fn nested_in(self, full: Variant) -> bool {
        use Variant::*;
        matches!(
            (self, full),
            (V1, V2) | (V1, V3) | (V1, V4) | (V2, V4) | (V3, V4)
        )
    }
}

impl From<Variant> for u8 {
    fn from(v: Variant) -> u8 {
        v.number()
    }
}

impl TryFrom<u8> for Variant {
    type Error = Error;

    fn try_from(v: u8) -> Result<Variant> {
        Variant::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::Usage(format!("variant must be 0..=4, got {v}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "V{}", self.number())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        let digits = s.trim_start_matches(['v', 'V']);
        let n: u8 = digits
            .parse()
            .map_err(|_| Error::Usage(format!("unknown variant '{s}'")))?;
        Variant::try_from(n)
    }
}

/// Outcome of any fit on the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub variant: Variant,
    pub families: Vec<Family>,
    /// The fitted model; for V2–V4 this is the control-arm model.
    pub model: MixtureModel,
    pub treatment: Option<TreatmentModelSpec>,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    /// ẑᵢ, the posterior probability of component 1, in data order.
    pub responsibilities: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub loglik_trace: Vec<f64>,
    /// A mixing weight sat on its clamp.
    pub boundary_flag: bool,
    pub start_index: usize,
    pub seed: u64,
}

impl FitResult {
    /// Model for subjects in `arm`; identical to `model` for V0 and V1.
    pub fn model_for(&self, arm: Arm) -> Result<MixtureModel> {
        match &self.treatment {
            Some(t) => t.model_for(arm),
            None => Ok(self.model.clone()),
        }
    }

    /// Checks the invariants a stored fit must satisfy.
    pub fn validate(&self) -> Result<()> {
        let expected_m = if self.variant.is_mixture() { 2 } else { 1 };
        if self.model.m() != expected_m || self.families.len() != expected_m {
            return Err(Error::Validation(format!(
                "{} fit must have {expected_m} component(s)",
                self.variant
            )));
        }
        for (c, f) in self.model.components().iter().zip(&self.families) {
            if c.dist.family() != *f {
                return Err(Error::Validation(format!(
                    "component family {} does not match declared {f}",
                    c.dist.family()
                )));
            }
        }
        if self.variant.uses_arms() != self.treatment.is_some() {
            return Err(Error::Validation(format!(
                "{} fit {} treatment coefficients",
                self.variant,
                if self.variant.uses_arms() { "needs" } else { "must not carry" }
            )));
        }
        if let Some(t) = &self.treatment {
            if t.variant != self.variant {
                return Err(Error::Validation("treatment variant mismatch".into()));
            }
            t.model_for(Arm::Control)?;
            t.model_for(Arm::Treated)?;
        }
        if !self.loglik.is_finite() {
            return Err(Error::Validation("loglik must be finite".into()));
        }
        if self.aic != aic(self.loglik, self.n_params) {
            return Err(Error::Validation(format!(
                "aic {} != -2*loglik + 2*n_params",
                self.aic
            )));
        }
        if self.responsibilities.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return Err(Error::Validation("responsibilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// −2ℓ + 2p.
pub fn aic(loglik: f64, n_params: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_params as f64
}
