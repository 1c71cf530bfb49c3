//! Mixture models whose medians and/or mixing proportion depend on the
//! treatment indicator `IT` (0 control, 1 treated).
//!
//! Each component's scale coordinate (`ln λ`, or `μ` for the log-normal) is
//! linear in `IT`; shapes are shared across arms and `π₁ = expit(z₀ + z₁·IT)`.
//!
//! | variant | scale coordinate of component k   | π₁                 |
//! |---------|-----------------------------------|--------------------|
//! | V2      | β₀ₖ + β₁ₖ·IT                      | expit(z₀)          |
//! | V3      | β₀₁, and β₀₁ + α for k = 2        | expit(z₀ + z₁·IT)  |
//! | V4      | β₀ₖ + β₁ₖ·IT                      | expit(z₀ + z₁·IT)  |
//!
//! Component labels are fixed across arms (component 1 is short-term in the
//! control arm), so per-arm proportions can be compared directly.

use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::estimation::data::{Arm, Dataset};
use crate::estimation::likelihood::{is_degenerate, Prepared, COORD_LIMIT};
use crate::estimation::{aic, em_fit, fit_simple, FitOptions, FitResult, Variant};
use crate::mixture::MixtureModel;
use crate::optim::{minimize, NelderMeadOptions};

/// Each arm needs at least this many deaths for a treatment-structured fit.
const MIN_ARM_EVENTS: usize = 5;
/// |z₀ + z₁·IT| beyond this puts a mixing weight at 0 or 1 in floating point.
const LOGIT_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentCoefficient {
    pub name: String,
    pub value: f64,
}

/// Coefficients of a V2/V3/V4 model. Shape parameters are reported on their
/// natural scale; β, α and z on the link scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct TreatmentModelSpec {
    pub variant: Variant,
    pub families: [Family; 2],
    coefficients: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpecRecord {
    variant: Variant,
    families: [Family; 2],
    coefficients: Vec<TreatmentCoefficient>,
}

impl TryFrom<SpecRecord> for TreatmentModelSpec {
    type Error = Error;

    fn try_from(r: SpecRecord) -> Result<Self> {
        let names = coefficient_names(r.variant, r.families)?;
        let got: Vec<&str> = r.coefficients.iter().map(|c| c.name.as_str()).collect();
        if got != names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Validation(format!(
                "{} coefficients must be {names:?}, got {got:?}",
                r.variant
            )));
        }
        TreatmentModelSpec::new(
            r.variant,
            r.families,
            r.coefficients.iter().map(|c| c.value).collect(),
        )
    }
}

impl From<TreatmentModelSpec> for SpecRecord {
    fn from(s: TreatmentModelSpec) -> Self {
        SpecRecord {
            variant: s.variant,
            families: s.families,
            coefficients: s.named_coefficients(),
        }
    }
}

fn shape_count(f: Family) -> usize {
    f.n_params() - 1
}

fn structure_names(variant: Variant) -> Result<&'static [&'static str]> {
    match variant {
        Variant::V2 => Ok(&["beta01", "beta11", "beta02", "beta12", "z0"]),
        Variant::V3 => Ok(&["beta01", "alpha", "z0", "z1"]),
        Variant::V4 => Ok(&["beta01", "beta11", "beta02", "beta12", "z0", "z1"]),
        other => Err(Error::Usage(format!("{other} has no treatment structure"))),
    }
}

fn coefficient_names(variant: Variant, families: [Family; 2]) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (k, f) in families.iter().enumerate() {
        for (i, p) in f.param_names().iter().enumerate() {
            if i != f.scale_coordinate() {
                names.push(format!("{p}{}", k + 1));
            }
        }
    }
    names.extend(structure_names(variant)?.iter().map(|s| s.to_string()));
    Ok(names)
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: shape coordinates of both components
/// (log scale), then the structure coefficients.
struct Layout {
    variant: Variant,
    families: [Family; 2],
}

impl Layout {
    fn len(&self) -> usize {
        shape_count(self.families[0])
            + shape_count(self.families[1])
            + structure_names(self.variant).map_or(0, |s| s.len())
    }

    fn structure_offset(&self) -> usize {
        shape_count(self.families[0]) + shape_count(self.families[1])
    }

    /// Per-arm unconstrained component vectors and the logit of π₁.
    fn arm(&self, x: &[f64], it: f64) -> ([Vec<f64>; 2], f64) {
        let o = self.structure_offset();
        let s = &x[o..];
        let (scale, z) = match self.variant {
            Variant::V2 => ([s[0] + s[1] * it, s[2] + s[3] * it], s[4]),
            Variant::V3 => ([s[0], s[0] + s[1]], s[2] + s[3] * it),
            _ => ([s[0] + s[1] * it, s[2] + s[3] * it], s[4] + s[5] * it),
        };
        let mut shapes = &x[..o];
        let thetas = [0, 1].map(|k| {
            let f = self.families[k];
            let (mine, rest) = shapes.split_at(shape_count(f));
            shapes = rest;
            let mut theta = mine.to_vec();
            theta.insert(f.scale_coordinate(), scale[k]);
            theta
        });
        (thetas, z)
    }

    fn model(&self, x: &[f64], it: f64) -> Result<MixtureModel> {
        let (thetas, z) = self.arm(x, it);
        let first = self.families[0].from_unconstrained(&thetas[0])?;
        let second = self.families[1].from_unconstrained(&thetas[1])?;
        let pi1 = expit(z);
        if !(pi1 > 0.0 && pi1 < 1.0) {
            return Err(Error::Parameter(format!("mixing weight {pi1} outside (0, 1)")));
        }
        MixtureModel::two(pi1, first, second)
    }

    /// Maps public coefficients to unconstrained ones (logs of the shapes).
    fn to_internal(&self, public: &[f64]) -> Vec<f64> {
        let o = self.structure_offset();
        public
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < o { v.ln() } else { v })
            .collect()
    }

    fn to_public(&self, internal: &[f64]) -> Vec<f64> {
        let o = self.structure_offset();
        internal
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < o { v.exp() } else { v })
            .collect()
    }
}

impl TreatmentModelSpec {
    /// Builds a spec from coefficients in `coefficient_names` order.
    pub fn new(variant: Variant, families: [Family; 2], coefficients: Vec<f64>) -> Result<Self> {
        let names = coefficient_names(variant, families)?;
        if coefficients.len() != names.len() {
            return Err(Error::Parameter(format!(
                "{variant} expects {} coefficients, got {}",
                names.len(),
                coefficients.len()
            )));
        }
        let spec = TreatmentModelSpec {
            variant,
            families,
            coefficients,
        };
        spec.model_for(Arm::Control)?;
        spec.model_for(Arm::Treated)?;
        Ok(spec)
    }

    fn layout(&self) -> Layout {
        Layout {
            variant: self.variant,
            families: self.families,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn names(&self) -> Vec<String> {
        coefficient_names(self.variant, self.families).expect("variant checked on construction")
    }

    pub fn named_coefficients(&self) -> Vec<TreatmentCoefficient> {
        self.names()
            .into_iter()
            .zip(&self.coefficients)
            .map(|(name, &value)| TreatmentCoefficient { name, value })
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names()
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    /// The two-component model for subjects in `arm`.
    pub fn model_for(&self, arm: Arm) -> Result<MixtureModel> {
        let layout = self.layout();
        if self.coefficients.iter().any(|c| !c.is_finite())
            || self.coefficients[..layout.structure_offset()].iter().any(|&c| c <= 0.0)
        {
            return Err(Error::Parameter(format!(
                "invalid {} coefficients {:?}",
                self.variant, self.coefficients
            )));
        }
        layout.model(&layout.to_internal(&self.coefficients), arm.indicator())
    }
}

/// Fits any rung of the ladder. V0 and V1 ignore arms and delegate to
/// [`fit_simple`] and [`em_fit`]; V2–V4 start from the V1 fit with zero
/// treatment effects and maximize the pooled likelihood.
pub fn fit_treatment_model(
    data: &Dataset,
    variant: Variant,
    families: [Family; 2],
    opts: &FitOptions,
) -> Result<FitResult> {
    match variant {
        Variant::V0 => return fit_simple(families[0], data, opts),
        Variant::V1 => return em_fit(families, data, opts),
        _ => {}
    }
    opts.validate()?;
    if !data.has_arms() {
        return Err(Error::Usage(format!("{variant} needs an arm for every observation")));
    }
    let arms = [data.arm(Arm::Control), data.arm(Arm::Treated)];
    for (arm, d) in [Arm::Control, Arm::Treated].iter().zip(&arms) {
        if d.is_empty() {
            return Err(Error::Usage(format!("the {} arm is empty", arm.label())));
        }
        if d.n_events() < MIN_ARM_EVENTS {
            return Err(Error::Fit(format!(
                "the {} arm has {} events; at least {MIN_ARM_EVENTS} are needed",
                arm.label(),
                d.n_events()
            )));
        }
    }

    let base = em_fit(families, data, opts)?;
    let fams = [base.families[0], base.families[1]];
    let layout = Layout { variant, families: fams };
    let x0 = initial_point(&layout, &base.model);
    let preps = [Prepared::new(&arms[0]), Prepared::new(&arms[1])];
    let objective = |x: &[f64]| {
        if x.iter().any(|c| c.abs() > COORD_LIMIT) {
            return f64::INFINITY;
        }
        let mut total = 0.0;
        for (it, prep) in preps.iter().enumerate() {
            let (_, z) = layout.arm(x, it as f64);
            if z.abs() > LOGIT_LIMIT {
                return f64::INFINITY;
            }
            match layout.model(x, it as f64) {
                Ok(m) => total += prep.mixture_loglik(&m),
                Err(_) => return f64::INFINITY,
            }
        }
        if total.is_finite() {
            -total
        } else {
            f64::INFINITY
        }
    };
    let nm = NelderMeadOptions {
        max_evals: 20_000,
        max_restarts: 3,
        ..NelderMeadOptions::default()
    };
    let min = minimize(objective, &x0, &nm);
    if !min.value.is_finite() {
        return Err(Error::Fit(format!("{variant} likelihood is not finite at the V1 start")));
    }
    for it in [0.0, 1.0] {
        let (thetas, _) = layout.arm(&min.x, it);
        for (f, theta) in fams.iter().zip(&thetas) {
            if is_degenerate(*f, theta) {
                return Err(Error::Degenerate(format!(
                    "{variant} {f} component ran to a boundary ({theta:?})"
                )));
            }
        }
    }

    let spec = TreatmentModelSpec {
        variant,
        families: fams,
        coefficients: layout.to_public(&min.x),
    };
    let control = spec.model_for(Arm::Control)?;
    let treated = spec.model_for(Arm::Treated)?;
    let floor = opts.weight_floor;
    let boundary_flag = [&control, &treated].iter().any(|m| {
        let w = m.component(0).weight;
        w < floor || w > 1.0 - floor
    });
    let responsibilities = arm_responsibilities(data, &control, &treated)?;
    let loglik = -min.value;
    let n_params = layout.len();
    Ok(FitResult {
        variant,
        families: fams.to_vec(),
        model: control,
        treatment: Some(spec),
        loglik,
        n_params,
        aic: aic(loglik, n_params),
        responsibilities,
        iterations: min.evals,
        converged: min.converged,
        loglik_trace: vec![base.loglik, loglik],
        boundary_flag,
        start_index: base.start_index,
        seed: opts.seed,
    })
}

/// V1 parameters written in the variant's coordinates with no treatment effect.
fn initial_point(layout: &Layout, v1: &MixtureModel) -> Vec<f64> {
    let thetas: Vec<Vec<f64>> = v1.components().iter().map(|c| c.dist.to_unconstrained()).collect();
    let mut x = Vec::with_capacity(layout.len());
    for (f, theta) in layout.families.iter().zip(&thetas) {
        x.extend(
            theta
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != f.scale_coordinate())
                .map(|(_, v)| *v),
        );
    }
    let s1 = thetas[0][layout.families[0].scale_coordinate()];
    let s2 = thetas[1][layout.families[1].scale_coordinate()];
    let z0 = logit(v1.component(0).weight);
    match layout.variant {
        Variant::V2 => x.extend([s1, 0.0, s2, 0.0, z0]),
        Variant::V3 => x.extend([s1, s2 - s1, z0, 0.0]),
        _ => x.extend([s1, 0.0, s2, 0.0, z0, 0.0]),
    }
    x
}

fn arm_responsibilities(
    data: &Dataset,
    control: &MixtureModel,
    treated: &MixtureModel,
) -> Result<Vec<f64>> {
    let mut terms = [0.0; 2];
    data.observations()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let m = if o.arm == Some(Arm::Treated) { treated } else { control };
            m.weighted_log_terms(o.time, o.time.ln(), o.event, &mut terms);
            let total = crate::mixture::log_sum_exp(terms[0], terms[1]);
            if !total.is_finite() {
                return Err(Error::Numerical {
                    index: i,
                    reason: format!("both components have zero likelihood at t = {}", o.time),
                });
            }
            Ok((terms[0] - total).exp().clamp(0.0, 1.0))
        })
        .collect()
}
