use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Arm, Dataset, FitResult};
use crate::inference::logrank::{log_rank, LogRankResult};
use crate::mixture::MixtureModel;

/// Which densities are intersected to find the cut-point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutRule {
    /// π₁f₁ = π₂f₂, where the responsibility is 0.5.
    #[default]
    Weighted,
    /// f₁ = f₂.
    Raw,
}

/// Cut-point with the default weighted rule.
pub fn cut_point(model: &MixtureModel) -> Result<f64> {
    cut_point_with(model, CutRule::Weighted)
}

/// Root of `ln(π₁f₁) − ln(π₂f₂)` (or of `ln f₁ − ln f₂`) between the two
/// component medians, by bisection.
pub fn cut_point_with(model: &MixtureModel, rule: CutRule) -> Result<f64> {
    if model.m() != 2 {
        return Err(Error::Usage(format!(
            "a cut-point needs two components, got {}",
            model.m()
        )));
    }
    let c = model.components();
    if c[0] == c[1] || c[0].dist == c[1].dist {
        return Err(Error::NoUniqueCutPoint("the components are identical".into()));
    }
    let offset = match rule {
        CutRule::Weighted => c[0].weight.ln() - c[1].weight.ln(),
        CutRule::Raw => 0.0,
    };
    let g = |t: f64| {
        let lt = t.ln();
        offset + c[0].dist.ln_pdf_unchecked(t, lt) - c[1].dist.ln_pdf_unchecked(t, lt)
    };
    let medians = model.component_medians();
    let (mut lo, mut hi) = (medians[0].min(medians[1]), medians[0].max(medians[1]));
    if lo == hi {
        return Err(Error::NoUniqueCutPoint("the component medians coincide".into()));
    }
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo.is_finite() && g_hi.is_finite()) {
        return Err(Error::NoUniqueCutPoint(
            "a density vanishes at a component median".into(),
        ));
    }
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoUniqueCutPoint(format!(
            "the densities do not cross between the medians {lo} and {hi}"
        )));
    }
    let lo_sign = g_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Short,
    Long,
}

impl Stratum {
    pub fn label(self) -> &'static str {
        match self {
            Stratum::Short => "short",
            Stratum::Long => "long",
        }
    }

    /// Times below the cut-point are short-term; the cut-point itself is long.
    pub fn of(time: f64, cut_point: f64) -> Stratum {
        if time < cut_point {
            Stratum::Short
        } else {
            Stratum::Long
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub cut_point: f64,
    pub labels: Vec<Stratum>,
    pub short_fraction: f64,
}

/// Labels every observation by its time relative to the model's cut-point.
pub fn classify(data: &Dataset, model: &MixtureModel) -> Result<ClassificationResult> {
    classify_at(data, cut_point(model)?)
}

fn classify_at(data: &Dataset, t_star: f64) -> Result<ClassificationResult> {
    let labels: Vec<Stratum> = data
        .observations()
        .iter()
        .map(|o| Stratum::of(o.time, t_star))
        .collect();
    let short = labels.iter().filter(|l| **l == Stratum::Short).count();
    let short_fraction = if labels.is_empty() {
        0.0
    } else {
        short as f64 / labels.len() as f64
    };
    Ok(ClassificationResult {
        cut_point: t_star,
        labels,
        short_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumComparison {
    pub stratum: Stratum,
    pub n_control: usize,
    pub n_treated: usize,
    /// Absent when the stratum was skipped.
    pub result: Option<LogRankResult>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpopComparison {
    pub cut_point: f64,
    pub strata: Vec<StratumComparison>,
}

/// Splits subjects at one common cut-point and compares the arms by log-rank
/// within each stratum. The cut-point comes from the fitted model; for
/// treatment variants that is the control-arm model.
pub fn subpop_treatment_comparison(data: &Dataset, fit: &FitResult) -> Result<SubpopComparison> {
    if !fit.variant.is_mixture() {
        return Err(Error::Usage("stratified comparison needs a mixture fit".into()));
    }
    if !data.has_arms() {
        return Err(Error::Usage("every observation needs an arm".into()));
    }
    let t_star = cut_point(&fit.model)?;
    let strata = [Stratum::Short, Stratum::Long]
        .into_iter()
        .map(|s| {
            let part = data.filter(|o| Stratum::of(o.time, t_star) == s);
            let control = part.arm(Arm::Control);
            let treated = part.arm(Arm::Treated);
            let (result, warning) = if control.is_empty() || treated.is_empty() {
                (
                    None,
                    Some(format!("{} stratum skipped: an arm has no subjects", s.label())),
                )
            } else {
                match log_rank(&control, &treated) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(format!("{} stratum skipped: {e}", s.label()))),
                }
            };
            StratumComparison {
                stratum: s,
                n_control: control.len(),
                n_treated: treated.len(),
                result,
                warning,
            }
        })
        .collect();
    Ok(SubpopComparison {
        cut_point: t_star,
        strata,
    })
}
