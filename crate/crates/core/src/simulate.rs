//! Seeded synthetic survival data from simple or mixture models.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Arm, Dataset, Observation};
use crate::mixture::MixtureModel;
use crate::stream::substream;

/// Independent random censoring applied before any administrative cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RandomCensoring {
    #[default]
    None,
    Exponential {
        rate: f64,
    },
    Uniform {
        max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CensoringSpec {
    #[serde(default)]
    pub random: RandomCensoring,
    /// End of follow-up; applied last.
    #[serde(default)]
    pub administrative: Option<f64>,
}

impl CensoringSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn administrative(cutoff: f64) -> Self {
        CensoringSpec {
            random: RandomCensoring::None,
            administrative: Some(cutoff),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::Parameter(format!("censoring {what} must be finite and > 0, got {v}")))
        };
        match self.random {
            RandomCensoring::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                return bad("rate", rate)
            }
            RandomCensoring::Uniform { max } if !(max > 0.0 && max.is_finite()) => {
                return bad("maximum", max)
            }
            _ => {}
        }
        match self.administrative {
            Some(c) if !(c > 0.0 && c.is_finite()) => bad("cutoff", c),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub control_model: MixtureModel,
    pub treated_model: MixtureModel,
    pub n_control: usize,
    pub n_treated: usize,
    #[serde(default)]
    pub censoring: CensoringSpec,
    #[serde(default)]
    pub seed: u64,
}

/// `n` subjects from `model`. Each subject draws its component, then its
/// survival time, then its random censoring time, in that order. The latent
/// component is kept in [`Observation::component`].
pub fn simulate_arm<R: Rng + ?Sized>(
    model: &MixtureModel,
    n: usize,
    censoring: &CensoringSpec,
    rng: &mut R,
) -> Result<Dataset> {
    censoring.validate()?;
    let exp = match censoring.random {
        RandomCensoring::Exponential { rate } => {
            Some(Exp::new(rate).map_err(|e| Error::Parameter(e.to_string()))?)
        }
        _ => None,
    };
    let uniform = match censoring.random {
        RandomCensoring::Uniform { max } => {
            Some(Uniform::new(0.0, max).map_err(|e| Error::Parameter(e.to_string()))?)
        }
        _ => None,
    };
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, t) = model.sample_one(rng);
        let mut c = f64::INFINITY;
        if let Some(e) = &exp {
            c = e.sample(rng);
        }
        if let Some(u) = &uniform {
            // a zero draw would make a zero follow-up time
            c = u.sample(rng).max(f64::MIN_POSITIVE);
        }
        let mut time = t.min(c);
        let mut event = t <= c;
        if let Some(cutoff) = censoring.administrative {
            if time >= cutoff {
                time = cutoff;
                event = false;
            }
        }
        obs.push(Observation {
            time,
            event,
            arm: None,
            component: Some(k),
        });
    }
    Dataset::new(obs)
}

/// Control subjects first, then treated. Arm `a` draws from substream
/// `(seed, a)`, so changing one arm's size leaves the other arm unchanged.
pub fn simulate_trial(spec: &TrialSpec) -> Result<Dataset> {
    let mut out = Dataset::default();
    for (arm, model, n) in [
        (Arm::Control, &spec.control_model, spec.n_control),
        (Arm::Treated, &spec.treated_model, spec.n_treated),
    ] {
        let mut rng = substream(spec.seed, arm.index() as u64);
        let part = simulate_arm(model, n, &spec.censoring, &mut rng)?;
        for mut o in part.observations().iter().copied() {
            o.arm = Some(arm);
            out.push(o)?;
        }
    }
    Ok(out)
}
