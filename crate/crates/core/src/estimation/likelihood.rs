//! Censored log-likelihoods: deaths contribute `ln f(t)`, censored subjects
//! `ln S(t)`.

use crate::dist::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::estimation::data::Dataset;
use crate::mixture::{log_sum_exp_slice, MixtureModel};
use crate::optim::{minimize, NelderMeadOptions};

/// Σ_events ln f(tᵢ) + Σ_censored ln S(tⱼ).
pub fn simple_loglik(spec: &DistributionSpec, data: &Dataset) -> Result<f64> {
    spec.validate()?;
    let mut total = 0.0;
    for (i, o) in data.observations().iter().enumerate() {
        let ln_t = o.time.ln();
        let term = if o.event {
            spec.ln_pdf_unchecked(o.time, ln_t)
        } else {
            spec.ln_survival_unchecked(o.time, ln_t)
        };
        if !term.is_finite() {
            return Err(Error::Numerical {
                index: i,
                reason: format!("log-likelihood term is {term} at t = {}", o.time),
            });
        }
        total += term;
    }
    Ok(total)
}

/// Σ_events ln Σₖ πₖfₖ(tᵢ) + Σ_censored ln Σₖ πₖSₖ(tⱼ), via log-sum-exp.
pub fn mixture_loglik(model: &MixtureModel, data: &Dataset) -> Result<f64> {
    let mut terms = vec![0.0; model.m()];
    let mut total = 0.0;
    for (i, o) in data.observations().iter().enumerate() {
        model.weighted_log_terms(o.time, o.time.ln(), o.event, &mut terms);
        let term = log_sum_exp_slice(&terms);
        if !term.is_finite() {
            return Err(Error::Numerical {
                index: i,
                reason: format!("mixture log-likelihood term is {term} at t = {}", o.time),
            });
        }
        total += term;
    }
    Ok(total)
}

/// Observations in canonical order with `ln t` precomputed.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub time: Vec<f64>,
    pub ln_time: Vec<f64>,
    pub event: Vec<bool>,
    /// `order[j]` is the original index of prepared observation `j`.
    pub order: Vec<usize>,
}

impl Prepared {
    pub fn new(data: &Dataset) -> Self {
        let order = data.canonical_order();
        let obs = data.observations();
        let time: Vec<f64> = order.iter().map(|&i| obs[i].time).collect();
        Prepared {
            ln_time: time.iter().map(|t| t.ln()).collect(),
            event: order.iter().map(|&i| obs[i].event).collect(),
            time,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    /// Reorders values indexed by prepared position back to data order.
    pub fn to_data_order(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for (j, &i) in self.order.iter().enumerate() {
            out[i] = values[j];
        }
        out
    }

    /// Reorders values given in data order into prepared order.
    pub fn from_data_order(&self, values: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&i| values[i]).collect()
    }

    /// Σ wᵢ [δᵢ ln f(tᵢ) + (1 − δᵢ) ln S(tᵢ)]; unit weights when `weights` is `None`.
    pub fn weighted_loglik(&self, spec: &DistributionSpec, weights: Option<&[f64]>) -> f64 {
        let mut total = 0.0;
        for j in 0..self.len() {
            let w = weights.map_or(1.0, |w| w[j]);
            if w == 0.0 {
                continue;
            }
            let term = if self.event[j] {
                spec.ln_pdf_unchecked(self.time[j], self.ln_time[j])
            } else {
                spec.ln_survival_unchecked(self.time[j], self.ln_time[j])
            };
            total += w * term;
        }
        total
    }

    pub fn mixture_loglik(&self, model: &MixtureModel) -> f64 {
        let mut terms = vec![0.0; model.m()];
        let mut total = 0.0;
        for j in 0..self.len() {
            model.weighted_log_terms(self.time[j], self.ln_time[j], self.event[j], &mut terms);
            total += log_sum_exp_slice(&terms);
        }
        total
    }
}

/// Unconstrained coordinates beyond this magnitude are treated as infeasible.
pub(crate) const COORD_LIMIT: f64 = 100.0;
/// |ln k| or |ln σ| beyond this means the likelihood is running off to a
/// boundary (σ → 0, k → ∞).
const DEGENERATE_SHAPE: f64 = 10.0;

/// True when a fitted unconstrained vector sits on the edge of the feasible box
/// or has a shape coordinate that has collapsed or exploded.
pub(crate) fn is_degenerate(family: Family, theta: &[f64]) -> bool {
    theta.iter().enumerate().any(|(i, c)| {
        c.abs() > COORD_LIMIT - 5.0
            || (i != family.scale_coordinate() && c.abs() > DEGENERATE_SHAPE)
    })
}

/// Moment-style starting point for a (weighted) censored fit.
pub(crate) fn starting_point(family: Family, prep: &Prepared, weights: Option<&[f64]>) -> Vec<f64> {
    let mut w_sum = 0.0;
    let mut deaths = 0.0;
    let mut exposure = 0.0;
    let mut log_sum = 0.0;
    let mut log_sq = 0.0;
    for j in 0..prep.len() {
        let w = weights.map_or(1.0, |w| w[j]);
        w_sum += w;
        exposure += w * prep.time[j];
        log_sum += w * prep.ln_time[j];
        log_sq += w * prep.ln_time[j] * prep.ln_time[j];
        if prep.event[j] {
            deaths += w;
        }
    }
    let rate = (deaths.max(1e-3) / exposure).ln();
    let mean_log = log_sum / w_sum;
    let sd_log = (log_sq / w_sum - mean_log * mean_log).max(0.0).sqrt().max(0.1);
    match family {
        Family::Exponential => vec![rate],
        Family::Weibull => vec![0.0, rate],
        // S = 1/(1 + λt) at k = 1: put the median at the mean log time
        Family::LogLogistic => vec![0.0, -mean_log],
        Family::LogNormal => vec![mean_log, sd_log.ln()],
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ComponentFit {
    pub spec: DistributionSpec,
    /// Maximized weighted log-likelihood.
    pub loglik: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Exact weighted MLE where one exists in closed or profiled form. The
/// exponential rate is `D/Σwt`; the Weibull rate is profiled out and the shape
/// solves the (decreasing) profile score in `ln k`.
fn profile_fit(family: Family, prep: &Prepared, weights: Option<&[f64]>) -> Option<Result<ComponentFit>> {
    let w = |j: usize| weights.map_or(1.0, |w| w[j]);
    let d: f64 = (0..prep.len()).filter(|&j| prep.event[j]).map(w).sum();
    let theta = match family {
        Family::Exponential => {
            let exposure: f64 = (0..prep.len()).map(|j| w(j) * prep.time[j]).sum();
            vec![(d / exposure).ln()]
        }
        Family::Weibull => {
            if d <= 0.0 {
                return Some(Err(Error::Degenerate("component has no event mass".into())));
            }
            let l: f64 = (0..prep.len()).filter(|&j| prep.event[j]).map(|j| w(j) * prep.ln_time[j]).sum();
            let top = prep.ln_time.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // returns (score, d score / d ln k, ln Σ w t^k)
            let score = |u: f64| {
                let k = u.exp();
                let (mut b, mut a, mut a2) = (0.0, 0.0, 0.0);
                for j in 0..prep.len() {
                    let wj = w(j);
                    if wj == 0.0 {
                        continue;
                    }
                    let x = prep.ln_time[j];
                    let e = wj * (k * (x - top)).exp();
                    b += e;
                    a += e * x;
                    a2 += e * x * x;
                }
                let mean = a / b;
                let var = (a2 / b - mean * mean).max(0.0);
                let g = d / k + l - d * mean;
                (g, -d / k - d * var * k, b.ln() + k * top)
            };
            let (mut lo, mut hi) = (-DEGENERATE_SHAPE, DEGENERATE_SHAPE);
            if score(lo).0 <= 0.0 || score(hi).0 >= 0.0 {
                return Some(Err(Error::Degenerate(format!(
                    "{family} shape has no interior maximum"
                ))));
            }
            let mut u = 0.0;
            for _ in 0..200 {
                let (g, dg, _) = score(u);
                if g > 0.0 {
                    lo = u;
                } else {
                    hi = u;
                }
                let newton = u - g / dg;
                let next = if newton > lo && newton < hi && dg < 0.0 {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
                let step = (next - u).abs();
                u = next;
                if step < 1e-13 || hi - lo < 1e-13 {
                    break;
                }
            }
            let (_, _, ln_b) = score(u);
            vec![u, d.ln() - ln_b]
        }
        _ => return None,
    };
    Some(finish_fit(family, prep, weights, &theta, 0, true))
}

fn finish_fit(
    family: Family,
    prep: &Prepared,
    weights: Option<&[f64]>,
    theta: &[f64],
    evals: usize,
    converged: bool,
) -> Result<ComponentFit> {
    if theta.iter().any(|c| !c.is_finite()) || is_degenerate(family, theta) {
        return Err(Error::Degenerate(format!(
            "{family} parameters ran to a boundary (unconstrained {theta:?})"
        )));
    }
    let spec = family.from_unconstrained(theta)?;
    let loglik = prep.weighted_loglik(&spec, weights);
    if !loglik.is_finite() {
        return Err(Error::Fit(format!("{family} likelihood is not finite at the optimum")));
    }
    Ok(ComponentFit {
        spec,
        loglik,
        evals,
        converged,
    })
}

/// Maximizes the (weighted) censored log-likelihood of one family.
pub(crate) fn fit_component(
    family: Family,
    prep: &Prepared,
    weights: Option<&[f64]>,
    start: Option<Vec<f64>>,
    nm: &NelderMeadOptions,
) -> Result<ComponentFit> {
    if let Some(fit) = profile_fit(family, prep, weights) {
        return fit;
    }
    let x0 = start.unwrap_or_else(|| starting_point(family, prep, weights));
    let objective = |theta: &[f64]| {
        if theta.iter().any(|c| c.abs() > COORD_LIMIT) {
            return f64::INFINITY;
        }
        match family.from_unconstrained(theta) {
            Ok(spec) => {
                let ll = prep.weighted_loglik(&spec, weights);
                if ll.is_finite() {
                    -ll
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    };
    let min = minimize(objective, &x0, nm);
    if !min.value.is_finite() {
        return Err(Error::Fit(format!(
            "{family} likelihood is not finite anywhere the optimizer searched"
        )));
    }
    if is_degenerate(family, &min.x) {
        return Err(Error::Degenerate(format!(
            "{family} parameters ran to a boundary (unconstrained {:?})",
            min.x
        )));
    }
    Ok(ComponentFit {
        spec: family.from_unconstrained(&min.x)?,
        loglik: -min.value,
        evals: min.evals,
        converged: min.converged,
    })
}
