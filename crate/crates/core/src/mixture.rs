//! Finite mixtures `f(t) = Σ πₖ fₖ(t)` over the parametric families.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One weighted component. Serializes as `{weight, family, params}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    #[serde(flatten)]
    pub dist: DistributionSpec,
}

/// An ordered list of weighted components; `m = 1` is a simple model.
///
/// Component 1 is, after [`MixtureModel::canonicalize`], the one with the
/// smallest median (the short-term survivors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Component>", into = "Vec<Component>")]
pub struct MixtureModel {
    components: Vec<Component>,
}

impl TryFrom<Vec<Component>> for MixtureModel {
    type Error = Error;

    fn try_from(components: Vec<Component>) -> Result<Self> {
        MixtureModel::new(components)
    }
}

impl From<MixtureModel> for Vec<Component> {
    fn from(m: MixtureModel) -> Self {
        m.components
    }
}

pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

pub(crate) fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

impl MixtureModel {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Parameter("a mixture needs at least one component".into()));
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::Parameter(format!(
                    "component {} weight {} outside (0, 1]",
                    i + 1,
                    c.weight
                )));
            }
            c.dist.validate()?;
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Parameter(format!("weights sum to {total}, not 1")));
        }
        Ok(MixtureModel { components })
    }

    pub fn single(dist: DistributionSpec) -> Result<Self> {
        Self::new(vec![Component { weight: 1.0, dist }])
    }

    /// Two components with weights `(π₁, 1 − π₁)`.
    pub fn two(pi1: f64, first: DistributionSpec, second: DistributionSpec) -> Result<Self> {
        Self::new(vec![
            Component { weight: pi1, dist: first },
            Component { weight: 1.0 - pi1, dist: second },
        ])
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn component(&self, k: usize) -> &Component {
        &self.components[k]
    }

    /// `ln πₖ + ln fₖ(t)` (event) or `ln πₖ + ln Sₖ(t)` (censored) for each
    /// component, given `ln_t = ln t`.
    pub(crate) fn weighted_log_terms(&self, t: f64, ln_t: f64, event: bool, out: &mut [f64]) {
        for (slot, c) in out.iter_mut().zip(&self.components) {
            let lk = if event {
                c.dist.ln_pdf_unchecked(t, ln_t)
            } else {
                c.dist.ln_survival_unchecked(t, ln_t)
            };
            *slot = c.weight.ln() + lk;
        }
    }

    fn log_combine(&self, t: f64, event: bool) -> f64 {
        let mut terms = vec![0.0; self.m()];
        self.weighted_log_terms(t, t.ln(), event, &mut terms);
        log_sum_exp_slice(&terms)
    }

    pub fn log_pdf(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("density requires finite t > 0, got {t}")));
        }
        Ok(self.log_combine(t, true))
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        Ok(self.log_pdf(t)?.exp())
    }

    pub fn log_survival(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("survival requires t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        if t.is_infinite() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_combine(t, false))
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("survival requires t >= 0, got {t}")));
        }
        let mut s = 0.0;
        for c in &self.components {
            s += c.weight * c.dist.survival(t)?;
        }
        Ok(s.clamp(0.0, 1.0))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("cdf requires t >= 0, got {t}")));
        }
        let mut f = 0.0;
        for c in &self.components {
            f += c.weight * c.dist.cdf(t)?;
        }
        Ok(f.clamp(0.0, 1.0))
    }

    /// Median of the whole mixture (root of `S(t) = 1/2` by bisection).
    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }

    /// Time `t` with `F(t) = p`, by bisection between the component quantiles.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
        }
        if self.m() == 1 {
            return self.components[0].dist.quantile(p);
        }
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for c in &self.components {
            let q = c.dist.quantile(p)?;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        // F is a weighted average of the component cdfs, so the root lies
        // between the smallest and largest component quantile.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Component medians, in stored order.
    pub fn component_medians(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.dist.median().expect("components are validated on construction"))
            .collect()
    }

    /// Permutation that sorts components by ascending median, ties broken by
    /// smaller weight first, then by stored position.
    pub fn canonical_order(&self) -> Vec<usize> {
        let medians = self.component_medians();
        let mut order: Vec<usize> = (0..self.m()).collect();
        order.sort_by(|&a, &b| {
            medians[a]
                .total_cmp(&medians[b])
                .then(self.components[a].weight.total_cmp(&self.components[b].weight))
        });
        order
    }

    pub fn canonicalize(&self) -> MixtureModel {
        let components = self
            .canonical_order()
            .into_iter()
            .map(|i| self.components[i])
            .collect();
        MixtureModel { components }
    }

    /// Draws the latent component index and a survival time.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let mut k = self.m() - 1;
        if self.m() > 1 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    k = i;
                    break;
                }
            }
        }
        (k, self.components[k].dist.sample_one(rng))
    }
}
