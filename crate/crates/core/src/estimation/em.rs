//! EM for two-component mixtures under right censoring.
//!
//! Censored subjects enter both steps through survival functions: the E-step
//! uses `π₁S₁/(π₁S₁ + π₂S₂)` and the M-step adds ẑ-weighted `ln S` terms.
//! Component 2 is fitted with the complementary weights `1 − ẑ`.

use rand::Rng;
use rayon::prelude::*;

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::estimation::data::Dataset;
use crate::estimation::likelihood::{fit_component, Prepared};
use crate::estimation::{aic, FitOptions, FitResult, Variant};
use crate::mixture::{MixtureModel, log_sum_exp};
use crate::optim::NelderMeadOptions;
use crate::stream::substream;

/// A component needs at least this much responsibility mass to be fitted.
const MIN_COMPONENT_MASS: f64 = 3.0;

/// ẑᵢ for every observation, in data order.
pub fn e_step(model: &MixtureModel, data: &Dataset) -> Result<Vec<f64>> {
    require_two(model)?;
    let mut terms = [0.0; 2];
    data.observations()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            model.weighted_log_terms(o.time, o.time.ln(), o.event, &mut terms);
            responsibility(terms).ok_or_else(|| Error::Numerical {
                index: i,
                reason: format!("both components have zero likelihood at t = {}", o.time),
            })
        })
        .collect()
}

fn require_two(model: &MixtureModel) -> Result<()> {
    if model.m() != 2 {
        return Err(Error::Usage(format!(
            "EM needs a two-component model, got {}",
            model.m()
        )));
    }
    Ok(())
}

/// `π₁g₁ / (π₁g₁ + π₂g₂)` from the two log terms.
fn responsibility(terms: [f64; 2]) -> Option<f64> {
    let total = log_sum_exp(terms[0], terms[1]);
    if !total.is_finite() {
        return None;
    }
    let z = (terms[0] - total).exp();
    Some(z.clamp(0.0, 1.0))
}

/// One M-step: `π₁ = mean(ẑ)` clamped to `[floor, 1 − floor]`, each component
/// maximizing its weighted censored log-likelihood.
pub fn m_step(
    data: &Dataset,
    responsibilities: &[f64],
    families: [Family; 2],
    opts: &FitOptions,
) -> Result<MixtureModel> {
    opts.validate()?;
    if responsibilities.len() != data.len() {
        return Err(Error::Usage(format!(
            "{} responsibilities for {} observations",
            responsibilities.len(),
            data.len()
        )));
    }
    if responsibilities.iter().any(|z| !(0.0..=1.0).contains(z)) {
        return Err(Error::Domain("responsibilities must lie in [0, 1]".into()));
    }
    let prep = Prepared::new(data);
    let z = prep.from_data_order(responsibilities);
    let state = maximize(&prep, &z, families, None, opts.weight_floor, &NelderMeadOptions::default())?;
    Ok(state.model)
}

#[derive(Debug, Clone)]
struct MState {
    model: MixtureModel,
    theta: [Vec<f64>; 2],
    clamped: bool,
}

fn maximize(
    prep: &Prepared,
    z: &[f64],
    families: [Family; 2],
    warm: Option<&[Vec<f64>; 2]>,
    floor: f64,
    nm: &NelderMeadOptions,
) -> Result<MState> {
    let n = prep.len() as f64;
    let mass1: f64 = z.iter().sum();
    let mass2 = n - mass1;
    for (k, mass) in [mass1, mass2].into_iter().enumerate() {
        if mass < MIN_COMPONENT_MASS {
            return Err(Error::Degenerate(format!(
                "component {} carries responsibility mass {mass:.3} < {MIN_COMPONENT_MASS}",
                k + 1
            )));
        }
    }
    let raw_pi = mass1 / n;
    let pi1 = raw_pi.clamp(floor, 1.0 - floor);
    let clamped = pi1 != raw_pi;

    let w2: Vec<f64> = z.iter().map(|v| 1.0 - v).collect();
    let c1 = fit_component(families[0], prep, Some(z), warm.map(|w| w[0].clone()), nm)?;
    let c2 = fit_component(families[1], prep, Some(&w2), warm.map(|w| w[1].clone()), nm)?;
    Ok(MState {
        theta: [c1.spec.to_unconstrained(), c2.spec.to_unconstrained()],
        model: MixtureModel::two(pi1, c1.spec, c2.spec)?,
        clamped,
    })
}

/// Responsibilities in prepared order; `None` if some point has zero
/// likelihood under both components.
fn e_step_prepared(model: &MixtureModel, prep: &Prepared) -> Option<Vec<f64>> {
    let mut terms = [0.0; 2];
    (0..prep.len())
        .map(|j| {
            model.weighted_log_terms(prep.time[j], prep.ln_time[j], prep.event[j], &mut terms);
            responsibility(terms)
        })
        .collect()
}

#[derive(Debug, Clone)]
struct StartOutcome {
    index: usize,
    model: MixtureModel,
    loglik: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    boundary: bool,
}

fn initial_assignment(prep: &Prepared, seed: u64, start: usize) -> Vec<f64> {
    if start == 0 {
        let mut sorted = prep.time.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        prep.time.iter().map(|&t| if t < median { 1.0 } else { 0.0 }).collect()
    } else {
        let mut rng = substream(seed, start as u64);
        (0..prep.len())
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
            .collect()
    }
}

fn run_start(
    prep: &Prepared,
    families: [Family; 2],
    opts: &FitOptions,
    start: usize,
) -> Result<StartOutcome> {
    let z0 = initial_assignment(prep, opts.seed, start);
    let cold = NelderMeadOptions::default();
    let warm_nm = NelderMeadOptions {
        max_restarts: 0,
        ..NelderMeadOptions::default()
    };
    let mut state = maximize(prep, &z0, families, None, opts.weight_floor, &cold)?;
    let mut loglik = prep.mixture_loglik(&state.model);
    if !loglik.is_finite() {
        return Err(Error::Fit(format!("start {start}: initial log-likelihood is not finite")));
    }
    let mut trace = vec![loglik];
    let mut boundary = state.clamped;
    let mut converged = false;
    let mut iterations = 1;

    while iterations < opts.max_iter {
        let Some(z) = e_step_prepared(&state.model, prep) else {
            break;
        };
        let next = match maximize(prep, &z, families, Some(&state.theta), opts.weight_floor, &warm_nm) {
            Ok(s) => s,
            Err(Error::Degenerate(_)) => {
                boundary = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let next_ll = prep.mixture_loglik(&next.model);
        if !next_ll.is_finite() {
            break;
        }
        iterations += 1;
        let delta = next_ll - loglik;
        state = next;
        loglik = next_ll;
        trace.push(loglik);
        boundary |= state.clamped;
        if delta.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(StartOutcome {
        index: start,
        model: state.model,
        loglik,
        trace,
        iterations,
        converged,
        boundary,
    })
}

/// Multi-start EM. Start 0 splits at the empirical median; the others draw
/// Bernoulli(0.5) labels from substream `(seed, start)`. The best final
/// log-likelihood wins, ties going to the lower start index.
pub fn em_fit(families: [Family; 2], data: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    if data.len() < 10 {
        return Err(Error::Fit(format!("EM needs at least 10 observations, got {}", data.len())));
    }
    if data.n_events() < 2 {
        return Err(Error::Fit("EM needs at least 2 observed events".into()));
    }
    let prep = Prepared::new(data);
    let outcomes: Vec<Result<StartOutcome>> = (0..opts.n_starts)
        .into_par_iter()
        .map(|s| run_start(&prep, families, opts, s))
        .collect();

    let mut best: Option<StartOutcome> = None;
    let mut failures = Vec::new();
    for (s, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                if best.as_ref().is_none_or(|b| o.loglik > b.loglik) {
                    best = Some(o);
                }
            }
            Err(e) => failures.push(format!("start {s}: {e}")),
        }
    }
    let Some(best) = best else {
        return Err(Error::Fit(format!("all EM starts failed ({})", failures.join("; "))));
    };

    let model = best.model.canonicalize();
    let families = model.components().iter().map(|c| c.dist.family()).collect();
    let z = e_step_prepared(&model, &prep).ok_or_else(|| Error::Numerical {
        index: 0,
        reason: "final responsibilities are undefined".into(),
    })?;
    let n_params = model.components().iter().map(|c| c.dist.family().n_params()).sum::<usize>() + 1;
    Ok(FitResult {
        variant: Variant::V1,
        families,
        aic: aic(best.loglik, n_params),
        model,
        treatment: None,
        loglik: best.loglik,
        n_params,
        responsibilities: prep.to_data_order(&z),
        iterations: best.iterations,
        converged: best.converged,
        loglik_trace: best.trace,
        boundary_flag: best.boundary,
        start_index: best.index,
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;

    fn exp(rate: f64) -> DistributionSpec {
        DistributionSpec::Exponential { rate }
    }

    fn sample_mixture(model: &MixtureModel, n: usize, seed: u64) -> Dataset {
        let mut rng = substream(seed, 0);
        let times: Vec<f64> = (0..n).map(|_| model.sample_one(&mut rng).1).collect();
        Dataset::from_times(&times, &vec![true; n]).unwrap()
    }

    #[test]
    fn e_step_examples() {
        let same = MixtureModel::two(0.5, exp(0.3), exp(0.3)).unwrap();
        let d = Dataset::from_times(&[0.5, 4.0, 10.0], &[true, false, true]).unwrap();
        for z in e_step(&same, &d).unwrap() {
            assert!((z - 0.5).abs() < 1e-15);
        }

        let m = MixtureModel::two(0.5, exp(1.0), exp(0.01)).unwrap();
        let one = Dataset::from_times(&[10.0], &[true]).unwrap();
        let z = e_step(&m, &one).unwrap()[0];
        let a = (-10.0f64).exp();
        let want = a / (a + 0.01 * (-0.1f64).exp());
        assert!((z - want).abs() < 1e-15);
        assert!((z - 0.004_992_418_902_505_087).abs() < 1e-15);

        let heavy = MixtureModel::two(1.0 - 1e-12, exp(1.0), exp(0.01)).unwrap();
        assert!(e_step(&heavy, &one).unwrap()[0] > 0.99);
    }

    #[test]
    fn e_step_uses_survival_for_censored() {
        let m = MixtureModel::two(0.4, exp(0.5), exp(0.05)).unwrap();
        let d = Dataset::from_times(&[3.0], &[false]).unwrap();
        let s1 = 0.4 * (-1.5f64).exp();
        let s2 = 0.6 * (-0.15f64).exp();
        assert!((e_step(&m, &d).unwrap()[0] - s1 / (s1 + s2)).abs() < 1e-15);
    }

    #[test]
    fn m_step_exponential_oracle() {
        let d = Dataset::from_times(
            &[0.4, 1.1, 2.5, 3.3, 4.8, 7.0, 9.9, 14.0, 21.0, 40.0, 55.0, 70.0],
            &[true, true, true, false, true, true, false, true, true, false, true, false],
        )
        .unwrap();
        let z = [0.95, 0.9, 0.85, 0.7, 0.6, 0.5, 0.45, 0.3, 0.2, 0.1, 0.05, 0.02];
        let model = m_step(&d, &z, [Family::Exponential; 2], &FitOptions::default()).unwrap();
        let obs = d.observations();
        let oracle = |w: &dyn Fn(usize) -> f64| {
            let num: f64 = (0..obs.len()).filter(|&i| obs[i].event).map(w).sum();
            let den: f64 = (0..obs.len()).map(|i| w(i) * obs[i].time).sum();
            num / den
        };
        let l1 = oracle(&|i| z[i]);
        let l2 = oracle(&|i| 1.0 - z[i]);
        assert!((model.component(0).dist.params()[0] - l1).abs() < 1e-6);
        assert!((model.component(1).dist.params()[0] - l2).abs() < 1e-6);
        let pi: f64 = z.iter().sum::<f64>() / z.len() as f64;
        assert!((model.component(0).weight - pi).abs() < 1e-15);
    }

    #[test]
    fn m_step_symmetric_responsibilities() {
        let d = Dataset::from_times(&[1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0], &[true; 7]).unwrap();
        let model = m_step(&d, &[0.5; 7], [Family::Weibull; 2], &FitOptions::default()).unwrap();
        assert!((model.component(0).weight - 0.5).abs() < 1e-15);
        let (a, b) = (model.component(0).dist.params(), model.component(1).dist.params());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn m_step_rejects_an_empty_component() {
        let d = Dataset::from_times(&[1.0, 2.0, 3.0, 5.0, 8.0], &[true; 5]).unwrap();
        match m_step(&d, &[1.0; 5], [Family::Exponential; 2], &FitOptions::default()) {
            Err(Error::Degenerate(_)) => {}
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn m_step_clamps_the_weight() {
        let n = 4000;
        let times: Vec<f64> = (1..=n).map(|i| i as f64 / 100.0).collect();
        let d = Dataset::from_times(&times, &vec![true; n]).unwrap();
        let mut z = vec![1.0; n];
        z[..3].iter_mut().for_each(|v| *v = 0.0);
        let opts = FitOptions { weight_floor: 0.01, ..Default::default() };
        let model = m_step(&d, &z, [Family::Exponential; 2], &opts).unwrap();
        assert_eq!(model.component(0).weight, 0.99);
    }

    #[test]
    fn recovers_separated_exponentials() {
        let truth = MixtureModel::two(0.5, exp(1.0), exp(0.01)).unwrap();
        let d = sample_mixture(&truth, 2000, 3);
        let opts = FitOptions { n_starts: 3, ..Default::default() };
        let fit = em_fit([Family::Exponential; 2], &d, &opts).unwrap();
        let pi = fit.model.component(0).weight;
        assert!((0.45..=0.55).contains(&pi), "pi = {pi}");
        let r1 = fit.model.component(0).dist.params()[0];
        let r2 = fit.model.component(1).dist.params()[0];
        assert!((r1 / 1.0 - 1.0).abs() < 0.1, "rate1 = {r1}");
        assert!((r2 / 0.01 - 1.0).abs() < 0.1, "rate2 = {r2}");
        assert_eq!(fit.n_params, 3);
        assert_eq!(fit.aic, -2.0 * fit.loglik + 6.0);
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
    }

    #[test]
    fn responsibilities_follow_canonical_labels() {
        let truth = MixtureModel::two(0.4, exp(0.02), exp(0.8)).unwrap();
        let d = sample_mixture(&truth, 600, 8);
        let opts = FitOptions { n_starts: 2, ..Default::default() };
        let fit = em_fit([Family::Exponential; 2], &d, &opts).unwrap();
        let z = e_step(&fit.model, &d).unwrap();
        for (a, b) in z.iter().zip(&fit.responsibilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let truth = MixtureModel::two(0.5, exp(0.5), exp(0.05)).unwrap();
        let d = sample_mixture(&truth, 300, 21);
        let mut rev = d.observations().to_vec();
        rev.reverse();
        let r = Dataset::new(rev).unwrap();
        let opts = FitOptions { n_starts: 2, ..Default::default() };
        let a = em_fit([Family::Exponential, Family::Weibull], &d, &opts).unwrap();
        let b = em_fit([Family::Exponential, Family::Weibull], &r, &opts).unwrap();
        assert_eq!(a.loglik, b.loglik);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn too_little_data() {
        let d = Dataset::from_times(&[1.0, 2.0, 3.0], &[true; 3]).unwrap();
        assert!(matches!(
            em_fit([Family::Exponential; 2], &d, &FitOptions::default()),
            Err(Error::Fit(_))
        ));
    }
}
