//! Derivative-free minimization by the Nelder–Mead simplex method.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Stop a round once every vertex is within `xtol` (max-norm) of the best.
    pub xtol: f64,
    /// Total objective evaluations allowed across all rounds.
    pub max_evals: usize,
    /// Edge length of the initial (and every restart) simplex.
    pub initial_step: f64,
    /// Fresh simplices built around the incumbent after a round converges.
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            xtol: 1e-8,
            max_evals: 2000,
            initial_step: 0.1,
            max_restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
    pub restarts: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Counter<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` starting from `x0`. Non-finite objective values are treated
/// as `+∞`, so the objective may signal an infeasible point that way.
///
/// The returned point is never worse than `x0`.
pub fn minimize<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut counter = Counter { f, evals: 0 };
    let mut best_x = x0.to_vec();
    let mut best_f = counter.eval(x0);
    if x0.is_empty() {
        return Minimum {
            x: best_x,
            value: best_f,
            evals: counter.evals,
            converged: true,
            restarts: 0,
        };
    }

    let mut restarts = 0;
    loop {
        let (x, fx, converged) = run_round(&mut counter, &best_x, best_f, opts);
        let improvement = best_f - fx;
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        let budget_left = counter.evals < opts.max_evals;
        let stagnant = improvement <= 1e-12 * (1.0 + best_f.abs());
        if !converged || !budget_left {
            return Minimum {
                x: best_x,
                value: best_f,
                evals: counter.evals,
                converged,
                restarts,
            };
        }
        if (stagnant && restarts > 0) || restarts >= opts.max_restarts {
            return Minimum {
                x: best_x,
                value: best_f,
                evals: counter.evals,
                converged: true,
                restarts,
            };
        }
        restarts += 1;
    }
}

fn run_round<F: FnMut(&[f64]) -> f64>(
    counter: &mut Counter<F>,
    start: &[f64],
    start_f: f64,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    values.push(start_f);
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        values.push(counter.eval(&v));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let diameter = order[1..]
            .iter()
            .flat_map(|&i| simplex[i].iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter <= opts.xtol {
            return (simplex[best].clone(), values[best], true);
        }
        if counter.evals >= opts.max_evals {
            return (simplex[best].clone(), values[best], false);
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        for j in 0..n {
            trial[j] = centroid[j] + REFLECT * (centroid[j] - simplex[worst][j]);
        }
        let f_reflect = counter.eval(&trial);

        if f_reflect < values[best] {
            for j in 0..n {
                trial2[j] = centroid[j] + EXPAND * (trial[j] - centroid[j]);
            }
            let f_expand = counter.eval(&trial2);
            if f_expand < f_reflect {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_expand;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[second_worst] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = f_reflect;
            continue;
        }

        let (f_contract, accept) = if f_reflect < values[worst] {
            for j in 0..n {
                trial2[j] = centroid[j] + CONTRACT * (trial[j] - centroid[j]);
            }
            let fc = counter.eval(&trial2);
            (fc, fc <= f_reflect)
        } else {
            for j in 0..n {
                trial2[j] = centroid[j] + CONTRACT * (simplex[worst][j] - centroid[j]);
            }
            let fc = counter.eval(&trial2);
            (fc, fc < values[worst])
        };
        if accept {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = f_contract;
            continue;
        }

        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + SHRINK * (*x - a);
            }
            values[i] = counter.eval(&simplex[i]);
        }
    }
}
