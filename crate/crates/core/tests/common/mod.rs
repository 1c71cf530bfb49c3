#![allow(dead_code)]

use mixsurv::{DistributionSpec, MixtureModel};
use proptest::prelude::*;

pub fn weibull(median: f64, shape: f64) -> DistributionSpec {
    DistributionSpec::Weibull {
        shape,
        rate: std::f64::consts::LN_2 / median.powf(shape),
    }
}

pub fn spec_strategy() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (0.02..2.0f64).prop_map(|rate| DistributionSpec::Exponential { rate }),
        (0.4..4.0f64, 0.001..1.0f64).prop_map(|(shape, rate)| DistributionSpec::Weibull { shape, rate }),
        (1.0..4.0f64, 0.001..1.0f64).prop_map(|(shape, rate)| DistributionSpec::LogLogistic { shape, rate }),
        (-1.0..3.5f64, 0.2..1.5f64).prop_map(|(mu, sigma)| DistributionSpec::LogNormal { mu, sigma }),
    ]
}

pub fn two_component_strategy() -> impl Strategy<Value = MixtureModel> {
    (0.1..0.9f64, spec_strategy(), spec_strategy())
        .prop_map(|(pi1, a, b)| MixtureModel::two(pi1, a, b).unwrap())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// ∫_lo^hi pdf(t) dt by adaptive Simpson in s = ln t.
pub fn integrate(pdf: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let g = |s: f64| {
        let t = s.exp();
        pdf(t) * t
    };
    let (a, b) = (lo.ln(), hi.ln());
    let pieces = 64;
    let step = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * step, a + (i + 1) as f64 * step);
            let (f0, fm, f1) = (g(x0), g(0.5 * (x0 + x1)), g(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson(&g, x0, x1, f0, fm, f1, whole, 1e-12, 40)
        })
        .sum()
}
