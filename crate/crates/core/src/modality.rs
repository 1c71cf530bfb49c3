//! Gaussian kernel density estimates, mode counting, critical bandwidths and
//! the smoothed-bootstrap multimodality test.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::substream;

/// Grid resolution used for every mode count.
pub const GRID_POINTS: usize = 512;
/// Kernel contributions beyond this many bandwidths are dropped (φ(10) ≈ 8e-23).
const KERNEL_CUTOFF: f64 = 10.0;
const RESYNC: usize = 32;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// f̂_h(x) = (1/nh) Σ φ((x − xᵢ)/h) at each grid point.
pub fn kde_density(samples: &[f64], h: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("kernel density needs at least one sample".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("bandwidth must be > 0, got {h}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = INV_SQRT_2PI / (sorted.len() as f64 * h);
    Ok(grid
        .iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&s| s < x - KERNEL_CUTOFF * h);
            let hi = sorted.partition_point(|&s| s <= x + KERNEL_CUTOFF * h);
            let sum: f64 = sorted[lo..hi]
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            sum * norm
        })
        .collect())
}

/// The uniform grid of [`GRID_POINTS`] points over `[min − 3h, max + 3h]`.
pub fn default_grid(samples: &[f64], h: f64) -> Vec<f64> {
    let (min, max) = min_max(samples);
    uniform_grid(min - 3.0 * h, max + 3.0 * h, GRID_POINTS)
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|j| lo + j as f64 * step).collect()
}

fn min_max(samples: &[f64]) -> (f64, f64) {
    samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Kernel sums (unnormalized) on the uniform grid `lo + j·step`.
///
/// Walks outwards from the grid point nearest each sample using
/// `e_{j+1} = e_j·r_j`, `r_{j+1} = r_j·e^{−d²}` with `d = step/h`, which
/// costs two multiplications per grid point instead of an exponential.
/// The recurrence is restarted exactly every [`RESYNC`] points so rounding
/// cannot accumulate.
fn kernel_sums_uniform(samples: &[f64], h: f64, lo: f64, step: f64, n: usize) -> Vec<f64> {
    let d = step / h;
    let q = (-d * d).exp();
    let reach = ((KERNEL_CUTOFF / d).ceil() as usize).min(n);
    let mut out = vec![0.0; n];
    for &x in samples {
        let pos = ((x - lo) / step).round().clamp(0.0, (n - 1) as f64) as usize;
        let u0 = (lo + pos as f64 * step - x) / h;

        let (mut e, mut r) = (0.0, 0.0);
        for (i, slot) in out.iter_mut().take((pos + reach + 1).min(n)).skip(pos).enumerate() {
            if i % RESYNC == 0 {
                let u = u0 + i as f64 * d;
                e = (-0.5 * u * u).exp();
                r = (-u * d - 0.5 * d * d).exp();
            }
            *slot += e;
            e *= r;
            r *= q;
        }
        let (mut e, mut s) = (0.0, 0.0);
        for (i, j) in (pos.saturating_sub(reach)..pos).rev().enumerate() {
            if i % RESYNC == 0 {
                let u = u0 - i as f64 * d;
                e = (-0.5 * u * u).exp();
                s = (u * d - 0.5 * d * d).exp();
            }
            e *= s;
            s *= q;
            out[j] += e;
        }
    }
    out
}

/// Mode count of the KDE at bandwidth `h` on the default grid.
///
/// When `h` is below half the grid spacing the peaks would fall between grid
/// points, so the sample points themselves are added to the grid and the
/// density is evaluated directly.
pub fn modes_at(samples: &[f64], h: f64) -> usize {
    let (min, max) = min_max(samples);
    let lo = min - 3.0 * h;
    let step = (max - min + 6.0 * h) / (GRID_POINTS - 1) as f64;
    if h >= 0.5 * step {
        return count_modes(&kernel_sums_uniform(samples, h, lo, step, GRID_POINTS));
    }
    let mut grid = uniform_grid(lo, max + 3.0 * h, GRID_POINTS);
    grid.extend_from_slice(samples);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    count_modes(&kde_density(samples, h, &grid).expect("bandwidth and samples already checked"))
}

/// Number of strict local maxima. Adjacent values within `1e-12·max` are
/// merged into one plateau; a plateau is a mode when both neighbours are
/// lower. End plateaus are not modes unless the whole input is flat.
pub fn count_modes(values: &[f64]) -> usize {
    if values.is_empty() {
        return 0;
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut levels: Vec<f64> = vec![values[0]];
    for w in values.windows(2) {
        if (w[1] - w[0]).abs() > tol {
            levels.push(w[1]);
        }
    }
    if levels.len() == 1 {
        return 1;
    }
    levels
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2])
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalBandwidth {
    /// h_k; 0 when every sample is identical.
    pub h: f64,
    pub degenerate: bool,
}

/// Smallest bandwidth at which the KDE has at most `k` modes, found by
/// bisection over `[1e-6·range, range]` until `(hi − lo)/hi < tol`.
///
/// The returned value is the upper end of the final bracket, so it always
/// yields at most `k` modes.
pub fn critical_bandwidth(samples: &[f64], k: usize, tol: f64) -> Result<CriticalBandwidth> {
    if samples.is_empty() || samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("samples must be finite and non-empty".into()));
    }
    if k == 0 {
        return Err(Error::Domain("the mode count k must be at least 1".into()));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Domain(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let (min, max) = min_max(samples);
    let range = max - min;
    if range == 0.0 {
        return Ok(CriticalBandwidth { h: 0.0, degenerate: true });
    }
    let mut lo = 1e-6 * range;
    if modes_at(samples, lo) <= k {
        return Ok(CriticalBandwidth { h: lo, degenerate: false });
    }
    let mut hi = range;
    while modes_at(samples, hi) > k {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo) / hi >= tol {
        let mid = 0.5 * (lo + hi);
        if modes_at(samples, mid) <= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalBandwidth { h: hi, degenerate: false })
}

/// Relative precision of the critical bandwidth inside the test.
pub const TEST_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilvermanResult {
    /// Modes allowed under H₀.
    pub k: usize,
    pub h_crit: f64,
    pub n_boot: usize,
    /// Bootstrap samples whose KDE at `h_crit` has more than `k` modes.
    pub n_exceed: usize,
    pub p_value: f64,
    pub calibrated: bool,
    /// Bandwidth multiplier λ_α applied for the calibrated count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibrated_p_value: Option<f64>,
}

/// Bandwidth inflation λ_α for the calibrated k = 1 test, from the rational
/// fit of Hall and York (2001). About 1.13 at α = 0.05.
pub fn hall_york_factor(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let a = alpha;
    let num = 0.940_29 * a.powi(3) - 1.599_14 * a * a + 0.176_95 * a + 0.489_71;
    let den = a.powi(3) - 1.777_93 * a * a + 0.361_62 * a + 0.424_23;
    Ok(num / den)
}

/// Tests H₀: at most `k` modes against more, by smoothed bootstrap.
///
/// Replicate `b` draws from substream `(seed, b)`:
/// `yᵢ = x̄ + (x_I − x̄ + h_k εᵢ)/√(1 + h_k²/σ̂²)`. The p-value is
/// `(1 + exceed)/(B + 1)`. With `calibration = Some(α)` and `k = 1`, a second
/// count at bandwidth `λ_α·h_k` gives the calibrated p-value; the raw p-value
/// is always reported.
pub fn silverman_test(
    samples: &[f64],
    k: usize,
    n_boot: usize,
    seed: u64,
    calibration: Option<f64>,
) -> Result<SilvermanResult> {
    if samples.len() < 10 {
        return Err(Error::Domain(format!(
            "the test needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    if n_boot < 100 {
        return Err(Error::Domain(format!("n_boot must be at least 100, got {n_boot}")));
    }
    let factor = match calibration {
        Some(alpha) if k == 1 => Some(hall_york_factor(alpha)?),
        Some(_) => {
            return Err(Error::Usage("calibration is defined for k = 1 only".into()));
        }
        None => None,
    };
    let cb = critical_bandwidth(samples, k, TEST_TOL)?;
    if cb.degenerate {
        return Err(Error::Degenerate("all samples are identical".into()));
    }
    let h = cb.h;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let shrink = (1.0 + h * h / var).sqrt().recip();

    let counts: Vec<(bool, bool)> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b as u64);
            let y: Vec<f64> = (0..samples.len())
                .map(|_| {
                    let x = samples[rng.random_range(0..samples.len())];
                    let eps: f64 = rng.sample(StandardNormal);
                    mean + (x - mean + h * eps) * shrink
                })
                .collect();
            let raw = modes_at(&y, h) > k;
            let cal = factor.is_some_and(|f| modes_at(&y, f * h) > k);
            (raw, cal)
        })
        .collect();
    let n_exceed = counts.iter().filter(|c| c.0).count();
    let p = |e: usize| (1 + e) as f64 / (n_boot + 1) as f64;
    Ok(SilvermanResult {
        k,
        h_crit: h,
        n_boot,
        n_exceed,
        p_value: p(n_exceed),
        calibrated: factor.is_some(),
        calibration_factor: factor,
        calibrated_p_value: factor.map(|_| p(counts.iter().filter(|c| c.1).count())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityScan {
    pub alpha: f64,
    pub results: Vec<SilvermanResult>,
    /// Smallest k whose p-value exceeds α.
    pub first_non_significant: Option<usize>,
}

/// Runs the test for `k = 1..=k_max` with a common seed.
pub fn modality_scan(
    samples: &[f64],
    k_max: usize,
    n_boot: usize,
    seed: u64,
    alpha: f64,
    calibrate: bool,
) -> Result<ModalityScan> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    let results = (1..=k_max)
        .map(|k| {
            let cal = (calibrate && k == 1).then_some(alpha);
            silverman_test(samples, k, n_boot, seed, cal)
        })
        .collect::<Result<Vec<_>>>()?;
    let first_non_significant = results.iter().find(|r| r.p_value > alpha).map(|r| r.k);
    Ok(ModalityScan {
        alpha,
        results,
        first_non_significant,
    })
}
