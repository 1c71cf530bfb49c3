//! Kaplan–Meier and model survival curves on a common time grid.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{Arm, Dataset, FitResult};
use crate::mixture::MixtureModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    KaplanMeier,
    Model,
    Component,
}

/// `(time, survival)` pairs with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoints {
    pub series: String,
    pub kind: CurveKind,
    pub points: Vec<(f64, f64)>,
}

/// Product-limit estimate at each distinct event time.
pub fn km_estimator(data: &Dataset) -> Result<CurvePoints> {
    if data.n_events() == 0 {
        return Err(Error::Usage("Kaplan-Meier estimate needs at least one event".into()));
    }
    let mut obs: Vec<(f64, bool)> = data.observations().iter().map(|o| (o.time, o.event)).collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk = obs.len();
    let mut s = 1.0;
    let mut points = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut deaths = 0;
        let mut leaving = 0;
        while i < obs.len() && obs[i].0 == t {
            deaths += obs[i].1 as usize;
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            points.push((t, s));
        }
        at_risk -= leaving;
    }
    Ok(CurvePoints {
        series: "km".into(),
        kind: CurveKind::KaplanMeier,
        points,
    })
}

fn km_at(km: &[(f64, f64)], t: f64) -> f64 {
    match km.partition_point(|p| p.0 <= t) {
        0 => 1.0,
        i => km[i - 1].1,
    }
}

/// Parses `start:stop:step` into grid points `start + i·step ≤ stop`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<f64> = match parts.as_slice() {
        [a, b, c] => [a, b, c]
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Usage(format!("grid '{spec}' is not start:stop:step")))?,
        _ => return Err(Error::Usage(format!("grid '{spec}' is not start:stop:step"))),
    };
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start >= 0.0 && stop.is_finite() && step > 0.0 && step.is_finite()) {
        return Err(Error::Usage(format!(
            "grid needs start >= 0, finite stop and step > 0, got '{spec}'"
        )));
    }
    if stop < start {
        return Err(Error::Usage(format!("grid '{spec}' is empty")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 1_000_000 {
        return Err(Error::Usage(format!("grid '{spec}' has more than 10^6 points")));
    }
    // rounding keeps 0.1-style steps free of representation noise
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

fn model_curve(model: &MixtureModel, grid: &[f64], series: String, kind: CurveKind) -> Result<CurvePoints> {
    let points = grid
        .iter()
        .map(|&t| {
            let s = if t == 0.0 { 1.0 } else { model.survival(t)? };
            Ok((t, s))
        })
        .collect::<Result<_>>()?;
    Ok(CurvePoints { series, kind, points })
}

fn model_series(model: &MixtureModel, grid: &[f64], suffix: &str, out: &mut Vec<CurvePoints>) -> Result<()> {
    out.push(model_curve(model, grid, format!("model{suffix}"), CurveKind::Model)?);
    for (k, c) in model.components().iter().enumerate() {
        let single = MixtureModel::single(c.dist)?;
        out.push(model_curve(
            &single,
            grid,
            format!("component{}{suffix}", k + 1),
            CurveKind::Component,
        )?);
    }
    Ok(())
}

/// KM curves (per arm when the data carry arms), the fitted survival curve
/// and each component's own survival curve, all evaluated on `grid`.
pub fn emit_curves(data: &Dataset, fit: &FitResult, grid: &[f64]) -> Result<Vec<CurvePoints>> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(Error::Usage("grid must be non-empty, non-negative and increasing".into()));
    }
    let km_on_grid = |d: &Dataset, series: String| -> Result<CurvePoints> {
        let km = km_estimator(d)?;
        Ok(CurvePoints {
            series,
            kind: CurveKind::KaplanMeier,
            points: grid.iter().map(|&t| (t, km_at(&km.points, t))).collect(),
        })
    };
    let mut out = Vec::new();
    if data.has_arms() {
        for arm in [Arm::Control, Arm::Treated] {
            let part = data.arm(arm);
            if !part.is_empty() {
                out.push(km_on_grid(&part, format!("km_{}", arm.label()))?);
            }
        }
    } else {
        out.push(km_on_grid(data, "km".into())?);
    }
    if fit.treatment.is_some() {
        for arm in [Arm::Control, Arm::Treated] {
            model_series(&fit.model_for(arm)?, grid, &format!("_{}", arm.label()), &mut out)?;
        }
    } else {
        model_series(&fit.model, grid, "", &mut out)?;
    }
    Ok(out)
}

/// Long-format CSV with columns `series,time,survival`.
pub fn write_curves_csv<W: Write>(curves: &[CurvePoints], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series", "time", "survival"])?;
    for c in curves {
        for &(t, s) in &c.points {
            w.write_record([c.series.as_str(), &format!("{t}"), &format!("{s}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;
    use crate::estimation::{fit_simple, FitOptions};
    use crate::dist::Family;

    #[test]
    fn km_hand_examples() {
        let d = Dataset::from_times(&[1.0, 2.0, 3.0], &[true; 3]).unwrap();
        let km = km_estimator(&d).unwrap();
        let want = [2.0 / 3.0, 1.0 / 3.0, 0.0];
        for (p, w) in km.points.iter().zip(want) {
            assert!((p.1 - w).abs() < 1e-12);
        }
        // censored at 2: S(3) = 2/3 · 0 after the only remaining subject dies
        let d = Dataset::from_times(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, false]).unwrap();
        let km = km_estimator(&d).unwrap();
        assert_eq!(km.points.len(), 2);
        assert!((km.points[0].1 - 0.75).abs() < 1e-12);
        assert!((km.points[1].1 - 0.375).abs() < 1e-12);
        let none = Dataset::from_times(&[1.0], &[false]).unwrap();
        assert!(km_estimator(&none).is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = parse_grid("0:0.3:0.1").unwrap();
        assert_eq!(g, vec![0.0, 0.1, 0.2, 0.3]);
        assert!(parse_grid("2:1:0.5").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn curves_start_at_one_and_single_model_matches_component() {
        let e = DistributionSpec::Exponential { rate: 0.3 };
        let times = e.sample(200, &mut crate::stream::substream(4, 0)).unwrap();
        let d = Dataset::from_times(&times, &[true; 200]).unwrap();
        let fit = fit_simple(Family::Exponential, &d, &FitOptions::default()).unwrap();
        let grid = parse_grid("0:10:0.5").unwrap();
        let curves = emit_curves(&d, &fit, &grid).unwrap();
        let names: Vec<_> = curves.iter().map(|c| c.series.as_str()).collect();
        assert_eq!(names, ["km", "model", "component1"]);
        for c in &curves {
            assert_eq!(c.points[0], (0.0, 1.0));
            assert!(c.points.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 <= w[0].1));
        }
        assert_eq!(curves[1].points, curves[2].points);
        let mut out = Vec::new();
        write_curves_csv(&curves, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("series,time,survival\nkm,0,1\n"));
    }
}
