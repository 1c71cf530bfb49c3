mod common;

use std::process::Command;

use common::weibull;
use mixsurv::io::{emit_curves, km_estimator, parse_grid, read_csv, read_fit_json, write_csv, write_fit_json};
use mixsurv::simulate::{simulate_arm, simulate_trial, CensoringSpec, TrialSpec};
use mixsurv::stream::substream;
use mixsurv::{em_fit, Arm, Dataset, Error, Family, FitOptions, FitResult, MixtureModel, Observation, Variant};
use proptest::prelude::*;

fn table_model() -> MixtureModel {
    MixtureModel::two(0.55, weibull(7.28, 2.0), weibull(27.29, 3.0)).unwrap()
}

fn sup_distance(km: &[(f64, f64)], model: &MixtureModel) -> f64 {
    // the KM step function jumps at each point; check both sides of each jump
    let mut prev = 1.0;
    let mut worst: f64 = 0.0;
    for &(t, s) in km {
        let m = model.survival(t).unwrap();
        worst = worst.max((prev - m).abs()).max((s - m).abs());
        prev = s;
    }
    worst
}

#[test]
fn identical_specs_give_identical_trials() {
    let spec = TrialSpec {
        control_model: table_model(),
        treated_model: table_model(),
        n_control: 40,
        n_treated: 80,
        censoring: CensoringSpec::administrative(30.0),
        seed: 77,
    };
    let a = simulate_trial(&spec).unwrap();
    let b = simulate_trial(&spec).unwrap();
    assert!(a
        .observations()
        .iter()
        .zip(b.observations())
        .all(|(x, y)| x.time.to_bits() == y.time.to_bits() && x.event == y.event && x.arm == y.arm));
}

#[test]
fn administrative_censoring_fraction() {
    let model = table_model();
    for c in [5.0, 20.0, 40.0] {
        let n = 5000;
        let d = simulate_arm(&model, n, &CensoringSpec::administrative(c), &mut substream(c as u64, 0)).unwrap();
        let frac = d.n_censored() as f64 / n as f64;
        assert!((frac - model.survival(c).unwrap()).abs() < 3.0 / (n as f64).sqrt(), "c={c}: {frac}");
    }
}

#[test]
fn uncensored_km_tracks_the_generator() {
    let model = table_model();
    let d = simulate_arm(&model, 10_000, &CensoringSpec::none(), &mut substream(12, 0)).unwrap();
    let km = km_estimator(&d).unwrap();
    assert!(sup_distance(&km.points, &model) < 0.02);
}

#[test]
fn curves_against_the_generating_model() {
    let model = table_model();
    let d = simulate_arm(&model, 2000, &CensoringSpec::administrative(40.0), &mut substream(13, 0)).unwrap();
    let fit = em_fit([Family::Weibull; 2], &d, &FitOptions { n_starts: 3, ..FitOptions::default() }).unwrap();
    let curves = emit_curves(&d, &fit, &parse_grid("0:40:0.25").unwrap()).unwrap();
    let km = &curves[0];
    assert_eq!(km.series, "km");
    let worst = km
        .points
        .iter()
        .map(|&(t, s)| (s - model.survival(t).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
    for c in &curves {
        assert_eq!(c.points[0], (0.0, 1.0));
        assert!(c.points.windows(2).all(|w| w[1].1 <= w[0].1));
    }
    assert!(matches!(parse_grid("5:1:1"), Err(Error::Usage(_))));
}

#[test]
fn table_shaped_payload_reports_its_medians() {
    let shapes = [1.4f64, 2.2];
    let meds = [7.28f64, 27.29];
    let rate = |k: usize| std::f64::consts::LN_2 / meds[k].powf(shapes[k]);
    let json = format!(
        r#"{{"schema_version": 1, "variant": 1, "families": ["weibull", "weibull"],
            "components": [{{"weight": 0.55, "family": "weibull", "params": [{}, {}]}},
                           {{"weight": 0.45, "family": "weibull", "params": [{}, {}]}}],
            "loglik": -1221.0, "n_params": 5, "aic": 2452.0, "converged": true,
            "iterations": 40, "seed": 0, "boundary_flag": false}}"#,
        shapes[0],
        rate(0),
        shapes[1],
        rate(1)
    );
    let fit = read_fit_json(json.as_bytes()).unwrap();
    let got = fit.model.component_medians();
    assert!((got[0] - 7.28).abs() < 1e-9 && (got[1] - 27.29).abs() < 1e-9);
    assert_eq!(fit.model.weights(), vec![0.55, 0.45]);
    let bad = json.replace("\"weight\": 0.45", "\"weight\": 0.35");
    assert!(matches!(read_fit_json(bad.as_bytes()), Err(Error::Validation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trips(rows in prop::collection::vec((1e-6..1e4f64, any::<bool>(), any::<bool>(), 0usize..2), 1..40)) {
        let obs: Vec<Observation> = rows
            .iter()
            .map(|&(t, e, a, k)| Observation {
                time: t,
                event: e,
                arm: Some(if a { Arm::Treated } else { Arm::Control }),
                component: Some(k),
            })
            .collect();
        let d = Dataset::new(obs).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf, true).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &d);
        let mut again = Vec::new();
        write_csv(&back, &mut again, true).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn ten_digit_decimals_survive(mantissa in 1_000_000_000u64..10_000_000_000, exp in -4i32..4) {
        let text = format!("{}e{}", mantissa as f64 / 1e9, exp);
        let src = format!("time,event\n{text},1\n");
        let d = read_csv(src.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf, false).unwrap();
        let written = String::from_utf8(buf).unwrap();
        let value: f64 = written.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        let orig: f64 = text.parse().unwrap();
        prop_assert_eq!(value, orig);
    }

    #[test]
    fn fit_json_round_trips(ll in -1e6..0.0f64, pi1 in 0.001..0.999f64, k1 in 0.1..10.0f64, r1 in 1e-8..10.0f64,
                            mu in -5.0..5.0f64, sigma in 0.05..5.0f64, seed in any::<u64>(), iters in 0usize..10_000) {
        let model = MixtureModel::two(
            pi1,
            mixsurv::DistributionSpec::Weibull { shape: k1, rate: r1 },
            mixsurv::DistributionSpec::LogNormal { mu, sigma },
        )
        .unwrap();
        let fit = FitResult {
            variant: Variant::V1,
            families: vec![Family::Weibull, Family::LogNormal],
            model,
            treatment: None,
            loglik: ll,
            n_params: 5,
            aic: mixsurv::aic(ll, 5),
            responsibilities: vec![pi1, 1.0 - pi1],
            iterations: iters,
            converged: iters % 2 == 0,
            loglik_trace: vec![ll - 1.0, ll],
            boundary_flag: iters % 3 == 0,
            start_index: iters % 7,
            seed,
        };
        let mut buf = Vec::new();
        write_fit_json(&fit, &mut buf, true).unwrap();
        let back = read_fit_json(buf.as_slice()).unwrap();
        prop_assert_eq!(back, fit);
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixsurv"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,event\n-2,1\n").unwrap();
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = bin().args(["fit", "--dist", "weibull", "--data"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
    assert!(out.stdout.is_empty());
    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "time,event\n1,0\n2,0\n3,0\n").unwrap();
    let out = bin().args(["fit", "--dist", "weibull", "--data"]).arg(&tiny).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn cli_workflow_on_bimodal_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    let d = simulate_arm(&table_model(), 600, &CensoringSpec::administrative(40.0), &mut substream(31, 0)).unwrap();
    let mut buf = Vec::new();
    write_csv(&d, &mut buf, false).unwrap();
    std::fs::write(path("d.csv"), buf).unwrap();
    let fit = |extra: &[&str], out: &str| {
        let st = bin()
            .args(["fit", "--dist", "weibull", "--starts", "3", "--data"])
            .arg(path("d.csv"))
            .args(extra)
            .arg("--out")
            .arg(path(out))
            .status()
            .unwrap();
        assert!(st.success());
    };
    fit(&[], "one.json");
    fit(&["--mixture", "2"], "two.json");
    let out = bin().arg("compare").arg(path("one.json")).arg(path("two.json")).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ranking"][0]["variant"], 1);

    let out = bin()
        .args(["modality", "--k-max", "3", "--boot", "200", "--data"])
        .arg(path("d.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scans: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(scans[0]["first_non_significant"], 2);
}
