//! The `mixsurv` command-line front end.
//!
//! Machine output goes to `--out` or standard output; diagnostics go to
//! standard error. Exit codes: 0 success, 1 usage, 2 data or format,
//! 3 numerical or convergence failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::estimation::{fit_treatment_model, Arm, Dataset, FitOptions, FitResult, Variant};
use crate::inference::{
    cut_point_with, log_rank_by_arm, lr_test, rank_models, subpop_treatment_comparison,
    CutRule, LrtResult, Stratum,
};
use crate::io::{emit_curves, parse_grid, read_csv_path, read_fit_json, write_csv, write_curves_csv, write_fit_json};
use crate::modality::{modality_scan, ModalityScan};
use crate::simulate::{simulate_trial, TrialSpec};

#[derive(Debug, Parser)]
#[command(name = "mixsurv", version, about = "Mixture parametric survival models for censored trial data")]
pub struct Cli {
    /// Worker threads for multi-start EM and bootstrap (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Weighted,
    Raw,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a simple, mixture or treatment-effect model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        dist: Family,
        /// Number of components (1 or 2).
        #[arg(long)]
        mixture: Option<usize>,
        #[arg(long)]
        variant: Option<Variant>,
        /// Family of the second component (default: same as --dist).
        #[arg(long)]
        dist2: Option<Family>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 10)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include per-observation responsibilities in the JSON.
        #[arg(long)]
        responsibilities: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Silverman bootstrap tests of k modes for k = 1..k-max.
    Modality {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        #[arg(long, default_value_t = 500)]
        boot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Use observed event times only.
        #[arg(long)]
        events_only: bool,
        /// Scan each arm separately.
        #[arg(long)]
        by_arm: bool,
        /// Add the calibrated k = 1 p-value.
        #[arg(long)]
        calibrate: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank fits by AIC and run likelihood-ratio tests between nested pairs.
    Compare {
        #[arg(required = true)]
        fits: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label subjects short- or long-term by the fitted cut-point.
    Classify {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, value_enum, default_value = "weighted")]
        rule: RuleArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log-rank comparison of the arms, pooled or within fitted strata.
    Logrank {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        stratify_by_fit: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a two-arm trial from a JSON specification.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the specification.
        #[arg(long)]
        seed: Option<u64>,
        /// Add the latent component as `component_truth`.
        #[arg(long)]
        truth: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kaplan-Meier, model and component survival curves on a grid.
    Curves {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        /// `start:stop:step`.
        #[arg(long, default_value = "0:60:0.5")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn read_fit(path: &Path) -> Result<FitResult> {
    read_fit_json(std::fs::File::open(path)?)
}

fn resolve_variant(mixture: Option<usize>, variant: Option<Variant>, dist2: Option<Family>) -> Result<Variant> {
    let v = match (mixture, variant) {
        (Some(m), _) if m != 1 && m != 2 => {
            return Err(Error::Usage(format!("--mixture must be 1 or 2, got {m}")))
        }
        (Some(1), Some(v)) if v.is_mixture() => {
            return Err(Error::Usage(format!("{v} is a two-component model; drop --mixture 1")))
        }
        (Some(2), Some(Variant::V0)) => {
            return Err(Error::Usage("V0 is a one-component model; drop --mixture 2".into()))
        }
        (_, Some(v)) => v,
        (Some(2), None) => Variant::V1,
        (_, None) if dist2.is_some() => Variant::V1,
        _ => Variant::V0,
    };
    if v == Variant::V0 && dist2.is_some() {
        return Err(Error::Usage("--dist2 needs a two-component model".into()));
    }
    Ok(v)
}

#[derive(Serialize)]
struct ScanRecord {
    subset: String,
    n: usize,
    #[serde(flatten)]
    scan: ModalityScan,
}

#[derive(Serialize)]
struct RankEntry {
    rank: usize,
    file: String,
    variant: Variant,
    families: Vec<Family>,
    loglik: f64,
    n_params: usize,
    aic: f64,
    delta_aic: f64,
}

#[derive(Serialize)]
struct LrtEntry {
    full: String,
    reduced: String,
    #[serde(flatten)]
    result: LrtResult,
}

#[derive(Serialize)]
struct CompareReport {
    ranking: Vec<RankEntry>,
    lr_tests: Vec<LrtEntry>,
}

fn modality_samples(data: &Dataset, events_only: bool) -> Vec<f64> {
    if events_only {
        data.events_only().times()
    } else {
        data.times()
    }
}

fn run_modality(
    data: &Dataset,
    k_max: usize,
    boot: usize,
    seed: u64,
    alpha: f64,
    events_only: bool,
    by_arm: bool,
    calibrate: bool,
) -> Result<Vec<ScanRecord>> {
    let subsets: Vec<(String, Dataset)> = if by_arm {
        if !data.has_arms() {
            return Err(Error::Usage("--by-arm needs an arm column".into()));
        }
        [Arm::Control, Arm::Treated]
            .into_iter()
            .map(|a| (a.label().to_string(), data.arm(a)))
            .collect()
    } else {
        vec![("all".to_string(), data.clone())]
    };
    subsets
        .into_iter()
        .map(|(subset, d)| {
            let samples = modality_samples(&d, events_only);
            let scan = modality_scan(&samples, k_max, boot, seed, alpha, calibrate)?;
            Ok(ScanRecord {
                subset,
                n: samples.len(),
                scan,
            })
        })
        .collect()
}

fn modality_csv(scans: &[ScanRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subset", "k", "h_crit", "n_boot", "n_exceed", "p_value", "calibrated_p_value"])?;
    for s in scans {
        for r in &s.scan.results {
            w.write_record([
                s.subset.clone(),
                r.k.to_string(),
                format!("{}", r.h_crit),
                r.n_boot.to_string(),
                r.n_exceed.to_string(),
                format!("{}", r.p_value),
                r.calibrated_p_value.map(|p| format!("{p}")).unwrap_or_default(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn run_compare(paths: &[PathBuf]) -> Result<CompareReport> {
    let fits = paths.iter().map(|p| read_fit(p)).collect::<Result<Vec<_>>>()?;
    let name = |i: usize| paths[i].display().to_string();
    let order = rank_models(&fits);
    let best = fits[order[0]].aic;
    let ranking = order
        .iter()
        .enumerate()
        .map(|(r, &i)| RankEntry {
            rank: r + 1,
            file: name(i),
            variant: fits[i].variant,
            families: fits[i].families.clone(),
            loglik: fits[i].loglik,
            n_params: fits[i].n_params,
            aic: fits[i].aic,
            delta_aic: fits[i].aic - best,
        })
        .collect();
    let mut lr_tests = Vec::new();
    for i in 0..fits.len() {
        for j in 0..fits.len() {
            let (full, reduced) = (&fits[i], &fits[j]);
            if i == j
                || !reduced.variant.nested_in(full.variant)
                || full.families != reduced.families
            {
                continue;
            }
            match lr_test(full, reduced) {
                Ok(result) => lr_tests.push(LrtEntry {
                    full: name(i),
                    reduced: name(j),
                    result,
                }),
                Err(e) => eprintln!("warning: skipping {} vs {}: {e}", name(i), name(j)),
            }
        }
    }
    Ok(CompareReport { ranking, lr_tests })
}

fn run_classify(data: &Dataset, fit: &FitResult, rule: CutRule) -> Result<Vec<u8>> {
    let t_star = cut_point_with(&fit.model, rule)?;
    let arms = data.has_arms();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row", "time", "event"];
    if arms {
        header.push("arm");
    }
    header.extend(["stratum", "cut_point"]);
    w.write_record(&header)?;
    for (i, o) in data.observations().iter().enumerate() {
        let mut rec = vec![(i + 2).to_string(), format!("{}", o.time), (o.event as u8).to_string()];
        if let (true, Some(a)) = (arms, o.arm) {
            rec.push(a.index().to_string());
        }
        rec.push(Stratum::of(o.time, t_star).label().to_string());
        rec.push(format!("{t_star}"));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Fit {
            data,
            dist,
            mixture,
            variant,
            dist2,
            tol,
            max_iter,
            starts,
            seed,
            responsibilities,
            out,
        } => {
            let v = resolve_variant(mixture, variant, dist2)?;
            let data = read_csv_path(&data)?;
            let opts = FitOptions {
                tol,
                max_iter,
                n_starts: starts,
                seed,
                ..FitOptions::default()
            };
            let fit = fit_treatment_model(&data, v, [dist, dist2.unwrap_or(dist)], &opts)?;
            if !fit.converged {
                eprintln!("warning: the fit did not converge");
            }
            if fit.boundary_flag {
                eprintln!("warning: a mixing weight reached its floor");
            }
            let mut buf = Vec::new();
            write_fit_json(&fit, &mut buf, responsibilities)?;
            emit(out.as_deref(), &buf)
        }
        Command::Modality {
            data,
            k_max,
            boot,
            seed,
            alpha,
            events_only,
            by_arm,
            calibrate,
            format,
            out,
        } => {
            let data = read_csv_path(&data)?;
            let scans = run_modality(&data, k_max, boot, seed, alpha, events_only, by_arm, calibrate)?;
            let bytes = match format {
                OutputFormat::Json => to_json(&scans)?,
                OutputFormat::Csv => modality_csv(&scans)?,
            };
            emit(out.as_deref(), &bytes)
        }
        Command::Compare { fits, out } => emit(out.as_deref(), &to_json(&run_compare(&fits)?)?),
        Command::Classify { data, fit, rule, out } => {
            let data = read_csv_path(&data)?;
            let fit = read_fit(&fit)?;
            let rule = match rule {
                RuleArg::Weighted => CutRule::Weighted,
                RuleArg::Raw => CutRule::Raw,
            };
            emit(out.as_deref(), &run_classify(&data, &fit, rule)?)
        }
        Command::Logrank {
            data,
            stratify_by_fit,
            out,
        } => {
            let data = read_csv_path(&data)?;
            let bytes = match stratify_by_fit {
                None => to_json(&log_rank_by_arm(&data)?)?,
                Some(f) => {
                    let cmp = subpop_treatment_comparison(&data, &read_fit(&f)?)?;
                    for s in &cmp.strata {
                        if let Some(w) = &s.warning {
                            eprintln!("warning: {w}");
                        }
                    }
                    to_json(&cmp)?
                }
            };
            emit(out.as_deref(), &bytes)
        }
        Command::Simulate { spec, seed, truth, out } => {
            let text = std::fs::read_to_string(&spec)?;
            let mut spec: TrialSpec = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let data = simulate_trial(&spec)?;
            let mut buf = Vec::new();
            write_csv(&data, &mut buf, truth)?;
            emit(out.as_deref(), &buf)
        }
        Command::Curves { data, fit, grid, out } => {
            let grid = parse_grid(&grid)?;
            let data = read_csv_path(&data)?;
            let fit = read_fit(&fit)?;
            let curves = emit_curves(&data, &fit, &grid)?;
            let mut buf = Vec::new();
            write_curves_csv(&curves, &mut buf)?;
            emit(out.as_deref(), &buf)
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
