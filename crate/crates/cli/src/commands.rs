use std::fs;
use std::path::Path;

use bornlab_core::expio::{
    job_file, probability_table, read_run, simulate_job_with_table, write_counts, write_manifest,
    JobSpec, RunManifest, MANIFEST_FILE,
};
use bornlab_core::models::{
    BaseModel, DecoherenceRate, EpsilonProfile, IQImbalance, ModelConfig, ReadoutConfusion,
    TransmonModel,
};
use bornlab_core::stats::{
    amplitude_point, fit_abc_with, fit_error_per_gate, harmonic_decomposition, significance,
    AngleSeries, BenchmarkOptions, FitOptions, FitResult, Reference, ZERO_SIGMA_TOL,
};
use bornlab_core::{grid, C64};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    BenchmarkArgs, CompareArgs, CompareOn, FitArgs, ModelArgs, ModelKind, OracleArgs,
    ReferenceKind, SimulateArgs,
};
use crate::oracle::{run_checks, OracleParams};
use crate::report::{num, Report, Table};
use crate::{Cli, CliError};

fn reject(flags: &[(&str, bool)], model: &str) -> Result<(), CliError> {
    match flags.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(CliError::Input(format!(
            "--{name} does not apply to --model {model}"
        ))),
        None => Ok(()),
    }
}

pub fn build_model(args: &ModelArgs) -> Result<ModelConfig, CliError> {
    let eps = [
        ("eps-re", args.eps_re.is_some()),
        ("eps-im", args.eps_im.is_some()),
    ];
    let iq = [
        ("iq-re", args.iq_re.is_some()),
        ("iq-im", args.iq_im.is_some()),
        ("pulse-ns", args.pulse_ns.is_some()),
    ];
    let transmon = [
        ("omega", args.omega.is_some()),
        ("omega-prime", args.omega_prime.is_some()),
        ("rwa", args.rwa),
    ];
    let post = [
        ("readout-p01", args.readout_p01.is_some()),
        ("readout-p10", args.readout_p10.is_some()),
        ("decoherence", args.decoherence.is_some()),
    ];

    if let Some(path) = &args.config {
        let all: Vec<_> = eps
            .iter()
            .chain(&iq)
            .chain(&transmon)
            .chain(&post)
            .cloned()
            .collect();
        if let Some((name, _)) = all.iter().find(|(_, set)| *set) {
            return Err(CliError::Input(format!(
                "--{name} cannot be combined with --config"
            )));
        }
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        return Ok(ModelConfig::from_toml_str(&text)?);
    }

    let base = match args.model {
        ModelKind::Ideal => {
            reject(&eps, "ideal")?;
            reject(&iq, "ideal")?;
            reject(&transmon, "ideal")?;
            BaseModel::Ideal
        }
        ModelKind::Epsilon => {
            reject(&iq, "epsilon")?;
            reject(&transmon, "epsilon")?;
            BaseModel::Epsilon {
                profile: EpsilonProfile::constant(C64::new(
                    args.eps_re.unwrap_or(0.0),
                    args.eps_im.unwrap_or(0.0),
                )),
            }
        }
        ModelKind::Iq => {
            reject(&eps, "iq")?;
            reject(&transmon, "iq")?;
            BaseModel::Iq {
                imbalance: IQImbalance::new(C64::new(
                    args.iq_re.unwrap_or(0.0),
                    args.iq_im.unwrap_or(0.0),
                ))?,
                duration_ns: args
                    .pulse_ns
                    .unwrap_or_else(|| TransmonModel::default().duration()),
            }
        }
        ModelKind::Transmon => {
            reject(&eps, "transmon")?;
            reject(&iq, "transmon")?;
            let defaults = TransmonModel::default();
            BaseModel::Transmon {
                model: TransmonModel {
                    omega: args.omega.unwrap_or(defaults.omega),
                    omega_prime: args.omega_prime.unwrap_or(defaults.omega_prime),
                    ..defaults
                },
                use_rwa: args.rwa,
            }
        }
    };
    let mut config = ModelConfig::from_base(base);
    if args.readout_p01.is_some() || args.readout_p10.is_some() {
        config.readout = Some(ReadoutConfusion::new(
            args.readout_p01.unwrap_or(0.0),
            args.readout_p10.unwrap_or(0.0),
        )?);
    }
    if let Some(r) = args.decoherence {
        config.decoherence = Some(DecoherenceRate::new(r)?);
    }
    config.validate()?;
    Ok(config)
}

fn is_nonempty_dir(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|mut d| d.next().is_some())
        .unwrap_or(false)
}

fn clear_run_files(dir: &Path) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(CliError::io)? {
        let path = entry.map_err(CliError::io)?.path();
        let is_counts = path.extension().and_then(|e| e.to_str()) == Some("jsonl");
        let is_manifest = path.file_name().and_then(|n| n.to_str()) == Some(MANIFEST_FILE);
        if path.is_file() && (is_counts || is_manifest) {
            fs::remove_file(&path).map_err(CliError::io)?;
        }
    }
    Ok(())
}

pub fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| CliError::Input("simulate needs --out <run directory>".into()))?;
    if args.jobs == 0 {
        return Err(CliError::Input("--jobs must be >= 1".into()));
    }
    let model = build_model(&args.model)?;
    let spec = JobSpec::new(args.n, args.shots, args.circuits, cli.seed, model);
    spec.validate()?;
    if out.exists() && !out.is_dir() {
        return Err(CliError::Input(format!(
            "{} is not a directory",
            out.display()
        )));
    }
    if is_nonempty_dir(out) && !cli.overwrite {
        return Err(CliError::Input(format!(
            "{} is not empty (use --overwrite)",
            out.display()
        )));
    }
    let table = probability_table(&spec)?;

    fs::create_dir_all(out).map_err(CliError::io)?;
    if cli.overwrite {
        clear_run_files(out)?;
    }
    write_manifest(&RunManifest::new(spec.clone(), args.jobs, cli.seed), out)?;
    (0..args.jobs)
        .into_par_iter()
        .map(|k| {
            let records = simulate_job_with_table(&spec, k, &table)?;
            write_counts(&records, &job_file(out, k))
        })
        .collect::<bornlab_core::Result<Vec<()>>>()?;
    eprintln!(
        "wrote {} job(s) x {} angles to {}",
        args.jobs,
        spec.angle_grid.len(),
        out.display()
    );
    Ok(())
}

fn reference_for(kind: ReferenceKind, n: u32) -> Reference {
    match kind {
        ReferenceKind::Fitted => Reference::Fitted,
        ReferenceKind::Ideal => Reference::Ideal(n),
        ReferenceKind::IdealPhased => Reference::IdealPhased(n),
    }
}

struct FittedRun {
    n_gates: u32,
    series: AngleSeries,
    fit: FitResult,
}

fn fit_run(dir: &Path, reference: ReferenceKind, weighted: bool) -> Result<FittedRun, CliError> {
    let run = read_run(dir)?;
    let series = run.series()?;
    let n_gates = series.n_gates.expect("aggregate sets n_gates");
    let options = FitOptions {
        weighted,
        reference: reference_for(reference, n_gates),
    };
    let fit = fit_abc_with(&series, &options)?;
    Ok(FittedRun {
        n_gates,
        series,
        fit,
    })
}

#[derive(Serialize)]
struct PointDoc {
    theta_index: i32,
    theta: f64,
    p: f64,
    p_ref: f64,
    residual: f64,
    sigma: f64,
    residual_sigma: f64,
    z: f64,
    trials: Option<u64>,
}

#[derive(Serialize)]
struct FitDoc {
    n_gates: u32,
    reference: Reference,
    weighted: bool,
    a: f64,
    b: f64,
    c: f64,
    amplitude: f64,
    amplitude_sigma: f64,
    covariance: [[f64; 3]; 3],
    chi2: f64,
    dof: usize,
    phase_offset: Option<f64>,
    max_abs_z: f64,
    threshold: f64,
    flagged: Vec<i32>,
    points: Vec<PointDoc>,
}

fn theta_index(theta: bornlab_core::Angle) -> i32 {
    theta
        .grid_index()
        .expect("aggregated runs live on the grid")
}

pub fn fit(cli: &Cli, args: &FitArgs) -> Result<(), CliError> {
    let run = fit_run(&args.run, args.reference, args.weighted)?;
    let f = &run.fit;
    let flagged: Vec<i32> = significance(f, args.threshold)?
        .into_iter()
        .map(|(a, _)| theta_index(a))
        .collect();
    let trials = run.series.trials.clone();

    let mut summary = Table::new(&[
        "n_gates",
        "A",
        "B",
        "C",
        "amplitude",
        "amplitude_sigma",
        "cov_AA",
        "cov_AB",
        "cov_AC",
        "cov_BB",
        "cov_BC",
        "cov_CC",
        "chi2",
        "dof",
        "chi2_per_dof",
        "max_abs_z",
        "flagged",
    ]);
    let cov = f.covariance;
    summary.push(vec![
        run.n_gates.to_string(),
        num(f.a),
        num(f.b),
        num(f.c),
        num(f.amplitude()),
        num(f.amplitude_sigma()),
        num(cov[0][0]),
        num(cov[0][1]),
        num(cov[0][2]),
        num(cov[1][1]),
        num(cov[1][2]),
        num(cov[2][2]),
        num(f.chi2),
        f.dof.to_string(),
        num(if f.dof > 0 {
            f.chi2 / f.dof as f64
        } else {
            f64::NAN
        }),
        num(f.max_abs_z()),
        flagged.len().to_string(),
    ]);

    let mut residuals = Table::new(&[
        "theta_index",
        "theta",
        "P",
        "P_fit",
        "residual",
        "sigma",
        "residual_sigma",
        "z",
    ]);
    let mut points = Vec::new();
    for j in 0..f.angles.len() {
        let idx = theta_index(f.angles[j]);
        residuals.push(vec![
            idx.to_string(),
            num(f.angles[j].radians()),
            num(f.probabilities[j]),
            num(f.reference_values[j]),
            num(f.residuals[j]),
            num(f.sigma[j]),
            num(f.residual_sigma[j]),
            num(f.z_scores[j]),
        ]);
        points.push(PointDoc {
            theta_index: idx,
            theta: f.angles[j].radians(),
            p: f.probabilities[j],
            p_ref: f.reference_values[j],
            residual: f.residuals[j],
            sigma: f.sigma[j],
            residual_sigma: f.residual_sigma[j],
            z: f.z_scores[j],
            trials: trials.as_ref().map(|t| t[j]),
        });
    }

    let document = FitDoc {
        n_gates: run.n_gates,
        reference: f.reference,
        weighted: args.weighted,
        a: f.a,
        b: f.b,
        c: f.c,
        amplitude: f.amplitude(),
        amplitude_sigma: f.amplitude_sigma(),
        covariance: cov,
        chi2: f.chi2,
        dof: f.dof,
        phase_offset: f.phase_offset,
        max_abs_z: f.max_abs_z(),
        threshold: args.threshold,
        flagged,
        points,
    };
    Report {
        stem: "fit",
        tables: vec![("fit", summary), ("residuals", residuals)],
        document,
    }
    .emit(cli.out.as_deref(), cli.overwrite)
}

#[derive(Serialize)]
struct CompareRow {
    theta_index: i32,
    value_a: f64,
    value_b: f64,
    diff: f64,
    sigma: f64,
    z: f64,
}

#[derive(Serialize)]
struct CompareDoc {
    on: &'static str,
    n_gates_a: u32,
    n_gates_b: u32,
    max_abs_z_diff: f64,
    at_theta_index: i32,
    rows: Vec<CompareRow>,
}

pub fn compare(cli: &Cli, args: &CompareArgs) -> Result<(), CliError> {
    let a = fit_run(&args.run_a, args.reference, false)?;
    let b = fit_run(&args.run_b, args.reference, false)?;
    if a.fit.angles != b.fit.angles {
        return Err(CliError::Input("runs use different angle grids".into()));
    }
    let (va, vb, sa, sb) = match args.on {
        CompareOn::Residual => (
            &a.fit.residuals,
            &b.fit.residuals,
            &a.fit.residual_sigma,
            &b.fit.residual_sigma,
        ),
        CompareOn::Probability => (
            &a.fit.probabilities,
            &b.fit.probabilities,
            &a.fit.sigma,
            &b.fit.sigma,
        ),
    };
    let mut table = Table::new(&["theta_index", "value_a", "value_b", "diff", "sigma", "z"]);
    let mut rows = Vec::new();
    let (mut worst, mut worst_idx) = (0.0f64, theta_index(a.fit.angles[0]));
    for j in 0..a.fit.angles.len() {
        let diff = va[j] - vb[j];
        let sigma = sa[j].hypot(sb[j]);
        let z = if sigma > 0.0 {
            diff / sigma
        } else if diff.abs() < ZERO_SIGMA_TOL {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let idx = theta_index(a.fit.angles[j]);
        if z.abs() > worst {
            worst = z.abs();
            worst_idx = idx;
        }
        table.push(vec![
            idx.to_string(),
            num(va[j]),
            num(vb[j]),
            num(diff),
            num(sigma),
            num(z),
        ]);
        rows.push(CompareRow {
            theta_index: idx,
            value_a: va[j],
            value_b: vb[j],
            diff,
            sigma,
            z,
        });
    }
    let on = match args.on {
        CompareOn::Residual => "residual",
        CompareOn::Probability => "probability",
    };
    let mut summary = Table::new(&[
        "on",
        "n_gates_a",
        "n_gates_b",
        "max_abs_z_diff",
        "at_theta_index",
    ]);
    summary.push(vec![
        on.to_string(),
        a.n_gates.to_string(),
        b.n_gates.to_string(),
        num(worst),
        worst_idx.to_string(),
    ]);
    Report {
        stem: "compare",
        tables: vec![("compare_summary", summary), ("compare", table)],
        document: CompareDoc {
            on,
            n_gates_a: a.n_gates,
            n_gates_b: b.n_gates,
            max_abs_z_diff: worst,
            at_theta_index: worst_idx,
            rows,
        },
    }
    .emit(cli.out.as_deref(), cli.overwrite)
}

#[derive(Serialize)]
struct BenchmarkDoc {
    r: f64,
    r_sigma: f64,
    d: f64,
    refine: bool,
    points: Vec<bornlab_core::stats::AmplitudePoint>,
    predicted: Vec<f64>,
    warnings: Vec<String>,
}

pub fn benchmark(cli: &Cli, args: &BenchmarkArgs) -> Result<(), CliError> {
    let mut points = Vec::new();
    for dir in &args.runs {
        let run = fit_run(dir, ReferenceKind::Fitted, false)?;
        points.push(amplitude_point(run.n_gates, &run.fit));
    }
    points.sort_by_key(|p| p.n);
    let fit = fit_error_per_gate(
        &points,
        &BenchmarkOptions {
            refine: args.refine,
        },
    )?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    let mut amplitudes = Table::new(&["n", "amplitude", "sigma", "predicted", "residual"]);
    for (k, p) in fit.points.iter().enumerate() {
        amplitudes.push(vec![
            p.n.to_string(),
            num(p.amplitude),
            num(p.sigma),
            num(fit.predicted[k]),
            num(fit.residuals[k]),
        ]);
    }
    let mut summary = Table::new(&["r", "r_sigma", "D", "points"]);
    summary.push(vec![
        num(fit.r),
        num(fit.r_sigma),
        num(fit.d),
        fit.points.len().to_string(),
    ]);
    Report {
        stem: "benchmark",
        tables: vec![("benchmark", summary), ("amplitudes", amplitudes)],
        document: BenchmarkDoc {
            r: fit.r,
            r_sigma: fit.r_sigma,
            d: fit.d,
            refine: args.refine,
            points: fit.points.clone(),
            predicted: fit.predicted.clone(),
            warnings: fit.warnings.clone(),
        },
    }
    .emit(cli.out.as_deref(), cli.overwrite)
}

#[derive(Serialize)]
struct HarmonicRow {
    k: usize,
    cos: f64,
    sin: f64,
    magnitude: f64,
    cos_sigma: f64,
    sin_sigma: f64,
}

#[derive(Serialize)]
struct HarmonicsDoc {
    n_gates: u32,
    reference: Reference,
    harmonics: Vec<HarmonicRow>,
}

pub fn harmonics(cli: &Cli, args: &FitArgs) -> Result<(), CliError> {
    let run = fit_run(&args.run, args.reference, args.weighted)?;
    let spectrum = harmonic_decomposition(&run.fit.residuals)?;
    let thetas = grid();
    let mut table = Table::new(&["k", "cos", "sin", "magnitude", "cos_sigma", "sin_sigma"]);
    let mut rows = Vec::new();
    for k in 0..=8usize {
        let norm = if k == 0 || k == 8 {
            1.0 / 16.0
        } else {
            2.0 / 16.0
        };
        let (mut vc, mut vs) = (0.0, 0.0);
        for (t, s) in thetas.iter().zip(&run.fit.residual_sigma) {
            let kt = k as f64 * t.radians();
            vc += (norm * kt.cos() * s).powi(2);
            vs += (norm * kt.sin() * s).powi(2);
        }
        let row = HarmonicRow {
            k,
            cos: spectrum.cos[k],
            sin: spectrum.sin[k],
            magnitude: spectrum.magnitude(k),
            cos_sigma: vc.sqrt(),
            sin_sigma: if k == 0 || k == 8 { 0.0 } else { vs.sqrt() },
        };
        table.push(vec![
            k.to_string(),
            num(row.cos),
            num(row.sin),
            num(row.magnitude),
            num(row.cos_sigma),
            num(row.sin_sigma),
        ]);
        rows.push(row);
    }
    Report {
        stem: "harmonics",
        tables: vec![("harmonics", table)],
        document: HarmonicsDoc {
            n_gates: run.n_gates,
            reference: run.fit.reference,
            harmonics: rows,
        },
    }
    .emit(cli.out.as_deref(), cli.overwrite)
}

#[derive(Serialize)]
struct OracleDoc {
    eps: f64,
    pass: bool,
    checks: Vec<crate::oracle::Check>,
}

/// Returns whether every check passed.
pub fn oracle_check(cli: &Cli, args: &OracleArgs) -> Result<bool, CliError> {
    if !(args.eps > 0.0 && args.eps <= bornlab_core::models::EPS_BOUND) {
        return Err(CliError::Input(format!(
            "--eps must lie in (0, {}]",
            bornlab_core::models::EPS_BOUND
        )));
    }
    let checks = run_checks(&OracleParams {
        eps: args.eps,
        corrupt_branch: args.corrupt_branch,
    })?;
    let mut table = Table::new(&["check", "measured", "tolerance", "pass"]);
    for c in &checks {
        table.push(vec![
            c.name.to_string(),
            num(c.measured),
            num(c.tolerance),
            if c.pass { "pass" } else { "FAIL" }.to_string(),
        ]);
    }
    let pass = checks.iter().all(|c| c.pass);
    Report {
        stem: "oracle",
        tables: vec![("oracle", table)],
        document: OracleDoc {
            eps: args.eps,
            pass,
            checks,
        },
    }
    .emit(cli.out.as_deref(), cli.overwrite)?;
    Ok(pass)
}
