//! One line per acceptance criterion: `criterion N: PASS|FAIL <measurements>`.
//! Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bornlab_cli::oracle::symmetric_profile;
use bornlab_core::expio::{aggregate, probability_table, simulate_job_with_table, JobSpec};
use bornlab_core::gates::{circuit_probability, grid, ideal_probability_closed, s_gate, s_theta};
use bornlab_core::models::{
    apply_readout, iq_probability, model_probability_epsilon, transmon_probability, BaseModel,
    DecoherenceRate, EpsilonProfile, GaussianEnvelope, IQImbalance, ModelConfig, ReadoutConfusion,
    TransmonModel,
};
use bornlab_core::perturbation::{delta_p_first_order, iq_delta_p, DEFAULT_QUAD_POINTS};
use bornlab_core::stats::{
    amplitude_point, fit_abc, fit_abc_with, fit_error_per_gate, harmonic_decomposition,
    AngleSeries, BenchmarkOptions, FitOptions, Reference,
};
use bornlab_core::{StateVector, C64};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn criterion_1() -> Outcome {
    let confusions = [(0.0, 0.0), (0.02, 0.05), (0.1, 0.03)];
    let initials = [
        StateVector::basis(2, 0).unwrap(),
        StateVector::new(&[C64::new(0.999, 0.0), C64::from_polar(0.0447, 0.8)])
            .unwrap()
            .normalized(),
        StateVector::new(&[C64::new(0.9, 0.1), C64::new(-0.2, 0.35)])
            .unwrap()
            .normalized(),
    ];
    let mut worst = 0.0f64;
    for &(p01, p10) in &confusions {
        let confusion = ReadoutConfusion::new(p01, p10).unwrap();
        for psi0 in &initials {
            for n in [1u32, 2, 3, 5] {
                let probs: Vec<f64> = grid()
                    .into_iter()
                    .map(|t| {
                        let p = circuit_probability(&s_gate(), &s_theta(t), n, psi0).unwrap();
                        apply_readout(p, &confusion).clamp(0.0, 1.0)
                    })
                    .collect();
                let fit = fit_abc(&AngleSeries::noiseless(probs).unwrap()).unwrap();
                worst = worst.max(fit.max_abs_residual());
            }
        }
    }
    outcome(
        worst < 1e-12,
        format!("max ABC residual {worst:.3e} (limit 1e-12)"),
    )
}

fn gap(n: u32, profile: &EpsilonProfile) -> f64 {
    max_abs(grid().into_iter().map(|t| {
        let analytic = delta_p_first_order(n, t, profile, DEFAULT_QUAD_POINTS).unwrap();
        let brute =
            model_probability_epsilon(n, t, profile).unwrap() - ideal_probability_closed(n, t);
        analytic - brute
    }))
}

fn criterion_2() -> Outcome {
    let eps = 1e-3;
    let phases = [0.0, 1.0, PI / 2.0, PI];
    let rows: Vec<(u32, f64, f64)> = (1..=8u32)
        .into_par_iter()
        .map(|n| {
            let mut full = 0.0f64;
            let mut worst_ratio = 4.0f64;
            for phase in phases {
                let profile = EpsilonProfile::constant(C64::from_polar(eps, phase));
                let g = gap(n, &profile);
                let h = gap(n, &profile.scaled(0.5));
                full = full.max(g);
                if (g / h - 4.0).abs() > (worst_ratio - 4.0).abs() {
                    worst_ratio = g / h;
                }
            }
            (n, full, worst_ratio)
        })
        .collect();
    let worst_gap = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
    let ratio_ok = rows.iter().all(|r| (3.5..=4.5).contains(&r.2));
    let per_n: Vec<String> = rows
        .iter()
        .map(|(n, g, r)| format!("n={n}:{g:.2e}/x{r:.2}"))
        .collect();
    outcome(
        worst_gap <= 3e-6 && ratio_ok,
        format!(
            "max gap {worst_gap:.3e} (limit 3e-6), halving ratios in [3.5, 4.5]: {ratio_ok}; {}",
            per_n.join(" ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let eps = 0.01;
    let symmetric = symmetric_profile(eps).unwrap();
    let general = bornlab_cli::oracle::fourier_profile(eps).unwrap();
    let mut sum_rule = 0.0f64;
    let mut identical = true;
    for t in grid() {
        let d1 = delta_p_first_order(1, t, &symmetric, DEFAULT_QUAD_POINTS).unwrap();
        let d3 = delta_p_first_order(3, t, &symmetric, DEFAULT_QUAD_POINTS).unwrap();
        sum_rule = sum_rule.max((d1 + d3).abs());
        for profile in [&symmetric, &general] {
            let a = delta_p_first_order(1, t, profile, DEFAULT_QUAD_POINTS).unwrap();
            let b = delta_p_first_order(5, t, profile, DEFAULT_QUAD_POINTS).unwrap();
            identical &= a.to_bits() == b.to_bits();
        }
    }
    outcome(
        sum_rule < 1e-10 && identical,
        format!("max |dp1 + dp3| {sum_rule:.3e} (limit 1e-10), dp1 == dp5 bitwise: {identical}"),
    )
}

fn criterion_4() -> Outcome {
    let model = ModelConfig::from_base(BaseModel::Epsilon {
        profile: EpsilonProfile::constant(C64::new(0.0, 2e-3)),
    });
    let replications = 20u64;
    let results: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let spec = JobSpec::new(1, 8192, 56, 1000 + rep, model.clone());
            let table = probability_table(&spec).unwrap();
            let records: Vec<_> = (0..100)
                .flat_map(|k| simulate_job_with_table(&spec, k, &table).unwrap())
                .collect();
            let series = aggregate(&records).unwrap();
            let fit = fit_abc_with(
                &series,
                &FitOptions {
                    weighted: false,
                    reference: Reference::Ideal(1),
                },
            )
            .unwrap();
            (fit.max_abs_residual(), fit.max_abs_z())
        })
        .collect();
    let detected = results.iter().filter(|r| r.1 > 5.0).count();
    let amplitudes: Vec<f64> = results.iter().map(|r| r.0).collect();
    let lo = amplitudes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = amplitudes.iter().cloned().fold(0.0, f64::max);
    let amplitude_ok = lo > 0.5e-3 && hi < 2e-3;
    let rate = detected as f64 / replications as f64;
    outcome(
        rate >= 0.95 && amplitude_ok,
        format!(
            "max |z| > 5 in {detected}/{replications}, residual amplitude in [{lo:.3e}, {hi:.3e}] (target ~1e-3)"
        ),
    )
}

fn benchmark_r(rate: f64, seed: Option<u64>) -> f64 {
    let mut model = ModelConfig::ideal();
    model.decoherence = Some(DecoherenceRate::new(rate).unwrap());
    let points: Vec<_> = (1..=63u32)
        .step_by(2)
        .map(|n| {
            let series = match seed {
                None => {
                    let probs = grid()
                        .into_iter()
                        .map(|t| model.probability(n, t).unwrap())
                        .collect();
                    AngleSeries::noiseless(probs).unwrap()
                }
                Some(s) => {
                    let spec = JobSpec::new(n, 8192, 56, s * 1000 + n as u64, model.clone());
                    let table = probability_table(&spec).unwrap();
                    aggregate(&simulate_job_with_table(&spec, 0, &table).unwrap()).unwrap()
                }
            };
            amplitude_point(n, &fit_abc(&series).unwrap())
        })
        .collect();
    fit_error_per_gate(&points, &BenchmarkOptions::default())
        .unwrap()
        .r
}

fn criterion_5() -> Outcome {
    let rate = 7e-4;
    let exact = (benchmark_r(rate, None) - rate).abs();
    let replications = 40u64;
    let fitted: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|s| benchmark_r(rate, Some(s + 1)))
        .collect();
    let inside = fitted
        .iter()
        .filter(|r| (5.5e-4..=8.5e-4).contains(*r))
        .count();
    let lo = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fitted.iter().cloned().fold(0.0, f64::max);
    outcome(
        exact < 1e-10 && inside as f64 >= 0.95 * replications as f64,
        format!(
            "noiseless |r - 7e-4| {exact:.3e} (limit 1e-10), r in [5.5e-4, 8.5e-4] in {inside}/{replications} (range [{lo:.3e}, {hi:.3e}])"
        ),
    )
}

fn criterion_6() -> Outcome {
    let envelope = GaussianEnvelope::quarter_turn(TransmonModel::default().duration()).unwrap();
    let cases = [
        C64::new(0.01, 0.0),
        C64::new(0.0, 0.01),
        C64::from_polar(0.01, 0.7),
        C64::from_polar(0.05, -2.0),
    ];
    let mut analytic = 0.0f64;
    let mut brute_ratio = 0.0f64;
    for eps in cases {
        let imbalance = IQImbalance::new(eps).unwrap();
        let a: Vec<f64> = grid()
            .into_iter()
            .map(|t| iq_delta_p(t, &imbalance))
            .collect();
        analytic = analytic.max(harmonic_decomposition(&a).unwrap().magnitude(2));
        let b: Vec<f64> = grid()
            .into_par_iter()
            .map(|t| {
                iq_probability(t, &imbalance, &envelope).unwrap() - ideal_probability_closed(1, t)
            })
            .collect();
        let k2 = harmonic_decomposition(&b).unwrap().magnitude(2);
        brute_ratio = brute_ratio.max(k2 / (3.0 * eps.norm_sqr()));
    }
    outcome(
        analytic < 1e-12 && brute_ratio < 1.0,
        format!("analytic |k=2| {analytic:.3e} (limit 1e-12), brute-force |k=2| / 3|eps|^2 = {brute_ratio:.3e} (limit 1)"),
    )
}

fn theta_amplitude(model: &TransmonModel, rwa: bool) -> f64 {
    let probs: Vec<f64> = grid()
        .into_par_iter()
        .map(|t| transmon_probability(1, t, model, rwa).unwrap())
        .collect();
    fit_abc(&AngleSeries::noiseless(probs).unwrap())
        .unwrap()
        .residual_spread()
}

fn criterion_7() -> Outcome {
    let rwa = theta_amplitude(&TransmonModel::default(), true);
    let amplitudes: Vec<f64> = [4.0, 4.5, 5.0]
        .iter()
        .map(|f| {
            let model = TransmonModel {
                omega: 2.0 * PI * f,
                ..TransmonModel::default()
            };
            theta_amplitude(&model, false)
        })
        .collect();
    let decreasing = amplitudes.windows(2).all(|w| w[1] < w[0]);
    outcome(
        rwa < 1e-10 && decreasing,
        format!(
            "RWA spread {rwa:.3e} (limit 1e-10), full-H residual spread at omega/2pi = 4.0, 4.5, 5.0: {:.3e}, {:.3e}, {:.3e}",
            amplitudes[0], amplitudes[1], amplitudes[2]
        ),
    )
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_bornlab"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let root = tmp.path();
    let path = |name: &str| root.join(name).to_string_lossy().into_owned();
    let variants = [("a", "1"), ("b", "1"), ("c", "4"), ("d", "8")];
    for (name, threads) in variants {
        run_cli(&[
            "simulate",
            "--model",
            "epsilon",
            "--eps-re",
            "0.004",
            "--eps-im",
            "0.002",
            "--n",
            "5",
            "--jobs",
            "12",
            "--shots",
            "8192",
            "--circuits",
            "4",
            "--seed",
            "77",
            "--threads",
            threads,
            "--out",
            &path(&format!("run-{name}")),
        ]);
        run_cli(&[
            "fit",
            &path(&format!("run-{name}")),
            "--threads",
            threads,
            "--out",
            &path(&format!("fit-{name}")),
        ]);
    }
    let runs: Vec<_> = variants
        .iter()
        .map(|(n, _)| files(&root.join(format!("run-{n}"))))
        .collect();
    let fits: Vec<_> = variants
        .iter()
        .map(|(n, _)| files(&root.join(format!("fit-{n}"))))
        .collect();
    let same_runs = runs.windows(2).all(|w| w[0] == w[1]);
    let same_fits = fits.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same_runs && same_fits && runs[0].len() == 13,
        format!(
            "counts+manifest identical over 4 runs (threads 1, 1, 4, 8): {same_runs}, fit tables identical: {same_fits}, files per run: {}",
            runs[0].len()
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failed = 0;
    for (k, check) in criteria {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {k}: {} {} [{:.2} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
