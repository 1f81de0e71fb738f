//! Analytic-versus-brute-force checks behind `oracle-check`.

use std::f64::consts::FRAC_PI_2;

use bornlab_core::gates::{grid, ideal_probability_closed, s_theta};
use bornlab_core::models::{
    iq_probability, model_probability_epsilon, perturbed_gate, transmon_probability, Coefficient,
    EpsilonProfile, FourierTerm, GaussianEnvelope, IQImbalance, TransmonModel, DEFAULT_GATE_STEPS,
};
use bornlab_core::perturbation::{
    delta_p_commutator, delta_p_first_order, delta_p_operator, iq_delta_p, DEFAULT_QUAD_POINTS,
};
use bornlab_core::stats::{fit_abc, harmonic_decomposition, AngleSeries};
use bornlab_core::{Angle, Result, C64};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

const Q: usize = DEFAULT_QUAD_POINTS;
const MAX_N: u32 = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            measured,
            tolerance,
            pass: measured.is_finite() && measured <= tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OracleParams {
    pub eps: f64,
    pub corrupt_branch: Option<u32>,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            eps: 0.01,
            corrupt_branch: None,
        }
    }
}

/// Constant profile of magnitude `eps` with both quadratures present.
pub fn constant_profile(eps: f64) -> EpsilonProfile {
    EpsilonProfile::constant(Complex64::from_polar(eps, 1.0))
}

/// Fourier profile rescaled so that `max |eps(phi)| = eps`.
pub fn fourier_profile(eps: f64) -> Result<EpsilonProfile> {
    let base = EpsilonProfile::Fourier {
        terms: vec![
            FourierTerm {
                harmonic: 0,
                cos: Coefficient::Constant(C64::new(0.05, 0.04)),
                sin: Coefficient::Constant(C64::new(0.0, 0.0)),
            },
            FourierTerm {
                harmonic: 1,
                cos: Coefficient::Constant(C64::new(-0.02, 0.03)),
                sin: Coefficient::Constant(C64::new(0.015, -0.01)),
            },
        ],
    };
    let m = base.max_magnitude()?;
    Ok(base.scaled(eps / m))
}

/// Symmetric (`eps(phi) = eps(pi/2 - phi)`) profile.
pub fn symmetric_profile(eps: f64) -> Result<EpsilonProfile> {
    let base = EpsilonProfile::Fourier {
        terms: vec![
            FourierTerm {
                harmonic: 0,
                cos: Coefficient::Constant(C64::new(0.03, 0.05)),
                sin: Coefficient::Constant(C64::new(0.0, 0.0)),
            },
            FourierTerm {
                harmonic: 1,
                cos: Coefficient::Constant(C64::new(0.01, -0.03)),
                sin: Coefficient::Constant(C64::new(0.0, 0.0)),
            },
        ],
    };
    let m = base.max_magnitude()?;
    Ok(base.scaled(eps / m))
}

fn analytic(params: &OracleParams, n: u32, theta: Angle, profile: &EpsilonProfile) -> Result<f64> {
    let v = delta_p_first_order(n, theta, profile, Q)?;
    Ok(if params.corrupt_branch == Some(n % 4) {
        -v
    } else {
        v
    })
}

/// Largest `|analytic - brute force|` for each `n = 1..=8`.
pub fn gaps_by_n(params: &OracleParams, profile: &EpsilonProfile) -> Result<Vec<f64>> {
    (1..=MAX_N)
        .into_par_iter()
        .map(|n| {
            let mut gap = 0.0f64;
            for theta in grid() {
                let brute = model_probability_epsilon(n, theta, profile)?
                    - ideal_probability_closed(n, theta);
                gap = gap.max((analytic(params, n, theta, profile)? - brute).abs());
            }
            Ok(gap)
        })
        .collect()
}

fn max_over<F>(f: F) -> Result<f64>
where
    F: Fn(u32, Angle) -> Result<f64> + Sync,
{
    let values: Vec<f64> = (1..=MAX_N)
        .into_par_iter()
        .map(|n| {
            grid()
                .into_iter()
                .map(|t| f(n, t))
                .try_fold(0.0f64, |m, v| v.map(|v| m.max(v.abs())))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

pub fn run_checks(params: &OracleParams) -> Result<Vec<Check>> {
    let eps = params.eps;
    let eps2 = eps * eps;
    let constant = constant_profile(eps);
    let fourier = fourier_profile(eps)?;
    let symmetric = symmetric_profile(eps)?;
    let zero = EpsilonProfile::zero();
    let mut checks = Vec::new();

    let zero_gap = max_over(|n, t| {
        Ok(model_probability_epsilon(n, t, &zero)? - ideal_probability_closed(n, t))
    })?;
    checks.push(Check::at_most(
        "zero_profile_matches_ideal",
        zero_gap,
        1e-10,
    ));

    let mut unitarity = 0.0f64;
    let mut ideal_gate = 0.0f64;
    for theta in grid() {
        unitarity =
            unitarity.max(perturbed_gate(theta, &fourier, DEFAULT_GATE_STEPS)?.unitarity_defect());
        ideal_gate = ideal_gate
            .max(perturbed_gate(theta, &zero, DEFAULT_GATE_STEPS)?.max_abs_diff(&s_theta(theta)));
    }
    checks.push(Check::at_most("perturbed_gate_unitary", unitarity, 1e-10));
    checks.push(Check::at_most(
        "zero_profile_gate_is_s_theta",
        ideal_gate,
        1e-10,
    ));

    let mut routes = 0.0f64;
    for profile in [&constant, &fourier] {
        routes = routes.max(max_over(|n, t| {
            let a = analytic(params, n, t, profile)?;
            let b = delta_p_commutator(n, t, profile, Q)?;
            let c = delta_p_operator(n, t, profile, Q)?;
            Ok((a - b).abs().max((a - c).abs()))
        })?);
    }
    checks.push(Check::at_most("first_order_routes_agree", routes, 1e-12));

    let mut worst_ratio = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut scaling_error = 0.0f64;
    for profile in [&constant, &fourier] {
        let full = gaps_by_n(params, profile)?;
        let half = gaps_by_n(params, &profile.scaled(0.5))?;
        for (k, (g, h)) in full.iter().zip(&half).enumerate() {
            let n = (k + 1) as f64;
            let bound = (1.0 + (n * FRAC_PI_2).powi(2)) * eps2;
            worst_ratio = worst_ratio.max(g / bound);
            worst_gap = worst_gap.max(*g);
            scaling_error = scaling_error.max((g / h / 4.0 - 1.0).abs());
        }
    }
    checks.push(Check::at_most(
        "bruteforce_gap_over_bound",
        worst_ratio,
        1.0,
    ));
    checks.push(Check::at_most(
        "bruteforce_gap",
        worst_gap,
        (1.0 + (MAX_N as f64 * FRAC_PI_2).powi(2)) * eps2,
    ));
    checks.push(Check::at_most(
        "quadratic_scaling_deviation",
        scaling_error,
        0.125,
    ));

    let mut sum_rule = 0.0f64;
    let mut branch = 0.0f64;
    for theta in grid() {
        let p1 = analytic(params, 1, theta, &symmetric)?;
        let p3 = analytic(params, 3, theta, &symmetric)?;
        sum_rule = sum_rule.max((p1 + p3).abs());
        let q1 = analytic(params, 1, theta, &fourier)?;
        let q5 = analytic(params, 5, theta, &fourier)?;
        branch = branch.max((q1 - q5).abs());
    }
    checks.push(Check::at_most("sum_rule_one_plus_three", sum_rule, 1e-10));
    checks.push(Check::at_most("branch_equality_one_five", branch, 0.0));

    let imbalance = IQImbalance::new(Complex64::from_polar(eps, 0.7))?;
    let envelope = GaussianEnvelope::quarter_turn(TransmonModel::default().duration())?;
    let analytic_iq: Vec<f64> = grid()
        .into_iter()
        .map(|t| iq_delta_p(t, &imbalance))
        .collect();
    let brute_iq: Vec<f64> = grid()
        .into_par_iter()
        .map(|t| Ok(iq_probability(t, &imbalance, &envelope)? - ideal_probability_closed(1, t)))
        .collect::<Result<_>>()?;
    let iq_gap = analytic_iq
        .iter()
        .zip(&brute_iq)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    checks.push(Check::at_most(
        "iq_second_harmonic_analytic",
        harmonic_decomposition(&analytic_iq)?.magnitude(2),
        1e-12,
    ));
    checks.push(Check::at_most(
        "iq_second_harmonic_bruteforce",
        harmonic_decomposition(&brute_iq)?.magnitude(2),
        3.0 * eps2,
    ));
    checks.push(Check::at_most("iq_closed_form_gap", iq_gap, 3.0 * eps2));

    let model = TransmonModel::default();
    let rwa: Vec<f64> = grid()
        .into_par_iter()
        .map(|t| transmon_probability(1, t, &model, true))
        .collect::<Result<_>>()?;
    let spread = fit_abc(&AngleSeries::noiseless(rwa)?)?.residual_spread();
    checks.push(Check::at_most("rwa_theta_independence", spread, 1e-10));

    Ok(checks)
}
