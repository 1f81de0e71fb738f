//! First-order deviation `delta p` of the outcome-1 probability under a small
//! pulse imperfection, by three independent routes: the piecewise closed
//! integrals over `phi`, the commutator kernel traced against the projector
//! family, and the interaction-picture correction operator `delta(S_theta^n)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{grid, rho_n_theta, s_gate, s_theta, Angle};
use crate::models::{EpsilonProfile, IQImbalance, PhiProfile};
use crate::qcore::{ComplexMatrix, StateVector, C64, ZERO};

pub const DEFAULT_QUAD_POINTS: usize = 64;
pub const MIN_QUAD_POINTS: usize = 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * pn - p0) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped onto an interval.
#[derive(Clone, Debug)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(points: usize) -> Result<Self> {
        if points < MIN_QUAD_POINTS {
            return Err(Error::invalid(format!(
                "quad_points must be >= {MIN_QUAD_POINTS}, got {points}"
            )));
        }
        let (nodes, weights) = gauss_legendre(points);
        Ok(Self { nodes, weights })
    }

    pub fn integrate<T, F>(&self, a: f64, b: f64, f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: Fn(f64) -> T,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&x, &w)| {
                acc + f(mid + half * x) * (w * half)
            })
    }
}

/// `i[H'_theta(phi), rho_1]` kernel:
/// `[[a, -b], [-b, -a]]` with `a = eps_r cos theta + eps_i cos phi sin theta`, `b = eps_i sin phi`.
pub fn commutator_kernel(theta: Angle, phi: f64, eps: C64) -> ComplexMatrix {
    let t = theta.radians();
    let a = eps.re * t.cos() + eps.im * phi.cos() * t.sin();
    let b = eps.im * phi.sin();
    ComplexMatrix::from_rows(&[
        [C64::new(a, 0.0), C64::new(-b, 0.0)],
        [C64::new(-b, 0.0), C64::new(-a, 0.0)],
    ])
    .expect("2x2")
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1 (no gate applied)"));
    }
    Ok(())
}

/// Piecewise first-order integrand for `n mod 4`.
fn branch_integrand(n: u32, theta: Angle, eps: C64, phi: f64) -> f64 {
    let (s, c) = theta.radians().sin_cos();
    let nf = n as f64;
    match n % 4 {
        1 => s * phi.sin() * eps.im / 2.0,
        2 => s * (phi.sin() - phi.cos()) * eps.im / 2.0 - c * eps.re * nf / 2.0,
        3 => -s * phi.cos() * eps.im / 2.0,
        _ => c * eps.re * nf / 2.0,
    }
}

/// `delta p` for `n` gates from the closed piecewise integrals over `[0, pi/2]`.
pub fn delta_p_first_order(
    n: u32,
    theta: Angle,
    profile: &EpsilonProfile,
    quad_points: usize,
) -> Result<f64> {
    check_n(n)?;
    let quad = Quadrature::new(quad_points)?;
    profile.validate()?;
    let eps = profile.resolve(theta)?;
    Ok(quad.integrate(0.0, FRAC_PI_2, |phi| {
        branch_integrand(n, theta, eps.eval(phi), phi)
    }))
}

/// `delta p` from `∫_0^{n pi/2} Re Tr[rho_{n theta} C(phi)] / 2 dphi`,
/// with `eps` taken at `phi mod pi/2`.
pub fn delta_p_commutator(
    n: u32,
    theta: Angle,
    profile: &EpsilonProfile,
    quad_points: usize,
) -> Result<f64> {
    check_n(n)?;
    let quad = Quadrature::new(quad_points)?;
    profile.validate()?;
    let eps = profile.resolve(theta)?;
    let rho = rho_n_theta(n, theta);
    let mut total = 0.0;
    for k in 0..n {
        let start = k as f64 * FRAC_PI_2;
        total += quad.integrate(start, start + FRAC_PI_2, |phi| {
            let kernel = commutator_kernel(theta, phi, eps.eval(phi - start));
            (rho * kernel).trace().re / 2.0
        });
    }
    Ok(total)
}

/// `U_theta(phi) = [[cos phi/2, -i e^{-i theta} sin phi/2], [-i e^{i theta} sin phi/2, cos phi/2]]`.
pub fn u_theta(theta: Angle, phi: f64) -> ComplexMatrix {
    let (s, c) = (phi / 2.0).sin_cos();
    let t = theta.radians();
    ComplexMatrix::from_rows(&[
        [
            C64::new(c, 0.0),
            C64::new(0.0, -s) * C64::from_polar(1.0, -t),
        ],
        [
            C64::new(0.0, -s) * C64::from_polar(1.0, t),
            C64::new(c, 0.0),
        ],
    ])
    .expect("2x2")
}

fn insertion(theta: Angle, eps: C64) -> ComplexMatrix {
    let t = theta.radians();
    let minus_i = C64::new(0.0, -1.0);
    ComplexMatrix::from_rows(&[
        [ZERO, minus_i * eps * C64::from_polar(1.0, -t)],
        [minus_i * eps.conj() * C64::from_polar(1.0, t), ZERO],
    ])
    .expect("2x2")
}

fn correction_with(n: u32, theta: Angle, eps: &PhiProfile, quad: &Quadrature) -> ComplexMatrix {
    let mut integral = ComplexMatrix::zeros(2).expect("2x2");
    for k in 0..n {
        let start = k as f64 * FRAC_PI_2;
        integral = integral
            + quad
                .integrate(start, start + FRAC_PI_2, |phi| {
                    let u = u_theta(theta, phi);
                    MatrixSum(u.adjoint() * insertion(theta, eps.eval(phi - start)) * u)
                })
                .0;
    }
    s_theta(theta).pow(n as u64) * integral.scale(C64::new(0.5, 0.0))
}

/// First-order correction `delta(S_theta^n) = S_theta^n ∫_0^{n pi/2} U^† K U dphi / 2`.
pub fn first_order_gate_correction(
    n: u32,
    theta: Angle,
    profile: &EpsilonProfile,
    quad_points: usize,
) -> Result<ComplexMatrix> {
    check_n(n)?;
    let quad = Quadrature::new(quad_points)?;
    profile.validate()?;
    Ok(correction_with(n, theta, &profile.resolve(theta)?, &quad))
}

/// `delta p = -2 Re[conj(<0|S_theta^n S|0>) <0|delta(S_theta^n) S|0>]`.
pub fn delta_p_from_correction(n: u32, theta: Angle, correction: &ComplexMatrix) -> Result<f64> {
    let prepared = s_gate().apply(&StateVector::basis(2, 0)?)?;
    let ideal = s_theta(theta).pow(n as u64).apply(&prepared)?;
    let delta = correction.apply(&prepared)?;
    Ok(-2.0 * (ideal.amplitude(0).conj() * delta.amplitude(0)).re)
}

/// `delta p` through the correction operator.
pub fn delta_p_operator(
    n: u32,
    theta: Angle,
    profile: &EpsilonProfile,
    quad_points: usize,
) -> Result<f64> {
    let correction = first_order_gate_correction(n, theta, profile, quad_points)?;
    delta_p_from_correction(n, theta, &correction)
}

/// First-order single-gate deviation under I/Q imbalance:
/// `sin theta (sin 2theta Re eps + cos 2theta Im eps) / 2`.
pub fn iq_delta_p(theta: Angle, imbalance: &IQImbalance) -> f64 {
    let t = theta.radians();
    t.sin() * ((2.0 * t).sin() * imbalance.eps.re + (2.0 * t).cos() * imbalance.eps.im) / 2.0
}

/// First-order deviations over the 16-point grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCurve {
    pub n: u32,
    pub values: Vec<f64>,
}

impl DeviationCurve {
    pub fn first_order(n: u32, profile: &EpsilonProfile, quad_points: usize) -> Result<Self> {
        let values = grid()
            .into_iter()
            .map(|t| delta_p_first_order(n, t, profile, quad_points))
            .collect::<Result<Vec<_>>>()?;
        let curve = Self { n, values };
        curve.check(profile.max_magnitude()?)?;
        Ok(curve)
    }

    /// Finite and within the loose bound `4 max|eps|` (scaled by `n` for the growing branches).
    fn check(&self, max_eps: f64) -> Result<()> {
        let growth = if self.n % 2 == 0 {
            self.n.max(1) as f64
        } else {
            1.0
        };
        let bound = 4.0 * max_eps * growth;
        match self
            .values
            .iter()
            .find(|v| !v.is_finite() || v.abs() > bound)
        {
            Some(v) => Err(Error::invalid(format!(
                "deviation {v} exceeds bound {bound}"
            ))),
            None => Ok(()),
        }
    }
}

/// Sum of matrices, usable as a quadrature accumulator.
#[derive(Clone, Copy, Debug)]
struct MatrixSum(ComplexMatrix);

impl Default for MatrixSum {
    fn default() -> Self {
        MatrixSum(ComplexMatrix::zeros(2).expect("2x2"))
    }
}

impl std::ops::Add for MatrixSum {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        MatrixSum(self.0 + rhs.0)
    }
}

impl std::ops::Mul<f64> for MatrixSum {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        MatrixSum(self.0.scale(C64::new(rhs, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::ideal_probability_closed;
    use crate::models::{model_probability_epsilon, Coefficient, FourierTerm};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    const Q: usize = DEFAULT_QUAD_POINTS;

    fn fourier_profile(scale: f64) -> EpsilonProfile {
        EpsilonProfile::Fourier {
            terms: vec![
                FourierTerm {
                    harmonic: 0,
                    cos: Coefficient::Constant(C64::new(0.3, 0.5) * scale),
                    sin: Coefficient::Constant(ZERO),
                },
                FourierTerm {
                    harmonic: 1,
                    cos: Coefficient::Constant(C64::new(-0.2, 0.4) * scale),
                    sin: Coefficient::Constant(C64::new(0.1, -0.3) * scale),
                },
            ],
        }
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((moment - 2.0 / 31.0).abs() < 1e-14);
        let q = Quadrature::new(64).unwrap();
        assert!((q.integrate(0.0, FRAC_PI_2, f64::sin) - 1.0).abs() < 1e-15);
        assert!(Quadrature::new(8).is_err());
    }

    #[test]
    fn kernel_examples() {
        let k = commutator_kernel(Angle::new(FRAC_PI_2), 0.4, C64::new(0.3, 0.0));
        assert!(k.max_abs() < 1e-16);
        let k = commutator_kernel(Angle::new(FRAC_PI_2), FRAC_PI_2, C64::new(0.0, 1.0));
        assert!(k[(0, 0)].norm() < 1e-15 && k[(1, 1)].norm() < 1e-15);
        assert!((k[(0, 1)] + 1.0).norm() < 1e-15 && (k[(1, 0)] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn first_order_examples() {
        let c = 0.003;
        let im = EpsilonProfile::constant(C64::new(0.0, c));
        let re = EpsilonProfile::constant(C64::new(c, 0.0));
        for theta in grid() {
            let s = theta.radians().sin();
            let p1 = delta_p_first_order(1, theta, &im, Q).unwrap();
            let p3 = delta_p_first_order(3, theta, &im, Q).unwrap();
            assert!((p1 - c * s / 2.0).abs() < 1e-15);
            assert!((p3 + c * s / 2.0).abs() < 1e-15);
            let p4 = delta_p_first_order(4, theta, &re, Q).unwrap();
            assert!((p4 - c * PI * theta.radians().cos()).abs() < 1e-15);
            let p5 = delta_p_first_order(5, theta, &fourier_profile(0.05), Q).unwrap();
            assert_eq!(
                p5,
                delta_p_first_order(1, theta, &fourier_profile(0.05), Q).unwrap()
            );
        }
        assert!(delta_p_first_order(0, Angle::new(0.0), &im, Q).is_err());
        assert!(delta_p_first_order(1, Angle::new(0.0), &im, 4).is_err());
    }

    #[test]
    fn three_routes_agree() {
        for profile in [
            EpsilonProfile::constant(C64::new(0.004, -0.007)),
            fourier_profile(0.05),
        ] {
            for n in 1..=8 {
                for theta in grid() {
                    let closed = delta_p_first_order(n, theta, &profile, Q).unwrap();
                    let commutator = delta_p_commutator(n, theta, &profile, Q).unwrap();
                    let operator = delta_p_operator(n, theta, &profile, Q).unwrap();
                    assert!((closed - commutator).abs() < 1e-13, "n={n} theta={theta}");
                    assert!((closed - operator).abs() < 1e-13, "n={n} theta={theta}");
                }
            }
        }
    }

    #[test]
    fn correction_examples() {
        let zero =
            first_order_gate_correction(3, Angle::new(0.2), &EpsilonProfile::zero(), Q).unwrap();
        assert!(zero.max_abs() < 1e-16);
        let im = EpsilonProfile::constant(C64::new(0.0, 0.001));
        let t = Angle::new(FRAC_PI_2);
        let dp = delta_p_operator(1, t, &im, Q).unwrap();
        assert!((dp - 5e-4).abs() < 1e-9);
        assert!((dp - delta_p_first_order(1, t, &im, Q).unwrap()).abs() < 1e-9);
        for theta in grid() {
            let brute = model_probability_epsilon(1, theta, &im).unwrap()
                - ideal_probability_closed(1, theta);
            assert!((delta_p_operator(1, theta, &im, Q).unwrap() - brute).abs() < 2e-6);
        }
    }

    #[test]
    fn brute_force_gap_is_quadratic() {
        for profile in [
            EpsilonProfile::constant(C64::new(0.006, 0.008)),
            fourier_profile(0.02),
        ] {
            let m = profile.max_magnitude().unwrap();
            let half = profile.scaled(0.5);
            for n in 1..=8u32 {
                let mut gap_full = 0.0f64;
                let mut gap_half = 0.0f64;
                for theta in grid() {
                    let ideal = ideal_probability_closed(n, theta);
                    let g = |p: &EpsilonProfile| {
                        let brute = model_probability_epsilon(n, theta, p).unwrap() - ideal;
                        (brute - delta_p_first_order(n, theta, p, Q).unwrap()).abs()
                    };
                    gap_full = gap_full.max(g(&profile));
                    gap_half = gap_half.max(g(&half));
                }
                let growth = 1.0 + (n as f64 * FRAC_PI_2).powi(2);
                assert!(gap_full <= growth * m * m, "n={n} gap={gap_full}");
                let ratio = gap_full / gap_half;
                assert!((3.5..4.5).contains(&ratio), "n={n} ratio={ratio}");
            }
        }
    }

    #[test]
    fn u_theta_is_free_evolution() {
        use crate::qcore::{time_ordered_propagator, TimeDependentGenerator};
        let theta = Angle::new(0.8);
        let h = move |_phi: f64| {
            let off = C64::from_polar(0.5, -theta.radians());
            ComplexMatrix::from_rows(&[[ZERO, off], [off.conj(), ZERO]]).unwrap()
        };
        for phi in [0.3, FRAC_PI_4, 2.0] {
            let gen = TimeDependentGenerator::new(h, 0.0, phi, 64).unwrap();
            let u = time_ordered_propagator(&gen).unwrap();
            assert!(u.max_abs_diff(&u_theta(theta, phi)) < 1e-12);
        }
        assert!(u_theta(theta, FRAC_PI_2).max_abs_diff(&s_theta(theta)) < 1e-15);
    }

    #[test]
    fn iq_closed_form_examples() {
        let real = IQImbalance::new(C64::new(0.01, 0.0)).unwrap();
        assert_eq!(iq_delta_p(Angle::new(0.0), &real), 0.0);
        let v = iq_delta_p(Angle::new(FRAC_PI_4), &real);
        assert!((v - 0.01 * 2f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn deviation_curve_bounds() {
        let profile = EpsilonProfile::constant(C64::new(0.01, 0.02));
        for n in 1..=8 {
            let curve = DeviationCurve::first_order(n, &profile, Q).unwrap();
            assert_eq!(curve.values.len(), 16);
        }
    }

    proptest! {
        #[test]
        fn symmetric_profiles_cancel_between_one_and_three(
            a in -0.03f64..0.03, b in -0.03f64..0.03, c in -0.015f64..0.015, d in -0.015f64..0.015,
            theta in -PI..PI,
        ) {
            let profile = EpsilonProfile::Fourier {
                terms: vec![
                    FourierTerm { harmonic: 0, cos: Coefficient::Constant(C64::new(a, b)), sin: Coefficient::Constant(ZERO) },
                    FourierTerm { harmonic: 1, cos: Coefficient::Constant(C64::new(c, d)), sin: Coefficient::Constant(ZERO) },
                    FourierTerm { harmonic: 3, cos: Coefficient::Constant(C64::new(d, c)), sin: Coefficient::Constant(ZERO) },
                ],
            };
            let t = Angle::new(theta);
            let sum = delta_p_first_order(1, t, &profile, Q).unwrap() + delta_p_first_order(3, t, &profile, Q).unwrap();
            prop_assert!(sum.abs() < 1e-10);
        }

        #[test]
        fn odd_branches_repeat_with_period_four(n in 0u32..20, re in -0.05f64..0.05, im in -0.05f64..0.05, theta in -PI..PI) {
            let n = 2 * n + 1;
            let profile = EpsilonProfile::constant(C64::new(re, im));
            let t = Angle::new(theta);
            prop_assert_eq!(
                delta_p_first_order(n, t, &profile, Q).unwrap(),
                delta_p_first_order(n + 4, t, &profile, Q).unwrap()
            );
        }

        #[test]
        fn even_branches_scale_linearly_in_n(k in 1u32..10, re in -0.05f64..0.05, theta in -PI..PI) {
            let profile = EpsilonProfile::constant(C64::new(re, 0.0));
            let t = Angle::new(theta);
            let base = delta_p_first_order(4, t, &profile, Q).unwrap();
            let scaled = delta_p_first_order(4 * k, t, &profile, Q).unwrap();
            prop_assert!((scaled - k as f64 * base).abs() < 1e-14);
        }

        #[test]
        fn u_theta_closed_form_is_unitary(theta in -PI..PI, phi in 0.0f64..6.3) {
            prop_assert!(u_theta(Angle::new(theta), phi).unitarity_defect() < 1e-14);
        }
    }
}
