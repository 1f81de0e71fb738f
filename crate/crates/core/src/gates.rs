//! Ideal gates, exact Born probabilities for `S_theta^n S |0>` and the
//! projector family used by the first-order analysis.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, StateVector, C64, ONE, ZERO};

/// Number of angles in the measurement grid.
pub const GRID_SIZE: usize = 16;
/// Grid indices run over `-7..=8`, i.e. `theta_j = j pi / 8`.
pub const GRID_INDICES: std::ops::RangeInclusive<i32> = -7..=8;
/// Upper bound on the number of `S_theta` applications in one circuit.
pub const MAX_GATES: u32 = 10_000;

/// Rotation phase in radians, canonicalized to `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub fn new(theta: f64) -> Self {
        if theta > -PI && theta <= PI {
            return Angle(theta);
        }
        let mut t = theta.rem_euclid(2.0 * PI);
        if t > PI {
            t -= 2.0 * PI;
        }
        Angle(t)
    }

    /// Grid angle `j pi / 8`.
    pub fn from_index(j: i32) -> Self {
        Angle::new(j as f64 * PI / 8.0)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Grid index `j` when this angle lies on the 16-point grid.
    pub fn grid_index(self) -> Option<i32> {
        let j = (self.0 * 8.0 / PI).round() as i32;
        let j = if j == -8 { 8 } else { j };
        (GRID_INDICES.contains(&j) && (Angle::from_index(j).0 - self.0).abs() < 1e-12).then_some(j)
    }

    /// Position of a grid angle in `grid()` order (0 for `j = -7`).
    pub fn grid_slot(self) -> Result<usize> {
        self.grid_index()
            .map(|j| (j + 7) as usize)
            .ok_or(Error::OffGrid(self.0))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The measurement grid `theta_j = j pi / 8`, `j = -7, ..., 8`.
pub fn grid() -> Vec<Angle> {
    GRID_INDICES.map(Angle::from_index).collect()
}

/// `n_gates` applications of `S_theta` after the initial `S`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_gates: u32,
    pub theta: Angle,
}

impl CircuitSpec {
    pub fn new(n_gates: u32, theta: Angle) -> Result<Self> {
        if n_gates > MAX_GATES {
            return Err(Error::invalid(format!(
                "n_gates = {n_gates} exceeds the cap of {MAX_GATES}"
            )));
        }
        Ok(Self { n_gates, theta })
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `pi/2` rotation about x: `(1/sqrt 2) [[1, -i], [-i, 1]]`.
pub fn s_gate() -> ComplexMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_rows(&[[c(r, 0.0), c(0.0, -r)], [c(0.0, -r), c(r, 0.0)]]).expect("2x2")
}

/// `diag(e^{-i theta/2}, e^{i theta/2})`.
pub fn z_gate(theta: Angle) -> ComplexMatrix {
    let t = theta.radians();
    ComplexMatrix::diagonal(&[
        C64::from_polar(1.0, -t / 2.0),
        C64::from_polar(1.0, t / 2.0),
    ])
    .expect("2x2")
}

/// Native phased gate `(1/sqrt 2) [[1, -i e^{-i theta}], [-i e^{i theta}, 1]]`,
/// which is `Z_theta S Z_theta^dagger` with the `z_gate` convention above.
pub fn s_theta(theta: Angle) -> ComplexMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let t = theta.radians();
    let minus_i = c(0.0, -r);
    ComplexMatrix::from_rows(&[
        [c(r, 0.0), minus_i * C64::from_polar(1.0, -t)],
        [minus_i * C64::from_polar(1.0, t), c(r, 0.0)],
    ])
    .expect("2x2")
}

/// Probability of outcome 1 after `gate^n prep |initial>`.
pub fn circuit_probability(
    prep: &ComplexMatrix,
    gate: &ComplexMatrix,
    n: u32,
    initial: &StateVector,
) -> Result<f64> {
    let psi = gate.pow(n as u64).matmul(prep)?.apply(initial)?;
    Ok(psi.probability(1))
}

/// Born probability of outcome 1 for `S_theta^n S |0>`, by explicit matrix products.
pub fn ideal_probability(spec: &CircuitSpec) -> f64 {
    let zero = StateVector::basis(2, 0).expect("2-level");
    circuit_probability(&s_gate(), &s_theta(spec.theta), spec.n_gates, &zero).expect("2x2 products")
}

/// Closed form of [`ideal_probability`]: `cos^2(theta/2)` for `n = 1 mod 4`,
/// `sin^2(theta/2)` for `n = 3 mod 4`, `1/2` for even `n`.
pub fn ideal_probability_closed(n: u32, theta: Angle) -> f64 {
    let half = theta.radians() / 2.0;
    match n % 4 {
        1 => half.cos().powi(2),
        3 => half.sin().powi(2),
        _ => 0.5,
    }
}

/// Coefficients `(A, B, C)` of the ideal curve `A sin + B cos + C` for `n` gates.
pub fn ideal_abc(n: u32) -> (f64, f64, f64) {
    match n % 4 {
        1 => (0.0, 0.5, 0.5),
        3 => (0.0, -0.5, 0.5),
        _ => (0.0, 0.0, 0.5),
    }
}

/// `S_theta^{dagger n} |0><0| S_theta^n`; period 4 in `n`.
pub fn rho_n_theta(n: u32, theta: Angle) -> ComplexMatrix {
    let g = s_theta(theta).pow((n % 4) as u64);
    let p0 = ComplexMatrix::diagonal(&[ONE, ZERO]).expect("2x2");
    g.adjoint() * p0 * g
}
