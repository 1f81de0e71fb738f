//! Small-dimension complex linear algebra and the time-ordered propagator.
//!
//! Everything here works on 2- and 3-level systems only. The propagator is a
//! midpoint-rule product of exact exponentials and serves as the brute-force
//! reference for the analytic formulas in [`crate::perturbation`].

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when a generator sample is checked for Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-12;

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 3 => Ok(()),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Dense complex matrix of dimension 2 or 3.
///
/// Storage is a fixed 3x3 array; for `dim == 2` the third row and column
/// stay zero.
#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: [[C64; 3]; 3],
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: [[ZERO; 3]; 3],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for k in 0..dim {
            m.data[k][k] = ONE;
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m.data[i][j] = f(i, j);
            }
        }
        Ok(m)
    }

    /// Builds a matrix from row-major rows; every row must have `rows.len()` entries.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: r.as_ref().len(),
                });
            }
        }
        Self::from_fn(dim, |i, j| rows[i].as_ref()[j])
    }

    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        Self::from_fn(entries.len(), |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.data[i][j] = value;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i][j] = self.data[j][i].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let n = self.dim;
        let mut out = [[ZERO; 3]; 3];
        for (i, row) in out.iter_mut().enumerate().take(n) {
            for (j, cell) in row.iter_mut().enumerate().take(n) {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.data[i][k] * other.data[k][j];
                }
                *cell = acc;
            }
        }
        Ok(Self { dim: n, data: out })
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = *self;
        for row in out.data.iter_mut() {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self.data[k][k]).sum()
    }

    pub fn det(&self) -> C64 {
        let m = &self.data;
        match self.dim {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// `a b - b a`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(self.matmul(other)? - other.matmul(self)?)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance; panics on mismatched dimensions.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    /// `max |U^dagger U - I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint() * *self;
        gram.max_abs_diff(&Self::identity(self.dim).expect("valid dim"))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `self^power` by repeated squaring.
    pub fn pow(&self, mut power: u64) -> Self {
        let mut base = *self;
        let mut acc = Self::identity(self.dim).expect("valid dim");
        while power > 0 {
            if power & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            power >>= 1;
        }
        acc
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if self.dim != state.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: state.dim,
            });
        }
        let mut amps = [ZERO; 3];
        for (i, a) in amps.iter_mut().enumerate().take(self.dim) {
            *a = (0..self.dim).map(|k| self.data[i][k] * state.amps[k]).sum();
        }
        Ok(StateVector {
            dim: self.dim,
            amps,
        })
    }

    fn entries(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.dim).flat_map(move |i| (0..self.dim).map(move |j| self.data[i][j]))
    }

    fn to_nalgebra3(self) -> Matrix3<C64> {
        Matrix3::from_fn(|i, j| self.data[i][j])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.dim && j < self.dim, "index out of range");
        &self.data[i][j]
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: Self) -> Self {
        self.matmul(&rhs).expect("matrix dimensions must agree")
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions must agree");
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.data[i][j] += rhs.data[i][j];
            }
        }
        out
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: Self) -> Self {
        self + rhs.scale(-ONE)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<C64>> = (0..self.dim)
            .map(|i| self.data[i][..self.dim].to_vec())
            .collect();
        f.debug_struct("ComplexMatrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

/// Pure state of a 2- or 3-level system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector {
    dim: usize,
    amps: [C64; 3],
}

impl StateVector {
    pub fn new(amplitudes: &[C64]) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let mut amps = [ZERO; 3];
        amps[..amplitudes.len()].copy_from_slice(amplitudes);
        Ok(Self {
            dim: amplitudes.len(),
            amps,
        })
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        if k >= dim {
            return Err(Error::invalid(format!(
                "basis index {k} out of range for dim {dim}"
            )));
        }
        let mut amps = [ZERO; 3];
        amps[k] = ONE;
        Ok(Self { dim, amps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitude(&self, k: usize) -> C64 {
        assert!(k < self.dim, "index out of range");
        self.amps[k]
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps[..self.dim]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes()
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        let mut out = *self;
        for a in out.amps.iter_mut() {
            *a /= n;
        }
        out
    }

    /// Born probability of basis outcome `k`.
    pub fn probability(&self, k: usize) -> f64 {
        self.amplitude(k).norm_sqr()
    }

    /// Embeds a qubit state into the lowest two levels of a qutrit.
    pub fn embed3(&self) -> Self {
        let mut out = *self;
        out.dim = 3;
        out
    }
}

/// `exp(-i * scale * h)` for Hermitian `h`.
///
/// The 2x2 case uses the closed Pauli-vector form; the 3x3 case goes through a
/// Hermitian eigendecomposition.
pub fn matrix_exponential_antihermitian(h: &ComplexMatrix, scale: f64) -> ComplexMatrix {
    debug_assert!(h.is_hermitian(1e-9), "generator must be Hermitian");
    match h.dim {
        2 => exp_pauli(h, scale),
        _ => exp_eigen3(h, scale),
    }
}

fn exp_pauli(h: &ComplexMatrix, scale: f64) -> ComplexMatrix {
    let a = h.data[0][0].re;
    let d = h.data[1][1].re;
    let b = h.data[0][1];
    let h0 = 0.5 * (a + d);
    let hz = 0.5 * (a - d);
    let len = (hz * hz + b.norm_sqr()).sqrt();
    let angle = scale * len;
    // sin(angle)/len, continuous at len = 0
    let sinc = if len > 1e-300 {
        angle.sin() / len
    } else {
        scale
    };
    let c = C64::new(angle.cos(), 0.0);
    let k = C64::new(0.0, -sinc);
    let phase = C64::from_polar(1.0, -scale * h0);
    let mut out = ComplexMatrix {
        dim: 2,
        data: [[ZERO; 3]; 3],
    };
    out.data[0][0] = phase * (c + k * hz);
    out.data[1][1] = phase * (c - k * hz);
    out.data[0][1] = phase * k * b;
    out.data[1][0] = phase * k * b.conj();
    out
}

fn exp_eigen3(h: &ComplexMatrix, scale: f64) -> ComplexMatrix {
    let eig = h.to_nalgebra3().symmetric_eigen();
    let q = eig.eigenvectors;
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| C64::from_polar(1.0, -scale * lambda))
        .collect();
    let mut out = ComplexMatrix {
        dim: 3,
        data: [[ZERO; 3]; 3],
    };
    for i in 0..3 {
        for j in 0..3 {
            out.data[i][j] = (0..3)
                .map(|k| q[(i, k)] * phases[k] * q[(j, k)].conj())
                .sum();
        }
    }
    out
}

/// A Hermitian generator `H(s)` sampled on `[start, end]`.
pub struct TimeDependentGenerator<F> {
    hamiltonian: F,
    start: f64,
    end: f64,
    steps: usize,
}

impl<F> TimeDependentGenerator<F>
where
    F: Fn(f64) -> ComplexMatrix,
{
    pub fn new(hamiltonian: F, start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::invalid(format!(
                "step_count must be >= 2, got {steps}"
            )));
        }
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::invalid("interval bounds must be finite"));
        }
        Ok(Self {
            hamiltonian,
            start,
            end,
            steps,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sample(&self, s: f64) -> ComplexMatrix {
        (self.hamiltonian)(s)
    }
}

/// Time-ordered exponential `T exp(-i ∫ H(s) ds)` over the generator's interval.
///
/// Midpoint-rule product of exact step exponentials, later steps multiplied on
/// the left. Second-order accurate in the step size.
pub fn time_ordered_propagator<F>(gen: &TimeDependentGenerator<F>) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let h = (gen.end - gen.start) / gen.steps as f64;
    let mut u: Option<ComplexMatrix> = None;
    for k in 0..gen.steps {
        let s = gen.start + (k as f64 + 0.5) * h;
        let hs = gen.sample(s);
        let deviation = hs.hermiticity_defect();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { s, deviation });
        }
        let step = matrix_exponential_antihermitian(&hs, h);
        u = Some(match u {
            None => step,
            Some(acc) => step.matmul(&acc)?,
        });
    }
    Ok(u.expect("at least two steps"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[[ZERO, ONE], [ONE, ZERO]]).unwrap()
    }

    fn s_matrix() -> ComplexMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_rows(&[[c(r, 0.0), c(0.0, -r)], [c(0.0, -r), c(r, 0.0)]]).unwrap()
    }

    fn taylor_exp(h: &ComplexMatrix, scale: f64, terms: usize) -> ComplexMatrix {
        let a = h.scale(c(0.0, -scale));
        let mut term = ComplexMatrix::identity(h.dim()).unwrap();
        let mut sum = term;
        for k in 1..terms {
            term = (term * a).scale(c(1.0 / k as f64, 0.0));
            sum = sum + term;
        }
        sum
    }

    fn random_hermitian3(seed: u64) -> ComplexMatrix {
        // small LCG keeps this test free of RNG crates
        let mut state = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = ComplexMatrix::zeros(3).unwrap();
        for i in 0..3 {
            m.set(i, i, c(next(), 0.0));
            for j in (i + 1)..3 {
                let v = c(next(), next());
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        m
    }

    #[test]
    fn matmul_identity() {
        let id = ComplexMatrix::identity(2).unwrap();
        assert_eq!(id.matmul(&id).unwrap(), id);
    }

    #[test]
    fn matmul_s_times_adjoint_is_identity() {
        let s = s_matrix();
        let p = s.matmul(&s.adjoint()).unwrap();
        assert!(p.max_abs_diff(&ComplexMatrix::identity(2).unwrap()) < 1e-15);
    }

    #[test]
    fn s_squared_is_x_up_to_phase() {
        let s = s_matrix();
        let s2 = s * s;
        assert!(s2[(0, 0)].norm() < 1e-15 && s2[(1, 1)].norm() < 1e-15);
        assert!((s2[(0, 1)].norm() - 1.0).abs() < 1e-15);
        assert!((s2[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matmul_rejects_dimension_mismatch() {
        let a = ComplexMatrix::identity(2).unwrap();
        let b = ComplexMatrix::identity(3).unwrap();
        assert!(matches!(
            a.matmul(&b),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
        assert!(ComplexMatrix::zeros(4).is_err());
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        for dim in [2, 3] {
            let z = ComplexMatrix::zeros(dim).unwrap();
            let u = matrix_exponential_antihermitian(&z, 1.3);
            assert!(u.max_abs_diff(&ComplexMatrix::identity(dim).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn exponential_reproduces_z_rotation() {
        let h = ComplexMatrix::diagonal(&[c(-0.5, 0.0), c(0.5, 0.0)]).unwrap();
        for theta in [0.3, -1.2, PI] {
            let u = matrix_exponential_antihermitian(&h, theta);
            let z = ComplexMatrix::diagonal(&[
                C64::from_polar(1.0, -theta / 2.0),
                C64::from_polar(1.0, theta / 2.0),
            ])
            .unwrap();
            // exp(-i theta diag(-1/2, 1/2)) = diag(e^{i theta/2}, e^{-i theta/2}) = Z_theta^dagger
            assert!(u.max_abs_diff(&z.adjoint()) < 1e-15);
        }
    }

    #[test]
    fn exponential_3x3_matches_taylor_series() {
        for seed in 0..20 {
            let h = random_hermitian3(seed);
            let u = matrix_exponential_antihermitian(&h, 0.1);
            let t = taylor_exp(&h, 0.1, 20);
            assert!(u.max_abs_diff(&t) < 1e-12, "seed {seed}");
            assert!(u.unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn exponential_2x2_matches_taylor_series() {
        let h =
            ComplexMatrix::from_rows(&[[c(0.3, 0.0), c(0.2, -0.7)], [c(0.2, 0.7), c(-1.1, 0.0)]])
                .unwrap();
        let u = matrix_exponential_antihermitian(&h, 0.4);
        assert!(u.max_abs_diff(&taylor_exp(&h, 0.4, 30)) < 1e-14);
    }

    #[test]
    fn constant_generator_matches_closed_form() {
        // H = X/2 over [0, pi/2] integrates to pi X / 4
        let half_x = pauli_x().scale(c(0.5, 0.0));
        let gen = TimeDependentGenerator::new(|_| half_x, 0.0, FRAC_PI_2, 16).unwrap();
        let u = time_ordered_propagator(&gen).unwrap();
        let (cs, sn) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
        let expected =
            ComplexMatrix::from_rows(&[[c(cs, 0.0), c(0.0, -sn)], [c(0.0, -sn), c(cs, 0.0)]])
                .unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian_sample_and_reports_s() {
        let bad = ComplexMatrix::from_rows(&[[ZERO, ONE], [ZERO, ZERO]]).unwrap();
        let good = pauli_x();
        let gen =
            TimeDependentGenerator::new(move |s| if s > 0.5 { bad } else { good }, 0.0, 1.0, 4)
                .unwrap();
        match time_ordered_propagator(&gen) {
            Err(Error::NotHermitian { s, .. }) => assert!((s - 0.625).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(TimeDependentGenerator::new(|_| good, 0.0, 1.0, 1).is_err());
    }

    fn chirped(s: f64) -> ComplexMatrix {
        let off = C64::from_polar(1.0 + 0.3 * s, 2.0 * s * s);
        let mut m = ComplexMatrix::zeros(3).unwrap();
        m.set(0, 1, off);
        m.set(1, 0, off.conj());
        m.set(1, 2, c(0.7 * s.cos(), 0.0));
        m.set(2, 1, c(0.7 * s.cos(), 0.0));
        m.set(2, 2, c(0.4, 0.0));
        m
    }

    #[test]
    fn second_order_convergence() {
        let run = |steps| {
            time_ordered_propagator(&TimeDependentGenerator::new(chirped, 0.0, 2.0, steps).unwrap())
                .unwrap()
        };
        let (u1, u2, u4) = (run(64), run(128), run(256));
        // Richardson reference for a second-order scheme
        let reference = u4 + (u4 - u2).scale(c(1.0 / 3.0, 0.0));
        let e1 = u1.max_abs_diff(&reference);
        let e2 = u2.max_abs_diff(&reference);
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn propagator_is_unitary_and_composes() {
        let full =
            time_ordered_propagator(&TimeDependentGenerator::new(chirped, 0.0, 2.0, 2048).unwrap())
                .unwrap();
        let first =
            time_ordered_propagator(&TimeDependentGenerator::new(chirped, 0.0, 1.0, 1024).unwrap())
                .unwrap();
        let second =
            time_ordered_propagator(&TimeDependentGenerator::new(chirped, 1.0, 2.0, 1024).unwrap())
                .unwrap();
        assert!(full.unitarity_defect() < 1e-10);
        assert!((full.det().norm() - 1.0).abs() < 1e-10);
        // same midpoints, so composition is exact up to rounding
        assert!((second * first).max_abs_diff(&full) < 1e-12);
    }

    #[test]
    fn state_probabilities_and_norm() {
        let s = s_matrix();
        let psi = s.apply(&StateVector::basis(2, 0).unwrap()).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        assert!((psi.probability(1) - 0.5).abs() < 1e-15);
        assert_eq!(psi.embed3().dim(), 3);
    }
}
