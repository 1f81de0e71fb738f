//! Imperfection models that produce the "true" outcome probabilities fed to
//! the shot sampler.
//!
//! * [`EpsilonProfile`]: complex fractional error `eps(theta, phi)` on the
//!   off-diagonal drive inside each `S_theta`, propagated exactly.
//! * [`IQImbalance`]: mixer gain/quadrature imbalance, which turns into an
//!   effective `eps = imbalance * e^{2 i theta}`.
//! * [`TransmonModel`]: three-level ladder driven by `2 cos(omega t - theta) V(t)`,
//!   propagated either in the rotating-wave approximation or with the full
//!   counter-rotating terms.
//! * [`ReadoutConfusion`] and [`DecoherenceRate`] post-process any of the above.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::gates::{self, grid, Angle, CircuitSpec, GRID_SIZE};
use crate::qcore::{
    time_ordered_propagator, ComplexMatrix, StateVector, TimeDependentGenerator, C64, ONE, ZERO,
};

/// Largest admissible `|eps|`.
pub const EPS_BOUND: f64 = 0.1;
/// Default number of propagation steps per gate for the epsilon and I/Q models.
pub const DEFAULT_GATE_STEPS: usize = 1024;
pub const MIN_GATE_STEPS: usize = 64;
/// Fewer samples per drive period than this is rejected for the full Hamiltonian.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 8.0;

/// Coefficient of one Fourier term: either fixed, or one value per grid angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(C64),
    PerAngle(Vec<C64>),
}

impl Coefficient {
    fn at(&self, theta: Angle) -> Result<C64> {
        match self {
            Coefficient::Constant(c) => Ok(*c),
            Coefficient::PerAngle(values) => Ok(values[theta.grid_slot()?]),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Coefficient::Constant(c) => *c == ZERO,
            Coefficient::PerAngle(v) => v.iter().all(|c| *c == ZERO),
        }
    }
}

/// `cos(4 k phi)` and `sin(4 k phi)` terms of harmonic `k` (period `pi/2` in `phi`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub harmonic: u32,
    pub cos: Coefficient,
    #[serde(default = "zero_coefficient")]
    pub sin: Coefficient,
}

fn zero_coefficient() -> Coefficient {
    Coefficient::Constant(ZERO)
}

/// Complex pulse imperfection `eps(theta, phi) = eps_r + i eps_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonProfile {
    Constant { re: f64, im: f64 },
    Fourier { terms: Vec<FourierTerm> },
}

/// An [`EpsilonProfile`] evaluated at a fixed `theta`; a function of `phi` only.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiProfile {
    terms: Vec<(f64, C64, C64)>,
}

impl PhiProfile {
    pub fn eval(&self, phi: f64) -> C64 {
        self.terms
            .iter()
            .map(|&(freq, a, b)| {
                if freq == 0.0 {
                    a
                } else {
                    a * (freq * phi).cos() + b * (freq * phi).sin()
                }
            })
            .sum()
    }

    fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.0).fold(0.0, f64::max)
    }
}

impl EpsilonProfile {
    pub fn constant(eps: C64) -> Self {
        EpsilonProfile::Constant {
            re: eps.re,
            im: eps.im,
        }
    }

    pub fn zero() -> Self {
        Self::constant(ZERO)
    }

    /// Fourier profile with one coefficient per grid angle on the constant term.
    pub fn per_angle(values: Vec<C64>) -> Self {
        EpsilonProfile::Fourier {
            terms: vec![FourierTerm {
                harmonic: 0,
                cos: Coefficient::PerAngle(values),
                sin: zero_coefficient(),
            }],
        }
    }

    pub fn resolve(&self, theta: Angle) -> Result<PhiProfile> {
        let terms = match self {
            EpsilonProfile::Constant { re, im } => vec![(0.0, C64::new(*re, *im), ZERO)],
            EpsilonProfile::Fourier { terms } => terms
                .iter()
                .map(|t| {
                    Ok((
                        4.0 * t.harmonic as f64,
                        t.cos.at(theta)?,
                        if t.harmonic == 0 {
                            ZERO
                        } else {
                            t.sin.at(theta)?
                        },
                    ))
                })
                .collect::<Result<_>>()?,
        };
        Ok(PhiProfile { terms })
    }

    pub fn is_theta_independent(&self) -> bool {
        match self {
            EpsilonProfile::Constant { .. } => true,
            EpsilonProfile::Fourier { terms } => terms.iter().all(|t| {
                matches!(t.cos, Coefficient::Constant(_))
                    && matches!(t.sin, Coefficient::Constant(_))
            }),
        }
    }

    /// True when `eps(phi) = eps(pi/2 - phi)`, i.e. no sine terms.
    pub fn is_phi_symmetric(&self) -> bool {
        match self {
            EpsilonProfile::Constant { .. } => true,
            EpsilonProfile::Fourier { terms } => {
                terms.iter().all(|t| t.harmonic == 0 || t.sin.is_zero())
            }
        }
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |c: &Coefficient| match c {
            Coefficient::Constant(v) => Coefficient::Constant(v * factor),
            Coefficient::PerAngle(v) => {
                Coefficient::PerAngle(v.iter().map(|x| x * factor).collect())
            }
        };
        match self {
            EpsilonProfile::Constant { re, im } => EpsilonProfile::Constant {
                re: re * factor,
                im: im * factor,
            },
            EpsilonProfile::Fourier { terms } => EpsilonProfile::Fourier {
                terms: terms
                    .iter()
                    .map(|t| FourierTerm {
                        harmonic: t.harmonic,
                        cos: scale(&t.cos),
                        sin: scale(&t.sin),
                    })
                    .collect(),
            },
        }
    }

    /// `max |eps(theta, phi)|` over the grid angles and a dense `phi` sampling.
    pub fn max_magnitude(&self) -> Result<f64> {
        let thetas = if self.is_theta_independent() {
            vec![Angle::new(0.0)]
        } else {
            grid()
        };
        let mut max = 0.0f64;
        for theta in thetas {
            let profile = self.resolve(theta)?;
            let samples = 64 * (1 + (profile.max_frequency() / 4.0) as usize);
            for k in 0..samples {
                let phi = FRAC_PI_2 * k as f64 / samples as f64;
                max = max.max(profile.eval(phi).norm());
            }
        }
        Ok(max)
    }

    pub fn validate(&self) -> Result<()> {
        if let EpsilonProfile::Fourier { terms } = self {
            for t in terms {
                for c in [&t.cos, &t.sin] {
                    if let Coefficient::PerAngle(v) = c {
                        if v.len() != GRID_SIZE {
                            return Err(Error::Config(format!(
                                "per-angle coefficient needs {GRID_SIZE} values, got {}",
                                v.len()
                            )));
                        }
                    }
                }
            }
        }
        let magnitude = self.max_magnitude()?;
        if !magnitude.is_finite() || magnitude > EPS_BOUND {
            return Err(Error::ProfileOutOfBounds {
                magnitude,
                bound: EPS_BOUND,
            });
        }
        Ok(())
    }
}

/// Generator of one imperfect `S_theta` as a function of the dimensionless phase.
fn epsilon_generator(theta: Angle, profile: PhiProfile) -> impl Fn(f64) -> ComplexMatrix {
    let phase = C64::from_polar(0.5, -theta.radians());
    move |phi| {
        let off = phase * (ONE + profile.eval(phi));
        ComplexMatrix::from_rows(&[[ZERO, off], [off.conj(), ZERO]]).expect("2x2")
    }
}

/// One imperfect `S_theta`: `T exp(-i ∫_0^{pi/2} (e^{-i theta}(1 + eps)|0><1| + h.c.) dphi / 2)`.
pub fn perturbed_gate(
    theta: Angle,
    profile: &EpsilonProfile,
    steps: usize,
) -> Result<ComplexMatrix> {
    if steps < MIN_GATE_STEPS {
        return Err(Error::invalid(format!(
            "steps must be >= {MIN_GATE_STEPS}, got {steps}"
        )));
    }
    profile.validate()?;
    let gen = TimeDependentGenerator::new(
        epsilon_generator(theta, profile.resolve(theta)?),
        0.0,
        FRAC_PI_2,
        steps,
    )?;
    time_ordered_propagator(&gen)
}

/// Exact outcome-1 probability for `gate^n S |0>` with identical imperfect gates.
pub fn model_probability_epsilon(n: u32, theta: Angle, profile: &EpsilonProfile) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("model_probability_epsilon needs n >= 1"));
    }
    CircuitSpec::new(n, theta)?;
    let gate = perturbed_gate(theta, profile, DEFAULT_GATE_STEPS)?;
    gates::circuit_probability(&gates::s_gate(), &gate, n, &StateVector::basis(2, 0)?)
}

/// Mixer imbalance `eps = (-eps_gain - i eps_quadrature) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IQImbalance {
    pub eps: C64,
}

impl IQImbalance {
    pub fn new(eps: C64) -> Result<Self> {
        let out = Self { eps };
        out.validate()?;
        Ok(out)
    }

    pub fn from_gain_phase(gain: f64, quadrature: f64) -> Result<Self> {
        Self::new(C64::new(-gain, -quadrature) / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let magnitude = self.eps.norm();
        if !magnitude.is_finite() || magnitude > EPS_BOUND {
            return Err(Error::ProfileOutOfBounds {
                magnitude,
                bound: EPS_BOUND,
            });
        }
        Ok(())
    }
}

/// Gaussian pulse truncated at `+-2 sigma` and lifted so it vanishes at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianEnvelope {
    duration: f64,
    area: f64,
    amplitude: f64,
}

impl GaussianEnvelope {
    /// Envelope on `[0, duration_ns]` with `∫ Omega dt = area`.
    pub fn calibrated(duration_ns: f64, area: f64) -> Result<Self> {
        if !(duration_ns > 0.0 && duration_ns.is_finite()) {
            return Err(Error::invalid(format!(
                "pulse duration must be positive, got {duration_ns}"
            )));
        }
        let sigma = duration_ns / 4.0;
        let edge = (-2.0f64).exp();
        let unit_area = sigma * (2.0 * PI).sqrt() * erf(SQRT_2) - duration_ns * edge;
        Ok(Self {
            duration: duration_ns,
            area,
            amplitude: area / unit_area,
        })
    }

    /// The pulse area that makes a two-level drive a `pi/2` rotation.
    pub fn quarter_turn(duration_ns: f64) -> Result<Self> {
        Self::calibrated(duration_ns, FRAC_PI_4)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Envelope value at time `t` (ns).
    pub fn value(&self, t: f64) -> f64 {
        if !(0.0..=self.duration).contains(&t) {
            return 0.0;
        }
        let sigma = self.duration / 4.0;
        let x = (t - 0.5 * self.duration) / sigma;
        self.amplitude * ((-0.5 * x * x).exp() - (-2.0f64).exp())
    }
}

/// Qubit state `S|0>` expressed in the frame `|n> -> e^{i n theta}|n>`.
fn prepared_state_in_phase_frame(theta: Angle) -> [C64; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [
        C64::new(r, 0.0),
        C64::new(0.0, -r) * C64::from_polar(1.0, -theta.radians()),
    ]
}

/// Outcome-1 probability after ideal `S` and `n` I/Q-imbalanced pulses, in the
/// frame where the drive reads `Omega(t)(1 + eps e^{2 i theta})` off the diagonal.
pub fn iq_probability_n(
    n: u32,
    theta: Angle,
    imbalance: &IQImbalance,
    envelope: &GaussianEnvelope,
) -> Result<f64> {
    imbalance.validate()?;
    if (envelope.area() - FRAC_PI_4).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "envelope area {} is not calibrated to a pi/2 rotation",
            envelope.area()
        )));
    }
    CircuitSpec::new(n, theta)?;
    let w = ONE + imbalance.eps * C64::from_polar(1.0, 2.0 * theta.radians());
    let env = *envelope;
    let gen = TimeDependentGenerator::new(
        move |t| {
            let off = w * env.value(t);
            ComplexMatrix::from_rows(&[[ZERO, off], [off.conj(), ZERO]]).expect("2x2")
        },
        0.0,
        envelope.duration(),
        DEFAULT_GATE_STEPS,
    )?;
    let pulse = time_ordered_propagator(&gen)?;
    let psi = pulse
        .pow(n as u64)
        .apply(&StateVector::new(&prepared_state_in_phase_frame(theta))?)?;
    Ok(psi.probability(1))
}

/// [`iq_probability_n`] for a single pulse.
pub fn iq_probability(
    theta: Angle,
    imbalance: &IQImbalance,
    envelope: &GaussianEnvelope,
) -> Result<f64> {
    iq_probability_n(1, theta, imbalance, envelope)
}

/// Three-level transmon driven by `2 cos(omega t - theta) Omega(t) V`.
///
/// Frequencies are angular, in rad/ns. `V` is real symmetric with entries
/// `v_ij`; the envelope is calibrated so that `∫ Omega v01 dt = pi/4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransmonModel {
    pub omega: f64,
    pub omega_prime: f64,
    pub v01: f64,
    pub v12: f64,
    pub v02: f64,
    pub v00: f64,
    pub v11: f64,
    pub v22: f64,
    /// AWG sample spacing (ns); the pulse lasts `samples * dt_ns`.
    pub dt_ns: f64,
    pub samples: u32,
    /// Propagation steps per drive period for the full Hamiltonian.
    pub steps_per_period: f64,
    /// Propagation steps per pulse in the rotating-wave approximation.
    pub rwa_steps: usize,
}

impl Default for TransmonModel {
    fn default() -> Self {
        Self {
            omega: 2.0 * PI * 4.7,
            omega_prime: 2.0 * PI * 0.3,
            v01: 1.0,
            v12: SQRT_2,
            v02: 0.0,
            v00: 0.0,
            v11: 0.0,
            v22: 0.0,
            dt_ns: 0.222,
            samples: 160,
            steps_per_period: 64.0,
            rwa_steps: 2048,
        }
    }
}

impl TransmonModel {
    pub fn duration(&self) -> f64 {
        self.dt_ns * self.samples as f64
    }

    /// Envelope scaled so the RWA two-level drive is a `pi/2` rotation.
    pub fn envelope(&self) -> Result<GaussianEnvelope> {
        GaussianEnvelope::calibrated(self.duration(), FRAC_PI_4 / self.v01)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v01 > 0.0 && self.v01.is_finite()) {
            return Err(Error::Config("v01 must be positive".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config("omega must be positive".into()));
        }
        if !(self.dt_ns > 0.0) || self.samples == 0 {
            return Err(Error::Config(
                "pulse needs dt_ns > 0 and samples > 0".into(),
            ));
        }
        if self.rwa_steps < 2 {
            return Err(Error::Config("rwa_steps must be >= 2".into()));
        }
        let all = [
            self.omega_prime,
            self.v12,
            self.v02,
            self.v00,
            self.v11,
            self.v22,
            self.steps_per_period,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("transmon parameters must be finite".into()));
        }
        Ok(())
    }

    fn coupling(&self) -> [[f64; 3]; 3] {
        [
            [self.v00, self.v01, self.v02],
            [self.v01, self.v11, self.v12],
            [self.v02, self.v12, self.v22],
        ]
    }

    /// `H_RWA(t)`: only the non-rotating nearest-neighbour couplings plus `omega'`.
    pub fn rwa_hamiltonian(&self, envelope: &GaussianEnvelope, t: f64) -> ComplexMatrix {
        let o = envelope.value(t);
        let mut h = ComplexMatrix::zeros(3).expect("3x3");
        let a = C64::new(self.v01 * o, 0.0);
        let b = C64::new(self.v12 * o, 0.0);
        h.set(0, 1, a);
        h.set(1, 0, a);
        h.set(1, 2, b);
        h.set(2, 1, b);
        h.set(2, 2, C64::new(self.omega_prime, 0.0));
        h
    }

    /// Full rotating-frame Hamiltonian
    /// `H'_mn = v_mn Omega(t) (e^{i(m-n+1)x} + e^{i(m-n-1)x}) + omega' delta_m2 delta_n2`
    /// with `x = omega t - theta`.
    pub fn full_hamiltonian(
        &self,
        envelope: &GaussianEnvelope,
        theta: Angle,
        t: f64,
    ) -> ComplexMatrix {
        self.full_hamiltonian_at(envelope.value(t), self.omega * t - theta.radians())
    }

    fn full_hamiltonian_at(&self, o: f64, x: f64) -> ComplexMatrix {
        let v = self.coupling();
        let mut h = ComplexMatrix::zeros(3).expect("3x3");
        for m in 0..3 {
            h.set(m, m, C64::new(2.0 * v[m][m] * o * x.cos(), 0.0));
            for n in (m + 1)..3 {
                let d = m as f64 - n as f64;
                let value = (C64::from_polar(1.0, (d + 1.0) * x)
                    + C64::from_polar(1.0, (d - 1.0) * x))
                    * (v[m][n] * o);
                h.set(m, n, value);
                h.set(n, m, value.conj());
            }
        }
        h.set(2, 2, h[(2, 2)] + C64::new(self.omega_prime, 0.0));
        h
    }

    fn full_steps(&self, pulses: u32) -> Result<usize> {
        let period = 2.0 * PI / self.omega;
        if self.steps_per_period < MIN_SAMPLES_PER_PERIOD {
            return Err(Error::StepTooCoarse {
                samples_per_period: self.steps_per_period,
                minimum: MIN_SAMPLES_PER_PERIOD,
            });
        }
        let step = period / self.steps_per_period;
        Ok(((pulses as f64 * self.duration()) / step).ceil().max(2.0) as usize)
    }
}

/// Outcome-1 probability after ideal `S` and `n` transmon pulses with phase `theta`.
///
/// The prepared qubit state is carried into the frame `|n> -> e^{i n theta - i n omega t}|n>`;
/// populations are frame-independent, so `|<1|psi>|^2` is read off directly.
pub fn transmon_probability(
    n: u32,
    theta: Angle,
    model: &TransmonModel,
    use_rwa: bool,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("transmon_probability needs n >= 1"));
    }
    CircuitSpec::new(n, theta)?;
    model.validate()?;
    let envelope = model.envelope()?;
    let duration = model.duration();
    let evolution = if use_rwa {
        let gen = TimeDependentGenerator::new(
            |t| model.rwa_hamiltonian(&envelope, t),
            0.0,
            duration,
            model.rwa_steps,
        )?;
        time_ordered_propagator(&gen)?.pow(n as u64)
    } else {
        let steps = model.full_steps(n)?;
        let gen = TimeDependentGenerator::new(
            |t| {
                model.full_hamiltonian_at(
                    envelope.value(t.rem_euclid(duration)),
                    model.omega * t - theta.radians(),
                )
            },
            0.0,
            n as f64 * duration,
            steps,
        )?;
        time_ordered_propagator(&gen)?
    };
    let [a0, a1] = prepared_state_in_phase_frame(theta);
    let psi = evolution.apply(&StateVector::new(&[a0, a1, ZERO])?)?;
    Ok(psi.probability(1))
}

/// Assignment errors of the readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfusion {
    /// P(read 1 | true 0)
    pub p01: f64,
    /// P(read 0 | true 1)
    pub p10: f64,
}

impl ReadoutConfusion {
    pub fn new(p01: f64, p10: f64) -> Result<Self> {
        let out = Self { p01, p10 };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p01", self.p01), ("p10", self.p10)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }
}

pub fn apply_readout(p_true: f64, confusion: &ReadoutConfusion) -> f64 {
    p_true * (1.0 - confusion.p10) + (1.0 - p_true) * confusion.p01
}

/// Per-gate contraction of the off-diagonal Bloch components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecoherenceRate(f64);

impl DecoherenceRate {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Config(format!(
                "decoherence rate {r} outside [0, 1)"
            )));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Pulls `p` toward 1/2 by `(1 - r)^n`.
pub fn contract_toward_half(p: f64, n: u32, rate: DecoherenceRate) -> f64 {
    0.5 + (1.0 - rate.0).powi(n as i32) * (p - 0.5)
}

/// Ideal `n`-gate probability with the angle-dependent part contracted by `(1 - r)^n`.
pub fn apply_decoherence(n: u32, theta: Angle, rate: DecoherenceRate) -> f64 {
    contract_toward_half(gates::ideal_probability_closed(n, theta), n, rate)
}

fn default_iq_duration() -> f64 {
    TransmonModel::default().duration()
}

/// The physical part of a composite model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    Ideal,
    Epsilon {
        profile: EpsilonProfile,
    },
    Iq {
        imbalance: IQImbalance,
        #[serde(default = "default_iq_duration")]
        duration_ns: f64,
    },
    Transmon {
        #[serde(default)]
        model: TransmonModel,
        #[serde(default)]
        use_rwa: bool,
    },
}

/// Base model plus optional decoherence (applied first) and readout confusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub base: BaseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoherence: Option<DecoherenceRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutConfusion>,
}

impl ModelConfig {
    pub fn ideal() -> Self {
        Self::from_base(BaseModel::Ideal)
    }

    pub fn from_base(base: BaseModel) -> Self {
        Self {
            base,
            decoherence: None,
            readout: None,
        }
    }

    /// Parses a TOML document with a `[base]` table and optional `decoherence`/`[readout]`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.base {
            BaseModel::Ideal => {}
            BaseModel::Epsilon { profile } => profile.validate()?,
            BaseModel::Iq {
                imbalance,
                duration_ns,
            } => {
                imbalance.validate()?;
                GaussianEnvelope::quarter_turn(*duration_ns)?;
            }
            BaseModel::Transmon { model, use_rwa } => {
                model.validate()?;
                if !use_rwa {
                    model.full_steps(1)?;
                }
            }
        }
        if let Some(r) = self.decoherence {
            DecoherenceRate::new(r.value())?;
        }
        if let Some(c) = self.readout {
            c.validate()?;
        }
        Ok(())
    }

    /// Observed outcome-1 probability for `n` gates at `theta`.
    pub fn probability(&self, n: u32, theta: Angle) -> Result<f64> {
        let spec = CircuitSpec::new(n, theta)?;
        let mut p = match (&self.base, n) {
            (BaseModel::Ideal, _) | (_, 0) => gates::ideal_probability(&spec),
            (BaseModel::Epsilon { profile }, _) => model_probability_epsilon(n, theta, profile)?,
            (
                BaseModel::Iq {
                    imbalance,
                    duration_ns,
                },
                _,
            ) => iq_probability_n(
                n,
                theta,
                imbalance,
                &GaussianEnvelope::quarter_turn(*duration_ns)?,
            )?,
            (BaseModel::Transmon { model, use_rwa }, _) => {
                transmon_probability(n, theta, model, *use_rwa)?
            }
        };
        if let Some(rate) = self.decoherence {
            p = contract_toward_half(p, n, rate);
        }
        if let Some(confusion) = &self.readout {
            p = apply_readout(p, confusion);
        }
        Ok(p.clamp(0.0, 1.0))
    }
}
