//! Shot sampling, the `A sin + B cos + C` least-squares fit, residual
//! significance, harmonic decomposition and the error-per-gate decay fit.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{grid, ideal_abc, Angle, GRID_SIZE};

/// Per-angle outcome-1 frequencies, optionally with the number of trials behind them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSeries {
    pub n_gates: Option<u32>,
    pub angles: Vec<Angle>,
    pub probabilities: Vec<f64>,
    /// `None` for exact (noiseless) probabilities.
    pub trials: Option<Vec<u64>>,
}

impl AngleSeries {
    pub fn new(
        angles: Vec<Angle>,
        probabilities: Vec<f64>,
        trials: Option<Vec<u64>>,
    ) -> Result<Self> {
        if angles.len() != probabilities.len() {
            return Err(Error::DimensionMismatch {
                left: angles.len(),
                right: probabilities.len(),
            });
        }
        if let Some(t) = &trials {
            if t.len() != angles.len() {
                return Err(Error::DimensionMismatch {
                    left: angles.len(),
                    right: t.len(),
                });
            }
            if t.contains(&0) {
                return Err(Error::invalid("every angle needs at least one trial"));
            }
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self {
            n_gates: None,
            angles,
            probabilities,
            trials,
        })
    }

    /// Exact probabilities on the 16-point grid.
    pub fn noiseless(probabilities: Vec<f64>) -> Result<Self> {
        Self::new(grid(), probabilities, None)
    }

    /// Frequencies `ones / total` on the given angles.
    pub fn from_counts(angles: Vec<Angle>, ones: &[u64], totals: &[u64]) -> Result<Self> {
        if ones.len() != totals.len() {
            return Err(Error::DimensionMismatch {
                left: ones.len(),
                right: totals.len(),
            });
        }
        if ones.iter().zip(totals).any(|(o, t)| o > t) {
            return Err(Error::invalid("ones exceeds total"));
        }
        let p = ones
            .iter()
            .zip(totals)
            .map(|(&o, &t)| {
                if t == 0 {
                    f64::NAN
                } else {
                    o as f64 / t as f64
                }
            })
            .collect();
        Self::new(angles, p, Some(totals.to_vec()))
    }

    pub fn with_n_gates(mut self, n: u32) -> Self {
        self.n_gates = Some(n);
        self
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Bernoulli standard error `sqrt(P(1-P)/N)`; zero for exact data.
    pub fn sigma(&self) -> Vec<f64> {
        match &self.trials {
            None => vec![0.0; self.len()],
            Some(t) => self
                .probabilities
                .iter()
                .zip(t)
                .map(|(&p, &n)| (p * (1.0 - p) / n as f64).sqrt())
                .collect(),
        }
    }
}

/// Binomial draw of `shots` trials with success probability `p`, seeded.
pub fn sample_counts(p: f64, shots: u64, seed: u64) -> Result<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_counts_with(&mut rng, p, shots)
}

/// [`sample_counts`] drawing from a caller-supplied generator. Always exact binomial.
pub fn sample_counts_with<R: Rng + ?Sized>(rng: &mut R, p: f64, shots: u64) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    if shots == 0 {
        return Err(Error::invalid("shots must be >= 1"));
    }
    let dist = Binomial::new(shots, p).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// What the residuals are measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The least-squares curve itself.
    #[default]
    Fitted,
    /// The ideal Born curve for the given number of gates.
    Ideal(u32),
    /// The ideal curve shifted by the global phase read off the fitted `(A, B)`.
    IdealPhased(u32),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Weight each point by `1/sigma^2`; requires every sigma to be positive.
    pub weighted: bool,
    pub reference: Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub covariance: [[f64; 3]; 3],
    pub angles: Vec<Angle>,
    pub probabilities: Vec<f64>,
    /// Reference curve at each angle.
    pub reference_values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Bernoulli standard error of each observed probability.
    pub sigma: Vec<f64>,
    /// Standard error of each residual; includes the fitted curve's own
    /// uncertainty when the reference is fitted.
    pub residual_sigma: Vec<f64>,
    /// `residual / residual_sigma`.
    pub z_scores: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub reference: Reference,
    pub phase_offset: Option<f64>,
}

impl FitResult {
    pub fn curve(&self, theta: Angle) -> f64 {
        let t = theta.radians();
        self.a * t.sin() + self.b * t.cos() + self.c
    }

    /// `sqrt(A^2 + B^2)`.
    pub fn amplitude(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// Standard error of [`Self::amplitude`] by linear propagation.
    pub fn amplitude_sigma(&self) -> f64 {
        let amp = self.amplitude();
        if amp == 0.0 {
            return self.covariance[0][0].max(self.covariance[1][1]).sqrt();
        }
        let (ga, gb) = (self.a / amp, self.b / amp);
        let cov = &self.covariance;
        (ga * ga * cov[0][0] + 2.0 * ga * gb * cov[0][1] + gb * gb * cov[1][1])
            .max(0.0)
            .sqrt()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// `max - min` of the residuals.
    pub fn residual_spread(&self) -> f64 {
        let max = self
            .residuals
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self.residuals.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

/// Residuals below this count as zero where the Bernoulli sigma vanishes.
pub const ZERO_SIGMA_TOL: f64 = 1e-12;

fn design_row(theta: Angle) -> Vector3<f64> {
    let t = theta.radians();
    Vector3::new(t.sin(), t.cos(), 1.0)
}

fn distinct_angles(angles: &[Angle]) -> usize {
    let mut v: Vec<f64> = angles.iter().map(|a| a.radians()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v.len()
}

/// Unweighted `A sin + B cos + C` fit with residuals against the fitted curve.
pub fn fit_abc(series: &AngleSeries) -> Result<FitResult> {
    fit_abc_with(series, &FitOptions::default())
}

pub fn fit_abc_with(series: &AngleSeries, options: &FitOptions) -> Result<FitResult> {
    let m = series.len();
    if distinct_angles(&series.angles) < 4 {
        return Err(Error::RankDeficient(format!(
            "need at least 4 distinct angles, got {}",
            distinct_angles(&series.angles)
        )));
    }
    let sigma = series.sigma();
    let weights: Vec<f64> = if options.weighted {
        if sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid(
                "weighted fit needs positive sigma at every angle",
            ));
        }
        sigma.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; m]
    };

    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    let mut meat = Matrix3::zeros();
    for j in 0..m {
        let x = design_row(series.angles[j]);
        let w = weights[j];
        xtx += x * x.transpose() * w;
        xty += x * (w * series.probabilities[j]);
        meat += x * x.transpose() * (w * w * sigma[j] * sigma[j]);
    }
    let scale = xtx.abs().max();
    if xtx.determinant().abs() <= 1e-12 * scale.powi(3) {
        return Err(Error::RankDeficient("degenerate angle set".into()));
    }
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("singular normal equations".into()))?;
    let coef = inv * xty;
    let cov = if options.weighted {
        inv
    } else {
        inv * meat * inv
    };
    let (a, b, c) = (coef[0], coef[1], coef[2]);

    let mut phase_offset = None;
    let (ra, rb, rc, dof) = match options.reference {
        Reference::Fitted => (a, b, c, m.saturating_sub(3)),
        Reference::Ideal(n) => {
            let (ia, ib, ic) = ideal_abc(n);
            (ia, ib, ic, m)
        }
        Reference::IdealPhased(n) => {
            let (ia, ib, ic) = ideal_abc(n);
            if ib == 0.0 {
                (ia, ib, ic, m)
            } else {
                // ideal curve ic + ib cos(theta - delta)
                let delta = (a * ib.signum()).atan2(b * ib.signum());
                phase_offset = Some(delta);
                (ib * delta.sin(), ib * delta.cos(), ic, m.saturating_sub(1))
            }
        }
    };

    let rows: Vec<Vector3<f64>> = series.angles.iter().map(|t| design_row(*t)).collect();
    let residual_sigma: Vec<f64> = match options.reference {
        Reference::Fitted => (0..m)
            .map(|j| {
                let left = rows[j].transpose() * inv;
                (0..m)
                    .map(|k| {
                        let h = (left * rows[k])[0] * weights[k];
                        let d = if j == k { 1.0 - h } else { -h };
                        d * d * sigma[k] * sigma[k]
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
        _ => sigma.clone(),
    };

    let mut reference_values = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    let mut z_scores = Vec::with_capacity(m);
    for j in 0..m {
        let t = series.angles[j].radians();
        let curve = ra * t.sin() + rb * t.cos() + rc;
        let r = series.probabilities[j] - curve;
        let s = residual_sigma[j];
        reference_values.push(curve);
        residuals.push(r);
        z_scores.push(if s > 0.0 {
            r / s
        } else if r.abs() < ZERO_SIGMA_TOL {
            0.0
        } else {
            r.signum() * f64::INFINITY
        });
    }
    let chi2 = z_scores.iter().map(|z| z * z).sum();
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = cov[(i, k)];
        }
    }
    Ok(FitResult {
        a,
        b,
        c,
        covariance,
        angles: series.angles.clone(),
        probabilities: series.probabilities.clone(),
        reference_values,
        residuals,
        sigma,
        residual_sigma,
        z_scores,
        chi2,
        dof,
        reference: options.reference,
        phase_offset,
    })
}

/// Angles whose `|z|` exceeds `threshold`, with their z-score.
pub fn significance(fit: &FitResult, threshold: f64) -> Result<Vec<(Angle, f64)>> {
    if !(threshold > 0.0) {
        return Err(Error::invalid(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    Ok(fit
        .angles
        .iter()
        .zip(&fit.z_scores)
        .filter(|(_, z)| z.abs() > threshold)
        .map(|(a, z)| (*a, *z))
        .collect())
}

/// Cosine and sine coefficients for `k = 0..=8` on the 16-point grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    pub cos: [f64; 9],
    pub sin: [f64; 9],
}

impl HarmonicSpectrum {
    pub fn magnitude(&self, k: usize) -> f64 {
        self.cos[k].hypot(self.sin[k])
    }

    pub fn eval(&self, theta: Angle) -> f64 {
        let t = theta.radians();
        (0..=8)
            .map(|k| {
                let kt = k as f64 * t;
                self.cos[k] * kt.cos() + self.sin[k] * kt.sin()
            })
            .sum()
    }

    /// Values on the grid.
    pub fn reconstruct(&self) -> Vec<f64> {
        grid().into_iter().map(|t| self.eval(t)).collect()
    }
}

/// Discrete Fourier coefficients of 16 values given in grid order.
pub fn harmonic_decomposition(values: &[f64]) -> Result<HarmonicSpectrum> {
    if values.len() != GRID_SIZE {
        return Err(Error::DimensionMismatch {
            left: values.len(),
            right: GRID_SIZE,
        });
    }
    let mut cos = [0.0; 9];
    let mut sin = [0.0; 9];
    let thetas = grid();
    for k in 0..=8usize {
        let norm = if k == 0 || k == 8 {
            1.0 / 16.0
        } else {
            2.0 / 16.0
        };
        let (mut c, mut s) = (0.0, 0.0);
        for (v, t) in values.iter().zip(&thetas) {
            let kt = k as f64 * t.radians();
            c += v * kt.cos();
            s += v * kt.sin();
        }
        cos[k] = norm * c;
        if k != 0 && k != 8 {
            sin[k] = norm * s;
        }
    }
    Ok(HarmonicSpectrum { cos, sin })
}

/// Amplitude `sqrt(A^2 + B^2)` after `n` gates with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudePoint {
    pub n: u32,
    pub amplitude: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    /// Follow the log-linear estimate with Gauss-Newton on `D (1 - r)^n` itself.
    pub refine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkFit {
    pub r: f64,
    pub d: f64,
    pub r_sigma: f64,
    pub points: Vec<AmplitudePoint>,
    pub predicted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Fits `amplitude = D (1 - r)^n` over odd `n`.
pub fn fit_error_per_gate(
    points: &[AmplitudePoint],
    options: &BenchmarkOptions,
) -> Result<BenchmarkFit> {
    let mut warnings = Vec::new();
    let mut used = Vec::new();
    for p in points {
        if p.n % 2 == 0 {
            warnings.push(format!(
                "n = {}: even gate count has no ideal amplitude, excluded",
                p.n
            ));
        } else if !(p.amplitude > 0.0) || !p.amplitude.is_finite() {
            warnings.push(format!(
                "n = {}: nonpositive amplitude {}, dropped",
                p.n, p.amplitude
            ));
        } else {
            used.push(*p);
        }
    }
    if used.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 odd-n amplitudes, got {}",
            used.len()
        )));
    }
    let mut ns: Vec<u32> = used.iter().map(|p| p.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(Error::RankDeficient("all points share one n".into()));
    }

    let weighted = used.iter().all(|p| p.sigma > 0.0);
    let w: Vec<f64> = used
        .iter()
        .map(|p| {
            if weighted {
                (p.amplitude / p.sigma).powi(2)
            } else {
                1.0
            }
        })
        .collect();
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, w) in used.iter().zip(&w) {
        let x = p.n as f64;
        let y = p.amplitude.ln();
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        t0 += w * y;
        t1 += w * x * y;
    }
    let det = s0 * s2 - s1 * s1;
    let slope = (s0 * t1 - s1 * t0) / det;
    let intercept = (s2 * t0 - s1 * t1) / det;
    let mut log_d = intercept;
    let mut log_q = slope;
    let mut slope_var = if weighted {
        s0 / det
    } else {
        let rss: f64 = used
            .iter()
            .map(|p| (p.amplitude.ln() - intercept - slope * p.n as f64).powi(2))
            .sum();
        rss / (used.len() as f64 - 2.0).max(1.0) * s0 / det
    };

    if options.refine {
        let wn: Vec<f64> = used
            .iter()
            .map(|p| {
                if weighted {
                    1.0 / (p.sigma * p.sigma)
                } else {
                    1.0
                }
            })
            .collect();
        for _ in 0..100 {
            let (mut j00, mut j01, mut j11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (p, w) in used.iter().zip(&wn) {
                let x = p.n as f64;
                let model = (log_d + x * log_q).exp();
                let res = p.amplitude - model;
                // derivatives with respect to log D and log(1 - r)
                let (da, db) = (model, model * x);
                j00 += w * da * da;
                j01 += w * da * db;
                j11 += w * db * db;
                g0 += w * da * res;
                g1 += w * db * res;
            }
            let det = j00 * j11 - j01 * j01;
            if det.abs() < f64::MIN_POSITIVE {
                warnings.push("refinement stopped: singular Jacobian".into());
                break;
            }
            let step0 = (j11 * g0 - j01 * g1) / det;
            let step1 = (j00 * g1 - j01 * g0) / det;
            log_d += step0;
            log_q += step1;
            slope_var = j00 / det;
            if step0.abs() < 1e-15 && step1.abs() < 1e-15 {
                break;
            }
        }
    }

    let r = 1.0 - log_q.exp();
    if r < 0.0 {
        warnings.push(format!(
            "fitted r = {r:.3e} is negative (amplitude grows with n)"
        ));
    }
    let d = log_d.exp();
    let predicted: Vec<f64> = used
        .iter()
        .map(|p| d * (log_q * p.n as f64).exp())
        .collect();
    let residuals = used
        .iter()
        .zip(&predicted)
        .map(|(p, m)| p.amplitude - m)
        .collect();
    Ok(BenchmarkFit {
        r,
        d,
        r_sigma: log_q.exp() * slope_var.max(0.0).sqrt(),
        points: used,
        predicted,
        residuals,
        warnings,
    })
}

/// `(n, sqrt(A^2+B^2), sigma)` from a fit.
pub fn amplitude_point(n: u32, fit: &FitResult) -> AmplitudePoint {
    AmplitudePoint {
        n,
        amplitude: fit.amplitude(),
        sigma: fit.amplitude_sigma(),
    }
}

/// Standard normal tail `P(|Z| > z)`; used only for reporting expectations.
pub fn two_sided_tail(z: f64) -> f64 {
    statrs::function::erf::erfc(z / 2f64.sqrt())
}
