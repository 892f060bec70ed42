//! Seeded Monte Carlo estimate of the ergodic achievable rate.
//!
//! Each realization draws the fading `h_ij ~ CN(0, v_ij)` and the pilot noise
//! `s_ij ~ CN(0, 1 + sigma^2_i)`, forms the pilot observation
//! `r = sqrt(tau P/L) h + s`, and applies the scalar MMSE estimator. The
//! estimate is whitened by `K_z(tau)^(-1/2)` and the sample value is
//! `(1/N) log det(I + (P/L) Hbar Hbar^H)`, computed through a Cholesky factor
//! of the smaller of the two Gram matrices.
//!
//! Sample `i` always uses ChaCha8 seeded from the master seed with stream id
//! `i`, so results do not depend on how samples are spread over workers, and
//! a grid of training lengths shares the same draws (common random numbers).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::system_model::Scenario;

pub type CMatrix = DMatrix<Complex64>;

/// Default sample count for figure reproduction.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Largest tolerated fraction of rejected (non-finite or non-factorizable) samples.
pub const MAX_REJECTION_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    /// Nats per channel use per receive antenna.
    pub mean: f64,
    pub std_err: f64,
    /// Accepted samples.
    pub n_samples: usize,
    pub rejected: usize,
    pub seed: u64,
}

impl MonteCarloEstimate {
    fn scaled(self, factor: f64) -> Self {
        MonteCarloEstimate {
            mean: self.mean * factor,
            std_err: self.std_err * factor.abs(),
            ..self
        }
    }
}

/// One channel realization and its MMSE split, `channel = estimate + error`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub channel: CMatrix,
    pub estimate: CMatrix,
    pub error: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelSample {
    pub sample: ChannelSample,
    /// `K_z^(-1/2) * estimate`.
    pub effective: CMatrix,
}

/// The RNG substream of sample `index` under `seed`.
pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Unit-variance circular complex Gaussian draws for fading and pilot noise.
struct Draw {
    fading: Vec<Complex64>,
    pilot_noise: Vec<Complex64>,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

impl Draw {
    fn new<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let fading = (0..len).map(|_| complex_normal(rng)).collect();
        let pilot_noise = (0..len).map(|_| complex_normal(rng)).collect();
        Draw {
            fading,
            pilot_noise,
        }
    }
}

/// Per-entry constants of the training and whitening chain at one `tau`.
struct TrainingChain {
    rows: usize,
    cols: usize,
    snr: f64,
    channel_std: Vec<f64>,
    noise_std: Vec<f64>,
    pilot_gain: f64,
    mmse_gain: Vec<f64>,
    whitening: Vec<f64>,
}

impl TrainingChain {
    fn new(scenario: &Scenario, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!(
                "Monte Carlo training needs tau > 0, got {tau}"
            )));
        }
        let (rows, cols) = scenario.raw.shape();
        let snr = scenario.config.snr();
        let (_, kz) = scenario.effective(tau)?;
        let mut channel_std = Vec::with_capacity(rows * cols);
        let mut mmse_gain = Vec::with_capacity(rows * cols);
        let pilot_gain = (tau * snr).sqrt();
        for i in 0..rows {
            let noise_var = 1.0 + scenario.noise.0[i];
            for &v in scenario.raw.row(i) {
                channel_std.push(v.sqrt());
                mmse_gain.push(pilot_gain * v / (tau * snr * v + noise_var));
            }
        }
        Ok(TrainingChain {
            rows,
            cols,
            snr,
            channel_std,
            noise_std: scenario.noise.0.iter().map(|s| (1.0 + s).sqrt()).collect(),
            pilot_gain,
            mmse_gain,
            whitening: kz.0.iter().map(|k| 1.0 / k.sqrt()).collect(),
        })
    }

    fn split(&self, draw: &Draw) -> ChannelSample {
        let (n, k) = (self.rows, self.cols);
        let mut channel = CMatrix::zeros(n, k);
        let mut estimate = CMatrix::zeros(n, k);
        for i in 0..n {
            for j in 0..k {
                let idx = i * k + j;
                let h = draw.fading[idx] * self.channel_std[idx];
                let r = h * self.pilot_gain + draw.pilot_noise[idx] * self.noise_std[i];
                channel[(i, j)] = h;
                estimate[(i, j)] = r * self.mmse_gain[idx];
            }
        }
        let error = &channel - &estimate;
        ChannelSample {
            channel,
            estimate,
            error,
        }
    }

    fn effective(&self, draw: &Draw) -> CMatrix {
        let (n, k) = (self.rows, self.cols);
        CMatrix::from_fn(n, k, |i, j| {
            let idx = i * k + j;
            let h = draw.fading[idx] * self.channel_std[idx];
            let r = h * self.pilot_gain + draw.pilot_noise[idx] * self.noise_std[i];
            r * (self.mmse_gain[idx] * self.whitening[i])
        })
    }

    /// `(1/N) log det(I + snr Hbar Hbar^H)`, `None` if the sample is unusable.
    fn rate_sample(&self, draw: &Draw) -> Option<f64> {
        let hbar = self.effective(draw);
        let gram = if self.cols <= self.rows {
            hbar.ad_mul(&hbar)
        } else {
            &hbar * hbar.adjoint()
        };
        log_det_identity_plus(gram, self.snr).map(|ld| ld / self.rows as f64)
    }
}

/// `log det(I + snr * gram)` for a Hermitian positive semidefinite `gram`.
pub fn log_det_identity_plus(gram: CMatrix, snr: f64) -> Option<f64> {
    let dim = gram.nrows();
    let mut m = gram * Complex64::new(snr, 0.0);
    for d in 0..dim {
        m[(d, d)] += Complex64::new(1.0, 0.0);
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return None;
    }
    let chol = m.cholesky()?;
    let l = chol.l_dirty();
    let ld: f64 = (0..dim).map(|d| 2.0 * l[(d, d)].re.ln()).sum();
    ld.is_finite().then_some(ld)
}

/// Draws one realization of the channel, its MMSE split and the effective channel.
pub fn sample_effective_channel<R: Rng + ?Sized>(
    scenario: &Scenario,
    tau: f64,
    rng: &mut R,
) -> Result<EffectiveChannelSample> {
    let chain = TrainingChain::new(scenario, tau)?;
    let draw = Draw::new(chain.rows * chain.cols, rng);
    Ok(EffectiveChannelSample {
        sample: chain.split(&draw),
        effective: chain.effective(&draw),
    })
}

/// Per-sample rate values on a grid of training lengths, `values[g][i]`,
/// with `NaN` marking rejected samples.
pub(crate) fn rate_samples(
    scenario: &Scenario,
    taus: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n_samples == 0 {
        return Err(Error::validation("n_samples", "must be at least 1"));
    }
    let chains = taus
        .iter()
        .map(|&tau| TrainingChain::new(scenario, tau))
        .collect::<Result<Vec<_>>>()?;
    let len = scenario.raw.rows() * scenario.raw.cols();
    let per_sample: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let draw = Draw::new(len, &mut sample_stream(seed, i));
            chains
                .iter()
                .map(|c| c.rate_sample(&draw).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    Ok((0..taus.len())
        .map(|g| per_sample.iter().map(|s| s[g]).collect())
        .collect())
}

/// Mean and standard error of the finite entries; errors if too many are rejected.
pub(crate) fn summarize(values: &[f64], seed: u64) -> Result<MonteCarloEstimate> {
    let accepted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let rejected = values.len() - accepted.len();
    if rejected as f64 > MAX_REJECTION_FRACTION * values.len() as f64 || accepted.is_empty() {
        return Err(Error::TooManyRejections {
            rejected,
            total: values.len(),
        });
    }
    let n = accepted.len();
    let mean = accepted.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = accepted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_err,
        n_samples: n,
        rejected,
        seed,
    })
}

/// Ergodic rate estimates on a grid of training lengths with common random numbers.
pub fn estimate_rate_grid(
    scenario: &Scenario,
    taus: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<MonteCarloEstimate>> {
    rate_samples(scenario, taus, n_samples, seed)?
        .iter()
        .map(|v| summarize(v, seed))
        .collect()
}

/// Ergodic achievable rate `R(tau)`, nats per channel use per receive antenna.
pub fn estimate_rate(
    scenario: &Scenario,
    tau: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    Ok(estimate_rate_grid(scenario, &[tau], n_samples, seed)?[0])
}

fn net_factor(scenario: &Scenario, tau: f64) -> Result<f64> {
    let coherence = scenario.config.coherence;
    if tau > coherence {
        return Err(Error::Domain(format!(
            "training length {tau} exceeds the coherence block {coherence}"
        )));
    }
    Ok(1.0 - tau / coherence)
}

/// `(1 - tau/T) R(tau)` on a grid, common random numbers across grid points.
pub fn estimate_net_rate_grid(
    scenario: &Scenario,
    taus: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<MonteCarloEstimate>> {
    let factors = taus
        .iter()
        .map(|&t| net_factor(scenario, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(estimate_rate_grid(scenario, taus, n_samples, seed)?
        .into_iter()
        .zip(factors)
        .map(|(e, f)| e.scaled(f))
        .collect())
}

/// Net ergodic achievable rate `(1 - tau/T) R(tau)`.
pub fn estimate_net_rate(
    scenario: &Scenario,
    tau: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let factor = net_factor(scenario, tau)?;
    Ok(estimate_rate(scenario, tau, n_samples, seed)?.scaled(factor))
}
