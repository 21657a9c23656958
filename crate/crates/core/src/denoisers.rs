//! Componentwise MMSE denoisers.
//!
//! Each denoiser takes a Gaussian pseudo-measurement `N(x; mean, 1/precision)`
//! per component, combines it with a prior or likelihood, and returns the
//! posterior mean together with the posterior variance averaged over
//! components.
//!
//! The sign channel `s = sign(z + w)` has the closed form
//!
//! ```text
//! c = sqrt(1/gamma_z + 1/gamma_w),  v = s * z_hat / c,  lambda = pdf(v) / cdf(v)
//! mean = z_hat + s * lambda / (gamma_z * c)
//! var  = (1 - lambda * (lambda + v) / (gamma_z * c^2)) / gamma_z
//! ```
//!
//! where `c` is the standard deviation of `z + w` under the pseudo-prior.
//! [`denoise_channel_quadrature`] evaluates the same posterior by direct
//! numerical integration and is the reference for the closed forms.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NoiseModel, Symptom, SymptomObservation};
use crate::quadrature::{integrate, QuadratureConfig};

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, accurate far into the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        normal_cdf(x).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + mills_series(x2).ln()
    }
}

// Asymptotic series of x * (1 - Phi(x)) / pdf(x) in powers of 1/x^2.
fn mills_series(x2: f64) -> f64 {
    let r = 1.0 / x2;
    1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)))
}

/// Inverse Mills ratio `pdf(v) / cdf(v)`.
///
/// Below `cdf(v) < 1e-300` both terms lose precision, so the asymptotic
/// ratio `-v / (1 - 1/v^2 + 3/v^4 - ...)` is used instead.
pub fn inverse_mills(v: f64) -> f64 {
    let cdf = normal_cdf(v);
    if cdf < 1e-300 {
        -v / mills_series(v * v)
    } else {
        normal_pdf(v) / cdf
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn ln_gaussian(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / variance + (2.0 * PI * variance).ln())
}

/// Posterior mean vector and its average componentwise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseResult {
    pub mean: DVector<f64>,
    pub avg_variance: f64,
}

impl DenoiseResult {
    fn from_pairs(pairs: impl ExactSizeIterator<Item = (f64, f64)>) -> Self {
        let n = pairs.len();
        let mut mean = DVector::zeros(n);
        let mut var_sum = 0.0;
        for (i, (m, v)) in pairs.enumerate() {
            mean[i] = m;
            var_sum += v;
        }
        DenoiseResult {
            mean,
            avg_variance: if n == 0 { 0.0 } else { var_sum / n as f64 },
        }
    }
}

/// Prior on each disease coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorModel {
    /// `d_i in {0, 1}` with `P(d_i = 1) = rate`.
    Bernoulli { rate: f64 },
    /// `d_i = 0` with probability `1 - rate`, else `N(slab_mean, slab_variance)`.
    BernoulliGaussian {
        rate: f64,
        slab_mean: f64,
        slab_variance: f64,
    },
}

impl PriorModel {
    /// Bernoulli prior with rate `1/N`, matching one active disease per case.
    pub fn one_hot(disease_count: usize) -> Self {
        PriorModel::Bernoulli {
            rate: 1.0 / disease_count.max(2) as f64,
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            PriorModel::Bernoulli { rate } | PriorModel::BernoulliGaussian { rate, .. } => rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate = self.rate();
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sparsity rate must lie in (0, 1), got {rate}"
            )));
        }
        if let PriorModel::BernoulliGaussian {
            slab_mean,
            slab_variance,
            ..
        } = *self
        {
            if !(slab_variance > 0.0) || !slab_variance.is_finite() || !slab_mean.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "slab needs finite mean and positive variance, got ({slab_mean}, {slab_variance})"
                )));
            }
        }
        Ok(())
    }

    /// Prior mean of a single coordinate.
    pub fn mean(&self) -> f64 {
        match *self {
            PriorModel::Bernoulli { rate } => rate,
            PriorModel::BernoulliGaussian {
                rate, slab_mean, ..
            } => rate * slab_mean,
        }
    }

    /// Posterior mean and variance of one coordinate.
    pub fn posterior(&self, pseudo_mean: f64, precision: f64) -> (f64, f64) {
        match *self {
            PriorModel::Bernoulli { rate } => {
                let logit = (rate / (1.0 - rate)).ln() + precision * (pseudo_mean - 0.5);
                // m (1 - m) with 1 - m formed directly, so the variance stays
                // positive when m rounds to 1.
                let m = logistic(logit);
                (m, m * logistic(-logit))
            }
            PriorModel::BernoulliGaussian {
                rate,
                slab_mean,
                slab_variance,
            } => {
                let noise_var = 1.0 / precision;
                let ln_slab =
                    rate.ln() + ln_gaussian(pseudo_mean, slab_mean, slab_variance + noise_var);
                let ln_spike = (1.0 - rate).ln() + ln_gaussian(pseudo_mean, 0.0, noise_var);
                let pi = logistic(ln_slab - ln_spike);
                let pi_spike = logistic(ln_spike - ln_slab);
                let slab_precision = precision + 1.0 / slab_variance;
                let slab_post_mean =
                    (precision * pseudo_mean + slab_mean / slab_variance) / slab_precision;
                let mean = pi * slab_post_mean;
                let var = pi / slab_precision + pi * pi_spike * slab_post_mean * slab_post_mean;
                (mean, var)
            }
        }
    }
}

fn check_precision(name: &str, precision: f64) -> Result<()> {
    if precision > 0.0 && !precision.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {precision}"
        )))
    }
}

/// Posterior mean of `d` under `prior x N(d; pseudo_mean, 1/precision I)`.
pub fn denoise_prior(
    pseudo_mean: &DVector<f64>,
    precision: f64,
    prior: &PriorModel,
) -> Result<DenoiseResult> {
    check_precision("pseudo precision", precision)?;
    prior.validate()?;
    Ok(DenoiseResult::from_pairs(
        pseudo_mean.iter().map(|&r| prior.posterior(r, precision)),
    ))
}

/// Likelihood linking `z` to the observed symptom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// `s = sign(z + w)`.
    #[default]
    Sign,
    /// `s = z + w` with the `+-1` observation read as a real value.
    LinearAwgn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub noise: NoiseModel,
}

impl ChannelModel {
    pub fn sign(noise: NoiseModel) -> Self {
        ChannelModel {
            kind: ChannelKind::Sign,
            noise,
        }
    }
}

fn check_lengths(pseudo_mean: &DVector<f64>, obs: &SymptomObservation) -> Result<()> {
    if pseudo_mean.len() != obs.len() {
        return Err(Error::DimensionMismatch(format!(
            "pseudo-mean has {} entries, observation has {}",
            pseudo_mean.len(),
            obs.len()
        )));
    }
    Ok(())
}

/// Closed-form posterior of one sign-channel component.
pub fn sign_posterior(pseudo_mean: f64, precision: f64, noise_precision: f64, s: f64) -> (f64, f64) {
    let prior_var = 1.0 / precision;
    let total_var = prior_var + 1.0 / noise_precision;
    let scale = total_var.sqrt();
    let v = s * pseudo_mean / scale;
    let lambda = inverse_mills(v);
    let mean = pseudo_mean + s * lambda * prior_var / scale;
    let shrink = lambda * (lambda + v) * prior_var / total_var;
    let var = (prior_var * (1.0 - shrink)).max(0.0);
    (mean, var)
}

/// Posterior of `z` given `s = sign(z + w)` under the pseudo-prior.
///
/// Missing entries pass the pseudo-prior through unchanged.
pub fn denoise_channel_sign(
    pseudo_mean: &DVector<f64>,
    precision: f64,
    obs: &SymptomObservation,
    noise: &NoiseModel,
) -> Result<DenoiseResult> {
    check_precision("pseudo precision", precision)?;
    check_precision("noise precision", noise.noise_precision)?;
    check_lengths(pseudo_mean, obs)?;
    Ok(DenoiseResult::from_pairs(
        pseudo_mean
            .iter()
            .zip(obs.values())
            .map(|(&z, value)| match value.value() {
                Some(s) => sign_posterior(z, precision, noise.noise_precision, s),
                None => (z, 1.0 / precision),
            }),
    ))
}

/// Posterior of `z` given `s = z + w`.
pub fn denoise_channel_linear(
    pseudo_mean: &DVector<f64>,
    precision: f64,
    obs: &SymptomObservation,
    noise: &NoiseModel,
) -> Result<DenoiseResult> {
    check_precision("pseudo precision", precision)?;
    check_precision("noise precision", noise.noise_precision)?;
    check_lengths(pseudo_mean, obs)?;
    let gw = noise.noise_precision;
    Ok(DenoiseResult::from_pairs(
        pseudo_mean
            .iter()
            .zip(obs.values())
            .map(|(&z, value)| match value.value() {
                Some(s) if gw.is_infinite() => (s, 0.0),
                Some(s) => ((precision * z + gw * s) / (precision + gw), 1.0 / (precision + gw)),
                None => (z, 1.0 / precision),
            }),
    ))
}

/// Dispatches on the channel kind.
pub fn denoise_channel(
    pseudo_mean: &DVector<f64>,
    precision: f64,
    obs: &SymptomObservation,
    channel: &ChannelModel,
) -> Result<DenoiseResult> {
    match channel.kind {
        ChannelKind::Sign => denoise_channel_sign(pseudo_mean, precision, obs, &channel.noise),
        ChannelKind::LinearAwgn => denoise_channel_linear(pseudo_mean, precision, obs, &channel.noise),
    }
}

/// Posterior mean and variance of one channel component by direct
/// integration of `z * p(s|z) N(z; pseudo_mean, 1/precision)`.
pub fn channel_posterior_quadrature(
    pseudo_mean: f64,
    precision: f64,
    kind: ChannelKind,
    noise_precision: f64,
    observed: Symptom,
    config: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let sd = 1.0 / precision.sqrt();
    // ln p(s | z) with z = pseudo_mean + t * sd.
    // ln p(s | z) as a function of t, where the likelihood changes and how
    // sharply (its width in t).
    let (ln_lik, center, width): (Box<dyn Fn(f64) -> f64>, f64, f64) = match (observed.value(), kind) {
        (None, _) => (Box::new(|_| 0.0), 0.0, 1.0),
        (Some(s), ChannelKind::Sign) => {
            let kink = -pseudo_mean / sd;
            let f: Box<dyn Fn(f64) -> f64> = if noise_precision.is_infinite() {
                Box::new(move |t: f64| {
                    if s * (pseudo_mean + t * sd) > 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                })
            } else {
                let gain = noise_precision.sqrt();
                Box::new(move |t: f64| ln_normal_cdf(s * gain * (pseudo_mean + t * sd)))
            };
            (f, kink, 1.0 / (noise_precision / precision).sqrt())
        }
        (Some(s), ChannelKind::LinearAwgn) => {
            let noise_var = 1.0 / noise_precision;
            let post_mean = (precision * pseudo_mean + noise_precision * s) / (precision + noise_precision);
            (
                Box::new(move |t: f64| ln_gaussian(s, pseudo_mean + t * sd, noise_var)),
                (post_mean - pseudo_mean) / sd,
                1.0 / (noise_precision / precision).sqrt(),
            )
        }
    };
    let ln_weight = |t: f64| -0.5 * t * t + ln_lik(t);

    let lo = (-40.0f64).min(center - 40.0);
    let hi = 40.0f64.max(center + 40.0);
    let shift = (0..=800)
        .map(|k| lo + (hi - lo) * k as f64 / 800.0)
        .chain([0.0, center])
        .map(ln_weight)
        .fold(f64::NEG_INFINITY, f64::max);

    // A front much narrower than the initial segments can fall between all
    // Kronrod nodes and be missed entirely, so seed the partition around it.
    let mut breaks = vec![0.0, center];
    if width.is_finite() && width > 0.0 {
        for k in 0..8 {
            let step = width * 4f64.powi(k);
            breaks.extend([center - step, center + step]);
        }
    }
    let est = integrate(
        |t| {
            let w = (ln_weight(t) - shift).exp();
            let dz = t * sd;
            [w, w * dz, w * dz * dz]
        },
        lo,
        hi,
        &breaks,
        config,
    )?;
    let [z0, z1, z2] = est.value;
    let offset = z1 / z0;
    let var = (z2 / z0 - offset * offset).max(0.0);
    Ok((pseudo_mean + offset, var))
}

/// Numerical-integration counterpart of [`denoise_channel`].
pub fn denoise_channel_quadrature(
    pseudo_mean: &DVector<f64>,
    precision: f64,
    obs: &SymptomObservation,
    channel: &ChannelModel,
    config: &QuadratureConfig,
) -> Result<DenoiseResult> {
    check_precision("pseudo precision", precision)?;
    check_precision("noise precision", channel.noise.noise_precision)?;
    check_lengths(pseudo_mean, obs)?;
    let pairs = pseudo_mean
        .iter()
        .zip(obs.values())
        .map(|(&z, &value)| {
            channel_posterior_quadrature(
                z,
                precision,
                channel.kind,
                channel.noise.noise_precision,
                value,
                config,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DenoiseResult::from_pairs(pairs.into_iter()))
}
