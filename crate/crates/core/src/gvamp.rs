//! Generalized vector approximate message passing.
//!
//! Three blocks exchange Gaussian messages (a mean vector and one scalar
//! precision):
//!
//! ```text
//!   prior denoiser  --d-->  LMMSE  <--z--  channel denoiser
//!        ^                  |   |                 ^
//!        +------- d --------+   +------- z -------+
//! ```
//!
//! Each block computes a posterior from its incoming message, then divides
//! the incoming message back out (precision subtraction) to form the
//! extrinsic message it sends on. The LMMSE block couples `d` and `z` through
//! `z ~ N(Ad, 1/coupling I)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::denoisers::{denoise_channel, denoise_prior, ChannelModel, DenoiseResult, PriorModel};
use crate::error::{Error, Result};
use crate::model::{DiseaseVector, KnowledgeMatrix, SymptomObservation};

/// A Gaussian message `N(mean, 1/precision I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpMessage {
    pub mean: DVector<f64>,
    pub precision: f64,
}

impl EpMessage {
    pub fn new(mean: DVector<f64>, precision: f64) -> Self {
        EpMessage { mean, precision }
    }

    fn is_finite(&self) -> bool {
        self.precision.is_finite() && self.mean.iter().all(|v| v.is_finite())
    }

    /// `eta * self + (1 - eta) * previous` on both mean and precision.
    pub fn damped(self, previous: &EpMessage, eta: f64) -> EpMessage {
        if eta == 1.0 {
            return self;
        }
        EpMessage {
            mean: self.mean * eta + &previous.mean * (1.0 - eta),
            precision: eta * self.precision + (1.0 - eta) * previous.precision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionClamp {
    pub min: f64,
    pub max: f64,
}

impl Default for PrecisionClamp {
    fn default() -> Self {
        PrecisionClamp {
            min: 1e-11,
            max: 1e11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GvampConfig {
    pub max_iterations: usize,
    /// Stop once `||d_t - d_{t-1}|| / ||d_t||` drops below this.
    pub tolerance: f64,
    /// Weight on the new message; 1 disables damping.
    pub damping: f64,
    pub precision_clamp: PrecisionClamp,
    /// Precision of the starting messages. Very vague starts (well below
    /// 0.1) let the sign channel push every `z` far from zero on the first
    /// pass and the binary prior then locks in wrong supports; values much
    /// above 1 over-trust the prior mean.
    pub init_precision: f64,
    /// Precision of `z` around `Ad` in the LMMSE block. `None` uses the
    /// channel noise precision.
    pub coupling_precision: Option<f64>,
    /// Cross-check every LMMSE step against a dense joint solve.
    pub verify_lmmse: bool,
}

impl Default for GvampConfig {
    fn default() -> Self {
        GvampConfig {
            max_iterations: 200,
            tolerance: 1e-6,
            damping: 0.5,
            precision_clamp: PrecisionClamp::default(),
            init_precision: 0.3,
            coupling_precision: None,
            verify_lmmse: false,
        }
    }
}

impl GvampConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        let c = self.precision_clamp;
        if !(c.min > 0.0 && c.min < c.max) {
            return Err(Error::InvalidParameter(format!(
                "precision clamp must satisfy 0 < min < max, got [{}, {}]",
                c.min, c.max
            )));
        }
        if !(self.init_precision > 0.0) {
            return Err(Error::InvalidParameter("init_precision must be positive".into()));
        }
        if let Some(g) = self.coupling_precision {
            if !(g > 0.0) {
                return Err(Error::InvalidParameter("coupling precision must be positive".into()));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Extrinsic message `posterior / incoming`.
///
/// Returns the message and whether its precision had to be clamped. A
/// non-positive extrinsic precision is replaced by the clamp minimum and the
/// posterior mean is passed through.
pub fn extrinsic_update(
    posterior: &DenoiseResult,
    incoming: &EpMessage,
    clamp: &PrecisionClamp,
) -> (EpMessage, bool) {
    let post_precision = 1.0 / posterior.avg_variance;
    let precision = post_precision - incoming.precision;
    if !(precision > 0.0) {
        return (EpMessage::new(posterior.mean.clone(), clamp.min), true);
    }
    if !post_precision.is_finite() {
        return (EpMessage::new(posterior.mean.clone(), clamp.max), true);
    }
    let mean = (&posterior.mean * post_precision - &incoming.mean * incoming.precision) / precision;
    let clamped = precision.clamp(clamp.min, clamp.max);
    (EpMessage::new(mean, clamped), clamped != precision)
}

/// Extrinsic message given `keep = 1 - incoming.precision * avg_variance`.
fn extrinsic_from_divergence(
    posterior: &DenoiseResult,
    incoming: &EpMessage,
    keep: f64,
    clamp: &PrecisionClamp,
) -> (EpMessage, bool) {
    let alpha = incoming.precision * posterior.avg_variance;
    if !(keep > 0.0 && alpha > 0.0) {
        return (EpMessage::new(posterior.mean.clone(), clamp.min), true);
    }
    let precision = incoming.precision * keep / alpha;
    let mean = (&posterior.mean - &incoming.mean * alpha) / keep;
    let clamped = precision.clamp(clamp.min, clamp.max);
    (EpMessage::new(mean, clamped), clamped != precision)
}

struct LmmseOutput {
    d: DenoiseResult,
    z: DenoiseResult,
    d_keep: f64,
    z_keep: f64,
}

/// Joint Gaussian denoiser for `(d, z)` with a cached eigendecomposition of
/// `A^T A`.
///
/// With `kappa = coupling * gamma_z / (coupling + gamma_z)` the `d` marginal
/// has precision matrix `gamma_d I + kappa A^T A`, so one solve costs two
/// products with the eigenvector matrix.
#[derive(Debug, Clone)]
pub struct LmmseSolver {
    a: DMatrix<f64>,
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl LmmseSolver {
    pub fn new(a: &KnowledgeMatrix) -> Self {
        LmmseSolver::from_matrix(a.as_matrix().clone())
    }

    pub fn from_matrix(a: DMatrix<f64>) -> Self {
        let gram = a.transpose() * &a;
        let eig = SymmetricEigen::new(gram);
        LmmseSolver {
            a,
            eigenvectors: eig.eigenvectors,
            eigenvalues: eig.eigenvalues.map(|v| v.max(0.0)),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Posterior means and average variances of `d` and `z` under
    /// `N(d; d_msg) N(z; z_msg) N(z; Ad, 1/coupling)`.
    ///
    /// An infinite `coupling` enforces `z = Ad` exactly.
    pub fn denoise(
        &self,
        d_msg: &EpMessage,
        z_msg: &EpMessage,
        coupling: f64,
    ) -> Result<(DenoiseResult, DenoiseResult)> {
        let out = self.solve(d_msg, z_msg, coupling)?;
        Ok((out.d, out.z))
    }

    /// Extrinsic messages `posterior / incoming` for `d` and `z`, with the
    /// flags telling whether each precision was clamped.
    ///
    /// Equivalent to [`extrinsic_update`] on the output of
    /// [`LmmseSolver::denoise`], but `1 - gamma_in * var` is formed from the
    /// spectrum instead of by subtraction, which stays accurate when the
    /// incoming precision is near the clamp maximum.
    pub fn extrinsic(
        &self,
        d_msg: &EpMessage,
        z_msg: &EpMessage,
        coupling: f64,
        clamp: &PrecisionClamp,
    ) -> Result<LmmseExtrinsic> {
        let out = self.solve(d_msg, z_msg, coupling)?;
        let d_ext = extrinsic_from_divergence(&out.d, d_msg, out.d_keep, clamp);
        let z_ext = extrinsic_from_divergence(&out.z, z_msg, out.z_keep, clamp);
        Ok(((out.d, out.z), d_ext, z_ext))
    }

    fn solve(&self, d_msg: &EpMessage, z_msg: &EpMessage, coupling: f64) -> Result<LmmseOutput> {
        let (m, n) = self.a.shape();
        if d_msg.mean.len() != n || z_msg.mean.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "LMMSE expects d of length {n} and z of length {m}, got {} and {}",
                d_msg.mean.len(),
                z_msg.mean.len()
            )));
        }
        let gd = d_msg.precision;
        let gz = z_msg.precision;
        if !(gd > 0.0 && gz > 0.0 && coupling > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LMMSE precisions must be positive, got d={gd}, z={gz}, coupling={coupling}"
            )));
        }
        // Weight of z_msg and of Ad in the conditional mean of z given d.
        let (kappa, w_z, w_ad, cond_var) = if coupling.is_infinite() {
            (gz, 0.0, 1.0, 0.0)
        } else {
            let total = gz + coupling;
            (coupling * gz / total, gz / total, coupling / total, 1.0 / total)
        };

        let rhs = &d_msg.mean * gd + self.a.tr_mul(&z_msg.mean) * kappa;
        let spectral = self.eigenvectors.tr_mul(&rhs);
        let inv: DVector<f64> = self.eigenvalues.map(|l| 1.0 / (gd + kappa * l));
        let d_mean = &self.eigenvectors * spectral.component_mul(&inv);
        let z_mean = &z_msg.mean * w_z + (&self.a * &d_mean) * w_ad;

        let d_var = inv.mean();
        let trace_a_cov_at: f64 = self
            .eigenvalues
            .iter()
            .zip(inv.iter())
            .map(|(l, i)| l * i)
            .sum();
        let z_var = cond_var + w_ad * w_ad * trace_a_cov_at / m as f64;
        // 1 - gamma_d * d_var and 1 - gamma_z * z_var, without cancellation.
        let d_keep = self
            .eigenvalues
            .iter()
            .zip(inv.iter())
            .map(|(l, i)| kappa * l * i)
            .sum::<f64>()
            / n as f64;
        let d_shrink: f64 = inv.iter().map(|i| gd * i).sum();
        let z_keep = w_ad * ((m as f64 - n as f64) + d_shrink) / m as f64;
        Ok(LmmseOutput {
            d: DenoiseResult {
                mean: d_mean,
                avg_variance: d_var,
            },
            z: DenoiseResult {
                mean: z_mean,
                avg_variance: z_var,
            },
            d_keep,
            z_keep,
        })
    }

    /// The same posterior from one dense solve of the `(N+M)`-dimensional
    /// joint system. Used for cross-checking.
    pub fn denoise_dense(
        &self,
        d_msg: &EpMessage,
        z_msg: &EpMessage,
        coupling: f64,
    ) -> Result<(DenoiseResult, DenoiseResult)> {
        let (m, n) = self.a.shape();
        let gd = d_msg.precision;
        let gz = z_msg.precision;
        let mut h = DMatrix::zeros(n + m, n + m);
        let ata = self.a.transpose() * &self.a;
        h.view_mut((0, 0), (n, n))
            .copy_from(&(DMatrix::identity(n, n) * gd + ata * coupling));
        h.view_mut((0, n), (n, m))
            .copy_from(&(self.a.transpose() * -coupling));
        h.view_mut((n, 0), (m, n)).copy_from(&(&self.a * -coupling));
        h.view_mut((n, n), (m, m))
            .copy_from(&(DMatrix::identity(m, m) * (gz + coupling)));
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(&d_msg.mean * gd));
        rhs.rows_mut(n, m).copy_from(&(&z_msg.mean * gz));
        let lu = h.lu();
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidParameter("singular joint LMMSE system".into()))?;
        let cov = lu
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("singular joint LMMSE system".into()))?;
        let d_var = (0..n).map(|i| cov[(i, i)]).sum::<f64>() / n as f64;
        let z_var = (n..n + m).map(|i| cov[(i, i)]).sum::<f64>() / m as f64;
        Ok((
            DenoiseResult {
                mean: x.rows(0, n).into_owned(),
                avg_variance: d_var,
            },
            DenoiseResult {
                mean: x.rows(n, m).into_owned(),
                avg_variance: z_var,
            },
        ))
    }
}

/// Free-function form of [`LmmseSolver::denoise`] for one-off use.
pub fn lmmse_denoise(
    d_msg: &EpMessage,
    z_msg: &EpMessage,
    a: &KnowledgeMatrix,
    coupling: f64,
) -> Result<(DenoiseResult, DenoiseResult)> {
    LmmseSolver::new(a).denoise(d_msg, z_msg, coupling)
}

/// LMMSE posteriors for `d` and `z`, then the extrinsic messages for `d` and
/// `z`, each with its clamp flag.
pub type LmmseExtrinsic = ((DenoiseResult, DenoiseResult), (EpMessage, bool), (EpMessage, bool));

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub relative_change: f64,
    pub d_to_lmmse_precision: f64,
    pub d_to_prior_precision: f64,
    pub z_to_lmmse_precision: f64,
    pub z_to_channel_precision: f64,
    pub clamp_events: usize,
    /// Largest relative gap to the dense LMMSE solve, when verification is on.
    pub lmmse_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GvampOutput {
    pub estimate: DiseaseVector,
    /// Pseudo-measurement of `d` the estimate was denoised from. The
    /// estimate is nondecreasing in it, so it orders saturated entries.
    pub pseudo_mean: DiseaseVector,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
}

impl GvampOutput {
    pub fn clamp_events(&self) -> usize {
        self.trace.iter().map(|t| t.clamp_events).sum()
    }
}

/// Messages carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct GvampState {
    /// LMMSE -> prior denoiser.
    pub d_to_prior: EpMessage,
    /// LMMSE -> channel denoiser.
    pub z_to_channel: EpMessage,
    /// prior denoiser -> LMMSE (after damping).
    pub d_to_lmmse: Option<EpMessage>,
    /// channel denoiser -> LMMSE (after damping).
    pub z_to_lmmse: Option<EpMessage>,
    /// Current posterior mean of `d` from the prior denoiser.
    pub estimate: DVector<f64>,
    /// The prior-denoiser input `estimate` was computed from.
    pub pseudo_mean: DVector<f64>,
    pub iteration: usize,
}

/// A G-VAMP run bound to one observation.
pub struct Gvamp<'a> {
    lmmse: &'a LmmseSolver,
    obs: &'a SymptomObservation,
    prior: PriorModel,
    channel: ChannelModel,
    config: GvampConfig,
    coupling: f64,
}

fn finite_or(msg: &EpMessage, iteration: usize, message: &'static str) -> Result<()> {
    if msg.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, message })
    }
}

fn relative_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

impl<'a> Gvamp<'a> {
    pub fn new(
        lmmse: &'a LmmseSolver,
        obs: &'a SymptomObservation,
        prior: PriorModel,
        channel: ChannelModel,
        config: GvampConfig,
    ) -> Result<Self> {
        config.validate()?;
        prior.validate()?;
        let (m, _) = lmmse.matrix().shape();
        if obs.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "observation has {} symptoms, matrix has {m}",
                obs.len()
            )));
        }
        let coupling = config
            .coupling_precision
            .unwrap_or(channel.noise.noise_precision);
        Ok(Gvamp {
            lmmse,
            obs,
            prior,
            channel,
            config,
            coupling,
        })
    }

    pub fn config(&self) -> &GvampConfig {
        &self.config
    }

    pub fn set_damping(&mut self, damping: f64) -> Result<()> {
        let mut config = self.config;
        config.damping = damping;
        config.validate()?;
        self.config = config;
        Ok(())
    }

    /// Starting messages: prior mean for `d`, its image under `A` for `z`.
    pub fn initial_state(&self) -> GvampState {
        let n = self.lmmse.matrix().ncols();
        let d0 = DVector::from_element(n, self.prior.mean());
        let z0 = self.lmmse.matrix() * &d0;
        GvampState {
            d_to_prior: EpMessage::new(d0.clone(), self.config.init_precision),
            z_to_channel: EpMessage::new(z0, self.config.init_precision),
            d_to_lmmse: None,
            z_to_lmmse: None,
            pseudo_mean: d0.clone(),
            estimate: d0,
            iteration: 0,
        }
    }

    /// One pass of prior denoise, channel denoise, LMMSE. Returns the trace
    /// row for the pass.
    pub fn step(&self, state: &mut GvampState) -> Result<TraceRecord> {
        let clamp = &self.config.precision_clamp;
        let eta = self.config.damping;
        let it = state.iteration + 1;
        let mut clamp_events = 0;

        let post_d = denoise_prior(&state.d_to_prior.mean, state.d_to_prior.precision, &self.prior)?;
        let (d_out, c) = extrinsic_update(&post_d, &state.d_to_prior, clamp);
        clamp_events += c as usize;
        let d_out = match &state.d_to_lmmse {
            Some(prev) => d_out.damped(prev, eta),
            None => d_out,
        };
        finite_or(&d_out, it, "d message toward LMMSE")?;

        let post_z = denoise_channel(
            &state.z_to_channel.mean,
            state.z_to_channel.precision,
            self.obs,
            &self.channel,
        )?;
        let (z_out, c) = extrinsic_update(&post_z, &state.z_to_channel, clamp);
        clamp_events += c as usize;
        let z_out = match &state.z_to_lmmse {
            Some(prev) => z_out.damped(prev, eta),
            None => z_out,
        };
        finite_or(&z_out, it, "z message toward LMMSE")?;

        let ((lm_d, lm_z), (d_back, c_d), (z_back, c_z)) =
            self.lmmse.extrinsic(&d_out, &z_out, self.coupling, clamp)?;
        clamp_events += c_d as usize + c_z as usize;
        let lmmse_discrepancy = if self.config.verify_lmmse {
            let (dd, dz) = self.lmmse.denoise_dense(&d_out, &z_out, self.coupling)?;
            Some(
                [
                    relative_gap(&lm_d.mean, &dd.mean),
                    relative_gap(&lm_z.mean, &dz.mean),
                    (lm_d.avg_variance - dd.avg_variance).abs() / dd.avg_variance,
                    (lm_z.avg_variance - dz.avg_variance).abs() / dz.avg_variance,
                ]
                .into_iter()
                .fold(0.0, f64::max),
            )
        } else {
            None
        };

        let d_back = d_back.damped(&state.d_to_prior, eta);
        let z_back = z_back.damped(&state.z_to_channel, eta);
        finite_or(&d_back, it, "d message toward prior denoiser")?;
        finite_or(&z_back, it, "z message toward channel denoiser")?;

        if post_d.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: it,
                message: "d posterior mean",
            });
        }
        let relative_change = relative_gap(&post_d.mean, &state.estimate);
        let record = TraceRecord {
            relative_change,
            d_to_lmmse_precision: d_out.precision,
            d_to_prior_precision: d_back.precision,
            z_to_lmmse_precision: z_out.precision,
            z_to_channel_precision: z_back.precision,
            clamp_events,
            lmmse_discrepancy,
        };
        state.estimate = post_d.mean;
        state.pseudo_mean = state.d_to_prior.mean.clone();
        state.d_to_prior = d_back;
        state.z_to_channel = z_back;
        state.d_to_lmmse = Some(d_out);
        state.z_to_lmmse = Some(z_out);
        state.iteration = it;
        Ok(record)
    }

    /// Iterates from `state` until convergence or the iteration cap.
    pub fn run_from(&self, mut state: GvampState) -> Result<(GvampOutput, GvampState)> {
        let mut trace = Vec::new();
        let mut converged = false;
        let start = state.iteration;
        while state.iteration - start < self.config.max_iterations {
            let record = self.step(&mut state)?;
            let done = state.iteration > 1 && record.relative_change < self.config.tolerance;
            trace.push(record);
            if done {
                converged = true;
                break;
            }
        }
        if converged {
            log::debug!("G-VAMP converged after {} iterations", trace.len());
        } else {
            log::warn!(
                "G-VAMP stopped after {} iterations without reaching tolerance {:e}",
                trace.len(),
                self.config.tolerance
            );
        }
        let output = GvampOutput {
            estimate: state.estimate.clone(),
            pseudo_mean: state.pseudo_mean.clone(),
            iterations_used: trace.len(),
            converged,
            trace,
        };
        Ok((output, state))
    }

    pub fn run(&self) -> Result<GvampOutput> {
        if !self.obs.has_evidence() {
            // No likelihood factor at all: the posterior is the prior.
            let n = self.lmmse.matrix().ncols();
            let p = self.config.init_precision;
            let mean = DVector::from_element(n, self.prior.mean());
            return Ok(GvampOutput {
                pseudo_mean: mean.clone(),
                estimate: mean,
                iterations_used: 1,
                converged: true,
                trace: vec![TraceRecord {
                    relative_change: 0.0,
                    d_to_lmmse_precision: p,
                    d_to_prior_precision: p,
                    z_to_lmmse_precision: p,
                    z_to_channel_precision: p,
                    clamp_events: 0,
                    lmmse_discrepancy: None,
                }],
            });
        }
        Ok(self.run_from(self.initial_state())?.0)
    }
}

/// Runs G-VAMP on one observation with a cached LMMSE factorization.
pub fn run_gvamp_with(
    lmmse: &LmmseSolver,
    obs: &SymptomObservation,
    prior: &PriorModel,
    channel: &ChannelModel,
    config: &GvampConfig,
) -> Result<GvampOutput> {
    Gvamp::new(lmmse, obs, *prior, *channel, *config)?.run()
}

/// Runs G-VAMP on one observation.
pub fn run_gvamp(
    a: &KnowledgeMatrix,
    obs: &SymptomObservation,
    prior: &PriorModel,
    channel: &ChannelModel,
    config: &GvampConfig,
) -> Result<GvampOutput> {
    run_gvamp_with(&LmmseSolver::new(a), obs, prior, channel, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoiseModel, Symptom};
    use approx::assert_relative_eq;

    fn msg(values: &[f64], precision: f64) -> EpMessage {
        EpMessage::new(DVector::from_vec(values.to_vec()), precision)
    }

    #[test]
    fn lmmse_scalar_case() {
        let a = KnowledgeMatrix::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let (d, z) = lmmse_denoise(&msg(&[0.0], 1.0), &msg(&[2.0], 1.0), &a, 1.0).unwrap();
        assert_relative_eq!(d.mean[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(z.mean[0], 4.0 / 3.0, max_relative = 1e-14);
        // Inverse of [[2, -1], [-1, 2]].
        assert_relative_eq!(d.avg_variance, 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(z.avg_variance, 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn lmmse_confident_d_message_wins() {
        let a = KnowledgeMatrix::demo();
        let n = a.disease_count();
        let m = a.symptom_count();
        let d_hat = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
        let z_hat = DVector::from_fn(m, |i, _| (i as f64 * 0.11).cos());
        let (d, _) = lmmse_denoise(
            &EpMessage::new(d_hat.clone(), 1e10),
            &EpMessage::new(z_hat, 1.0),
            &a,
            2.0,
        )
        .unwrap();
        assert!((d.mean - d_hat).amax() < 1e-6);
    }

    #[test]
    fn lmmse_infinite_coupling_enforces_constraint() {
        let a = KnowledgeMatrix::demo();
        let solver = LmmseSolver::new(&a);
        let n = a.disease_count();
        let m = a.symptom_count();
        let (d, z) = solver
            .denoise(
                &EpMessage::new(DVector::from_element(n, 0.1), 2.0),
                &EpMessage::new(DVector::from_element(m, -0.5), 3.0),
                f64::INFINITY,
            )
            .unwrap();
        assert!((a.as_matrix() * &d.mean - &z.mean).amax() < 1e-10);
        let (dd, dz) = solver
            .denoise_dense(
                &EpMessage::new(DVector::from_element(n, 0.1), 2.0),
                &EpMessage::new(DVector::from_element(m, -0.5), 3.0),
                1e9,
            )
            .unwrap();
        assert!((dd.mean - d.mean).amax() < 1e-6);
        assert!((dz.mean - z.mean).amax() < 1e-6);
    }

    #[test]
    fn extrinsic_subtraction() {
        let clamp = PrecisionClamp::default();
        let post = DenoiseResult {
            mean: DVector::from_vec(vec![1.0]),
            avg_variance: 0.5,
        };
        let (e, clamped) = extrinsic_update(&post, &msg(&[0.0], 1.0), &clamp);
        assert!(!clamped);
        assert_relative_eq!(e.mean[0], 2.0);
        assert_relative_eq!(e.precision, 1.0);

        let post = DenoiseResult {
            mean: DVector::from_vec(vec![0.3]),
            avg_variance: 0.25,
        };
        let (e, clamped) = extrinsic_update(&post, &msg(&[7.0], 4.0), &clamp);
        assert!(clamped);
        assert_eq!(e.precision, clamp.min);
        assert_eq!(e.mean[0], 0.3);
    }

    #[test]
    fn config_validation() {
        let mut c = GvampConfig {
            damping: 0.0,
            ..GvampConfig::default()
        };
        assert!(c.validate().is_err());
        c.damping = 1.0;
        assert!(c.validate().is_ok());
        c.precision_clamp = PrecisionClamp { min: 1.0, max: 1.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn all_missing_returns_prior_mean() {
        let a = KnowledgeMatrix::demo();
        let prior = PriorModel::one_hot(a.disease_count());
        let obs = SymptomObservation::new(vec![Symptom::Missing; a.symptom_count()]);
        let channel = ChannelModel::sign(NoiseModel::from_precision(100.0).unwrap());
        let out = run_gvamp(&a, &obs, &prior, &channel, &GvampConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations_used <= 2);
        assert!(out.estimate.iter().all(|&v| v == prior.mean()));
    }

    #[test]
    fn identity_recovers_active_disease() {
        let a = KnowledgeMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let obs = SymptomObservation::from_signs(&[-1.0, -1.0, 1.0]);
        let prior = PriorModel::Bernoulli { rate: 1.0 / 3.0 };
        let noise = crate::model::snr_to_noise_precision(40.0, 1.0, 3).unwrap();
        let out = run_gvamp(&a, &obs, &prior, &ChannelModel::sign(noise), &GvampConfig::default())
            .unwrap();
        let best = out.estimate.argmax().0;
        assert_eq!(best, 2);
        assert_eq!(out.trace.len(), out.iterations_used);
    }
}
