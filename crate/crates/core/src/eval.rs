//! Error metrics, synthetic case generation and the benchmark runner.
//!
//! NRMSE is measured in symptom space, `||A d* - A d|| / ||A d*||`, averaged
//! over cases. Top-K accuracy ranks the raw estimate, larger first, with ties
//! going to the lower disease index.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{Algorithm, SymptomChecker};
use crate::error::{Error, Result};
use crate::gvamp::PrecisionClamp;
use crate::model::{
    snr_to_noise_precision, DiseaseVector, KnowledgeMatrix, NoiseModel, SymptomObservation, Vignette,
};

/// Identifies the random stream so datasets can be regenerated elsewhere.
pub const PRNG_DESCRIPTION: &str =
    "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9); supports via rand::seq::index::sample, noise via rand_distr::StandardNormal";

/// Disease indices ordered by decreasing score, ties by ascending index.
/// NaN scores sort last.
pub fn ranking(estimate: &DVector<f64>) -> Vec<usize> {
    ranking_by(estimate, None)
}

fn score_order(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => b.partial_cmp(&a).expect("non-NaN"),
    }
}

/// Like [`ranking`], but scores that compare equal are first ordered by
/// decreasing `tiebreak`, then by index.
///
/// Posterior means saturate at exactly 0 or 1 in floating point; passing the
/// pseudo-measurement the mean was computed from (which the mean is
/// nondecreasing in) recovers the order the exact means would have.
pub fn ranking_by(estimate: &DVector<f64>, tiebreak: Option<&DVector<f64>>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..estimate.len()).collect();
    idx.sort_by(|&i, &j| compare(estimate, tiebreak, i, j));
    idx
}

fn compare(estimate: &DVector<f64>, tiebreak: Option<&DVector<f64>>, i: usize, j: usize) -> Ordering {
    score_order(estimate[i], estimate[j])
        .then_with(|| match tiebreak {
            Some(t) => score_order(t[i], t[j]),
            None => Ordering::Equal,
        })
        .then(i.cmp(&j))
}

/// 1-based rank of `truth` in [`ranking`] order.
pub fn truth_rank(estimate: &DVector<f64>, truth: usize) -> usize {
    truth_rank_by(estimate, None, truth)
}

/// 1-based rank of `truth` in [`ranking_by`] order.
pub fn truth_rank_by(estimate: &DVector<f64>, tiebreak: Option<&DVector<f64>>, truth: usize) -> usize {
    1 + (0..estimate.len())
        .filter(|&j| compare(estimate, tiebreak, j, truth) == Ordering::Less)
        .count()
}

/// `||A d* - A d|| / ||A d*||` for one case.
pub fn symptom_nrmse(a: &DMatrix<f64>, truth: &DVector<f64>, estimate: &DVector<f64>) -> Result<f64> {
    let ad = a * truth;
    let energy = ad.norm();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergyTruth(0));
    }
    Ok((ad - a * estimate).norm() / energy)
}

/// `||d* - d|| / ||d*||` for one case.
pub fn disease_nrmse(truth: &DVector<f64>, estimate: &DVector<f64>) -> Result<f64> {
    let energy = truth.norm();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergyTruth(0));
    }
    Ok((truth - estimate).norm() / energy)
}

/// Mean symptom-space NRMSE over `(A_l, d*_l, d_l)` triples.
pub fn nrmse<'a, I>(batch: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a DMatrix<f64>, &'a DVector<f64>, &'a DVector<f64>)>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for (l, (a, truth, est)) in batch.into_iter().enumerate() {
        total += symptom_nrmse(a, truth, est).map_err(|_| Error::ZeroEnergyTruth(l))?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(total / count as f64)
}

/// Fraction of `(truth index, estimate)` pairs whose truth ranks within `k`.
pub fn topk_accuracy<'a, I>(batch: I, k: usize) -> Result<f64>
where
    I: IntoIterator<Item = (usize, &'a DVector<f64>)>,
{
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let mut hits = 0usize;
    let mut count = 0usize;
    for (truth, est) in batch {
        if k > est.len() {
            return Err(Error::InvalidParameter(format!(
                "K = {k} exceeds the number of diseases {}",
                est.len()
            )));
        }
        if truth_rank(est, truth) <= k {
            hits += 1;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(hits as f64 / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatrixSource {
    /// Use the matrix passed to the generator.
    Load,
    /// Draw an `symptoms x diseases` Bernoulli(`density`) matrix, redrawing
    /// until no column is empty.
    Bernoulli {
        symptoms: usize,
        diseases: usize,
        density: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub vignette_count: usize,
    /// Number of active diseases per case.
    pub sparsity: usize,
    /// Infinite means noiseless (`noise precision = clamp max`).
    pub snr_db: f64,
    pub matrix_source: MatrixSource,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            vignette_count: 200,
            sparsity: 1,
            snr_db: 25.0,
            matrix_source: MatrixSource::Load,
        }
    }
}

/// One generated case with the energies needed to audit the realized SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub support: Vec<usize>,
    pub observation: SymptomObservation,
    pub signal_energy: f64,
    pub noise_energy: f64,
}

impl SyntheticCase {
    pub fn truth_vector(&self, disease_count: usize) -> DiseaseVector {
        let mut d = DVector::zeros(disease_count);
        for &j in &self.support {
            d[j] = 1.0;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub matrix: KnowledgeMatrix,
    pub noise: NoiseModel,
    pub cases: Vec<SyntheticCase>,
}

impl SyntheticDataset {
    /// The cases as one-hot vignettes; fails when cases carry several
    /// diseases.
    pub fn vignettes(&self) -> Result<Vec<Vignette>> {
        self.cases
            .iter()
            .map(|c| match c.support.as_slice() {
                [j] => Ok(Vignette {
                    observation: c.observation.clone(),
                    truth_index: *j,
                }),
                _ => Err(Error::InvalidParameter(
                    "only single-disease cases can be stored as vignettes".into(),
                )),
            })
            .collect()
    }

    /// `10 log10(sum ||Ad||^2 / sum ||w||^2)` over the generated cases.
    pub fn empirical_snr_db(&self) -> f64 {
        let signal: f64 = self.cases.iter().map(|c| c.signal_energy).sum();
        let noise: f64 = self.cases.iter().map(|c| c.noise_energy).sum();
        10.0 * (signal / noise).log10()
    }
}

/// Bernoulli(`density`) 0/1 matrix without empty columns.
pub fn generate_matrix<R: Rng>(
    rng: &mut R,
    symptoms: usize,
    diseases: usize,
    density: f64,
) -> Result<KnowledgeMatrix> {
    if !(density > 0.0 && density <= 1.0) || symptoms == 0 || diseases == 0 {
        return Err(Error::InvalidParameter(format!(
            "need positive dimensions and density in (0, 1], got {symptoms}x{diseases}, p={density}"
        )));
    }
    for _ in 0..10_000 {
        let m = DMatrix::from_fn(symptoms, diseases, |_, _| {
            if rng.random::<f64>() < density {
                1.0
            } else {
                0.0
            }
        });
        if let Ok(k) = KnowledgeMatrix::new(m) {
            return Ok(k);
        }
    }
    Err(Error::InvalidParameter(format!(
        "density {density} too low to draw a matrix without empty columns"
    )))
}

/// Draws cases from `s = sign(A d + w)` with `d` the indicator of a uniform
/// random support.
pub fn generate_synthetic(matrix: Option<&KnowledgeMatrix>, config: &GeneratorConfig) -> Result<SyntheticDataset> {
    if config.vignette_count == 0 {
        return Err(Error::InvalidParameter("vignette count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let matrix = match (config.matrix_source, matrix) {
        (MatrixSource::Load, Some(a)) => a.clone(),
        (MatrixSource::Load, None) => {
            return Err(Error::InvalidParameter("matrix source is `load` but no matrix given".into()))
        }
        (
            MatrixSource::Bernoulli {
                symptoms,
                diseases,
                density,
            },
            _,
        ) => generate_matrix(&mut rng, symptoms, diseases, density)?,
    };
    let (m, n) = (matrix.symptom_count(), matrix.disease_count());
    if config.sparsity == 0 || config.sparsity > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity must lie in 1..={n}, got {}",
            config.sparsity
        )));
    }
    let noise = if config.snr_db == f64::INFINITY {
        NoiseModel {
            noise_precision: PrecisionClamp::default().max,
            snr_db: Some(f64::INFINITY),
        }
    } else {
        snr_to_noise_precision(config.snr_db, matrix.expected_signal_energy(config.sparsity), m)?
    };
    let sd = noise.variance().sqrt();
    let a = matrix.as_matrix();
    let mut cases = Vec::with_capacity(config.vignette_count);
    for _ in 0..config.vignette_count {
        let mut support = sample(&mut rng, n, config.sparsity).into_vec();
        support.sort_unstable();
        let mut z = DVector::zeros(m);
        for &j in &support {
            z += a.column(j);
        }
        let w = DVector::from_fn(m, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let y = &z + &w;
        cases.push(SyntheticCase {
            support,
            observation: SymptomObservation::from_signs(y.as_slice()),
            signal_energy: z.norm_squared(),
            noise_energy: w.norm_squared(),
        });
    }
    Ok(SyntheticDataset {
        matrix,
        noise,
        cases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub nrmse: f64,
    pub nrmse_disease: f64,
    pub top_k: BTreeMap<usize, f64>,
    /// `(nrmse, rank of truth)` per evaluated case, in input order.
    pub per_vignette: Vec<(f64, usize)>,
    pub excluded: usize,
}

impl Metrics {
    pub fn top(&self, k: usize) -> f64 {
        self.top_k.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// The K values reported in every table.
pub const REPORTED_K: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub algorithms: Vec<Algorithm>,
    pub metrics: BTreeMap<Algorithm, Metrics>,
    /// Dataset NRMSE of every ADMM grid point, when ADMM ran.
    pub admm_rho_curve: Vec<(f64, f64)>,
    pub config_echo: Value,
    pub seed: Option<u64>,
}

/// A scored case: truth index and, unless the solver failed, the estimate
/// with its optional ranking tiebreak.
type ScoredCase = (usize, Option<(DVector<f64>, Option<DVector<f64>>)>);

fn metrics_from(a: &DMatrix<f64>, cases: &[ScoredCase], n: usize) -> Result<Metrics> {
    let mut per_vignette = Vec::new();
    let mut nrmse_total = 0.0;
    let mut disease_total = 0.0;
    let mut excluded = 0;
    for (truth, est) in cases {
        let Some((est, tiebreak)) = est else {
            excluded += 1;
            continue;
        };
        let mut d = DVector::zeros(n);
        d[*truth] = 1.0;
        let e = symptom_nrmse(a, &d, est)?;
        nrmse_total += e;
        disease_total += disease_nrmse(&d, est)?;
        per_vignette.push((e, truth_rank_by(est, tiebreak.as_ref(), *truth)));
    }
    let count = per_vignette.len();
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let top_k = REPORTED_K
        .iter()
        .filter(|&&k| k <= n)
        .map(|&k| {
            let hits = per_vignette.iter().filter(|(_, r)| *r <= k).count();
            (k, hits as f64 / count as f64)
        })
        .collect();
    Ok(Metrics {
        nrmse: nrmse_total / count as f64,
        nrmse_disease: disease_total / count as f64,
        top_k,
        per_vignette,
        excluded,
    })
}

/// Runs every algorithm on every vignette.
///
/// ADMM is run over its whole rho grid and, for each case, the grid point
/// with the lowest error against the known diagnosis is reported: the
/// baseline at its best. The dataset NRMSE of every grid point is kept as
/// `admm_rho_curve`. Per-case solver failures exclude that case from the
/// algorithm's metrics.
pub fn run_benchmark(
    vignettes: &[Vignette],
    checker: &SymptomChecker,
    algorithms: &[Algorithm],
    seed: Option<u64>,
) -> Result<BenchmarkReport> {
    if vignettes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if algorithms.is_empty() {
        return Err(Error::InvalidParameter("no algorithms selected".into()));
    }
    let n = checker.matrix().disease_count();
    if let Some(v) = vignettes.iter().find(|v| v.truth_index >= n) {
        return Err(Error::InvalidParameter(format!(
            "vignette diagnosis index {} out of range",
            v.truth_index
        )));
    }
    let a = checker.matrix().as_matrix();
    let mut algos: Vec<Algorithm> = Vec::new();
    for alg in algorithms {
        if !algos.contains(alg) {
            algos.push(*alg);
        }
    }

    let mut metrics = BTreeMap::new();
    let mut admm_rho_curve = Vec::new();
    for &alg in &algos {
        let cases: Vec<ScoredCase> = if alg == Algorithm::Admm {
            let sweeps: Vec<_> = vignettes
                .par_iter()
                .map(|v| checker.admm_sweep(&v.observation, Some(&v.truth_vector(n))).ok())
                .collect();
            for (k, &rho) in checker.config().admm.rho_grid.iter().enumerate() {
                let mut total = 0.0;
                let mut count = 0;
                for (v, sweep) in vignettes.iter().zip(&sweeps) {
                    if let Some(sweep) = sweep {
                        total += symptom_nrmse(a, &v.truth_vector(n), &sweep.runs[k].estimate)?;
                        count += 1;
                    }
                }
                let score = if count > 0 { total / count as f64 } else { f64::INFINITY };
                admm_rho_curve.push((rho, score));
            }
            vignettes
                .iter()
                .zip(sweeps)
                .map(|(v, s)| (v.truth_index, s.map(|s| (s.best_estimate().clone(), None))))
                .collect()
        } else {
            vignettes
                .par_iter()
                .map(|v| {
                    let est = checker
                        .infer(&v.observation, alg)
                        .ok()
                        .filter(|inf| inf.estimate.iter().all(|x| x.is_finite()))
                        .map(|inf| (inf.estimate, inf.tiebreak));
                    (v.truth_index, est)
                })
                .collect()
        };
        metrics.insert(alg, metrics_from(a, &cases, n)?);
    }

    let cfg = checker.config();
    let config_echo = json!({
        "vignettes": vignettes.len(),
        "symptoms": checker.matrix().symptom_count(),
        "diseases": n,
        "prior": checker.prior(),
        "channel": cfg.channel,
        "noise_precision": checker.noise().noise_precision,
        "snr_db": checker.noise().snr_db,
        "gvamp": cfg.gvamp,
        "admm": {
            "rho_grid": cfg.admm.rho_grid,
            "l1_weight": cfg.admm.l1_weight.map(Value::from).unwrap_or_else(|| Value::from("0.1 * ||A^T s||_inf")),
            "max_iterations": cfg.admm.max_iterations,
            "tolerance": cfg.admm.tolerance,
            "selection": "per vignette, grid point with lowest symptom-space NRMSE against the diagnosis",
        },
        "scan": cfg.scan,
        "nrmse": "symptom space ||A d* - A d|| / ||A d*||, mean over vignettes",
        "ranking": "descending score; equal scores by descending pseudo-measurement where the solver has one, then ascending index",
        "prng": PRNG_DESCRIPTION,
    });
    Ok(BenchmarkReport {
        algorithms: algos,
        metrics,
        admm_rho_curve,
        config_echo,
        seed,
    })
}

impl BenchmarkReport {
    pub fn to_json(&self) -> Value {
        let names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        let per_alg = |f: &dyn Fn(&Metrics) -> Value| -> Value {
            let mut map = serde_json::Map::new();
            for alg in &self.algorithms {
                map.insert(alg.name().to_string(), f(&self.metrics[alg]));
            }
            Value::Object(map)
        };
        let mut top_k = serde_json::Map::new();
        for k in REPORTED_K {
            top_k.insert(k.to_string(), per_alg(&|m| json!(m.top_k.get(&k))));
        }
        let mut out = json!({
            "algorithms": names,
            "metrics": {
                "nrmse": per_alg(&|m| json!(m.nrmse)),
                "top_k": top_k,
                "nrmse_disease": per_alg(&|m| json!(m.nrmse_disease)),
                "excluded": per_alg(&|m| json!(m.excluded)),
            },
            "config_echo": self.config_echo,
            "seed": self.seed,
        });
        if !self.admm_rho_curve.is_empty() {
            out["admm_rho_curve"] = json!(self
                .admm_rho_curve
                .iter()
                .map(|(rho, e)| json!({"rho": rho, "nrmse": e}))
                .collect::<Vec<_>>());
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }

    /// Rows NRMSE, TOP 1..3; one column per algorithm.
    pub fn to_table(&self) -> String {
        let labels: Vec<&str> = self.algorithms.iter().map(|a| a.label()).collect();
        let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "");
        for l in &labels {
            let _ = write!(out, " {l:>width$}");
        }
        out.push('\n');
        let mut row = |name: &str, f: &dyn Fn(&Metrics) -> f64| {
            let _ = write!(out, "{name:<8}");
            for alg in &self.algorithms {
                let v = f(&self.metrics[alg]);
                if v.is_nan() {
                    let _ = write!(out, " {:>width$}", "-");
                } else {
                    let _ = write!(out, " {v:>width$.2}");
                }
            }
            out.push('\n');
        };
        row("NRMSE", &|m| m.nrmse);
        for k in REPORTED_K {
            row(&format!("TOP {k}"), &|m| m.top(k));
        }
        out
    }
}
