//! A ready-to-query symptom checker: catalog, matrix and every solver's
//! cached factorization, behind one `infer` call.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::baselines::{solve_sparse_scan, AdmmConfig, AdmmSolver, AdmmSweep, SparseScanConfig, UlsSolver};
use crate::denoisers::{ChannelKind, ChannelModel, PriorModel};
use crate::error::{Error, Result};
use crate::eval::ranking_by;
use crate::gvamp::{run_gvamp_with, GvampConfig, LmmseSolver};
use crate::model::{snr_to_noise_precision, Catalog, DiseaseVector, KnowledgeMatrix, NoiseModel, SymptomObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gvamp,
    Admm,
    Uls,
    Scan,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Uls, Algorithm::Scan, Algorithm::Admm, Algorithm::Gvamp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gvamp => "gvamp",
            Algorithm::Admm => "admm",
            Algorithm::Uls => "uls",
            Algorithm::Scan => "scan",
        }
    }

    /// Column heading used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Gvamp => "G-VAMP",
            Algorithm::Admm => "ADMM",
            Algorithm::Uls => "ULS",
            Algorithm::Scan => "Sparse scan",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gvamp" | "g-vamp" => Ok(Algorithm::Gvamp),
            "admm" => Ok(Algorithm::Admm),
            "uls" => Ok(Algorithm::Uls),
            "scan" | "sparse-scan" => Ok(Algorithm::Scan),
            other => Err(Error::InvalidParameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// `None` uses a Bernoulli prior with rate `1/N`.
    pub prior: Option<PriorModel>,
    pub channel: ChannelKind,
    /// Target SNR used to derive the noise precision from the matrix.
    pub snr_db: f64,
    /// Overrides the SNR-derived noise precision.
    pub noise_precision: Option<f64>,
    pub gvamp: GvampConfig,
    pub admm: AdmmConfig,
    pub scan: SparseScanConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            prior: None,
            channel: ChannelKind::Sign,
            snr_db: 25.0,
            noise_precision: None,
            gvamp: GvampConfig::default(),
            admm: AdmmConfig::default(),
            scan: SparseScanConfig::default(),
        }
    }
}

/// Result of one inference call.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub algorithm: Algorithm,
    pub estimate: DiseaseVector,
    /// Secondary ranking key for estimates that compare equal; see
    /// [`ranking_by`].
    pub tiebreak: Option<DiseaseVector>,
    pub iterations: usize,
    pub converged: bool,
}

impl Inference {
    /// Every disease index, best first.
    pub fn ranking(&self) -> Vec<usize> {
        ranking_by(&self.estimate, self.tiebreak.as_ref())
    }

    /// The `top_k` highest-scoring diseases as `(index, score)`.
    pub fn top(&self, top_k: usize) -> Vec<(usize, f64)> {
        self.ranking()
            .into_iter()
            .take(top_k)
            .map(|i| (i, self.estimate[i]))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SymptomChecker {
    catalog: Catalog,
    matrix: KnowledgeMatrix,
    config: EngineConfig,
    prior: PriorModel,
    noise: NoiseModel,
    lmmse: LmmseSolver,
    uls: UlsSolver,
    admm: AdmmSolver,
}

impl SymptomChecker {
    pub fn new(catalog: Catalog, matrix: KnowledgeMatrix, config: EngineConfig) -> Result<Self> {
        matrix.check_catalog(&catalog)?;
        config.gvamp.validate()?;
        let prior = config
            .prior
            .unwrap_or_else(|| PriorModel::one_hot(matrix.disease_count()));
        prior.validate()?;
        let noise = match config.noise_precision {
            Some(p) => NoiseModel::from_precision(p)?,
            None => snr_to_noise_precision(
                config.snr_db,
                matrix.expected_signal_energy(1),
                matrix.symptom_count(),
            )?,
        };
        let admm = AdmmSolver::new(&matrix, config.admm.clone())?;
        Ok(SymptomChecker {
            lmmse: LmmseSolver::new(&matrix),
            uls: UlsSolver::new(&matrix),
            admm,
            catalog,
            matrix,
            config,
            prior,
            noise,
        })
    }

    /// The bundled demo catalog and matrix with default settings.
    pub fn demo() -> Self {
        SymptomChecker::new(Catalog::demo(), KnowledgeMatrix::demo(), EngineConfig::default())
            .expect("demo data is consistent")
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn matrix(&self) -> &KnowledgeMatrix {
        &self.matrix
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn channel(&self) -> ChannelModel {
        ChannelModel {
            kind: self.config.channel,
            noise: self.noise,
        }
    }

    /// All ADMM runs over the rho grid, for benchmark-style selection.
    pub fn admm_sweep(&self, obs: &SymptomObservation, truth: Option<&DVector<f64>>) -> Result<AdmmSweep> {
        self.admm.solve(&obs.to_signs(), truth)
    }

    pub fn infer(&self, obs: &SymptomObservation, algorithm: Algorithm) -> Result<Inference> {
        if obs.len() != self.matrix.symptom_count() {
            return Err(Error::DimensionMismatch(format!(
                "observation has {} symptoms, catalog has {}",
                obs.len(),
                self.matrix.symptom_count()
            )));
        }
        match algorithm {
            Algorithm::Gvamp => {
                let out = run_gvamp_with(&self.lmmse, obs, &self.prior, &self.channel(), &self.config.gvamp)?;
                Ok(Inference {
                    algorithm,
                    estimate: out.estimate,
                    tiebreak: Some(out.pseudo_mean),
                    iterations: out.iterations_used,
                    converged: out.converged,
                })
            }
            Algorithm::Admm => {
                let sweep = self.admm_sweep(obs, None)?;
                let best = sweep.best_run();
                Ok(Inference {
                    algorithm,
                    estimate: best.estimate.clone(),
                    tiebreak: None,
                    iterations: best.iterations,
                    converged: best.converged,
                })
            }
            Algorithm::Uls => Ok(Inference {
                algorithm,
                estimate: self.uls.solve(&obs.to_signs())?,
                tiebreak: None,
                iterations: 1,
                converged: true,
            }),
            Algorithm::Scan => {
                let r = solve_sparse_scan(&self.matrix, &obs.to_signs(), &self.config.scan)?;
                Ok(Inference {
                    algorithm,
                    estimate: r.estimate,
                    tiebreak: None,
                    iterations: 1,
                    converged: true,
                })
            }
        }
    }
}
