//! Comparison solvers that work directly on the `+-1` symptom vector:
//! minimum-norm least squares, the lasso by ADMM over a grid of penalties,
//! and exhaustive least squares over small supports.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiseaseVector, KnowledgeMatrix};

/// Singular values below `cutoff * sigma_max` are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Moore-Penrose pseudoinverse from a thin SVD.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma_max = svd.singular_values.max();
    let cutoff = PINV_RELATIVE_CUTOFF * sigma_max;
    let inv = svd
        .singular_values
        .map(|s| if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 });
    v_t.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}

/// Minimum-norm least-squares solver with a cached pseudoinverse.
#[derive(Debug, Clone)]
pub struct UlsSolver {
    pinv: DMatrix<f64>,
}

impl UlsSolver {
    pub fn new(a: &KnowledgeMatrix) -> Self {
        UlsSolver {
            pinv: pseudo_inverse(a.as_matrix()),
        }
    }

    pub fn pseudo_inverse(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn solve(&self, s: &DVector<f64>) -> Result<DiseaseVector> {
        if s.len() != self.pinv.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "observation has {} entries, matrix has {} rows",
                s.len(),
                self.pinv.ncols()
            )));
        }
        Ok(&self.pinv * s)
    }
}

/// `A^+ s`.
pub fn solve_uls(a: &KnowledgeMatrix, s: &DVector<f64>) -> Result<DiseaseVector> {
    UlsSolver::new(a).solve(s)
}

/// `rho = 0.1, 0.2, ..., 5.0`.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=50).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    pub rho_grid: Vec<f64>,
    /// `None` selects `0.1 * ||A^T s||_inf` per observation.
    pub l1_weight: Option<f64>,
    pub max_iterations: usize,
    /// Bound on the l2 norms of the primal and dual residuals.
    pub tolerance: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho_grid: default_rho_grid(),
            l1_weight: None,
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho_grid.is_empty() {
            return Err(Error::InvalidParameter("rho grid is empty".into()));
        }
        if let Some(rho) = self.rho_grid.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        if let Some(l) = self.l1_weight {
            if !(l >= 0.0) {
                return Err(Error::InvalidParameter(format!("l1 weight must be >= 0, got {l}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// `soft(x, k) = sign(x) max(|x| - k, 0)`.
pub fn soft_threshold(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

/// `1/2 ||s - Ad||^2 + lambda ||d||_1`.
pub fn lasso_objective(a: &DMatrix<f64>, s: &DVector<f64>, d: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * (s - a * d).norm_squared() + lambda * d.lp_norm(1)
}

/// The default l1 weight `0.1 ||A^T s||_inf`.
pub fn default_l1_weight(a: &DMatrix<f64>, s: &DVector<f64>) -> f64 {
    0.1 * a.tr_mul(s).amax()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmmRun {
    pub rho: f64,
    #[serde(skip)]
    pub estimate: DiseaseVector,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmSweep {
    pub l1_weight: f64,
    pub runs: Vec<AdmmRun>,
    pub best: usize,
}

impl AdmmSweep {
    pub fn best_run(&self) -> &AdmmRun {
        &self.runs[self.best]
    }

    pub fn best_estimate(&self) -> &DiseaseVector {
        &self.best_run().estimate
    }
}

/// Scaled-form ADMM for the lasso with one Cholesky factor of
/// `A^T A + rho I` cached per grid point.
#[derive(Debug, Clone)]
pub struct AdmmSolver {
    a: DMatrix<f64>,
    config: AdmmConfig,
    factors: Vec<Cholesky<f64, Dyn>>,
}

impl AdmmSolver {
    pub fn new(a: &KnowledgeMatrix, config: AdmmConfig) -> Result<Self> {
        config.validate()?;
        let a = a.as_matrix().clone();
        let gram = a.transpose() * &a;
        let n = a.ncols();
        let factors = config
            .rho_grid
            .iter()
            .map(|&rho| {
                Cholesky::new(&gram + DMatrix::identity(n, n) * rho)
                    .ok_or_else(|| Error::InvalidParameter(format!("A^T A + {rho} I is not positive definite")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AdmmSolver { a, config, factors })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.config
    }

    fn run_one(&self, k: usize, s: &DVector<f64>, lambda: f64) -> AdmmRun {
        let rho = self.config.rho_grid[k];
        let factor = &self.factors[k];
        let n = self.a.ncols();
        let ats = self.a.tr_mul(s);
        let mut z: DVector<f64> = DVector::zeros(n);
        let mut u: DVector<f64> = DVector::zeros(n);
        let threshold = lambda / rho;
        let mut iterations = 0;
        let mut converged = false;
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        while iterations < self.config.max_iterations {
            iterations += 1;
            let x = factor.solve(&(&ats + (&z - &u) * rho));
            let z_prev = z.clone();
            z = (&x + &u).map(|v| soft_threshold(v, threshold));
            u += &x - &z;
            primal = (&x - &z).norm();
            dual = rho * (&z - &z_prev).norm();
            if primal <= self.config.tolerance && dual <= self.config.tolerance {
                converged = true;
                break;
            }
        }
        let objective = lasso_objective(&self.a, s, &z, lambda);
        AdmmRun {
            rho,
            estimate: z,
            iterations,
            converged,
            objective,
            primal_residual: primal,
            dual_residual: dual,
        }
    }

    /// Solves the lasso for every grid value of rho.
    ///
    /// With `truth` the best run is the one with the smallest symptom-space
    /// error `||A(d* - d)|| / ||A d*||`; without it, the smallest objective.
    /// Ties go to the earlier grid point.
    pub fn solve(&self, s: &DVector<f64>, truth: Option<&DVector<f64>>) -> Result<AdmmSweep> {
        if s.len() != self.a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "observation has {} entries, matrix has {} rows",
                s.len(),
                self.a.nrows()
            )));
        }
        let lambda = self
            .config
            .l1_weight
            .unwrap_or_else(|| default_l1_weight(&self.a, s));
        let runs: Vec<AdmmRun> = (0..self.config.rho_grid.len())
            .into_par_iter()
            .map(|k| self.run_one(k, s, lambda))
            .collect();
        let score = |run: &AdmmRun| match truth {
            Some(d) => {
                let ad = &self.a * d;
                (&ad - &self.a * &run.estimate).norm() / ad.norm()
            }
            None => run.objective,
        };
        let mut best = 0;
        let mut best_score = score(&runs[0]);
        for (k, run) in runs.iter().enumerate().skip(1) {
            let sc = score(run);
            if sc < best_score {
                best = k;
                best_score = sc;
            }
        }
        Ok(AdmmSweep {
            l1_weight: lambda,
            runs,
            best,
        })
    }
}

pub fn solve_admm(
    a: &KnowledgeMatrix,
    s: &DVector<f64>,
    config: &AdmmConfig,
    truth: Option<&DVector<f64>>,
) -> Result<AdmmSweep> {
    AdmmSolver::new(a, config.clone())?.solve(s, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseScanConfig {
    pub support_sizes: Vec<usize>,
    /// Upper bound on the number of enumerated supports.
    pub max_supports: u128,
}

impl Default for SparseScanConfig {
    fn default() -> Self {
        SparseScanConfig {
            support_sizes: vec![1, 2],
            max_supports: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub estimate: DiseaseVector,
    pub support: Vec<usize>,
    pub residual: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic k-subsets of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Least squares restricted to the columns in `support`.
pub fn restricted_least_squares(
    a: &DMatrix<f64>,
    s: &DVector<f64>,
    support: &[usize],
) -> (DiseaseVector, f64) {
    let sub = a.select_columns(support);
    let coef = pseudo_inverse(&sub) * s;
    let residual = (s - &sub * &coef).norm();
    let mut d = DVector::zeros(a.ncols());
    for (&j, &c) in support.iter().zip(coef.iter()) {
        d[j] = c;
    }
    (d, residual)
}

/// Exhaustive restricted least squares over every support of the configured
/// sizes. The smallest residual wins; ties go to the smaller support, then
/// the lexicographically first.
pub fn solve_sparse_scan(
    a: &KnowledgeMatrix,
    s: &DVector<f64>,
    config: &SparseScanConfig,
) -> Result<ScanResult> {
    let a = a.as_matrix();
    let n = a.ncols();
    if s.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} entries, matrix has {} rows",
            s.len(),
            a.nrows()
        )));
    }
    let mut sizes = config.support_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() || sizes.iter().any(|&k| k == 0 || k > n) {
        return Err(Error::InvalidParameter(format!(
            "support sizes must lie in 1..={n}, got {:?}",
            config.support_sizes
        )));
    }
    let count: u128 = sizes.iter().map(|&k| binomial(n, k)).sum();
    if count > config.max_supports {
        return Err(Error::SupportBudgetExceeded {
            count,
            limit: config.max_supports,
        });
    }
    let mut best: Option<ScanResult> = None;
    for &k in &sizes {
        for support in Combinations::new(n, k) {
            let (d, residual) = restricted_least_squares(a, s, &support);
            let better = match &best {
                None => true,
                Some(b) => residual < b.residual - 1e-12 * b.residual.max(1.0),
            };
            if better {
                best = Some(ScanResult {
                    estimate: d,
                    support,
                    residual,
                });
            }
        }
    }
    Ok(best.expect("at least one support enumerated"))
}
