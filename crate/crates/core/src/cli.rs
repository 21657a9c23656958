//! The `ampdx` command line: `gen`, `bench`, `infer` and `serve`.
//!
//! Exit codes: 0 success, 2 bad usage, 3 data error, 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{Algorithm, EngineConfig, SymptomChecker};
use crate::error::{Error, Result};
use crate::eval::{generate_synthetic, run_benchmark, GeneratorConfig, MatrixSource};
use crate::model::{
    encode_observation, load_vignettes, save_vignettes, AbsenceMode, Catalog, KnowledgeMatrix,
};
use crate::service;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ampdx", version, about = "Sparse Bayesian symptom checking and solver benchmarks")]
pub struct Cli {
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true, env = "AMPDX_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic vignette set.
    Gen(GenArgs),
    /// Score solvers on a vignette set.
    Bench(BenchArgs),
    /// Rank diseases for one symptom report.
    Infer(InferArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Catalog JSON. Defaults to the bundled demo catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Knowledge-matrix CSV. Defaults to the bundled demo matrix.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<(Catalog, KnowledgeMatrix)> {
        match (&self.catalog, &self.matrix) {
            (None, None) => Ok((Catalog::demo(), KnowledgeMatrix::demo())),
            (Some(c), Some(m)) => {
                let catalog = Catalog::load(c)?;
                let matrix = KnowledgeMatrix::load_csv(m, &catalog)?;
                Ok((catalog, matrix))
            }
            _ => Err(Error::InvalidParameter(
                "--catalog and --matrix must be given together".into(),
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Target SNR used to set the channel noise precision.
    #[arg(long, default_value_t = 25.0)]
    pub snr_db: f64,
    /// Explicit noise precision; overrides --snr-db.
    #[arg(long)]
    pub noise_precision: Option<f64>,
    /// Message damping in (0, 1]; 1 disables damping.
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Precision of the starting G-VAMP messages.
    #[arg(long, default_value_t = 0.3)]
    pub init_precision: f64,
    /// LMMSE coupling precision; defaults to the noise precision.
    #[arg(long)]
    pub coupling_precision: Option<f64>,
    /// Fixed lasso weight; defaults to 0.1 ||A^T s||_inf per case.
    #[arg(long)]
    pub l1_weight: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub admm_max_iterations: usize,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        let mut cfg = EngineConfig {
            snr_db: self.snr_db,
            noise_precision: self.noise_precision,
            ..EngineConfig::default()
        };
        cfg.gvamp.damping = self.damping;
        cfg.gvamp.max_iterations = self.max_iterations;
        cfg.gvamp.tolerance = self.tolerance;
        cfg.gvamp.init_precision = self.init_precision;
        cfg.gvamp.coupling_precision = self.coupling_precision;
        cfg.admm.l1_weight = self.l1_weight;
        cfg.admm.max_iterations = self.admm_max_iterations;
        cfg
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Use this catalog (with --matrix) instead of drawing a random matrix.
    #[arg(long, requires = "matrix")]
    pub catalog: Option<PathBuf>,
    #[arg(long, requires = "catalog")]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 27)]
    pub symptoms: usize,
    #[arg(long, default_value_t = 31)]
    pub diseases: usize,
    /// Probability of a 1 in a random matrix.
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 25.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub vignettes: PathBuf,
    /// Comma-separated subset of gvamp,admm,uls,scan.
    #[arg(long, value_delimiter = ',', default_value = "uls,scan,admm,gvamp")]
    pub algos: Vec<String>,
    #[arg(long, default_value = "assume-absent")]
    pub mode: String,
    /// Seed recorded in the report.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving report.json and report.txt.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    pub present: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub absent: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub top: usize,
    #[arg(long, default_value = "assume-absent")]
    pub mode: String,
    #[arg(long, default_value = "gvamp")]
    pub algo: String,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of static UI assets served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) | Error::UnknownName { .. } | Error::Contradiction(_) => EXIT_USAGE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn parse_algorithms(names: &[String]) -> Result<Vec<Algorithm>> {
    names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.parse())
        .collect()
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = match (&args.catalog, &args.matrix) {
        (Some(c), Some(m)) => {
            let catalog = Catalog::load(c)?;
            let matrix = KnowledgeMatrix::load_csv(m, &catalog)?;
            Some((catalog, matrix))
        }
        _ => None,
    };
    let config = GeneratorConfig {
        seed: args.seed,
        vignette_count: args.count,
        sparsity: 1,
        snr_db: args.snr_db,
        matrix_source: if loaded.is_some() {
            MatrixSource::Load
        } else {
            MatrixSource::Bernoulli {
                symptoms: args.symptoms,
                diseases: args.diseases,
                density: args.density,
            }
        },
    };
    let dataset = generate_synthetic(loaded.as_ref().map(|(_, m)| m), &config)?;
    let catalog = match loaded {
        Some((c, _)) => c,
        None => Catalog::numbered(args.symptoms, args.diseases)?,
    };
    create_dir(&args.out)?;
    if !matches!(config.matrix_source, MatrixSource::Load) {
        catalog.save(args.out.join("catalog.json"))?;
        dataset.matrix.save_csv(args.out.join("matrix.csv"), &catalog)?;
    }
    let vignettes = dataset.vignettes()?;
    save_vignettes(args.out.join("vignettes.jsonl"), &vignettes, &catalog)?;
    let _ = writeln!(
        out,
        "wrote {} vignettes ({} symptoms x {} diseases, snr {} dB, noise precision {:.6e}, empirical snr {:.2} dB, seed {}) to {}",
        vignettes.len(),
        dataset.matrix.symptom_count(),
        dataset.matrix.disease_count(),
        args.snr_db,
        dataset.noise.noise_precision,
        dataset.empirical_snr_db(),
        args.seed,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let algorithms = parse_algorithms(&args.algos)?;
    let mode: AbsenceMode = args.mode.parse()?;
    let (catalog, matrix) = args.data.load()?;
    let vignettes = load_vignettes(&args.vignettes, &catalog, mode)?;
    if vignettes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let checker = SymptomChecker::new(catalog, matrix, args.engine.config())?;
    let report = run_benchmark(&vignettes, &checker, &algorithms, args.seed)?;
    create_dir(&args.out)?;
    let table = report.to_table();
    write_file(&args.out.join("report.json"), &report.to_json_string())?;
    write_file(&args.out.join("report.txt"), &table)?;
    let _ = write!(out, "{table}");
    Ok(())
}

pub fn cmd_infer(args: &InferArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let algorithm: Algorithm = args.algo.parse()?;
    let mode: AbsenceMode = args.mode.parse()?;
    let (catalog, matrix) = args.data.load()?;
    let checker = SymptomChecker::new(catalog, matrix, args.engine.config())?;
    let catalog = checker.catalog();
    if args.top == 0 || args.top > catalog.disease_count() {
        return Err(Error::InvalidParameter(format!(
            "--top must lie in 1..={}",
            catalog.disease_count()
        )));
    }
    let obs = encode_observation(&args.present, &args.absent, catalog, mode)?;
    if !obs.has_evidence() {
        let _ = writeln!(err, "warning: no symptoms observed; the ranking follows the prior");
    }
    let inference = checker.infer(&obs, algorithm)?;
    for (rank, (id, score)) in inference.top(args.top).into_iter().enumerate() {
        let _ = writeln!(out, "{:>2}. {:<28} {score:>9.4}", rank + 1, catalog.diseases()[id]);
    }
    let _ = writeln!(
        out,
        "algorithm {}, iterations {}, converged {}",
        inference.algorithm, inference.iterations, inference.converged
    );
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let (catalog, matrix) = args.data.load()?;
    let checker = SymptomChecker::new(catalog, matrix, args.engine.config())?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("bad bind address: {e}")))?;
    log::info!(
        "serving {} symptoms x {} diseases",
        checker.matrix().symptom_count(),
        checker.matrix().disease_count()
    );
    let state = service::AppState::loaded(checker);
    let app = service::router(state, args.static_dir.as_deref());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(addr.to_string(), e))?;
        let _ = writeln!(out, "listening on http://{}", listener.local_addr().unwrap_or(addr));
        let _ = out.flush();
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(addr.to_string(), e))
    })
}

/// Parses `args` and runs the selected subcommand. Returns the process exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(threads) = cli.threads {
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a, &mut out),
        Command::Bench(a) => cmd_bench(a, &mut out),
        Command::Infer(a) => cmd_infer(a, &mut out, &mut std::io::stderr()),
        Command::Serve(a) => cmd_serve(a, &mut out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
