//! Synthetic benchmark: a 27x31 Bernoulli(0.3) matrix, 200 one-hot cases at
//! 25 dB, every algorithm, printed as an NRMSE / top-K table.
//!
//! ```text
//! cargo run --release --example benchmark_table -- [seed]
//! ```

use std::time::Instant;

use ampdx::engine::{Algorithm, EngineConfig, SymptomChecker};
use ampdx::eval::{generate_synthetic, run_benchmark, GeneratorConfig, MatrixSource};
use ampdx::model::Catalog;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let config = GeneratorConfig {
        seed,
        vignette_count: 200,
        sparsity: 1,
        snr_db: 25.0,
        matrix_source: MatrixSource::Bernoulli {
            symptoms: 27,
            diseases: 31,
            density: 0.3,
        },
    };
    let dataset = generate_synthetic(None, &config)?;
    println!(
        "seed {seed}: {} cases, empirical snr {:.2} dB",
        dataset.cases.len(),
        dataset.empirical_snr_db()
    );

    let catalog = Catalog::numbered(27, 31)?;
    let checker = SymptomChecker::new(catalog, dataset.matrix.clone(), EngineConfig::default())?;
    let started = Instant::now();
    let report = run_benchmark(&dataset.vignettes()?, &checker, &Algorithm::ALL, Some(seed))?;
    print!("{}", report.to_table());
    println!("elapsed {:.2?}", started.elapsed());
    Ok(())
}
