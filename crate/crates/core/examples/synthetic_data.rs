//! Generate a synthetic vignette set, write it in the on-disk formats the
//! `bench` command reads, and read it back.
//!
//! ```text
//! cargo run --example synthetic_data -- [output dir]
//! ```

use std::path::PathBuf;

use ampdx::eval::{generate_synthetic, GeneratorConfig, MatrixSource};
use ampdx::model::{load_vignettes, save_vignettes, AbsenceMode, Catalog, KnowledgeMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ampdx-synthetic"));
    std::fs::create_dir_all(&out)?;

    let config = GeneratorConfig {
        seed: 11,
        vignette_count: 50,
        sparsity: 1,
        snr_db: 20.0,
        matrix_source: MatrixSource::Bernoulli {
            symptoms: 27,
            diseases: 31,
            density: 0.3,
        },
    };
    let data = generate_synthetic(None, &config)?;
    println!(
        "{} cases, target snr {} dB, empirical {:.2} dB, noise precision {:.4}",
        data.cases.len(),
        config.snr_db,
        data.empirical_snr_db(),
        data.noise.noise_precision
    );
    // A symptom driven by the active disease flips only when the noise
    // outweighs it; one with no active cause takes the sign of the noise.
    let (mut driven, mut driven_flips, mut idle, mut idle_present) = (0, 0, 0, 0);
    for case in &data.cases {
        let clean = data.matrix.as_matrix() * case.truth_vector(31);
        for (s, z) in case.observation.to_signs().iter().zip(clean.iter()) {
            if *z > 0.0 {
                driven += 1;
                driven_flips += (*s < 0.0) as usize;
            } else {
                idle += 1;
                idle_present += (*s > 0.0) as usize;
            }
        }
    }
    println!("driven symptoms: {driven_flips} of {driven} flipped by noise");
    println!("idle symptoms:   {idle_present} of {idle} reported present");

    let catalog = Catalog::numbered(27, 31)?;
    catalog.save(out.join("catalog.json"))?;
    data.matrix.save_csv(out.join("matrix.csv"), &catalog)?;
    save_vignettes(out.join("vignettes.jsonl"), &data.vignettes()?, &catalog)?;

    let catalog = Catalog::load(out.join("catalog.json"))?;
    let matrix = KnowledgeMatrix::load_csv(out.join("matrix.csv"), &catalog)?;
    let vignettes = load_vignettes(out.join("vignettes.jsonl"), &catalog, AbsenceMode::AssumeAbsent)?;
    assert_eq!(matrix, data.matrix);
    println!("wrote and re-read {} vignettes in {}", vignettes.len(), out.display());
    Ok(())
}
