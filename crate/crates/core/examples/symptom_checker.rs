//! Rank the bundled dermatology catalog for a symptom report with every
//! solver.
//!
//! ```text
//! cargo run --example symptom_checker -- vesicles,macule,papule,pain fever
//! ```
//!
//! The first argument lists present symptoms, the optional second one absent
//! symptoms; unlisted symptoms are taken as absent.

use ampdx::prelude::*;

fn split(arg: Option<String>) -> Vec<String> {
    arg.map(|s| s.split(',').filter(|t| !t.is_empty()).map(str::to_string).collect())
        .unwrap_or_default()
}

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let mut present = split(args.next());
    if present.is_empty() {
        present = ["vesicles", "macule", "papule", "pain", "infiltration"].map(String::from).to_vec();
    }
    let absent = split(args.next());

    let checker = SymptomChecker::demo();
    let catalog = checker.catalog();
    let obs = encode_observation(&present, &absent, catalog, AbsenceMode::AssumeAbsent)?;
    println!("present: {}", present.join(", "));
    println!("noise precision {:.3}\n", checker.noise().noise_precision);

    for algorithm in [Algorithm::Gvamp, Algorithm::Admm, Algorithm::Scan, Algorithm::Uls] {
        let result = checker.infer(&obs, algorithm)?;
        println!(
            "{} ({} iterations, converged {})",
            algorithm.label(),
            result.iterations,
            result.converged
        );
        for (rank, (id, score)) in result.top(3).into_iter().enumerate() {
            println!("  {}. {:<28} {score:>11.4e}", rank + 1, catalog.diseases()[id]);
        }
    }
    Ok(())
}
