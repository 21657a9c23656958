//! The three comparison solvers on one noiseless two-disease case: the
//! minimum-norm least-squares solution, the lasso by ADMM over its rho grid,
//! and the exhaustive support scan.
//!
//! ```text
//! cargo run --example baselines
//! ```

use ampdx::baselines::{solve_admm, solve_sparse_scan, solve_uls, AdmmConfig, SparseScanConfig};
use ampdx::eval::ranking;
use ampdx::model::{Catalog, KnowledgeMatrix};
use nalgebra::DVector;

fn main() -> ampdx::Result<()> {
    let catalog = Catalog::demo();
    let a = KnowledgeMatrix::demo();
    let truth = [catalog.disease_id("acne")?, catalog.disease_id("rosacea")?];
    let mut d = DVector::zeros(a.disease_count());
    for &j in &truth {
        d[j] = 1.0;
    }
    let s = (a.as_matrix() * &d).map(|z| if z > 0.0 { 1.0 } else { -1.0 });
    println!(
        "truth: {}",
        truth.map(|j| catalog.diseases()[j].as_str()).join(" + ")
    );

    let show = |name: &str, est: &DVector<f64>| {
        let top: Vec<String> = ranking(est)
            .into_iter()
            .take(3)
            .map(|j| format!("{} {:.3}", catalog.diseases()[j], est[j]))
            .collect();
        println!("{name:<12} {}", top.join(", "));
    };

    show("ULS", &solve_uls(&a, &s)?);

    let sweep = solve_admm(&a, &s, &AdmmConfig::default(), None)?;
    let best = sweep.best_run();
    println!(
        "ADMM lambda {:.3}: best rho {:.1} (objective {:.4}, {} iterations)",
        sweep.l1_weight, best.rho, best.objective, best.iterations
    );
    show("ADMM", &best.estimate);

    let scan = solve_sparse_scan(&a, &s, &SparseScanConfig::default())?;
    println!(
        "scan support {:?}, residual {:.4}",
        scan.support.iter().map(|&j| catalog.diseases()[j].as_str()).collect::<Vec<_>>(),
        scan.residual
    );
    show("Sparse scan", &scan.estimate);
    Ok(())
}
