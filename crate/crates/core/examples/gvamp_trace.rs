//! One G-VAMP run on the demo catalog with its per-iteration trace: the
//! relative change of the estimate and the precisions of the four messages.
//!
//! ```text
//! cargo run --example gvamp_trace
//! ```

use ampdx::denoisers::{ChannelModel, PriorModel};
use ampdx::eval::ranking_by;
use ampdx::gvamp::{run_gvamp, GvampConfig};
use ampdx::model::{encode_observation, snr_to_noise_precision, AbsenceMode, Catalog, KnowledgeMatrix};

fn main() -> ampdx::Result<()> {
    let catalog = Catalog::demo();
    let a = KnowledgeMatrix::demo();
    let obs = encode_observation(
        &["vesicles", "macule", "papule", "pain"],
        &[],
        &catalog,
        AbsenceMode::AssumeAbsent,
    )?;
    let noise = snr_to_noise_precision(25.0, a.expected_signal_energy(1), a.symptom_count())?;
    let prior = PriorModel::one_hot(a.disease_count());
    let config = GvampConfig {
        tolerance: 1e-8,
        ..GvampConfig::default()
    };
    let out = run_gvamp(&a, &obs, &prior, &ChannelModel::sign(noise), &config)?;

    println!("{:>4} {:>11} {:>11} {:>11} {:>11} {:>11}", "it", "change", "d->prior", "d->lmmse", "z->chan", "z->lmmse");
    for (i, t) in out.trace.iter().enumerate() {
        println!(
            "{:>4} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
            i + 1,
            t.relative_change,
            t.d_to_prior_precision,
            t.d_to_lmmse_precision,
            t.z_to_channel_precision,
            t.z_to_lmmse_precision
        );
    }
    println!(
        "\nconverged {} after {} iterations, {} clamp events",
        out.converged,
        out.iterations_used,
        out.clamp_events()
    );
    for id in ranking_by(&out.estimate, Some(&out.pseudo_mean)).into_iter().take(5) {
        println!("  {:<28} {:.4e}", catalog.diseases()[id], out.estimate[id]);
    }
    Ok(())
}
