//! The scalar building blocks: the sign-channel posterior in closed form
//! against direct numerical integration, and the Bernoulli and
//! Bernoulli-Gaussian prior posteriors.
//!
//! ```text
//! cargo run --example denoisers
//! ```

use ampdx::denoisers::{channel_posterior_quadrature, sign_posterior, ChannelKind, PriorModel};
use ampdx::model::Symptom;
use ampdx::quadrature::QuadratureConfig;

fn main() -> ampdx::Result<()> {
    let noise_precision = 4.0;
    let precision = 1.0;
    let quad = QuadratureConfig::default();

    println!("sign channel, z ~ N(z_hat, 1), noise precision {noise_precision}, s = +1");
    println!("{:>7} {:>12} {:>12} {:>12} {:>12}", "z_hat", "mean", "quad mean", "var", "quad var");
    for z_hat in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        let (m, v) = sign_posterior(z_hat, precision, noise_precision, 1.0);
        let (qm, qv) = channel_posterior_quadrature(
            z_hat,
            precision,
            ChannelKind::Sign,
            noise_precision,
            Symptom::Present,
            &quad,
        )?;
        println!("{z_hat:>7.2} {m:>12.8} {qm:>12.8} {v:>12.8} {qv:>12.8}");
    }

    let priors = [
        ("Bernoulli(0.1)", PriorModel::Bernoulli { rate: 0.1 }),
        (
            "Bernoulli-Gaussian(0.2, 1, 0.5)",
            PriorModel::BernoulliGaussian {
                rate: 0.2,
                slab_mean: 1.0,
                slab_variance: 0.5,
            },
        ),
    ];
    for (name, prior) in priors {
        println!("\n{name}, pseudo-measurement precision 4");
        println!("{:>7} {:>12} {:>12}", "d_hat", "mean", "var");
        for d_hat in [-0.5, 0.0, 0.5, 0.8, 1.5] {
            let (m, v) = prior.posterior(d_hat, 4.0);
            println!("{d_hat:>7.2} {m:>12.8} {v:>12.8}");
        }
    }
    Ok(())
}
