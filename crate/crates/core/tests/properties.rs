use ampdx::denoisers::{sign_posterior, PriorModel};
use ampdx::eval::{nrmse, topk_accuracy};
use ampdx::model::{encode_observation, AbsenceMode, Catalog};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn numeric_derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sign_posterior_moves_toward_the_observation(
        z in -5.0f64..5.0,
        gz in 0.05f64..50.0,
        gw in 0.1f64..1e3,
    ) {
        let (up, vu) = sign_posterior(z, gz, gw, 1.0);
        let (down, vd) = sign_posterior(z, gz, gw, -1.0);
        prop_assert!(up >= z && down <= z);
        prop_assert!(vu > 0.0 && vu <= 1.0 / gz * (1.0 + 1e-12));
        prop_assert!(vd > 0.0 && vd <= 1.0 / gz * (1.0 + 1e-12));
    }

    #[test]
    fn sign_posterior_is_odd(z in -6.0f64..6.0, gz in 0.05f64..50.0, gw in 0.1f64..1e3) {
        let (m, v) = sign_posterior(z, gz, gw, 1.0);
        let (mm, vm) = sign_posterior(-z, gz, gw, -1.0);
        prop_assert!((m + mm).abs() <= 1e-12 * (1.0 + m.abs()));
        prop_assert!((v - vm).abs() <= 1e-12 * v);
    }

    #[test]
    fn sign_posterior_is_monotone(
        z in -5.0f64..5.0,
        dz in 1e-3f64..2.0,
        gz in 0.05f64..50.0,
        gw in 0.1f64..1e3,
    ) {
        for s in [1.0, -1.0] {
            prop_assert!(sign_posterior(z + dz, gz, gw, s).0 >= sign_posterior(z, gz, gw, s).0);
        }
    }

    #[test]
    fn sign_variance_is_the_scaled_derivative(
        z in -3.0f64..3.0,
        gz in 0.1f64..20.0,
        gw in 0.5f64..100.0,
    ) {
        let (_, v) = sign_posterior(z, gz, gw, 1.0);
        let slope = numeric_derivative(|x| sign_posterior(x, gz, gw, 1.0).0, z);
        prop_assert!((v - slope / gz).abs() <= 1e-4 * v.max(1e-8), "v {} slope/g {}", v, slope / gz);
    }

    #[test]
    fn bernoulli_mean_is_a_probability(r in -50.0f64..50.0, g in 1e-3f64..1e3, rate in 1e-3f64..0.999) {
        let (m, v) = PriorModel::Bernoulli { rate }.posterior(r, g);
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!((0.0..=0.25).contains(&v));
    }

    #[test]
    fn prior_variance_is_the_scaled_derivative(
        r in -2.0f64..3.0,
        g in 0.1f64..20.0,
        rate in 0.01f64..0.9,
        gaussian in any::<bool>(),
    ) {
        let prior = if gaussian {
            PriorModel::BernoulliGaussian { rate, slab_mean: 1.0, slab_variance: 0.5 }
        } else {
            PriorModel::Bernoulli { rate }
        };
        let (_, v) = prior.posterior(r, g);
        let slope = numeric_derivative(|x| prior.posterior(x, g).0, r);
        prop_assert!((v - slope / g).abs() <= 1e-4 * v.max(1e-8), "v {} slope/g {}", v, slope / g);
    }

    #[test]
    fn topk_accuracy_is_monotone_in_k(
        scores in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 1..20),
        truth_seed in prop::collection::vec(0usize..6, 20),
    ) {
        let estimates: Vec<DVector<f64>> = scores.iter().map(|s| DVector::from_vec(s.clone())).collect();
        let batch = || estimates.iter().zip(&truth_seed).map(|(e, &t)| (t, e));
        let mut previous = 0.0;
        for k in 1..=6 {
            let acc = topk_accuracy(batch(), k).unwrap();
            prop_assert!(acc >= previous);
            previous = acc;
        }
        prop_assert_eq!(previous, 1.0);
    }

    #[test]
    fn nrmse_ignores_case_order(
        entries in prop::collection::vec(0.0f64..1.0, 12),
        estimates in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..8),
        shift in 1usize..8,
    ) {
        let a = DMatrix::from_iterator(4, 3, entries.iter().map(|&v| if v > 0.4 { 1.0 } else { 0.0 }))
            + DMatrix::identity(4, 3);
        let truths: Vec<DVector<f64>> =
            (0..estimates.len()).map(|l| DVector::from_fn(3, |i, _| (i == l % 3) as u8 as f64)).collect();
        let est: Vec<DVector<f64>> = estimates.iter().map(|e| DVector::from_vec(e.clone())).collect();
        let forward = nrmse(truths.iter().zip(&est).map(|(t, e)| (&a, t, e))).unwrap();
        let l = est.len();
        let rotated = nrmse((0..l).map(|i| {
            let j = (i + shift) % l;
            (&a, &truths[j], &est[j])
        }))
        .unwrap();
        prop_assert!((forward - rotated).abs() <= 1e-12 * forward.max(1.0));
    }

    #[test]
    fn encoding_ignores_list_order(
        picks in prop::sample::subsequence((0..27usize).collect::<Vec<_>>(), 0..10),
        rotate in 0usize..10,
    ) {
        let catalog = Catalog::demo();
        let names: Vec<&str> = picks.iter().map(|&i| catalog.symptoms()[i].as_str()).collect();
        let (present, absent) = names.split_at(names.len() / 2);
        let mut shuffled = present.to_vec();
        if !shuffled.is_empty() {
            let k = rotate % shuffled.len();
            shuffled.rotate_left(k);
        }
        shuffled.reverse();
        for mode in [AbsenceMode::AssumeAbsent, AbsenceMode::TreatMissing] {
            let a = encode_observation(present, absent, &catalog, mode).unwrap();
            let b = encode_observation(&shuffled, absent, &catalog, mode).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
