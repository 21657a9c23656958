//! Globally adaptive 7/15-point Gauss-Kronrod quadrature for vector-valued
//! integrands on finite intervals.

// The tabulated constants carry more digits than an f64 holds; they are kept
// verbatim so they can be checked against the published tables.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the embedded Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_641_0,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Convergence controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subintervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_subintervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const K: usize> {
    pub value: [f64; K],
    pub error: f64,
    pub evaluations: usize,
}

struct Segment<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: f64,
}

impl<const K: usize> PartialEq for Segment<K> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const K: usize> Eq for Segment<K> {}
impl<const K: usize> PartialOrd for Segment<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Segment<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> Segment<K> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    for k in 0..K {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..K {
            let pair = f1[k] + f2[k];
            kron[k] += WGK[j] * pair;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * pair;
            }
        }
    }
    let mut error: f64 = 0.0;
    for k in 0..K {
        kron[k] *= half;
        gauss[k] *= half;
        error = error.max((kron[k] - gauss[k]).abs());
    }
    Segment {
        a,
        b,
        value: kron,
        error,
    }
}

/// Integrates `f` over `[a, b]`, bisecting the worst subinterval until the
/// summed error estimate is below `max(abs_tol, rel_tol * |I|)` for the
/// largest component.
///
/// `breakpoints` inside `(a, b)` seed the initial partition, which helps
/// with kinks and steep fronts at known locations.
pub fn integrate<const K: usize, F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> Result<Estimate<K>>
where
    F: Fn(f64) -> [f64; K],
{
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    inner.sort_by(f64::total_cmp);
    edges.extend(inner);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&f, w[0], w[1]));
        }
    }
    let mut evaluations = 15 * heap.len();

    loop {
        let mut total = [0.0; K];
        let mut error = 0.0;
        for s in heap.iter() {
            for (t, v) in total.iter_mut().zip(s.value) {
                *t += v;
            }
            error += s.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = config.abs_tol.max(config.rel_tol * scale);
        if error <= target {
            return Ok(Estimate {
                value: total,
                error,
                evaluations,
            });
        }
        if heap.len() >= config.max_subintervals {
            return Err(Error::QuadratureNonConvergence { error, evaluations });
        }
        let worst = heap.pop().expect("non-empty partition");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            return Err(Error::QuadratureNonConvergence { error, evaluations });
        }
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
        evaluations += 30;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let est = integrate(|x| [x.powi(5) - 2.0 * x], 0.0, 2.0, &[], &QuadratureConfig::default())
            .unwrap();
        assert!((est.value[0] - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_moments() {
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let est = integrate(
            |x| [pdf(x), x * pdf(x), x * x * pdf(x)],
            -40.0,
            40.0,
            &[],
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((est.value[0] - 1.0).abs() < 1e-12);
        assert!(est.value[1].abs() < 1e-12);
        assert!((est.value[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_function_with_breakpoint() {
        let est = integrate(
            |x| [if x > 0.3 { 1.0 } else { 0.0 }],
            0.0,
            1.0,
            &[0.3],
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((est.value[0] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_subintervals: 3,
        };
        let err = integrate(|x| [(1.0 / x).sin()], 1e-6, 1.0, &[], &cfg).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }
}
