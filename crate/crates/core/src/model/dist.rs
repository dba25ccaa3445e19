//! Small sampling helpers built on `rand_distr::Gamma`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Log of a `Gamma(shape, 1)` draw. Shapes below one use the
/// `Gamma(a + 1) * U^(1/a)` identity in log space so tiny shapes do not
/// underflow to zero.
pub(crate) fn log_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

pub fn dirichlet_draw<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

pub fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let la = log_gamma_draw(a, rng);
    let lb = log_gamma_draw(b, rng);
    // x = ga / (ga + gb) = 1 / (1 + exp(lb - la))
    1.0 / (1.0 + (lb - la).exp())
}

/// Index drawn with probability proportional to `weights`.
pub fn categorical_draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding can leave u just above the last bucket
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// `a * ln(x)` with the `0 * ln(0) = 0` convention.
#[inline]
pub(crate) fn xlogy(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * x.ln()
    }
}
