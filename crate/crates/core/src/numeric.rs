//! Small numerical kernels shared by the modules: fixed-step RK4, a
//! bracketed Newton solver, quadrature rules and order-stable summation.

use crate::error::{Error, Result};

/// Classical RK4 for the scalar autonomous ODE `y' = rhs(y)` on a uniform
/// grid of `steps` intervals over `[0, horizon]`. Returns `steps + 1` values.
pub fn rk4_autonomous(rhs: impl Fn(f64) -> f64, y0: f64, horizon: f64, steps: usize) -> Vec<f64> {
    let h = horizon / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    out.push(y);
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(y + 0.5 * h * k1);
        let k3 = rhs(y + 0.5 * h * k2);
        let k4 = rhs(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(y);
    }
    out
}

/// Outcome of [`newton_decreasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub const MAX_ROOT_ITERATIONS: usize = 200;

/// Root of a strictly decreasing function on `[lo, hi]` with `g(lo) >= 0 >=
/// g(hi)`. Newton steps from `guess` are accepted while they stay inside the
/// current bracket and otherwise replaced by bisection. `eval` returns the
/// value and derivative.
pub fn newton_decreasing(
    mut eval: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    tol: f64,
) -> Result<Root> {
    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    let mut best = Root {
        x,
        residual: f64::INFINITY,
        iterations: 0,
    };
    for it in 1..=MAX_ROOT_ITERATIONS {
        let (g, dg) = eval(x);
        if !g.is_finite() {
            return Err(Error::Numerical(format!("non-finite residual at x = {x}")));
        }
        if g.abs() < best.residual.abs() {
            best = Root {
                x,
                residual: g,
                iterations: it,
            };
        }
        if g.abs() <= tol {
            return Ok(Root {
                x,
                residual: g,
                iterations: it,
            });
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // Bracket exhausted at floating-point resolution.
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            best.iterations = it;
            return Ok(best);
        }
        let newton = x - g / dg;
        x = if dg < 0.0 && newton > lo && newton < hi { newton } else { mid };
    }
    Err(Error::Numerical(format!(
        "root solver did not converge in {MAX_ROOT_ITERATIONS} iterations (best residual {})",
        best.residual
    )))
}

/// `out[k] = integral of the samples from t_k to the end`, by the composite
/// trapezoid rule with spacing `h`.
pub fn trapezoid_tail(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for k in (0..values.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] + 0.5 * h * (values[k] + values[k + 1]);
    }
    out
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Five-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre5(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS)
        .map(|(x, w)| w * g(mid + half * x))
        .sum::<f64>()
        * half
}

/// Pairwise (cascade) sum. The result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            count: 0,
        };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0, count: 1 };
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    MeanSe {
        mean,
        se: (var / n as f64).sqrt(),
        count: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential_decay() {
        let ys = rk4_autonomous(|y| -y, 1.0, 1.0, 100);
        assert!((ys[100] - (-1.0f64).exp()).abs() < 1e-10);
        assert_eq!(ys.len(), 101);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |steps| (rk4_autonomous(|y| -2.0 * y, 1.0, 2.0, steps)[steps] - (-4.0f64).exp()).abs();
        let ratio = err(20) / err(40);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn newton_finds_cube_root() {
        // g(x) = 2 - x^3 is decreasing
        let root = newton_decreasing(|x| (2.0 - x * x * x, -3.0 * x * x), 0.0, 2.0, 1.0, 1e-15).unwrap();
        assert!((root.x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_falls_back_to_bisection_on_bad_derivative() {
        // derivative reported with the wrong sign forces bisection every step
        let root = newton_decreasing(|x| (0.3 - x, 1.0), 0.0, 1.0, 0.9, 1e-14).unwrap();
        assert!((root.x - 0.3).abs() < 1e-13);
    }

    #[test]
    fn newton_rejects_nan() {
        assert!(newton_decreasing(|_| (f64::NAN, 1.0), 0.0, 1.0, 0.5, 1e-12).is_err());
    }

    #[test]
    fn trapezoid_tail_of_linear_is_exact() {
        let h = 0.1;
        let vals: Vec<f64> = (0..=10).map(|k| k as f64 * h).collect();
        let tail = trapezoid_tail(&vals, h);
        assert_eq!(tail[10], 0.0);
        assert!((tail[0] - 0.5).abs() < 1e-15);
        assert!((tail[5] - (0.5 - 0.125)).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_degree_nine_exactly() {
        let v = gauss_legendre5(|x| x.powi(9) + x.powi(4), 0.0, 1.0);
        assert!((v - (0.1 + 0.2)).abs() < 1e-14);
    }

    #[test]
    fn mean_se_of_known_sample() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        let var: f64 = 5.0 / 3.0;
        assert!((m.se - (var / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]).se, 0.0);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
