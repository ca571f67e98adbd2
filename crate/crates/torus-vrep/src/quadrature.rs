//! Quadrature helpers: periodic trapezoid sums and composite Gauss-Legendre.
//!
//! For smooth periodic integrands the equal-weight sum over a uniform grid
//! converges spectrally, so most integrals in this crate are plain grid
//! means. Gauss-Legendre is kept for integrands that are smooth on [0,1]
//! but not periodic (e.g. the sawtooth factor in the delta decomposition).

/// Mean-value quadrature of a periodic function sampled on a uniform grid:
/// ∫₀¹ f ≈ (1/M) Σ f(m/M). Exact for trigonometric polynomials of degree < M.
pub fn periodic_mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; deterministic and accurate
/// to machine precision for the orders used here (n <= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let pj = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = pj;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over [a, b] with `panels`
/// equal panels of `order` points each.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += w * f(mid + half * x);
        }
        total += half * acc;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gl_exact_for_polynomials() {
        // 5-point rule integrates degree <= 9 exactly.
        let val = integrate_gl(|x| x.powi(9) + 3.0 * x * x, 0.0, 1.0, 1, 5);
        assert!((val - (0.1 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn gl_oscillatory() {
        let val = integrate_gl(|x| (2.0 * PI * 3.0 * x).cos().powi(2), 0.0, 1.0, 8, 16);
        assert!((val - 0.5).abs() < 1e-13);
    }

    #[test]
    fn periodic_mean_trig() {
        let m = 32;
        let samples: Vec<f64> = (0..m)
            .map(|i| 1.0 + (2.0 * PI * 3.0 * i as f64 / m as f64).cos())
            .collect();
        assert!((periodic_mean(&samples) - 1.0).abs() < 1e-14);
    }
}
