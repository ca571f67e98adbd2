//! Hermitian eigensolvers: dense (nalgebra) and a preconditioned
//! Davidson iteration for large blocks.
//!
//! The Davidson path is the iterative route required above the dense
//! limit. It expands a search subspace with diagonally preconditioned
//! residuals, restarts when the subspace saturates, and is fully
//! deterministic: start vectors are unit vectors at the smallest diagonal
//! entries (ties broken by index), so no seed enters at all. Convergence
//! is residual-controlled.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermitian linear operator given by its action.
pub trait HermitianOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
    /// Diagonal entries, used for the Davidson preconditioner and the
    /// deterministic start.
    fn diagonal(&self) -> Vec<f64>;
}

/// Dense matrix as an operator.
impl HermitianOp for DMatrix<Complex64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let xv = DVector::from_column_slice(x);
        let yv = self * xv;
        y.copy_from_slice(yv.as_slice());
    }
    fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows()).map(|i| self[(i, i)].re).collect()
    }
}

/// Eigenpairs sorted ascending, with per-pair residual norms.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Full dense Hermitian eigendecomposition, eigenvalues ascending.
pub fn dense_eigen(matrix: &DMatrix<Complex64>) -> EigenPairs {
    let dim = matrix.nrows();
    let eig = matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(dim);
    let mut vectors = Vec::with_capacity(dim);
    let mut residuals = Vec::with_capacity(dim);
    for &j in &order {
        let v: Vec<Complex64> = eig.eigenvectors.column(j).iter().copied().collect();
        let lambda = eig.eigenvalues[j];
        let mut hv = vec![Complex64::default(); dim];
        matrix.apply(&v, &mut hv);
        let res = hv
            .iter()
            .zip(&v)
            .map(|(h, x)| (h - x * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        values.push(lambda);
        vectors.push(v);
        residuals.push(res);
    }
    EigenPairs {
        values,
        vectors,
        residuals,
        iterations: 1,
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Twice-repeated modified Gram-Schmidt of `v` against `basis`;
/// returns false when v is numerically in the span.
fn orthonormalize(v: &mut [Complex64], basis: &[Vec<Complex64>]) -> bool {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
    let n = norm(v);
    if n < 1e-12 {
        return false;
    }
    for vi in v.iter_mut() {
        *vi /= n;
    }
    true
}

#[derive(Debug, Clone)]
pub struct DavidsonOptions {
    pub n_eig: usize,
    /// Absolute residual target ‖Hx - θx‖.
    pub tol: f64,
    pub max_iter: usize,
    pub max_subspace: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            n_eig: 4,
            tol: 1e-9,
            max_iter: 400,
            max_subspace: 48,
        }
    }
}

/// Lowest eigenpairs of a Hermitian operator by preconditioned Davidson
/// iteration with thick restarts.
pub fn davidson_lowest(op: &dyn HermitianOp, opts: &DavidsonOptions) -> Result<EigenPairs> {
    let dim = op.dim();
    let n_eig = opts.n_eig.min(dim);
    let diag = op.diagonal();

    if dim <= 3 * opts.max_subspace {
        // Small enough to do densely via the operator's matrix action.
        let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
        let mut col = vec![Complex64::default(); dim];
        let mut out = vec![Complex64::default(); dim];
        for j in 0..dim {
            col.iter_mut().for_each(|c| *c = Complex64::default());
            col[j] = Complex64::new(1.0, 0.0);
            op.apply(&col, &mut out);
            for i in 0..dim {
                matrix[(i, j)] = out[i];
            }
        }
        let mut pairs = dense_eigen(&matrix);
        pairs.values.truncate(n_eig);
        pairs.vectors.truncate(n_eig);
        pairs.residuals.truncate(n_eig);
        return Ok(pairs);
    }

    // Deterministic start: unit vectors at the smallest diagonal entries.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut subspace: Vec<Vec<Complex64>> = Vec::new();
    let mut h_subspace: Vec<Vec<Complex64>> = Vec::new();
    for &idx in order.iter().take(n_eig + 2) {
        let mut v = vec![Complex64::default(); dim];
        v[idx] = Complex64::new(1.0, 0.0);
        if orthonormalize(&mut v, &subspace) {
            let mut hv = vec![Complex64::default(); dim];
            op.apply(&v, &mut hv);
            subspace.push(v);
            h_subspace.push(hv);
        }
    }

    let mut ritz_values = vec![0.0; n_eig];
    let mut ritz_vectors: Vec<Vec<Complex64>> = Vec::new();
    let mut residual_norms = vec![f64::INFINITY; n_eig];

    for iter in 0..opts.max_iter {
        // Rayleigh-Ritz on the current subspace.
        let m = subspace.len();
        let mut small = DMatrix::<Complex64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                small[(i, j)] = dot(&subspace[i], &h_subspace[j]);
            }
        }
        // Symmetrize rounding noise.
        let small = (small.clone() + small.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = dense_eigen(&small);

        ritz_vectors.clear();
        let mut residuals: Vec<Vec<Complex64>> = Vec::new();
        for e in 0..n_eig.min(m) {
            let mut x = vec![Complex64::default(); dim];
            let mut hx = vec![Complex64::default(); dim];
            for (s, (sub, hsub)) in subspace.iter().zip(&h_subspace).enumerate() {
                let c = eig.vectors[e][s];
                for i in 0..dim {
                    x[i] += c * sub[i];
                    hx[i] += c * hsub[i];
                }
            }
            let theta = eig.values[e];
            let mut r = vec![Complex64::default(); dim];
            for i in 0..dim {
                r[i] = hx[i] - theta * x[i];
            }
            ritz_values[e] = theta;
            residual_norms[e] = norm(&r);
            ritz_vectors.push(x);
            residuals.push(r);
        }

        if residual_norms.iter().take(n_eig).all(|&r| r <= opts.tol) {
            return Ok(EigenPairs {
                values: ritz_values,
                vectors: ritz_vectors,
                residuals: residual_norms,
                iterations: iter + 1,
            });
        }

        // Thick restart when the subspace is saturated.
        if subspace.len() + n_eig > opts.max_subspace {
            subspace.clear();
            h_subspace.clear();
            for x in &ritz_vectors {
                let mut v = x.clone();
                if orthonormalize(&mut v, &subspace) {
                    let mut hv = vec![Complex64::default(); dim];
                    op.apply(&v, &mut hv);
                    subspace.push(v);
                    h_subspace.push(hv);
                }
            }
        }

        // Expand with preconditioned residuals t = r / (diag - θ).
        let mut expanded = false;
        for e in 0..n_eig.min(residuals.len()) {
            if residual_norms[e] <= opts.tol {
                continue;
            }
            let theta = ritz_values[e];
            let mut t = residuals[e].clone();
            for (ti, &d) in t.iter_mut().zip(&diag) {
                let denom = d - theta;
                let denom = if denom.abs() < 1e-8 {
                    1e-8f64.copysign(if denom == 0.0 { 1.0 } else { denom })
                } else {
                    denom
                };
                *ti /= denom;
            }
            if orthonormalize(&mut t, &subspace) {
                let mut ht = vec![Complex64::default(); dim];
                op.apply(&t, &mut ht);
                subspace.push(t);
                h_subspace.push(ht);
                expanded = true;
            }
        }
        if !expanded {
            // Stagnation: residuals above tol but no new direction.
            return Err(Error::EigensolverFailure(format!(
                "davidson stagnated at iteration {iter}; residuals {:?}",
                &residual_norms[..n_eig.min(residual_norms.len())]
            )));
        }
    }

    Err(Error::EigensolverFailure(format!(
        "davidson did not reach residual {:.1e} in {} iterations; residuals {:?}",
        opts.tol, opts.max_iter, residual_norms
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(dim: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(rng.gen_range(-2.0..2.0) + i as f64, 0.0);
            for j in i + 1..dim {
                let c = Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
                m[(i, j)] = c;
                m[(j, i)] = c.conj();
            }
        }
        m
    }

    #[test]
    fn dense_sorted_with_small_residuals() {
        let m = random_hermitian(40, 1);
        let pairs = dense_eigen(&m);
        for w in pairs.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for r in &pairs.residuals {
            assert!(*r < 1e-10);
        }
    }

    #[test]
    fn davidson_matches_dense() {
        let m = random_hermitian(300, 2);
        let dense = dense_eigen(&m);
        let opts = DavidsonOptions {
            n_eig: 3,
            tol: 1e-10,
            ..Default::default()
        };
        let dav = davidson_lowest(&m, &opts).unwrap();
        for e in 0..3 {
            assert!(
                (dav.values[e] - dense.values[e]).abs() < 1e-8,
                "eig {e}: {} vs {}",
                dav.values[e],
                dense.values[e]
            );
        }
    }

    #[test]
    fn davidson_diagonal_dominant_large_range() {
        // Kinetic-like spectrum with huge spread: the diagonal
        // preconditioner must keep iteration counts modest.
        let dim = 600;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            let k = (i as i64 - dim as i64 / 2) as f64;
            m[(i, i)] = Complex64::new(k * k * 19.7, 0.0);
            for j in i + 1..dim {
                m[(i, j)] = Complex64::new(0.5, 0.0);
                m[(j, i)] = Complex64::new(0.5, 0.0);
            }
        }
        let opts = DavidsonOptions {
            n_eig: 2,
            tol: 1e-9,
            ..Default::default()
        };
        let dav = davidson_lowest(&m, &opts).unwrap();
        assert!(dav.iterations < 100, "took {} iterations", dav.iterations);
        let dense = dense_eigen(&m);
        assert!((dav.values[0] - dense.values[0]).abs() < 1e-7);
    }

    #[test]
    fn davidson_deterministic() {
        let m = random_hermitian(250, 3);
        let opts = DavidsonOptions::default();
        let a = davidson_lowest(&m, &opts).unwrap();
        let b = davidson_lowest(&m, &opts).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.iterations, b.iterations);
    }
}
