use rand_distr::{Distribution, StandardNormal};

use super::Matrix;
use crate::{Error, Result};

/// Off-diagonal Frobenius threshold, relative to max(1, ‖A‖_F).
pub const JACOBI_TOL: f64 = 1e-10;
pub const JACOBI_MAX_SWEEPS: usize = 100;

const SYMMETRY_TOL: f64 = 1e-7;

/// Eigenpairs: `values[i]` belongs to column `i` of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// n×k, one eigenvector per column, unit length.
    pub vectors: Matrix,
    /// Jacobi sweeps or subspace iterations used.
    pub iterations: usize,
    /// Largest ‖A v − λ v‖₂ over the returned pairs.
    pub residual: f64,
    pub converged: bool,
}

/// The `k` smallest eigenpairs of a symmetric matrix, eigenvalues ascending.
///
/// Cyclic Jacobi: sweeps of plane rotations until the off-diagonal Frobenius
/// norm drops below [`JACOBI_TOL`], capped at [`JACOBI_MAX_SWEEPS`].
/// Eigenvector signs are fixed so that the largest-magnitude entry is positive.
pub fn sym_eigen(a: &Matrix, k: usize) -> Result<Eigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.cols() });
    }
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if k == 0 || k > n {
        return Err(Error::TooMany { k, n });
    }
    if let Some((i, j, diff)) = a.max_asymmetry() {
        if diff > SYMMETRY_TOL || diff.is_nan() {
            return Err(Error::NotSymmetric { i, j, diff });
        }
    }
    let (values, vectors, sweeps, converged, off) = jacobi(a);
    if !converged {
        return Err(Error::NoConvergence { iterations: sweeps, residual: off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    order.truncate(k);

    let mut out_vectors = Matrix::zeros(n, k);
    let mut out_values = Vec::with_capacity(k);
    for (c, &src) in order.iter().enumerate() {
        out_values.push(values[src]);
        let mut col = vectors.column(src);
        canonical_sign(&mut col);
        for (r, v) in col.into_iter().enumerate() {
            out_vectors[(r, c)] = v;
        }
    }
    let residual = max_residual(a, &out_values, &out_vectors);
    Ok(Eigen { values: out_values, vectors: out_vectors, iterations: sweeps, residual, converged })
}

/// Full cyclic Jacobi on the symmetrized input. Returns unsorted eigenvalues,
/// the accumulated rotation (eigenvectors in columns), sweeps, convergence
/// flag and the final off-diagonal norm.
fn jacobi(input: &Matrix) -> (Vec<f64>, Matrix, usize, bool, f64) {
    let n = input.rows();
    let mut a = input.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = Matrix::identity(n);
    let frob = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOL * frob.max(1.0);

    let off_norm = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[(i, j)] * a[(i, j)];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off >= threshold && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate_columns(&mut a, p, q, c, s);
                rotate_rows(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
                // exact zero keeps later sweeps from re-touching it
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
        sweeps += 1;
        off = off_norm(&a);
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    (values, v, sweeps, off < threshold, off)
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.rows() {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
}

fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.cols() {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
}

fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn max_residual(a: &Matrix, values: &[f64], vectors: &Matrix) -> f64 {
    let n = a.rows();
    let mut worst: f64 = 0.0;
    for (c, &lambda) in values.iter().enumerate() {
        let mut r2 = 0.0;
        for i in 0..n {
            let av: f64 = a.row(i).iter().enumerate().map(|(j, &aij)| aij * vectors[(j, c)]).sum();
            r2 += (av - lambda * vectors[(i, c)]).powi(2);
        }
        worst = worst.max(r2.sqrt());
    }
    worst
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalize columns in place (modified Gram–Schmidt, two passes).
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut impl rand::Rng) {
    for i in 0..cols.len() {
        for _attempt in 0..3 {
            for _pass in 0..2 {
                for j in 0..i {
                    let (head, tail) = cols.split_at_mut(i);
                    let proj = dot(&tail[0], &head[j]);
                    for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = dot(&cols[i], &cols[i]).sqrt();
            if norm > 1e-10 {
                cols[i].iter_mut().for_each(|x| *x /= norm);
                break;
            }
            // rank-deficient block: replace with a fresh random direction
            for x in cols[i].iter_mut() {
                *x = StandardNormal.sample(rng);
            }
        }
    }
}

/// The `k` algebraically largest eigenpairs of a symmetric matrix by block
/// subspace iteration with Rayleigh–Ritz, eigenvalues descending.
///
/// `shift` must make `a + shift·I` positive semi-definite; iteration runs on
/// the shifted matrix and the reported eigenvalues are unshifted. The start
/// block is drawn from `seed`. The result carries `converged = false` rather
/// than failing when `max_iter` is exhausted, since callers such as spectral
/// clustering can still use an approximate invariant subspace.
pub fn leading_eigenpairs(
    a: &Matrix,
    k: usize,
    shift: f64,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<Eigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.cols() });
    }
    if k == 0 || k > n {
        return Err(Error::TooMany { k, n });
    }
    let p = n.min(k + 8);
    let mut rng = crate::seed::rng(seed);
    let mut block: Vec<Vec<f64>> =
        (0..p).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    orthonormalize(&mut block, &mut rng);

    let apply = |v: &[f64]| -> Vec<f64> {
        (0..n).map(|i| dot(a.row(i), v) + shift * v[i]).collect::<Vec<f64>>()
    };

    let mut iterations = 0;
    loop {
        iterations += 1;
        let images: Vec<Vec<f64>> = block.iter().map(|v| apply(v)).collect();
        let mut h = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let x = 0.5 * (dot(&block[i], &images[j]) + dot(&block[j], &images[i]));
                h[(i, j)] = x;
                h[(j, i)] = x;
            }
        }
        let (theta, q, _, _, _) = jacobi(&h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&x, &y| theta[y].total_cmp(&theta[x]));

        let combine = |src: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (j, s) in src.iter().enumerate() {
                let w = q[(j, col)];
                for (o, x) in out.iter_mut().zip(s) {
                    *o += w * x;
                }
            }
            out
        };
        let ritz: Vec<Vec<f64>> = order.iter().map(|&c| combine(&block, c)).collect();
        let ritz_images: Vec<Vec<f64>> = order.iter().map(|&c| combine(&images, c)).collect();
        let ritz_values: Vec<f64> = order.iter().map(|&c| theta[c]).collect();

        let residual = (0..k)
            .map(|i| {
                ritz_images[i]
                    .iter()
                    .zip(&ritz[i])
                    .map(|(w, v)| (w - ritz_values[i] * v).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);

        let converged = residual <= tol;
        if converged || iterations >= max_iter {
            let mut vectors = Matrix::zeros(n, k);
            for (c, col) in ritz.into_iter().take(k).enumerate() {
                let mut col = col;
                canonical_sign(&mut col);
                for (r, v) in col.into_iter().enumerate() {
                    vectors[(r, c)] = v;
                }
            }
            let values = ritz_values[..k].iter().map(|t| t - shift).collect();
            return Ok(Eigen { values, vectors, iterations, residual, converged });
        }
        block = ritz_images;
        orthonormalize(&mut block, &mut rng);
    }
}
