//! Symmetric eigendecomposition by cyclic Jacobi rotations, and a thin SVD
//! built on top of it.

use log::warn;

use super::matrix::{dot, Matrix};
use super::TOL;
use crate::error::{Error, Result};

/// Eigenvalues in non-increasing order with matching unit eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

pub fn sym_eigen(a: &Matrix) -> Result<EigenDecomposition> {
    let n = a.rows();
    if n == 0 || a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "sym_eigen needs a non-empty square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "sym_eigen input".into(),
        });
    }
    let scale = a.frobenius_norm();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > TOL.symmetry * scale.max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }

    // Work on the symmetrized copy.
    let mut w = a.clone();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = m;
            w[(j, i)] = m;
        }
    }
    let mut v = Matrix::identity(n);
    let target = TOL.jacobi_off_diagonal * scale;

    let mut converged = false;
    for _sweep in 0..TOL.jacobi_max_sweeps {
        let off = off_diagonal_norm(&w);
        if off <= target || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut w, &mut v, p, q, c, s, t, apq);
            }
        }
    }
    if !converged && off_diagonal_norm(&w) > target {
        warn!("jacobi eigensolver hit the sweep limit at n={n}");
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].total_cmp(&w[(i, i)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let mut vectors = v.select_cols(&order);
    fix_column_signs(&mut vectors);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64, t: f64, apq: f64) {
    let n = w.rows();
    w[(p, p)] -= t * apq;
    w[(q, q)] += t * apq;
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = w[(k, p)];
        let akq = w[(k, q)];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        w[(k, p)] = new_p;
        w[(p, k)] = new_p;
        w[(k, q)] = new_q;
        w[(q, k)] = new_q;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn off_diagonal_norm(w: &Matrix) -> f64 {
    let n = w.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += w[(i, j)] * w[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Flips each column so its entry of largest magnitude is positive
/// (first such entry on ties).
pub fn fix_column_signs(m: &mut Matrix) {
    for j in 0..m.cols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..m.rows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if m.rows() > 0 && m[(best, j)] < 0.0 {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Thin SVD via the eigendecomposition of the smaller Gram matrix.
///
/// Right singular vectors follow the largest-magnitude-entry-positive sign
/// convention; left vectors follow from `u_i = A v_i / s_i`.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::DimensionMismatch("svd of an empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "svd input".into(),
        });
    }
    if a.rows() < a.cols() {
        // A = U S Vᵀ  <=>  Aᵀ = V S Uᵀ
        let t = svd(&a.transpose())?;
        let mut v = t.u;
        let mut u = t.v;
        // Re-apply the sign convention to the right vectors, carrying U along.
        for j in 0..v.cols() {
            let col = v.column(j);
            let idx = argmax_abs(&col);
            if col[idx] < 0.0 {
                for i in 0..v.rows() {
                    v[(i, j)] = -v[(i, j)];
                }
                for i in 0..u.rows() {
                    u[(i, j)] = -u[(i, j)];
                }
            }
        }
        return Ok(Svd {
            u,
            singular_values: t.singular_values,
            v,
        });
    }

    let m = a.rows();
    let n = a.cols();
    let eig = sym_eigen(&a.gram_cols())?;
    let v = eig.eigenvectors;
    let singular_values: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let smax = singular_values[0];
    let av = a.matmul(&v)?;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let s = singular_values[j];
        let mut col: Vec<f64> = av.column(j);
        if s > TOL.rank_relative * smax && s > 0.0 {
            col.iter_mut().for_each(|x| *x /= s);
        } else {
            col = vec![0.0; m];
        }
        u_cols.push(col);
    }
    orthonormalize_columns(&mut u_cols);
    let u = Matrix::from_columns(&u_cols)?;
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Modified Gram-Schmidt; zero columns are replaced by unit vectors
/// completing the basis.
fn orthonormalize_columns(cols: &mut [Vec<f64>]) {
    let m = cols.first().map_or(0, Vec::len);
    let mut basis_candidate = 0usize;
    for j in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(j);
        let c = &mut rest[0];
        for q in done.iter() {
            let d = dot(q, c);
            c.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
        }
        let mut norm = dot(c, c).sqrt();
        while norm < 1e-10 && basis_candidate < m {
            *c = vec![0.0; m];
            c[basis_candidate] = 1.0;
            basis_candidate += 1;
            for q in done.iter() {
                let d = dot(q, c);
                c.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
            }
            norm = dot(c, c).sqrt();
        }
        if norm > 0.0 {
            c.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_spectral_norm(a: &Matrix) -> Result<f64> {
    let e = sym_eigen(a)?;
    Ok(e.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::SeededRng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed, 0);
        let z = rng.normal_vec(n * n);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = z[i * n + j];
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn reconstruct(e: &EigenDecomposition) -> Matrix {
        let n = e.eigenvalues.len();
        let mut vl = e.eigenvectors.clone();
        for i in 0..vl.rows() {
            for j in 0..n {
                vl[(i, j)] *= e.eigenvalues[j];
            }
        }
        vl.matmul(&e.eigenvectors.transpose()).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let e = sym_eigen(&Matrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_is_axis_aligned() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let e = sym_eigen(&a).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(e.eigenvectors.column(0), vec![0.0, 1.0]);
        assert_eq!(e.eigenvectors.column(1), vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn reconstruction_trace_and_eigen_equation() {
        for seed in 0..10 {
            let a = random_symmetric(12, seed);
            let e = sym_eigen(&a).unwrap();
            let norm = a.frobenius_norm();
            assert!(reconstruct(&e).sub(&a).unwrap().frobenius_norm() <= 1e-8 * norm);
            let tr: f64 = e.eigenvalues.iter().sum();
            assert!((tr - a.trace()).abs() <= 1e-8 * norm);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            for j in 0..12 {
                let vj = e.eigenvectors.column(j);
                assert!((dot(&vj, &vj) - 1.0).abs() < 1e-12);
                let av = a.mat_vec(&vj);
                for (x, y) in av.iter().zip(&vj) {
                    assert!((x - e.eigenvalues[j] * y).abs() <= 1e-8 * norm);
                }
            }
        }
    }

    #[test]
    fn svd_of_diagonal_and_zero() {
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(svd(&a).unwrap().singular_values, vec![2.0, 1.0]);
        let z = svd(&Matrix::zeros(3, 2)).unwrap();
        assert_eq!(z.singular_values, vec![0.0, 0.0]);
        let utu = z.u.transpose().matmul(&z.u).unwrap();
        assert!(utu.max_abs_diff(&Matrix::identity(2)) < 1e-12);
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        for (m, n) in [(6, 3), (3, 6)] {
            let mut rng = SeededRng::new(7, 1);
            let a = Matrix::from_vec(m, n, rng.normal_vec(m * n)).unwrap();
            let s = svd(&a).unwrap();
            let mut us = s.u.clone();
            for i in 0..us.rows() {
                for j in 0..us.cols() {
                    us[(i, j)] *= s.singular_values[j];
                }
            }
            let rec = us.matmul(&s.v.transpose()).unwrap();
            assert!(rec.sub(&a).unwrap().frobenius_norm() <= 1e-8 * a.frobenius_norm());
            let k = m.min(n);
            let i = Matrix::identity(k);
            assert!(s.u.transpose().matmul(&s.u).unwrap().max_abs_diff(&i) < 1e-10);
            assert!(s.v.transpose().matmul(&s.v).unwrap().max_abs_diff(&i) < 1e-10);
        }
    }

    #[test]
    fn gram_eigenvalues_are_squared_singular_values() {
        let mut rng = SeededRng::new(11, 0);
        let a = Matrix::from_vec(7, 4, rng.normal_vec(28)).unwrap();
        let s = svd(&a).unwrap();
        let e = sym_eigen(&a.gram_cols()).unwrap();
        for (l, sv) in e.eigenvalues.iter().zip(&s.singular_values) {
            assert!((l - sv * sv).abs() <= 1e-8 * l.abs().max(1.0));
        }
    }
}
