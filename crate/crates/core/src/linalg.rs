//! Linear algebra on top of faer: sparse LU, restarted GMRES and a
//! shift-invert subspace iteration for the low end of Hermitian spectra.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::traits::ComplexField;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{HcscError, Result};
use crate::sparse::CsrMatrix;

/// Sparse LU factorization of a square matrix given as `(row, col, value)`
/// triplets. Duplicate entries are summed.
pub struct SparseLu<T: ComplexField> {
    lu: faer::sparse::linalg::solvers::Lu<usize, T>,
    n: usize,
}

impl<T: ComplexField + Copy> SparseLu<T> {
    pub fn new(n: usize, entries: &[(usize, usize, T)]) -> Result<Self> {
        let triplets: Vec<Triplet<usize, usize, T>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let m = SparseColMat::<usize, T>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| HcscError::LinearSolve(format!("matrix assembly: {e:?}")))?;
        let lu = m.sp_lu().map_err(|e| HcscError::LinearSolve(format!("sparse LU: {e:?}")))?;
        Ok(Self { lu, n })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<T>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides at once.
    pub fn solve_many(&self, cols: &[Vec<T>]) -> Vec<Vec<T>> {
        let mut rhs = Mat::<T>::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..cols.len()).map(|j| (0..self.n).map(|i| rhs[(i, j)]).collect()).collect()
    }
}

impl SparseLu<Complex64> {
    pub fn from_csr(m: &CsrMatrix) -> Result<Self> {
        let mut entries = Vec::with_capacity(m.nnz());
        for r in 0..m.rows {
            entries.extend(m.row(r).map(|(c, v)| (r, c, v)));
        }
        Self::new(m.rows, &entries)
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`, starting from zero.
/// Running out of iterations is reported through `converged`, not as an error.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(GmresOutcome { x, iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok(GmresOutcome { x, iterations: total, relative_residual: beta / bnorm, converged: true });
        }
        if total >= max_iters {
            return Ok(GmresOutcome { x, iterations: total, relative_residual: beta / bnorm, converged: false });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && total < max_iters {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                w.iter_mut().zip(vi).for_each(|(w, v)| *w -= h[i][k] * v);
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            let beta_next = h[k + 1][k];
            h[k + 1][k] = 0.0;
            total += 1;
            k += 1;
            if g[k].abs() <= tol * bnorm || beta_next == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / beta_next).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&z[j]).for_each(|(x, z)| *x += yj * z);
        }
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Eigen-decomposition of a small dense Hermitian matrix, ascending.
pub fn hermitian_eigen(a: &[Vec<Complex64>]) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let n = a.len();
    let m = Mat::<Complex64>::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i].conj()));
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| HcscError::Eigensolver(format!("{e:?}")))?;
    let values = (0..n).map(|i| evd.S()[i].re).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| evd.U()[(i, j)]).collect()).collect();
    Ok((values, vectors))
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub iterations: usize,
}

/// Lowest `k` eigenpairs of a Hermitian positive semidefinite sparse matrix
/// by block inverse iteration on `h + shift` with Rayleigh-Ritz extraction.
pub fn lowest_eigenpairs(h: &CsrMatrix, k: usize, shift: f64, tol: f64, max_iters: usize) -> Result<EigenPairs> {
    let n = h.rows;
    let p = (k + 4).min(n);
    let shifted = h.add(&CsrMatrix::diagonal(&vec![Complex64::new(shift, 0.0); n]));
    let lu = SparseLu::from_csr(&shifted)?;
    let mut x: Vec<Vec<Complex64>> = (0..p)
        .map(|j| (0..n).map(|i| Complex64::from_polar(1.0, 0.37 * ((i + 1) * (j + 1)) as f64 + 0.11 * (i % 7) as f64)).collect())
        .collect();
    for it in 1..=max_iters {
        let mut y = lu.solve_many(&x);
        orthonormalize(&mut y);
        let hy: Vec<Vec<Complex64>> = y.iter().map(|v| h.matvec(v)).collect();
        let t: Vec<Vec<Complex64>> = (0..p).map(|i| (0..p).map(|j| cdot(&y[i], &hy[j])).collect()).collect();
        let (theta, u) = hermitian_eigen(&t)?;
        x = (0..p)
            .map(|j| (0..n).map(|r| (0..p).map(|i| y[i][r] * u[j][i]).sum()).collect())
            .collect();
        let scale = theta.iter().fold(shift, |a, &b| a.max(b.abs()));
        let converged = (0..k).all(|j| {
            let hx = h.matvec(&x[j]);
            let res: f64 = hx.iter().zip(&x[j]).map(|(a, b)| (a - theta[j] * b).norm_sqr()).sum::<f64>().sqrt();
            res <= tol * scale
        });
        if converged {
            return Ok(EigenPairs { values: theta[..k].to_vec(), vectors: x[..k].to_vec(), iterations: it });
        }
    }
    Err(HcscError::Eigensolver(format!("subspace iteration did not converge in {max_iters} sweeps")))
}

fn orthonormalize(vs: &mut [Vec<Complex64>]) {
    for _ in 0..2 {
        for j in 0..vs.len() {
            for i in 0..j {
                let c = cdot(&vs[i], &vs[j]);
                let (head, tail) = vs.split_at_mut(j);
                tail[0].iter_mut().zip(&head[i]).for_each(|(x, y)| *x -= c * y);
            }
            let nrm = cdot(&vs[j], &vs[j]).re.sqrt();
            if nrm > 0.0 {
                vs[j].iter_mut().for_each(|x| *x /= nrm);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, Complex64::new(2.0, 0.0))];
                r.push(((i + n - 1) % n, Complex64::new(-1.0, 0.0)));
                r.push(((i + 1) % n, Complex64::new(-1.0, 0.0)));
                r
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    #[test]
    fn sparse_lu_solves() {
        let entries = vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (1, 1, 0.0)];
        let lu = SparseLu::new(2, &entries).unwrap();
        let x: Vec<f64> = lu.solve(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gmres_matches_direct_solve() {
        let n = 40;
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..n).map(|i| 3.0 * x[i] - 0.5 * x[(i + 1) % n] - x[(i + n - 3) % n] + 0.01 * i as f64 * x[i]).collect()
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let out = gmres(apply, |v| v.to_vec(), &b, 1e-12, 15, 400).unwrap();
        let r = apply(&out.x);
        let err: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn periodic_laplacian_spectrum() {
        let n = 64;
        let l = laplacian_1d(n);
        let e = lowest_eigenpairs(&l, 3, 1e-3, 1e-10, 500).unwrap();
        assert!(e.values[0].abs() < 1e-12);
        let exact = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((e.values[1] - exact).abs() < 1e-10);
        assert!((e.values[2] - exact).abs() < 1e-10);
    }
}
