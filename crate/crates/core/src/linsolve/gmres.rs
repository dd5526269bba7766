use std::fmt;

use crate::error::{Error, Result};

use super::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}, converged: {}",
            self.iterations, self.relative_residual, self.converged
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { tol: 1e-10, restart: 100, max_iter: 20_000 }
    }
}

/// Zero-fill incomplete LU factorisation. The diagonal is always part of the
/// pattern, even when the matrix stores no entry there.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(a.nnz() + n);
        let mut values = Vec::with_capacity(a.nnz() + n);
        let mut diag = vec![0; n];
        row_ptr.push(0);
        for i in 0..n {
            let mut has_diag = false;
            for (j, v) in a.row(i) {
                if j > i && !has_diag {
                    diag[i] = col_idx.len();
                    col_idx.push(i);
                    values.push(0.0);
                    has_diag = true;
                }
                if j == i {
                    diag[i] = col_idx.len();
                    has_diag = true;
                }
                col_idx.push(j);
                values.push(v);
            }
            if !has_diag {
                diag[i] = col_idx.len();
                col_idx.push(i);
                values.push(0.0);
            }
            row_ptr.push(col_idx.len());
        }

        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for k in start..end {
                pos[col_idx[k]] = k;
            }
            for kk in start..end {
                let k = col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = values[diag[k]];
                if pivot == 0.0 || !pivot.is_finite() {
                    return Err(Error::Singular { pivot: k });
                }
                let lik = values[kk] / pivot;
                values[kk] = lik;
                for m in (diag[k] + 1)..row_ptr[k + 1] {
                    let p = pos[col_idx[m]];
                    if p != usize::MAX {
                        values[p] -= lik * values[m];
                    }
                }
            }
            for k in start..end {
                pos[col_idx[k]] = usize::MAX;
            }
            if values[diag[i]] == 0.0 {
                return Err(Error::Singular { pivot: i });
            }
        }
        Ok(Ilu0 { n, row_ptr, col_idx, values, diag })
    }

    /// Solves `L U z = r` in place.
    pub fn apply(&self, z: &mut [f64]) {
        for i in 0..self.n {
            let mut s = z[i];
            for k in self.row_ptr[i]..self.diag[i] {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..self.n).rev() {
            let mut s = z[i];
            for k in (self.diag[i] + 1)..self.row_ptr[i + 1] {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s / self.values[self.diag[i]];
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted GMRES with ILU(0) right preconditioning.
///
/// Non-convergence is not an error: the returned report says whether the
/// tolerance was met.
pub fn gmres_solve(
    a: &CsrMatrix,
    b: &[f64],
    config: &GmresConfig,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if b.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::Dimension(format!("system of size {n} with mismatched vectors")));
    }
    if config.tol <= 0.0 || config.restart == 0 {
        return Err(Error::InvalidConfig("GMRES needs tol > 0 and restart >= 1".into()));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        let report = SolveReport { iterations: 0, relative_residual: 0.0, converged: true };
        return Ok((vec![0.0; n], report));
    }
    let ilu = Ilu0::new(a)?;
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let m = config.restart.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut iterations = 0;

    loop {
        a.matvec_into(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        if beta / bnorm <= config.tol || iterations >= config.max_iter {
            break;
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        let mut breakdown = false;
        for k in 0..m {
            let mut z = basis[k].clone();
            ilu.apply(&mut z);
            a.matvec_into(&z, &mut w);
            for j in 0..=k {
                let hjk = dot(&w, &basis[j]);
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hjk * vi;
                }
            }
            let hk1 = norm(&w);
            h[k + 1][k] = hk1;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                breakdown = true;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= config.tol || iterations >= config.max_iter {
                break;
            }
            if hk1 == 0.0 {
                // lucky breakdown: the Krylov space contains the solution
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        if k_used > 0 {
            let mut y = vec![0.0; k_used];
            for i in (0..k_used).rev() {
                let mut s = g[i];
                for j in (i + 1)..k_used {
                    s -= h[i][j] * y[j];
                }
                y[i] = s / h[i][i];
            }
            let mut update = vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                for (u, v) in update.iter_mut().zip(&basis[j]) {
                    *u += yj * v;
                }
            }
            ilu.apply(&mut update);
            for (xi, ui) in x.iter_mut().zip(&update) {
                *xi += ui;
            }
        }
        if breakdown || k_used == 0 {
            break;
        }
    }

    let rel = a.residual_norm(&x, b)? / bnorm;
    let report = SolveReport { iterations, relative_residual: rel, converged: rel <= config.tol };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::dense::{dense_solve, DenseMatrix};
    use crate::linsolve::sparse::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_one_iteration() {
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let (x, rep) = gmres_solve(&CsrMatrix::identity(4), &b, &GmresConfig::default(), None).unwrap();
        assert!(rep.converged && rep.iterations <= 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_two_by_two() {
        let mut t = TripletBuilder::new(2);
        t.push(0, 0, 2.0);
        t.push(1, 1, 4.0);
        let (x, rep) = gmres_solve(&t.build(), &[2.0, 8.0], &GmresConfig::default(), None).unwrap();
        assert!(rep.converged);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_diagonally_dominant_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut dense = DenseMatrix::zeros(n);
        for i in 0..n {
            let mut off = 0.0;
            for _ in 0..5 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    dense[(i, j)] += v;
                }
            }
            for j in 0..n {
                if j != i {
                    off += dense[(i, j)].abs();
                }
            }
            dense[(i, i)] = off + 1.0 + rng.gen_range(0.0..1.0);
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = CsrMatrix::from_dense(&dense);
        let cfg = GmresConfig { tol: 1e-13, restart: 20, max_iter: 1000 };
        let (x, rep) = gmres_solve(&a, &b, &cfg, None).unwrap();
        assert!(rep.converged, "{rep}");
        let x_ref = dense_solve(&dense, &b).unwrap();
        for (u, v) in x.iter().zip(&x_ref) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (x, rep) = gmres_solve(&CsrMatrix::identity(3), &[0.0; 3], &GmresConfig::default(), None).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert!(rep.converged);
    }

    #[test]
    fn iteration_cap_is_reported_not_fatal() {
        let n = 30;
        let dense = DenseMatrix::from_fn(n, |i, j| {
            if i == j {
                2.0
            } else if i + 1 == j || j + 1 == i {
                -1.0
            } else {
                0.0
            }
        });
        let mut a = CsrMatrix::from_dense(&dense);
        // perturb so ILU(0) is no longer exact for the tridiagonal pattern
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            for (j, v) in a.row(i) {
                t.push(i, j, v);
            }
            t.push(i, (i * 7 + 3) % n, 0.3);
        }
        a = t.build();
        let cfg = GmresConfig { tol: 1e-14, restart: 2, max_iter: 3 };
        let (_, rep) = gmres_solve(&a, &vec![1.0; n], &cfg, None).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn deterministic() {
        let n = 40;
        let dense = DenseMatrix::from_fn(n, |i, j| if i == j { 4.0 } else { 1.0 / (1 + i + 2 * j) as f64 });
        let a = CsrMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let r1 = gmres_solve(&a, &b, &GmresConfig::default(), None).unwrap();
        let r2 = gmres_solve(&a, &b, &GmresConfig::default(), None).unwrap();
        assert_eq!(r1.0, r2.0);
        assert_eq!(r1.1, r2.1);
    }
}
