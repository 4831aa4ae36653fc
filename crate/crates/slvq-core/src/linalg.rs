//! Sparse symmetric kernels: CSR storage, banded Cholesky, conjugate
//! gradients and a shift-invert Lanczos driver for the smallest eigenpairs.
//!
//! Grid operators assembled by the spectral module are banded under
//! row-major node ordering, so the shift-invert solves go through a dense
//! banded Cholesky factor whenever the band fits a memory budget, and fall
//! back to conjugate gradients otherwise. Both paths are deterministic.

use rayon::prelude::*;
use thiserror::Error;

/// Band storage cap for Cholesky factors (bytes).
const BAND_BYTES_CAP: usize = 320 << 20;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("eigensolver did not converge: {achieved} of {wanted} pairs at residual tol {tol}")]
    NoConvergence {
        wanted: usize,
        achieved: usize,
        tol: f64,
    },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("linear solve did not converge: residual {residual} after {iters} iterations")]
    SolveNoConvergence { residual: f64, iters: usize },
}

/// Compressed sparse row matrix, square, with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row (column, value) entries; columns must be sorted.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for &(j, v) in row {
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi]
            .iter()
            .zip(&self.data[lo..hi])
            .map(|(&j, &v)| (j, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let lo = self.indptr[i];
            let hi = self.indptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yi = acc;
        });
    }

    /// Largest deviation `|a_ij - a_ji|` over stored entries.
    pub fn symmetry_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                err = err.max((v - self.get(j, i)).abs());
            }
        }
        err
    }

    /// Half bandwidth: largest `|i - j|` over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let mut d = 0.0;
                let mut off = 0.0;
                for (j, v) in self.row(i) {
                    if j == i {
                        d = v;
                    } else {
                        off += v.abs();
                    }
                }
                d - off
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Cholesky factor of a banded symmetric positive definite matrix
/// `A + shift I`, stored as the lower band row by row.
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `l[i * (bw + 1) + (j - i + bw)]` holds `L[i][j]` for `j in [i-bw, i]`.
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn band_bytes(n: usize, bw: usize) -> usize {
        n * (bw + 1) * std::mem::size_of::<f64>()
    }

    pub fn factor(a: &CsrMatrix, shift: f64) -> Result<Self, LinalgError> {
        let n = a.dim();
        let bw = a.half_bandwidth();
        let stride = bw + 1;
        let mut l = vec![0.0f64; n * stride];
        // copy the lower triangle of A + shift I into the band
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    l[i * stride + (j + bw - i)] = if j == i { v + shift } else { v };
                }
            }
        }
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            for j in j_lo..=i {
                let k_lo = j_lo.max(j.saturating_sub(bw));
                let mut sum = l[i * stride + (j + bw - i)];
                for k in k_lo..j {
                    sum -= l[i * stride + (k + bw - i)] * l[j * stride + (k + bw - j)];
                }
                if j == i {
                    if sum <= 0.0 {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    l[i * stride + bw] = sum.sqrt();
                } else {
                    l[i * stride + (j + bw - i)] = sum / l[j * stride + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }

    /// Solves `(A + shift I) x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let stride = self.bw + 1;
        // forward: L y = b
        for i in 0..self.n {
            let j_lo = i.saturating_sub(self.bw);
            let mut sum = b[i];
            for j in j_lo..i {
                sum -= self.l[i * stride + (j + self.bw - i)] * b[j];
            }
            b[i] = sum / self.l[i * stride + self.bw];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let j_hi = (i + self.bw).min(self.n - 1);
            let mut sum = b[i];
            for j in (i + 1)..=j_hi {
                sum -= self.l[j * stride + (i + self.bw - j)] * b[j];
            }
            b[i] = sum / self.l[i * stride + self.bw];
        }
    }
}

/// Conjugate gradients for `(A + shift I) x = b`, zero start.
pub fn cg_solve(
    a: &CsrMatrix,
    shift: f64,
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>, LinalgError> {
    let n = a.dim();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let b_norm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let mut rs = dot(&r, &r);
    for it in 0..max_iters {
        if rs.sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        if shift != 0.0 {
            for i in 0..n {
                ap[i] += shift * p[i];
            }
        }
        let alpha = rs / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        if it == max_iters - 1 {
            return Err(LinalgError::SolveNoConvergence {
                residual: rs.sqrt() / b_norm,
                iters: max_iters,
            });
        }
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Eigendecomposition of a symmetric tridiagonal matrix by the implicit QL
/// method (EISPACK tql2). Returns eigenvalues ascending with eigenvectors in
/// the columns of `z`.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z = vec![vec![0.0; n]; n];
    for (i, zi) in z.iter_mut().enumerate() {
        zi[i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 50, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for zk in z.iter_mut() {
                    f = zk[i + 1];
                    zk[i + 1] = s * zk[i] + c * f;
                    zk[i] = c * zk[i] - s * f;
                }
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    // sort ascending, carrying eigenvectors (columns of z)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| z.iter().map(|row| row[col]).collect())
        .collect();
    (values, vectors)
}

/// Deterministic pseudo-random start vector (SplitMix64 stream).
fn start_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut state = 0x9e3779b97f4a7c15u64.wrapping_add(salt);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut v: Vec<f64> = (0..n)
        .map(|_| (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect();
    let norm = dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

pub struct EigenPairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unit eigenvectors matching `values`.
    pub vectors: Vec<Vec<f64>>,
    /// Residual norms `||A v - lambda v||`.
    pub residuals: Vec<f64>,
}

enum ShiftInvert<'a> {
    Banded(BandedCholesky),
    Cg { a: &'a CsrMatrix, shift: f64 },
}

impl ShiftInvert<'_> {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        match self {
            ShiftInvert::Banded(f) => {
                let mut y = x.to_vec();
                f.solve_in_place(&mut y);
                Ok(y)
            }
            ShiftInvert::Cg { a, shift } => cg_solve(a, *shift, x, 1e-13, 20 * a.dim() + 1000),
        }
    }
}

/// The `k` smallest eigenpairs of a sparse symmetric matrix by shift-invert
/// Lanczos with full reorthogonalization. The shift starts at zero and is
/// raised from the Gershgorin bound when the matrix is indefinite.
pub fn smallest_eigenpairs(a: &CsrMatrix, k: usize, tol: f64) -> Result<EigenPairs, LinalgError> {
    let n = a.dim();
    assert!(k >= 1 && k <= n, "need 1 <= k <= dim");
    let a_norm = a.norm_inf();
    // floor below which residuals cannot be driven in f64
    let accept = |lambda: f64, res: f64| {
        res <= (tol * lambda.abs().max(1.0)).max(50.0 * f64::EPSILON * a_norm)
    };

    let mut shift = 0.0f64;
    let op = loop {
        if BandedCholesky::band_bytes(n, a.half_bandwidth()) <= BAND_BYTES_CAP {
            match BandedCholesky::factor(a, shift) {
                Ok(f) => break ShiftInvert::Banded(f),
                Err(LinalgError::NotPositiveDefinite { .. }) => {
                    let lower = a.gershgorin_lower();
                    let bump = (-lower).max(shift * 10.0).max(1e-8 * a_norm.max(1.0));
                    shift = bump * 1.01;
                    continue;
                }
                Err(e) => return Err(e),
            }
        } else {
            let lower = a.gershgorin_lower();
            if lower <= 0.0 {
                shift = -lower * 1.01 + 1e-8 * a_norm.max(1.0);
            }
            break ShiftInvert::Cg { a, shift };
        }
    };

    let mut m = n.min((2 * k + 20).max(40));
    let mut salt = 0u64;
    loop {
        let (thetas, ritz) = lanczos(&op, n, m, salt)?;
        // largest theta of (A + shift)^-1 correspond to the smallest of A
        let mut pairs: Vec<(f64, Vec<f64>)> = thetas
            .into_iter()
            .zip(ritz)
            .filter(|(t, _)| *t > 0.0)
            .map(|(t, v)| (1.0 / t - shift, v))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.truncate(k);

        if pairs.len() == k {
            let mut values = Vec::with_capacity(k);
            let mut vectors = Vec::with_capacity(k);
            let mut residuals = Vec::with_capacity(k);
            let mut ok = true;
            let mut av = vec![0.0; n];
            for (lambda, mut v) in pairs {
                let norm = dot(&v, &v).sqrt();
                for x in &mut v {
                    *x /= norm;
                }
                a.matvec(&v, &mut av);
                let res = av
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - lambda * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if !accept(lambda, res) {
                    ok = false;
                }
                values.push(lambda);
                vectors.push(v);
                residuals.push(res);
            }
            if ok {
                orient(&mut vectors);
                return Ok(EigenPairs {
                    values,
                    vectors,
                    residuals,
                });
            }
        }

        if m >= n || m >= 400 {
            // one fresh start before giving up
            if salt == 0 {
                salt = 0x5eed;
                continue;
            }
            return Err(LinalgError::NoConvergence {
                wanted: k,
                achieved: 0,
                tol,
            });
        }
        m = (2 * m).min(n).min(400);
    }
}

/// Full-reorthogonalization Lanczos on the shift-inverted operator. Returns
/// Ritz values (all of them) and Ritz vectors in the original space.
fn lanczos(
    op: &ShiftInvert,
    n: usize,
    m: usize,
    salt: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), LinalgError> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    let mut betas: Vec<f64> = Vec::new();
    let mut v = start_vector(n, salt);
    let mut scale: f64 = 0.0;
    for step in 0..m {
        let mut w = op.apply(&v)?;
        let alpha = dot(&w, &v);
        scale = scale.max(alpha.abs());
        axpy(-alpha, &v, &mut w);
        if step > 0 {
            let beta_prev = betas[step - 1];
            axpy(-beta_prev, &basis[step - 1], &mut w);
        }
        // two passes of full reorthogonalization
        for _ in 0..2 {
            for u in &basis {
                let c = dot(&w, u);
                axpy(-c, u, &mut w);
            }
            let c = dot(&w, &v);
            axpy(-c, &v, &mut w);
        }
        alphas.push(alpha);
        basis.push(std::mem::take(&mut v));
        let beta = dot(&w, &w).sqrt();
        if step + 1 == m || beta <= 1e3 * f64::EPSILON * scale.max(1e-300) {
            break;
        }
        betas.push(beta);
        v = w;
        for x in &mut v {
            *x /= beta;
        }
    }
    let steps = alphas.len();
    let (thetas, tvecs) = tridiagonal_eigen(&alphas, &betas[..steps.saturating_sub(1)]);
    let ritz: Vec<Vec<f64>> = tvecs
        .iter()
        .map(|y| {
            let mut x = vec![0.0; n];
            for (coef, u) in y.iter().zip(&basis) {
                axpy(*coef, u, &mut x);
            }
            x
        })
        .collect();
    Ok((thetas, ritz))
}

/// Deterministic sign convention: the first vector points into the positive
/// orthant (ground states are positive), later ones have their largest
/// component positive.
fn orient(vectors: &mut [Vec<f64>]) {
    for (idx, v) in vectors.iter_mut().enumerate() {
        let flip = if idx == 0 {
            v.iter().sum::<f64>() < 0.0
        } else {
            let mut max = 0.0f64;
            let mut sign = 1.0;
            for &x in v.iter() {
                if x.abs() > max {
                    max = x.abs();
                    sign = x.signum();
                }
            }
            sign < 0.0
        };
        if flip {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}
