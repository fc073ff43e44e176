//! Dense and sparse numerical kernels: symmetric generalized eigensolvers,
//! matrix exponentials, conjugate gradients and a minimal CSR type.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, Eigh, UPLO};

/// Compressed sparse row matrix. Rows are sorted by column; duplicate
/// entries are summed during construction.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows];
        for &(r, _, _) in triplets {
            counts[r] += 1;
        }
        let mut indptr = vec![0usize; nrows + 1];
        for i in 0..nrows {
            indptr[i + 1] = indptr[i] + counts[i];
        }
        let mut indices = vec![0usize; triplets.len()];
        let mut data = vec![0.0; triplets.len()];
        let mut cursor = indptr.clone();
        for &(r, c, v) in triplets {
            indices[cursor[r]] = c;
            data[cursor[r]] = v;
            cursor[r] += 1;
        }
        // sort each row and merge duplicates
        let mut out_indptr = vec![0usize; nrows + 1];
        let mut out_indices = Vec::with_capacity(indices.len());
        let mut out_data = Vec::with_capacity(data.len());
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            for k in indptr[r]..indptr[r + 1] {
                row.push((indices[k], data[k]));
            }
            row.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let col = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == col {
                    v += row[i].1;
                    i += 1;
                }
                out_indices.push(col);
                out_data.push(v);
            }
            out_indptr[r + 1] = out_indices.len();
        }
        Csr { nrows, ncols, indptr: out_indptr, indices: out_indices, data: out_data }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_owned(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// y = Aᵀ x without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.data[k] * xr;
            }
        }
    }

    pub fn tr_matvec_owned(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_matvec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.nrows, self.ncols));
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                a[[r, self.indices[k]]] += self.data[k];
            }
        }
        a
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows.min(self.ncols)];
        for r in 0..self.nrows.min(self.ncols) {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[k] == r {
                    d[r] += self.data[k];
                }
            }
        }
        d
    }
}

/// Eigendecomposition of a pencil (A, M): `vals` ascending, columns of `vecs`
/// M-orthonormal.
#[derive(Debug, Clone)]
pub struct GenEig {
    pub vals: Array1<f64>,
    pub vecs: Array2<f64>,
    pub mass: MassKind,
}

#[derive(Debug, Clone)]
pub enum MassKind {
    Diagonal(Vec<f64>),
    Dense(Array2<f64>),
}

impl GenEig {
    /// M-inner product ⟨u, v⟩_M.
    pub fn mass_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        match &self.mass {
            MassKind::Diagonal(m) => u.iter().zip(v).zip(m).map(|((a, b), w)| a * b * w).sum(),
            MassKind::Dense(m) => {
                let mv = m.dot(&Array1::from(v.to_vec()));
                u.iter().zip(mv.iter()).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// Expand u in the eigenbasis: c_k = ⟨u, φ_k⟩_M.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        let mu: Vec<f64> = match &self.mass {
            MassKind::Diagonal(m) => u.iter().zip(m).map(|(a, w)| a * w).collect(),
            MassKind::Dense(m) => m.dot(&Array1::from(u.to_vec())).to_vec(),
        };
        (0..self.vals.len())
            .map(|k| self.vecs.column(k).iter().zip(&mu).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Apply exp(-t L) where L is the pencil operator with these eigenpairs.
    pub fn apply_exp(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let c = self.coefficients(u);
        let n = u.len();
        let mut out = vec![0.0; n];
        for k in 0..self.vals.len() {
            let w = (-t * self.vals[k]).exp() * c[k];
            if w == 0.0 {
                continue;
            }
            let col = self.vecs.column(k);
            for i in 0..n {
                out[i] += w * col[i];
            }
        }
        out
    }
}

/// Generalized symmetric eigenproblem A x = λ M x with diagonal positive M.
pub fn eigh_gen_diag(a: &Array2<f64>, m: &[f64]) -> Result<GenEig> {
    let n = a.nrows();
    let s: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
    let mut b = a.clone();
    for i in 0..n {
        for j in 0..n {
            b[[i, j]] /= s[i] * s[j];
        }
    }
    // symmetrize against rounding
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (b[[i, j]] + b[[j, i]]);
            b[[i, j]] = v;
            b[[j, i]] = v;
        }
    }
    let (vals, mut vecs) = b
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("eigh: {e}")))?;
    for i in 0..n {
        for k in 0..n {
            vecs[[i, k]] /= s[i];
        }
    }
    Ok(GenEig { vals, vecs, mass: MassKind::Diagonal(m.to_vec()) })
}

/// Generalized symmetric eigenproblem A x = λ M x with dense SPD M,
/// reduced through the Cholesky factor of M.
pub fn eigh_gen_spd(a: &Array2<f64>, m: &Array2<f64>) -> Result<GenEig> {
    let n = a.nrows();
    let l = m
        .cholesky(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("cholesky: {e}")))?;
    // B = L^{-1} A L^{-T}
    let mut b = a.clone();
    for col in 0..n {
        let mut c: Vec<f64> = (0..n).map(|r| b[[r, col]]).collect();
        forward_solve(&l, &mut c);
        for r in 0..n {
            b[[r, col]] = c[r];
        }
    }
    for row in 0..n {
        let mut c: Vec<f64> = (0..n).map(|cidx| b[[row, cidx]]).collect();
        forward_solve(&l, &mut c);
        for cidx in 0..n {
            b[[row, cidx]] = c[cidx];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (b[[i, j]] + b[[j, i]]);
            b[[i, j]] = v;
            b[[j, i]] = v;
        }
    }
    let (vals, y) = b
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("eigh: {e}")))?;
    // x = L^{-T} y, column by column
    let mut vecs = Array2::zeros((n, n));
    for k in 0..n {
        let mut c: Vec<f64> = (0..n).map(|r| y[[r, k]]).collect();
        backward_solve(&l, &mut c);
        for r in 0..n {
            vecs[[r, k]] = c[r];
        }
    }
    Ok(GenEig { vals, vecs, mass: MassKind::Dense(m.clone()) })
}

fn forward_solve(l: &Array2<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[[i, j]] * b[j];
        }
        b[i] = acc / l[[i, i]];
    }
}

fn backward_solve(l: &Array2<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= l[[j, i]] * b[j];
        }
        b[i] = acc / l[[i, i]];
    }
}

/// Dense matrix exponential by scaling and squaring with a diagonal (6,6)
/// Padé approximant. Fallback path for operators too large to eigendecompose.
pub fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let b = a.mapv(|v| v * scale);
    // c_j = (2m-j)! m! / ((2m)! j! (m-j)!) for m = 6
    let m = 6usize;
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let c: Vec<f64> = (0..=m)
        .map(|j| fact(2 * m - j) * fact(m) / (fact(2 * m) * fact(j) * fact(m - j)))
        .collect();
    let mut pow = Array2::eye(n);
    let mut num = Array2::eye(n) * c[0];
    let mut den = Array2::eye(n) * c[0];
    for j in 1..=m {
        pow = pow.dot(&b);
        num = num + &pow * c[j];
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        den = den + &pow * (sign * c[j]);
    }
    let mut x = solve_dense(&den, &num);
    for _ in 0..s {
        x = x.dot(&x);
    }
    x
}

/// Solve A X = B for dense square A via LU with partial pivoting.
fn solve_dense(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if lu[[i, k]].abs() > lu[[p, k]].abs() {
                p = i;
            }
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                let t = lu[[k, j]];
                lu[[k, j]] = lu[[p, j]];
                lu[[p, j]] = t;
            }
        }
        let piv = lu[[k, k]];
        for i in k + 1..n {
            let f = lu[[i, k]] / piv;
            lu[[i, k]] = f;
            for j in k + 1..n {
                lu[[i, j]] -= f * lu[[k, j]];
            }
        }
    }
    let m = b.ncols();
    let mut x = Array2::zeros((n, m));
    for col in 0..m {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = b[[perm[i], col]];
            for j in 0..i {
                acc -= lu[[i, j]] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= lu[[i, j]] * x[[j, col]];
            }
            x[[i, col]] = acc / lu[[i, i]];
        }
    }
    x
}

/// Preconditioned conjugate gradients for SPD `apply`, Jacobi preconditioner.
pub fn cg<F>(apply: F, diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return x;
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(v, d)| v / d.max(1e-300)).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i].max(1e-300);
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// The `k` smallest eigenpairs of the SPD pencil (A, M) by shift-inverted
/// subspace iteration; both operators are sparse, solves run through CG.
/// Returns ascending eigenvalues with M-orthonormal vectors.
pub fn smallest_eigs_gen(a: &Csr, m: &Csr, k: usize, shift: f64, iters: usize) -> Result<GenEig> {
    let n = a.nrows;
    let k = k.min(n);
    let dim = (2 * k + 4).min(n);
    let shifted_diag: Vec<f64> = {
        let da = a.diagonal();
        let dm = m.diagonal();
        da.iter().zip(&dm).map(|(x, y)| x + shift * y).collect()
    };
    let apply_shifted = |x: &[f64], y: &mut [f64]| {
        a.matvec(x, y);
        let mx = m.matvec_owned(x);
        for i in 0..x.len() {
            y[i] += shift * mx[i];
        }
    };
    // deterministic pseudo-random start basis
    let mut basis: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let h = (i as u64).wrapping_mul(6364136223846793005).wrapping_add(j as u64 * 1442695040888963407);
                    ((h >> 11) as f64 / (1u64 << 53) as f64) - 0.5
                })
                .collect()
        })
        .collect();
    let mut ritz_vals = vec![0.0; dim];
    for _ in 0..iters {
        // y_j = (A + shift M)^{-1} M b_j
        for b in basis.iter_mut() {
            let rhs = m.matvec_owned(b);
            *b = cg(apply_shifted, &shifted_diag, &rhs, 1e-12, 8 * (n as f64).sqrt() as usize + 200);
        }
        m_orthonormalize(&mut basis, m);
        // Rayleigh–Ritz with A
        let p = basis.len();
        let mut small = Array2::zeros((p, p));
        let avs: Vec<Vec<f64>> = basis.iter().map(|b| a.matvec_owned(b)).collect();
        for i in 0..p {
            for j in 0..p {
                small[[i, j]] = dot(&basis[i], &avs[j]);
            }
        }
        for i in 0..p {
            for j in 0..i {
                let v = 0.5 * (small[[i, j]] + small[[j, i]]);
                small[[i, j]] = v;
                small[[j, i]] = v;
            }
        }
        let (vals, rot) = small
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Eigensolver(format!("ritz eigh: {e}")))?;
        let mut rotated: Vec<Vec<f64>> = Vec::with_capacity(p);
        for c in 0..p {
            let mut v = vec![0.0; n];
            for r in 0..p {
                let w = rot[[r, c]];
                if w != 0.0 {
                    for i in 0..n {
                        v[i] += w * basis[r][i];
                    }
                }
            }
            rotated.push(v);
        }
        basis = rotated;
        for i in 0..p {
            ritz_vals[i] = vals[i];
        }
    }
    let mut vecs = Array2::zeros((n, k));
    for j in 0..k {
        for i in 0..n {
            vecs[[i, j]] = basis[j][i];
        }
    }
    Ok(GenEig {
        vals: Array1::from(ritz_vals[0..k].to_vec()),
        vecs,
        mass: MassKind::Dense(m.to_dense()),
    })
}

fn m_orthonormalize(basis: &mut Vec<Vec<f64>>, m: &Csr) {
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    let mut kept_m: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for b in basis.iter() {
        let mut v = b.clone();
        for _ in 0..2 {
            for (q, mq) in kept.iter().zip(&kept_m) {
                let c = dot(&v, mq);
                for i in 0..v.len() {
                    v[i] -= c * q[i];
                }
            }
        }
        let mv = m.matvec_owned(&v);
        let norm = dot(&v, &mv).sqrt();
        if norm > 1e-13 {
            let inv = 1.0 / norm;
            let v: Vec<f64> = v.iter().map(|x| x * inv).collect();
            let mv: Vec<f64> = mv.iter().map(|x| x * inv).collect();
            kept.push(v);
            kept_m.push(mv);
        }
    }
    *basis = kept;
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest root of a bracketed scalar equation by bisection.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < tol {
            return mid;
        }
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
