//! Small dense linear algebra for d×d systems (d is the covariate dimension,
//! single digits in every design we target): symmetric storage-free matrices,
//! Cholesky solves, Jacobi eigenvalues, LU for the occasional unsymmetric
//! system, and a rank-revealing pivoted QR for design-matrix validation.

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    d: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        Mat {
            d,
            a: vec![0.0; d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Mat::zeros(d);
        for i in 0..d {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.len();
        let mut m = Mat::zeros(d);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), d);
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.d + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.d + j] += v;
    }

    /// Rank-one update `self += w * x x'` for a row slice x.
    pub fn add_outer(&mut self, x: &[f64], w: f64) {
        let d = self.d;
        for i in 0..d {
            let wi = w * x[i];
            for j in 0..d {
                self.a[i * d + j] += wi * x[j];
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.a {
            *v *= s;
        }
    }

    pub fn add_scaled_identity(&mut self, s: f64) {
        for i in 0..self.d {
            self.a[i * self.d + i] += s;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d)
            .map(|i| (0..d).map(|j| self.a[i * d + j] * x[j]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        let d = self.d;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.add(i, j, aik * other.get(k, j));
                }
            }
        }
        out
    }

    /// Force exact symmetry by averaging with the transpose.
    pub fn symmetrize(&mut self) {
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let hx = self.matvec(x);
        x.iter().zip(&hx).map(|(a, b)| a * b).sum()
    }

    /// Cholesky factorization; `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let d = self.d;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Some(Cholesky { d, l })
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn inverse_spd(&self) -> Option<Mat> {
        let ch = self.cholesky()?;
        let d = self.d;
        let mut inv = Mat::zeros(d);
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            let col = ch.solve(&e);
            for i in 0..d {
                inv.set(i, j, col[i]);
            }
        }
        inv.symmetrize();
        Some(inv)
    }

    /// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let d = self.d;
        let mut a = self.a.clone();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    off += a[i * d + j] * a[i * d + j];
                }
            }
            let scale: f64 = (0..d)
                .map(|i| a[i * d + i].abs())
                .fold(0.0, f64::max)
                .max(1e-300);
            if off.sqrt() <= 1e-15 * scale * d as f64 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[p * d + q];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a[p * d + p];
                    let aqq = a[q * d + q];
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k * d + p];
                        let akq = a[k * d + q];
                        a[k * d + p] = c * akp - s * akq;
                        a[k * d + q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p * d + k];
                        let aqk = a[q * d + k];
                        a[p * d + k] = c * apk - s * aqk;
                        a[q * d + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..d).map(|i| a[i * d + i]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues()[0]
    }
}

/// Lower-triangular Cholesky factor.
pub struct Cholesky {
    d: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * d + k] * y[k];
            }
            y[i] = s / self.l[i * d + i];
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= self.l[k * d + i] * x[k];
            }
            x[i] = s / self.l[i * d + i];
        }
        x
    }
}

/// Solve a general (possibly unsymmetric) d×d system by LU with partial
/// pivoting. `None` when numerically singular.
pub fn solve_lu(m: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let d = m.d;
    let mut a = m.a.clone();
    let mut x: Vec<f64> = b.to_vec();
    let mut perm: Vec<usize> = (0..d).collect();
    for col in 0..d {
        let (piv, pval) = (col..d)
            .map(|r| (r, a[perm[r] * d + col].abs()))
            .max_by(|l, r| l.1.partial_cmp(&r.1).unwrap())?;
        if pval < 1e-300 {
            return None;
        }
        perm.swap(col, piv);
        let prow = perm[col];
        for r in (col + 1)..d {
            let row = perm[r];
            let f = a[row * d + col] / a[prow * d + col];
            a[row * d + col] = 0.0;
            for c in (col + 1)..d {
                a[row * d + c] -= f * a[prow * d + c];
            }
            x[row] -= f * x[prow];
        }
    }
    let mut out = vec![0.0; d];
    for i in (0..d).rev() {
        let row = perm[i];
        let mut s = x[row];
        for c in (i + 1)..d {
            s -= a[row * d + c] * out[c];
        }
        let diag = a[row * d + i];
        if diag.abs() < 1e-300 {
            return None;
        }
        out[i] = s / diag;
    }
    Some(out)
}

/// Rank check of an n×d row-major matrix by Householder QR with column
/// pivoting: full rank iff the smallest pivoted diagonal of R exceeds
/// `tol_ratio` times the largest.
pub fn full_column_rank(rows: &[f64], n: usize, d: usize, tol_ratio: f64) -> bool {
    assert_eq!(rows.len(), n * d);
    if n < d {
        return false;
    }
    // column-major working copy
    let mut a = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            a[j * n + i] = rows[i * d + j];
        }
    }
    let mut col_norm2: Vec<f64> = (0..d)
        .map(|j| a[j * n..j * n + n].iter().map(|v| v * v).sum())
        .collect();
    let mut cols: Vec<usize> = (0..d).collect();
    let mut rdiag = vec![0.0; d];
    for k in 0..d {
        // pivot: remaining column with largest residual norm
        let (rel, _) = (k..d)
            .map(|j| (j, col_norm2[cols[j]]))
            .max_by(|l, r| l.1.partial_cmp(&r.1).unwrap())
            .unwrap();
        cols.swap(k, rel);
        let cj = cols[k];
        // Householder vector on rows k..n of column cj
        let norm: f64 = a[cj * n + k..cj * n + n]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        rdiag[k] = norm;
        if norm < 1e-300 {
            for j in (k + 1)..d {
                col_norm2[cols[j]] = 0.0;
            }
            continue;
        }
        let sign = if a[cj * n + k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = a[cj * n + k..cj * n + n].to_vec();
        v[0] += sign * norm;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        for j in (k + 1)..d {
            let cc = cols[j];
            let dot: f64 = (0..(n - k)).map(|i| v[i] * a[cc * n + k + i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in 0..(n - k) {
                a[cc * n + k + i] -= f * v[i];
            }
            col_norm2[cc] = a[cc * n + k + 1..cc * n + n].iter().map(|x| x * x).sum();
        }
    }
    let rmax = rdiag.iter().cloned().fold(0.0, f64::max);
    rmax > 0.0 && rdiag.iter().all(|&r| r > tol_ratio * rmax)
}
