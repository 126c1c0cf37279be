//! Dense complex matrices, Pfaffians, matrix functions and branch-tracked roots.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries for {}x{}", data.len(), rows, cols)));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("non-finite matrix entry".into()));
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Real matrix from row-major values.
    pub fn from_real(rows: usize, cols: usize, vals: &[f64]) -> Self {
        assert_eq!(vals.len(), rows * cols);
        CMatrix { rows, cols, data: vals.iter().map(|&x| r(x)).collect() }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let m = if n == 0 { 0 } else { rows[0].len() };
        Self::from_fn(n, m, |i, j| rows[i][j])
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        let m = cols.len();
        let n = if m == 0 { 0 } else { cols[0].len() };
        Self::from_fn(n, m, |i, j| cols[j][i])
    }

    pub fn diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn real_part(&self) -> Self {
        self.map(|z| r(z.re))
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMatrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn hstack(&self, other: &CMatrix) -> Self {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn commutator(&self, other: &CMatrix) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// LU factorisation with partial pivoting; returns (lu, perm, sign).
    fn lu(&self) -> Result<(CMatrix, Vec<usize>, f64)> {
        if !self.is_square() {
            return Err(Error::Dimension("LU of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n).map(|i| (i, a[(i, k)].norm())).fold((k, -1.0), |b, x| if x.1 > b.1 { x } else { b });
            if pv <= 1e-300 * scale || pv == 0.0 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / piv;
                a[(i, k)] = f;
                if f != ZERO {
                    for j in k + 1..n {
                        let t = a[(k, j)];
                        a[(i, j)] -= f * t;
                    }
                }
            }
        }
        Ok((a, perm, sign))
    }

    pub fn det(&self) -> Result<C64> {
        match self.lu() {
            Ok((lu, _, sign)) => Ok((0..self.rows).map(|i| lu[(i, i)]).product::<C64>() * sign),
            Err(Error::Singular) => Ok(ZERO),
            Err(e) => Err(e),
        }
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        let (lu, perm, _) = self.lu()?;
        let n = self.rows;
        if b.rows != n {
            return Err(Error::Dimension("solve right-hand side".into()));
        }
        let mut x = CMatrix::zeros(n, b.cols);
        for col in 0..b.cols {
            let mut y: Vec<C64> = (0..n).map(|i| b[(perm[i], col)]).collect();
            for i in 0..n {
                for k in 0..i {
                    let t = lu[(i, k)] * y[k];
                    y[i] -= t;
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    let t = lu[(i, k)] * y[k];
                    y[i] -= t;
                }
                y[i] /= lu[(i, i)];
            }
            x.set_column(col, &y);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        self.solve(&CMatrix::identity(self.rows))
    }

    pub fn is_skew(&self, tol: f64) -> bool {
        self.is_square() && (self + &self.transpose()).max_abs() <= tol
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, o: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, o: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, o: &CMatrix) -> CMatrix {
        self.matmul(o)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.map(|z| -z)
    }
}

/// Hermitian eigen-decomposition, eigenvalues ascending, eigenvectors as columns.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = &(a + &a.adjoint()).scale_re(0.5);
    let eig = nalgebra::SymmetricEigen::new(h.to_nalgebra());
    let mut idx: Vec<usize> = (0..h.rows()).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(h.rows(), h.rows(), |i, j| eig.eigenvectors[(i, idx[j])]);
    (vals, vecs)
}

/// Eigenvalues of a general square matrix (complex Schur form).
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let schur = nalgebra::Schur::try_new(a.to_nalgebra(), 1e-15, 10_000)
        .ok_or_else(|| Error::NoConvergence("Schur decomposition".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..a.rows()).map(|i| t[(i, i)]).collect())
}

/// Singular values, descending.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let svd = a.to_nalgebra().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Orthonormal basis (columns) of the null space, using a relative singular value cut.
pub fn nullspace(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let n = a.cols();
    // Work with the Gram matrix so that wide and tall inputs are handled alike.
    let g = a.adjoint().matmul(a);
    let (vals, vecs) = hermitian_eigen(&g);
    let top = vals.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1e-300);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k].abs() <= rel_tol * rel_tol * top.max(1.0)).collect();
    CMatrix::from_fn(n, keep.len(), |i, j| vecs[(i, keep[j])])
}

/// Numerical rank with a relative singular value cut.
pub fn rank(a: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rel_tol * top.max(1e-300)).count()
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let nrm = a.norm1();
    let s = if nrm > 0.25 { (nrm / 0.25).log2().ceil() as i32 } else { 0 };
    let x = a.scale_re(0.5f64.powi(s));
    let mut term = CMatrix::identity(n);
    let mut sum = CMatrix::identity(n);
    for k in 1..=24 {
        term = term.matmul(&x).scale_re(1.0 / k as f64);
        sum = &sum + &term;
        if term.max_abs() < 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Principal square root by the scaled Denman–Beavers iteration.
pub fn sqrtm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    let mut y = a.clone();
    let mut z = CMatrix::identity(n);
    for it in 0..100 {
        let yi = y.inverse()?;
        let zi = z.inverse()?;
        let mu = if it < 8 {
            let d = (y.det()? * z.det()?).norm();
            if d > 0.0 { d.powf(-1.0 / (2.0 * n as f64)) } else { 1.0 }
        } else {
            1.0
        };
        let yn = (&y.scale_re(mu) + &zi.scale_re(1.0 / mu)).scale_re(0.5);
        let zn = (&z.scale_re(mu) + &yi.scale_re(1.0 / mu)).scale_re(0.5);
        let delta = (&yn - &y).norm() / yn.norm().max(1e-300);
        y = yn;
        z = zn;
        if delta < 1e-15 && it > 1 {
            return Ok(y);
        }
    }
    // Accept the iterate if it squares back to the input.
    if (&y.matmul(&y) - a).norm() <= 1e-10 * a.norm().max(1.0) {
        Ok(y)
    } else {
        Err(Error::NoConvergence("matrix square root".into()))
    }
}

/// Principal logarithm by inverse scaling and squaring.
pub fn principal_log(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension("log of non-square matrix".into()));
    }
    let n = a.rows();
    for lam in eigenvalues(a)? {
        if lam.norm() < 1e-14 * a.max_abs().max(1e-300) {
            return Err(Error::Singular);
        }
        if lam.arg().abs() > std::f64::consts::PI - 1e-8 {
            return Err(Error::BranchCut);
        }
    }
    let id = CMatrix::identity(n);
    let mut x = a.clone();
    let mut k = 0;
    while (&x - &id).norm() > 0.25 {
        x = sqrtm(&x)?;
        k += 1;
        if k > 60 {
            return Err(Error::NoConvergence("log scaling".into()));
        }
    }
    let e = &x - &id;
    let mut pow = e.clone();
    let mut sum = CMatrix::zeros(n, n);
    for j in 1..=60 {
        let t = pow.scale_re(if j % 2 == 1 { 1.0 } else { -1.0 } / j as f64);
        sum = &sum + &t;
        if t.max_abs() < 1e-18 {
            break;
        }
        pow = pow.matmul(&e);
    }
    Ok(sum.scale_re(2f64.powi(k)))
}

/// Pfaffian of a skew-symmetric matrix, Pf([[0,b],[-b,0]]) = b.
///
/// Householder reduction to skew tridiagonal form, A -> H A H^T.
pub fn pfaffian(a: &CMatrix) -> Result<C64> {
    check_skew(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(ONE);
    }
    let mut m = a.clone();
    let mut pf = ONE;
    for i in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (i + 1..n).map(|k| m[(k, i)]).collect();
        let tail: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let nx = (x[0].norm_sqr() + tail).sqrt();
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let mut v = x.clone();
        v[0] += phase * nx;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vn;
        }
        // H = I - 2 v v^dagger acts on indices i+1..n; det H = -1.
        let off = i + 1;
        let size = n - off;
        // Right multiplication by H^T = I - 2 conj(v) v^T over all rows.
        for row in 0..n {
            let s: C64 = (0..size).map(|k| m[(row, off + k)] * v[k].conj()).sum();
            for k in 0..size {
                let t = s * v[k] * 2.0;
                m[(row, off + k)] -= t;
            }
        }
        // Left multiplication by H over all columns.
        for col in 0..n {
            let s: C64 = (0..size).map(|k| v[k].conj() * m[(off + k, col)]).sum();
            for k in 0..size {
                let t = v[k] * s * 2.0;
                m[(off + k, col)] -= t;
            }
        }
        pf = -pf;
    }
    let mut prod = ONE;
    for k in 0..n / 2 {
        prod *= m[(2 * k, 2 * k + 1)];
    }
    // Pf(H A H^T) = det(H) Pf(A) with det(H) = -1 per reflection.
    Ok(prod * pf)
}

/// Recursive expansion along the first row; test oracle for small dimensions.
pub fn pfaffian_expansion(a: &CMatrix) -> Result<C64> {
    check_skew(a)?;
    if a.rows() > 10 {
        return Err(Error::Invalid("expansion oracle limited to dimension 10".into()));
    }
    let idx: Vec<usize> = (0..a.rows()).collect();
    Ok(pf_rec(a, &idx))
}

fn pf_rec(a: &CMatrix, idx: &[usize]) -> C64 {
    if idx.is_empty() {
        return ONE;
    }
    let mut total = ZERO;
    for j in 1..idx.len() {
        let rest: Vec<usize> = idx.iter().enumerate().filter(|&(k, _)| k != 0 && k != j).map(|(_, &x)| x).collect();
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        total += a[(idx[0], idx[j])] * pf_rec(a, &rest) * sign;
    }
    total
}

fn check_skew(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension("Pfaffian of non-square matrix".into()));
    }
    if a.rows() % 2 == 1 {
        return Err(Error::Dimension("Pfaffian of odd dimension".into()));
    }
    let res = (a + &a.transpose()).max_abs();
    if res > 1e-10 * a.max_abs().max(1.0) {
        return Err(Error::NotSkew(res));
    }
    Ok(())
}

/// Gauss–Legendre rule on [0,1] (Golub–Welsch).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    golub_welsch(jac, 2.0, |x| 0.5 * (x + 1.0), 0.5)
}

/// Gauss–Hermite rule for the weight e^{-x²} (Golub–Welsch).
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    golub_welsch(jac, std::f64::consts::PI.sqrt(), |x| x, 1.0)
}

fn golub_welsch(jac: DMatrix<f64>, mu0: f64, map: impl Fn(f64) -> f64, wscale: f64) -> (Vec<f64>, Vec<f64>) {
    let m = jac.nrows();
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let nodes = idx.iter().map(|&k| map(eig.eigenvalues[k])).collect();
    let weights = idx.iter().map(|&k| mu0 * eig.eigenvectors[(0, k)].powi(2) * wscale).collect();
    (nodes, weights)
}

/// Root value continued along a sampled path.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchTrackedScalar {
    pub value: C64,
    pub order: u32,
    pub history: Vec<C64>,
}

pub const CONTINUITY_THRESHOLD: f64 = 0.5;

/// Continuous branch of the `order`-th root, starting from the principal root
/// (the positive root when the first sample is positive).
pub fn tracked_root(path: &[C64], order: u32) -> Result<BranchTrackedScalar> {
    tracked_root_with(path, order, CONTINUITY_THRESHOLD)
}

pub fn tracked_root_with(path: &[C64], order: u32, threshold: f64) -> Result<BranchTrackedScalar> {
    if order != 2 && order != 4 {
        return Err(Error::Invalid(format!("root order {order}")));
    }
    if path.is_empty() {
        return Err(Error::Invalid("empty path".into()));
    }
    let scale = path.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let p = 1.0 / order as f64;
    let mut hist = Vec::with_capacity(path.len());
    let mut prev = path[0];
    if prev.norm() <= 1e-14 * scale || prev.norm() == 0.0 {
        return Err(Error::DegeneratePairing);
    }
    let mut root = prev.powf(p);
    hist.push(root);
    for (k, &v) in path.iter().enumerate().skip(1) {
        if v.norm() <= 1e-14 * scale || v.norm() == 0.0 {
            return Err(Error::DegeneratePairing);
        }
        if (v - prev).norm() >= threshold * prev.norm() {
            return Err(Error::Resolution(k));
        }
        root *= (v / prev).powf(p);
        hist.push(root);
        prev = v;
    }
    let closed = path.len() > 2 && (path[path.len() - 1] - path[0]).norm() <= 1e-12 * path[0].norm();
    if closed && (root - hist[0]).norm() > 1e-8 * hist[0].norm() {
        return Err(Error::Resolution(path.len() - 1));
    }
    Ok(BranchTrackedScalar { value: root, order, history: hist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                a[(i, j)] = z;
                a[(j, i)] = -z;
            }
        }
        a
    }

    #[test]
    fn pfaffian_small_cases() {
        let b = c(0.7, -0.2);
        let a = CMatrix::from_rows(&[vec![ZERO, b], vec![-b, ZERO]]);
        assert!((pfaffian(&a).unwrap() - b).norm() < 1e-15);
        let mut blk = CMatrix::zeros(4, 4);
        blk[(0, 1)] = r(2.0);
        blk[(1, 0)] = r(-2.0);
        blk[(2, 3)] = r(3.0);
        blk[(3, 2)] = r(-3.0);
        assert!((pfaffian(&blk).unwrap() - r(6.0)).norm() < 1e-13);
        assert!(pfaffian(&CMatrix::zeros(3, 3)).is_err());
        assert!(pfaffian(&CMatrix::identity(2)).is_err());
    }

    #[test]
    fn pfaffian_matches_expansion_and_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 4, 6, 8] {
            for _ in 0..10 {
                let a = random_skew(&mut rng, n);
                let p = pfaffian(&a).unwrap();
                let q = pfaffian_expansion(&a).unwrap();
                assert!((p - q).norm() < 1e-11 * (1.0 + q.norm()), "n={n}");
                let d = a.det().unwrap();
                assert!((p * p - d).norm() < 1e-10 * (1.0 + d.norm()));
            }
        }
    }

    #[test]
    fn pfaffian_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_skew(&mut rng, 6);
        let u = CMatrix::from_fn(6, 6, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let lhs = pfaffian(&u.transpose().matmul(&a).matmul(&u)).unwrap();
        let rhs = u.det().unwrap() * pfaffian(&a).unwrap();
        assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn lu_det_inverse() {
        let a = CMatrix::from_real(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        assert!((a.det().unwrap() - r(18.0)).norm() < 1e-12);
        let ai = a.inverse().unwrap();
        assert!((&a.matmul(&ai) - &CMatrix::identity(3)).max_abs() < 1e-14);
        assert_eq!(CMatrix::zeros(2, 2).det().unwrap(), ZERO);
        assert!(CMatrix::zeros(2, 2).inverse().is_err());
    }

    #[test]
    fn log_of_rotation_and_identity() {
        let phi: f64 = 2.5;
        let rot = CMatrix::from_real(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
        let l = principal_log(&rot).unwrap();
        let expect = CMatrix::from_real(2, 2, &[0.0, -phi, phi, 0.0]);
        assert!((&l - &expect).max_abs() < 1e-10);
        assert!(principal_log(&CMatrix::identity(3)).unwrap().max_abs() < 1e-14);
        let minus = CMatrix::identity(2).scale_re(-1.0);
        assert_eq!(principal_log(&minus), Err(Error::BranchCut));
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let s = random_skew(&mut rng, 4).real_part().scale_re(0.8);
            let l = principal_log(&expm(&s)).unwrap();
            assert!((&l - &s).max_abs() < 1e-10);
        }
        let a = CMatrix::from_real(2, 2, &[4.0, 1.0, 0.0, 9.0]);
        let q = sqrtm(&a).unwrap();
        assert!((&q.matmul(&q) - &a).max_abs() < 1e-12);
        assert!((q[(0, 0)] - r(2.0)).norm() < 1e-12);
    }

    #[test]
    fn quadrature_rules() {
        let (x, w) = gauss_legendre(10);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((integral - 0.125).abs() < 1e-14);
        let (x, w) = gauss_hermite(40);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tracked_roots() {
        let ones = vec![ONE; 10];
        assert!((tracked_root(&ones, 4).unwrap().value - ONE).norm() < 1e-15);
        let b: f64 = 1.3;
        let path: Vec<C64> = (0..=200).map(|k| r((b * k as f64 / 200.0).cos().powi(4))).collect();
        let t = tracked_root(&path, 4).unwrap();
        assert!((t.value - r(b.cos())).norm() < 1e-12);
        // Phase winding: the square root of e^{i phi} continues past the principal branch.
        let wind: Vec<C64> = (0..=300).map(|k| C64::from_polar(1.0, 3.0 * k as f64 / 300.0 * 2.0)).collect();
        let w = tracked_root(&wind, 2).unwrap();
        assert!((w.value - C64::from_polar(1.0, 3.0)).norm() < 1e-12);
        let circle: Vec<C64> = (0..=100).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 100.0)).collect();
        assert!(matches!(tracked_root(&circle, 2), Err(Error::Resolution(_))));
        assert_eq!(tracked_root(&[ONE, ZERO], 2), Err(Error::DegeneratePairing));
        assert!(matches!(tracked_root(&[ONE, r(-1.0)], 2), Err(Error::Resolution(1))));
    }
}
