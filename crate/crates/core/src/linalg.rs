//! Dense row-major matrices over f64 and the small-scale factorizations the
//! rest of the crate is built on: numerical rank, null spaces, linear solves,
//! determinants and inverses.
//!
//! Dimensions in this crate are tiny (at most a handful), so everything here
//! is Gaussian elimination with partial pivoting and scale-aware thresholds.
//! Rank-style decisions compare pivots against `tol * max|entry|` of the
//! input matrix, which keeps the outcome invariant under rescaling.

use crate::error::{Error, Result};

/// Library-wide default tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Library-wide default pivot tolerance for linear solves.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;

/// Dense real vector. Operations that require finite entries check for them.
pub type Vector = Vec<f64>;

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Matrix::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Largest entry magnitude; the scale used by relative thresholds.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidInput("matrix shape mismatch in add".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::InvalidInput(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.data[k * other.cols + c];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vector> {
        if v.len() != self.cols {
            return Err(Error::InvalidInput(format!(
                "matvec shape mismatch: {}x{} * len {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn trace(&self) -> Result<f64> {
        self.require_square("trace")?;
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    /// Determinant by LU with partial pivoting. Singular matrices yield 0.
    pub fn det(&self) -> Result<f64> {
        self.require_square("det")?;
        self.require_finite()?;
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = a[col * n + col].abs();
            for r in (col + 1)..n {
                let v = a[r * n + col].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val == 0.0 {
                return Ok(0.0);
            }
            if pivot_row != col {
                for c in 0..n {
                    a.swap(pivot_row * n + c, col * n + c);
                }
                det = -det;
            }
            det *= a[col * n + col];
            for r in (col + 1)..n {
                let f = a[r * n + col] / a[col * n + col];
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
            }
        }
        Ok(det)
    }

    /// Solves `self * x = b` with the library default pivot tolerance.
    pub fn solve(&self, b: &[f64]) -> Result<Vector> {
        self.solve_with_tol(b, DEFAULT_SOLVE_TOL)
    }

    /// Gaussian elimination with partial pivoting; errors with the offending
    /// pivot magnitude when a pivot falls below `tol * max|entry|`.
    pub fn solve_with_tol(&self, b: &[f64], tol: f64) -> Result<Vector> {
        self.require_square("solve")?;
        self.require_finite()?;
        if b.len() != self.rows {
            return Err(Error::InvalidInput(format!(
                "solve rhs length {} does not match {} rows",
                b.len(),
                self.rows
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("rhs entries must be finite".into()));
        }
        let n = self.rows;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = a[col * n + col].abs();
            for r in (col + 1)..n {
                let v = a[r * n + col].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val <= tol * scale {
                return Err(Error::SingularMatrix { pivot: pivot_val });
            }
            if pivot_row != col {
                for c in 0..n {
                    a.swap(pivot_row * n + c, col * n + c);
                }
                x.swap(pivot_row, col);
            }
            for r in (col + 1)..n {
                let f = a[r * n + col] / a[col * n + col];
                if f == 0.0 {
                    continue;
                }
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for c in (col + 1)..n {
                s -= a[col * n + c] * x[c];
            }
            x[col] = s / a[col * n + col];
        }
        Ok(x)
    }

    /// Inverse by Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        self.require_square("inverse")?;
        self.require_finite()?;
        let n = self.rows;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut a = self.data.clone();
        let mut inv = Matrix::identity(n).data;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = a[col * n + col].abs();
            for r in (col + 1)..n {
                let v = a[r * n + col].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val <= DEFAULT_SOLVE_TOL * scale {
                return Err(Error::SingularMatrix { pivot: pivot_val });
            }
            if pivot_row != col {
                for c in 0..n {
                    a.swap(pivot_row * n + c, col * n + c);
                    inv.swap(pivot_row * n + c, col * n + c);
                }
            }
            let p = a[col * n + col];
            for c in 0..n {
                a[col * n + c] /= p;
                inv[col * n + c] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a[r * n + c] -= f * a[col * n + c];
                    inv[r * n + c] -= f * inv[col * n + c];
                }
            }
        }
        Ok(Matrix {
            rows: n,
            cols: n,
            data: inv,
        })
    }

    /// Numerical rank: pivots above `tol * max|entry|` under row reduction
    /// with partial pivoting.
    pub fn rank_with_tolerance(&self, tol: f64) -> Result<usize> {
        if tol <= 0.0 {
            return Err(Error::InvalidInput("rank tolerance must be > 0".into()));
        }
        self.require_finite()?;
        Ok(self.row_echelon(tol).0)
    }

    /// Orthonormal basis of the numerical kernel, empty when trivial.
    pub fn null_space(&self, tol: f64) -> Result<Vec<Vector>> {
        if tol <= 0.0 {
            return Err(Error::InvalidInput("null-space tolerance must be > 0".into()));
        }
        self.require_finite()?;
        let (rank, rref, pivot_cols) = self.row_echelon(tol);
        let n = self.cols;
        let is_pivot: Vec<bool> = {
            let mut flags = vec![false; n];
            for &c in &pivot_cols {
                flags[c] = true;
            }
            flags
        };
        let mut basis: Vec<Vector> = Vec::with_capacity(n - rank);
        for free in 0..n {
            if is_pivot[free] {
                continue;
            }
            let mut v = vec![0.0; n];
            v[free] = 1.0;
            // rref row i has its pivot in pivot_cols[i] with unit pivot
            for (i, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -rref.get(i, free);
            }
            basis.push(v);
        }
        // Gram-Schmidt; the vectors are independent by construction.
        let mut ortho: Vec<Vector> = Vec::with_capacity(basis.len());
        for mut v in basis {
            for u in &ortho {
                let d = dot(&v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
            let n2 = norm2(&v);
            if n2 > 0.0 {
                for vi in v.iter_mut() {
                    *vi /= n2;
                }
                ortho.push(v);
            }
        }
        Ok(ortho)
    }

    /// Coefficients of the shifted characteristic polynomial
    /// `det(eps*I + M) = eps^n + p[n-1]*eps^(n-1) + ... + p[0]`
    /// via the Faddeev-LeVerrier recurrence.
    pub fn char_poly(&self) -> Result<Vec<f64>> {
        self.require_square("char_poly")?;
        self.require_finite()?;
        let n = self.rows;
        // Run the recurrence on B = -M so that det(lambda*I - B) = det(lambda*I + M).
        let b = self.scale(-1.0);
        let mut coeffs = vec![0.0; n]; // coeffs[j] multiplies eps^j
        let mut m_prev = Matrix::zeros(n, n);
        let mut c_prev = 1.0; // coefficient of eps^n
        for k in 1..=n {
            let mut m_k = b.matmul(&m_prev)?;
            for i in 0..n {
                m_k.set(i, i, m_k.get(i, i) + c_prev);
            }
            let c_k = -b.matmul(&m_k)?.trace()? / k as f64;
            coeffs[n - k] = c_k;
            m_prev = m_k;
            c_prev = c_k;
        }
        Ok(coeffs)
    }

    /// Row reduction with partial pivoting and relative threshold
    /// `tol * max|entry|`; returns (rank, reduced matrix, pivot columns).
    fn row_echelon(&self, tol: f64) -> (usize, Matrix, Vec<usize>) {
        let mut m = self.clone();
        let threshold = tol * self.max_abs();
        let mut pivot_cols = Vec::new();
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let mut pivot_row = rank;
            let mut pivot_val = m.get(rank, col).abs();
            for r in (rank + 1)..m.rows {
                let v = m.get(r, col).abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val <= threshold {
                continue;
            }
            if pivot_row != rank {
                for c in 0..m.cols {
                    let tmp = m.get(rank, c);
                    m.set(rank, c, m.get(pivot_row, c));
                    m.set(pivot_row, c, tmp);
                }
            }
            let p = m.get(rank, col);
            for c in 0..m.cols {
                m.set(rank, c, m.get(rank, c) / p);
            }
            for r in 0..m.rows {
                if r == rank {
                    continue;
                }
                let f = m.get(r, col);
                if f == 0.0 {
                    continue;
                }
                for c in 0..m.cols {
                    m.set(r, c, m.get(r, c) - f * m.get(rank, c));
                }
            }
            pivot_cols.push(col);
            rank += 1;
        }
        (rank, m, pivot_cols)
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput(format!(
                "{what} requires a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    fn require_finite(&self) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Eigenvalues of a symmetric matrix of size 1..=3, ascending, by closed-form
/// quadratic/cubic formulas.
pub fn sym_eigenvalues_small(m: &Matrix) -> Result<Vec<f64>> {
    if m.rows() != m.cols() || m.rows() == 0 || m.rows() > 3 {
        return Err(Error::InvalidInput(
            "symmetric eigenvalues supported for sizes 1..=3".into(),
        ));
    }
    let n = m.rows();
    match n {
        1 => Ok(vec![m.get(0, 0)]),
        2 => {
            let (a, b, c) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
            let mean = 0.5 * (a + c);
            let d = (0.25 * (a - c) * (a - c) + b * b).max(0.0).sqrt();
            Ok(vec![mean - d, mean + d])
        }
        _ => {
            // Trigonometric method for symmetric 3x3.
            let q = m.trace()? / 3.0;
            let mut b = m.clone();
            for i in 0..3 {
                b.set(i, i, b.get(i, i) - q);
            }
            let p2: f64 = b.as_slice().iter().map(|v| v * v).sum::<f64>() / 6.0;
            let p = p2.sqrt();
            if p == 0.0 {
                return Ok(vec![q, q, q]);
            }
            let det_b = b.det()? / (p * p * p);
            let r = (det_b / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let e1 = q + 2.0 * p * phi.cos();
            let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            let e2 = 3.0 * q - e1 - e3;
            let mut eigs = vec![e1, e2, e3];
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(eigs)
        }
    }
}

/// Singular values of a small matrix, descending, by one-sided Jacobi
/// rotations on the shorter side. Unlike the Gram-matrix route this keeps
/// high relative accuracy for tiny singular values, which the rank-1
/// decomposability checks rely on.
pub fn singular_values_small(m: &Matrix) -> Result<Vec<f64>> {
    m.require_finite()?;
    let b = if m.rows() <= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    let (rows, cols) = (b.rows(), b.cols());
    let mut data: Vec<Vec<f64>> = (0..rows).map(|r| b.row(r).to_vec()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..rows {
            for j in (i + 1)..rows {
                let (mut aa, mut bb, mut cc) = (0.0, 0.0, 0.0);
                for c in 0..cols {
                    aa += data[i][c] * data[i][c];
                    bb += data[j][c] * data[j][c];
                    cc += data[i][c] * data[j][c];
                }
                if cc.abs() <= 1e-15 * (aa * bb).sqrt() || cc == 0.0 {
                    continue;
                }
                let zeta = (bb - aa) / (2.0 * cc);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for c in 0..cols {
                    let vi = data[i][c];
                    let vj = data[j][c];
                    data[i][c] = cs * vi - sn * vj;
                    data[j][c] = sn * vi + cs * vj;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = data
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}
