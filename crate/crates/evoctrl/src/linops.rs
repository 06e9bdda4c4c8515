//! Matrix layer and descriptor systems.
//!
//! Everything downstream works with `M x' = A x + B u`, `y = C x + D u`
//! where `M` is an SPD mass matrix and the input/output spaces carry
//! their own SPD weights `Wu`, `Wy` (trace mass matrices for boundary
//! control). The adjoint system is built so that duality holds in the
//! weighted inner products, not in raw coordinates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::fmt::Write as _;
use std::path::Path;

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Debug, thiserror::Error)]
pub enum LinopsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix not symmetric: max asymmetry {asym:.3e} exceeds {tol:.3e}")]
    NotSymmetric { asym: f64, tol: f64 },
    #[error("Cholesky factorization failed (matrix not SPD, pivot {pivot})")]
    NotSpd { pivot: usize },
    #[error("invalid CSR structure: {0}")]
    BadCsr(String),
    #[error("matrix market i/o: {0}")]
    MatrixMarket(String),
}

/// Compressed sparse row storage. Column indices strictly increase within
/// each row; this is checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinopsError> {
        if row_ptr.len() != rows + 1 || *row_ptr.last().unwrap_or(&0) != col_idx.len() {
            return Err(LinopsError::BadCsr("row pointer array inconsistent".into()));
        }
        if col_idx.len() != values.len() {
            return Err(LinopsError::BadCsr("index/value length mismatch".into()));
        }
        for r in 0..rows {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            if lo > hi {
                return Err(LinopsError::BadCsr(format!("row {r} pointers decrease")));
            }
            for k in lo..hi {
                if col_idx[k] >= cols {
                    return Err(LinopsError::BadCsr(format!(
                        "row {r}: column index {} out of range",
                        col_idx[k]
                    )));
                }
                if k > lo && col_idx[k] <= col_idx[k - 1] {
                    return Err(LinopsError::BadCsr(format!(
                        "row {r}: column indices not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values })
    }

    pub fn from_dense(d: &DenseMatrix, drop_tol: f64) -> Self {
        let (rows, cols) = d.shape();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..rows {
            for c in 0..cols {
                let v = d[(r, c)];
                if v.abs() > drop_tol {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows, cols, row_ptr, col_idx, values }
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.cols, "csr matvec width");
        let mut y = Vector::zeros(self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[(r, self.col_idx[k])] = self.values[k];
            }
        }
        d
    }
}

/// Dense or CSR matrix. Assembly produces whichever is natural; solvers
/// densify on demand (desk-scale problems only).
#[derive(Debug, Clone)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(Csr),
}

impl Matrix {
    pub fn dense(d: DenseMatrix) -> Self {
        Matrix::Dense(d)
    }

    pub fn identity(n: usize) -> Self {
        Matrix::Dense(DenseMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::Dense(DenseMatrix::zeros(rows, cols))
    }

    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.nrows(),
            Matrix::Sparse(s) => s.rows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.ncols(),
            Matrix::Sparse(s) => s.cols,
        }
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        match self {
            Matrix::Dense(d) => d * x,
            Matrix::Sparse(s) => s.matvec(x),
        }
    }

    pub fn tr_matvec(&self, x: &Vector) -> Vector {
        match self {
            Matrix::Dense(d) => d.transpose() * x,
            Matrix::Sparse(s) => {
                assert_eq!(x.len(), s.rows, "csr transpose matvec width");
                let mut y = Vector::zeros(s.cols);
                for r in 0..s.rows {
                    for k in s.row_ptr[r]..s.row_ptr[r + 1] {
                        y[s.col_idx[k]] += s.values[k] * x[r];
                    }
                }
                y
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(d) => d.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Matrix::Dense(d) => d.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Matrix::Sparse(s) => s.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

/// Symmetry check used for mass matrices and weights:
/// `‖X − Xᵀ‖_max ≤ 1e-12 · ‖X‖_max`.
pub fn check_symmetric(x: &DenseMatrix) -> Result<(), LinopsError> {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let mut asym = 0.0f64;
    for r in 0..x.nrows() {
        for c in (r + 1)..x.ncols() {
            asym = asym.max((x[(r, c)] - x[(c, r)]).abs());
        }
    }
    if x.nrows() != x.ncols() || asym > tol {
        return Err(LinopsError::NotSymmetric { asym, tol });
    }
    Ok(())
}

/// Cached Cholesky factorization of an SPD matrix.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    n: usize,
}

impl SpdFactor {
    pub fn new(m: &DenseMatrix) -> Result<Self, LinopsError> {
        check_symmetric(m)?;
        let n = m.nrows();
        let chol = Cholesky::new(m.clone()).ok_or_else(|| {
            // nalgebra does not report which pivot broke; find it by
            // growing leading principal minors.
            let mut pivot = n.saturating_sub(1);
            for k in 1..=n {
                if Cholesky::new(m.view((0, 0), (k, k)).into_owned()).is_none() {
                    pivot = k - 1;
                    break;
                }
            }
            LinopsError::NotSpd { pivot }
        })?;
        Ok(Self { chol, n })
    }

    pub fn solve(&self, rhs: &Vector) -> Vector {
        assert_eq!(rhs.len(), self.n, "spd solve rhs length");
        self.chol.solve(rhs)
    }

    pub fn solve_mat(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(rhs.nrows(), self.n, "spd solve rhs rows");
        self.chol.solve(rhs)
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// One-shot SPD solve with a residual guarantee
/// `‖Mtx·x − rhs‖ ≤ 1e-10 (‖rhs‖ + 1)` (checked in debug builds).
pub fn solve_spd(mtx: &Matrix, rhs: &Vector) -> Result<Vector, LinopsError> {
    let dense = mtx.to_dense();
    let f = SpdFactor::new(&dense)?;
    let x = f.solve(rhs);
    debug_assert!(
        (&dense * &x - rhs).norm() <= 1e-10 * (rhs.norm() + 1.0),
        "spd solve residual out of tolerance"
    );
    Ok(x)
}

/// Terminal cost data: `(scale/2)·‖F x(T) − z_f‖²`.
#[derive(Debug, Clone)]
pub struct TerminalWeight {
    pub f: DenseMatrix,
    pub z_f: Vector,
    pub scale: f64,
}

impl TerminalWeight {
    pub fn new(f: DenseMatrix, z_f: Vector, scale: f64) -> Self {
        assert_eq!(f.nrows(), z_f.len(), "terminal target length");
        assert!(scale >= 0.0, "terminal scale must be nonnegative");
        Self { f, z_f, scale }
    }

    /// No terminal cost at all (`F` has zero rows).
    pub fn none(n: usize) -> Self {
        Self { f: DenseMatrix::zeros(0, n), z_f: Vector::zeros(0), scale: 0.0 }
    }

    pub fn dim_z(&self) -> usize {
        self.f.nrows()
    }
}

/// `M x' = A x + B u`, `y = C x + D u` with weighted input/output spaces.
#[derive(Clone)]
pub struct DescriptorSystem {
    pub m: DenseMatrix,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub d: DenseMatrix,
    pub wu: DenseMatrix,
    pub wy: DenseMatrix,
}

impl DescriptorSystem {
    pub fn new(
        m: DenseMatrix,
        a: DenseMatrix,
        b: DenseMatrix,
        c: DenseMatrix,
        d: DenseMatrix,
        wu: DenseMatrix,
        wy: DenseMatrix,
    ) -> Result<Self, LinopsError> {
        let n = m.nrows();
        let nu = b.ncols();
        let p = c.nrows();
        let dims_ok = m.ncols() == n
            && a.shape() == (n, n)
            && b.nrows() == n
            && c.ncols() == n
            && d.shape() == (p, nu)
            && wu.shape() == (nu, nu)
            && wy.shape() == (p, p);
        if !dims_ok {
            return Err(LinopsError::Dimension(format!(
                "M {:?}, A {:?}, B {:?}, C {:?}, D {:?}, Wu {:?}, Wy {:?}",
                m.shape(),
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape(),
                wu.shape(),
                wy.shape()
            )));
        }
        // SPD requirements on the mass matrix and the two weights.
        SpdFactor::new(&m)?;
        SpdFactor::new(&wu)?;
        SpdFactor::new(&wy)?;
        Ok(Self { m, a, b, c, d, wu, wy })
    }

    /// Convenience constructor with identity mass and weights.
    pub fn unweighted(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix, d: DenseMatrix) -> Self {
        let n = a.nrows();
        let nu = b.ncols();
        let p = c.nrows();
        Self::new(
            DenseMatrix::identity(n, n),
            a,
            b,
            c,
            d,
            DenseMatrix::identity(nu, nu),
            DenseMatrix::identity(p, p),
        )
        .expect("unweighted system dimensions")
    }

    pub fn dim_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn dim_y(&self) -> usize {
        self.c.nrows()
    }
}

/// Adjoint descriptor system.
///
/// With `⟨·,·⟩_M` on states, `Wu` on inputs and `Wy` on outputs, the
/// adjoint of `(x,u) ↦ (Ax+Bu, Cx+Du)` is
///
/// ```text
///   A* = Aᵀ          B* = Cᵀ Wy
///   C* = Wu⁻¹ Bᵀ     D* = Wu⁻¹ Dᵀ Wy
/// ```
///
/// and the adjoint's input/output weights swap to `(Wy, Wu)`. Applying
/// the construction twice returns the original system.
pub fn adjoint_system(sys: &DescriptorSystem) -> DescriptorSystem {
    let wu_inv = SpdFactor::new(&sys.wu).expect("Wu SPD (checked at construction)");
    let b_adj = sys.c.transpose() * &sys.wy;
    let c_adj = wu_inv.solve_mat(&sys.b.transpose());
    let d_adj = wu_inv.solve_mat(&(sys.d.transpose() * &sys.wy));
    DescriptorSystem {
        m: sys.m.clone(),
        a: sys.a.transpose(),
        b: b_adj,
        c: c_adj,
        d: d_adj,
        wu: sys.wy.clone(),
        wy: sys.wu.clone(),
    }
}

/// Symmetric square root via eigendecomposition. Requires all
/// eigenvalues ≥ −1e-12·λ_max; negatives inside that band clamp to 0.
pub fn sqrt_spd(h: &DenseMatrix) -> Result<DenseMatrix, LinopsError> {
    check_symmetric(h)?;
    let eig = h.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v)).max(1.0);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -1e-12 * lmax {
            return Err(LinopsError::NotSpd { pivot: i });
        }
    }
    let mut d = DMatrix::zeros(h.nrows(), h.nrows());
    for i in 0..h.nrows() {
        d[(i, i)] = eig.eigenvalues[i].max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Weighted inner product `xᵀ W y`.
pub fn weighted_dot(x: &Vector, w: &DenseMatrix, y: &Vector) -> f64 {
    x.dot(&(w * y))
}

// --- Matrix Market i/o (debugging aid) --------------------------------

pub fn write_matrix_market(path: &Path, m: &Matrix) -> Result<(), LinopsError> {
    let d = m.to_dense();
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let nnz = d.iter().filter(|v| **v != 0.0).count();
    let _ = writeln!(out, "{} {} {}", d.nrows(), d.ncols(), nnz);
    for c in 0..d.ncols() {
        for r in 0..d.nrows() {
            let v = d[(r, c)];
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v);
            }
        }
    }
    std::fs::write(path, out).map_err(|e| LinopsError::MatrixMarket(e.to_string()))
}

pub fn read_matrix_market(path: &Path) -> Result<Matrix, LinopsError> {
    let text = std::fs::read_to_string(path).map_err(|e| LinopsError::MatrixMarket(e.to_string()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| LinopsError::MatrixMarket("empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| LinopsError::MatrixMarket(format!("bad header {header:?}"))))
        .collect::<Result<_, _>>()?;
    if dims.len() != 3 {
        return Err(LinopsError::MatrixMarket(format!("bad header {header:?}")));
    }
    let mut d = DenseMatrix::zeros(dims[0], dims[1]);
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(LinopsError::MatrixMarket(format!("bad entry {line:?}")));
        }
        let r: usize = toks[0].parse().map_err(|_| LinopsError::MatrixMarket(line.into()))?;
        let c: usize = toks[1].parse().map_err(|_| LinopsError::MatrixMarket(line.into()))?;
        let v: f64 = toks[2].parse().map_err(|_| LinopsError::MatrixMarket(line.into()))?;
        if r == 0 || c == 0 || r > dims[0] || c > dims[1] {
            return Err(LinopsError::MatrixMarket(format!("entry out of range: {line:?}")));
        }
        d[(r - 1, c - 1)] = v;
    }
    Ok(Matrix::Dense(d))
}
