//! Small dense linear algebra: 3-vectors / 3x3 matrices used throughout the
//! model, and symmetric matrices up to 9x9 for the certificate checks.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const MAX_DIM: usize = 9;

pub fn mat3_zero() -> Mat3 {
    [[0.0; 3]; 3]
}

pub fn mat3_identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat3_add(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn mat3_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - b[i][j]))
}

pub fn mat3_scale(a: &Mat3, s: f64) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn mat3_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    std::array::from_fn(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `<M v, v>`
pub fn quad_form3(m: &Mat3, v: &Vec3) -> f64 {
    dot3(&mat3_vec(m, v), v)
}

/// Dense symmetric matrix of dimension at most [`MAX_DIM`]. Only the
/// upper triangle can be written; the lower triangle mirrors it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0 && n <= MAX_DIM, "dimension {n} outside 1..={MAX_DIM}");
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Build from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Build from full rows, which must already be exactly symmetric.
    pub fn try_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Dimension(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {bad} has length {}, expected {n}",
                rows[bad].len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(i) {
                if v != rows[j][i] {
                    return Err(Error::Domain(format!(
                        "matrix not symmetric at ({i},{j}): {v} vs {}",
                        rows[j][i]
                    )));
                }
            }
        }
        Ok(Self::from_upper(n, |i, j| rows[i][j]))
    }

    pub fn try_from_mat3(m: &Mat3) -> Result<Self> {
        let rows: Vec<Vec<f64>> = m.iter().map(|r| r.to_vec()).collect();
        Self::try_from_rows(&rows)
    }

    /// Symmetrize a 3x3 matrix that is symmetric up to rounding.
    pub fn from_mat3_symmetrized(m: &Mat3) -> Self {
        Self::from_upper(3, |i, j| 0.5 * (m[i][j] + m[j][i]))
    }

    pub fn to_mat3(&self) -> Mat3 {
        assert_eq!(self.n, 3);
        std::array::from_fn(|i| std::array::from_fn(|j| self.get(i, j)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Product `self * other * self` of two symmetric matrices, symmetric by
    /// construction.
    pub fn sandwich(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut tmp = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                tmp[i * n + j] = (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum();
            }
        }
        SymMatrix::from_upper(n, |i, j| (0..n).map(|k| tmp[i * n + k] * self.get(k, j)).sum())
    }

    /// Principal submatrix on the given (sorted, distinct) indices.
    pub fn principal_submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_upper(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `V diag(f(lambda)) V^T`
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_upper(n, |i, j| {
            (0..n).map(|k| self.vectors[k][i] * fl[k] * self.vectors[k][j]).sum()
        })
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations.
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.n;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = m.frobenius_norm();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = n == 1 || off(&a) == 0.0;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge after {MAX_SWEEPS} sweeps"
            )));
        }
        sweep += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // negligible against both diagonal entries after a few sweeps
                let g = 100.0 * apq.abs();
                if sweep > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        let o = off(&a);
        converged = o == 0.0 || (sweep > 4 && o <= 1e-15 * norm);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    Ok(SymEigen { values, vectors })
}

/// Result of the positive-definiteness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdCheck {
    pub positive_definite: bool,
    /// Smallest Cholesky pivot reached before stopping.
    pub min_pivot: f64,
    /// Smallest eigenvalue, for reporting.
    pub min_eigenvalue: f64,
}

/// Relative pivot threshold of the definiteness test.
pub const PD_TOL: f64 = 1e-13;

/// Cholesky pivots `d_k = a_kk - sum_j l_kj^2`, stopping at the first
/// pivot that is not above `tol`.
pub fn cholesky_pivots(m: &SymMatrix, tol: f64) -> Vec<f64> {
    let n = m.n;
    let mut l = vec![0.0; n * n];
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let d = m.get(k, k) - (0..k).map(|j| l[k * n + j] * l[k * n + j]).sum::<f64>();
        pivots.push(d);
        if d <= tol {
            break;
        }
        let lkk = d.sqrt();
        l[k * n + k] = lkk;
        for i in k + 1..n {
            let s = m.get(i, k) - (0..k).map(|j| l[i * n + j] * l[k * n + j]).sum::<f64>();
            l[i * n + k] = s / lkk;
        }
    }
    pivots
}

/// Positive definite iff a full Cholesky factorization succeeds with all
/// pivots above `1e-13 * ||M||_F`.
pub fn is_positive_definite(m: &SymMatrix) -> PdCheck {
    let tol = PD_TOL * m.frobenius_norm();
    let pivots = cholesky_pivots(m, tol);
    let positive_definite = pivots.len() == m.n && pivots.iter().all(|&d| d > tol);
    let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let min_eigenvalue = sym_eigen(m).map(|e| e.min()).unwrap_or(f64::NAN);
    PdCheck {
        positive_definite,
        min_pivot,
        min_eigenvalue,
    }
}

/// `M^{-1/2}` of a positive definite matrix.
pub fn inv_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let pd = is_positive_definite(m);
    if !pd.positive_definite {
        return Err(Error::Domain(format!(
            "inverse square root needs a positive definite matrix (min eigenvalue {:e})",
            pd.min_eigenvalue
        )));
    }
    let eig = sym_eigen(m)?;
    Ok(eig.reassemble(|l| 1.0 / l.sqrt()))
}
