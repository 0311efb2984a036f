//! Dense complex matrices for small Hilbert spaces.
//!
//! Everything downstream (states, Kraus operators, observables, Choi states)
//! is a `ComplexMatrix`. Dimensions stay tiny — 2x2 for the system, 4x4 for
//! two-qubit objects, 16x16 at most — so the implementation favours clarity
//! over asymptotic cleverness: row-major `Vec<Complex64>` storage and a cyclic
//! Jacobi eigensolver for the Hermitian spectral operations.

use num_complex::Complex64;
use thiserror::Error;

/// Hermiticity / positivity checks operate at this entry-wise tolerance.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Reconstruction-grade checks (e.g. `psd_sqrt` squaring back) hold to this
/// Frobenius tolerance.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmatrixError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// Real eigenvalues of a Hermitian matrix, sorted non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl ComplexMatrix {
    /// Build from row-major entries. Fails if the entry count does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, CmatrixError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(CmatrixError::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, CmatrixError> {
        Self::from_vec(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, dim, |i, j| {
            if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        })
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { Complex64::new(0.0, 0.0) })
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// Standard matrix product.
    pub fn matmul(&self, other: &Self) -> Result<Self, CmatrixError> {
        if self.cols != other.rows {
            return Err(CmatrixError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Plain transpose (no conjugation).
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Kronecker product; `self` is the left factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (r1, c1, r2, c2) = (self.rows, self.cols, other.rows, other.cols);
        Self::from_fn(r1 * r2, c1 * c2, |i, j| {
            self.get(i / r2, j / c2) * other.get(i % r2, j % c2)
        })
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Result<Complex64, CmatrixError> {
        if !self.is_square() {
            return Err(CmatrixError::NotSquare { rows: self.rows, cols: self.cols });
        }
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self, CmatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(CmatrixError::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, CmatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(CmatrixError::DimensionMismatch(format!(
                "cannot subtract {}x{} from {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn scale_re(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Max entry-wise deviation from the adjoint; `None` for non-square input.
    pub fn hermiticity_deviation(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        Some(dev)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation().map(|d| d <= tol).unwrap_or(false)
    }

    /// Trace out one tensor factor of a `(d1*d2)x(d1*d2)` matrix.
    ///
    /// `subsystem` 0 is the left (first) factor of the row-major Kronecker
    /// ordering; the reduced matrix lives on the other factor.
    pub fn partial_trace(&self, subsystem: usize, dims: (usize, usize)) -> Result<Self, CmatrixError> {
        let (d1, d2) = dims;
        let d = d1 * d2;
        if self.rows != d || self.cols != d {
            return Err(CmatrixError::DimensionMismatch(format!(
                "partial trace over ({},{}) needs a {}x{} matrix, got {}x{}",
                d1, d2, d, d, self.rows, self.cols
            )));
        }
        if subsystem > 1 {
            return Err(CmatrixError::DimensionMismatch(format!(
                "subsystem index {} out of range (0 or 1)",
                subsystem
            )));
        }
        // Composite index (i1, i2) -> i1*d2 + i2.
        if subsystem == 0 {
            let mut out = Self::zeros(d2, d2);
            for k in 0..d2 {
                for l in 0..d2 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for i in 0..d1 {
                        s += self.get(i * d2 + k, i * d2 + l);
                    }
                    out.set(k, l, s);
                }
            }
            Ok(out)
        } else {
            let mut out = Self::zeros(d1, d1);
            for k in 0..d1 {
                for l in 0..d1 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for i in 0..d2 {
                        s += self.get(k * d2 + i, l * d2 + i);
                    }
                    out.set(k, l, s);
                }
            }
            Ok(out)
        }
    }

    /// Eigenvalues of a Hermitian matrix, sorted non-increasing.
    pub fn hermitian_eigenvalues(&self) -> Result<HermitianSpectrum, CmatrixError> {
        let (values, _) = self.hermitian_eigen()?;
        Ok(HermitianSpectrum { eigenvalues: values })
    }

    /// Full Hermitian eigendecomposition by cyclic Jacobi rotations.
    ///
    /// Returns `(values, vectors)` with values sorted non-increasing and the
    /// k-th column of `vectors` the eigenvector of `values[k]`.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix), CmatrixError> {
        let dev = self
            .hermiticity_deviation()
            .ok_or(CmatrixError::NotSquare { rows: self.rows, cols: self.cols })?;
        if dev > HERMITICITY_TOL {
            return Err(CmatrixError::NotHermitian { deviation: dev });
        }
        let n = self.rows;
        // Symmetrize away rounding noise before iterating.
        let mut a = Self::from_fn(n, n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let mut v = Self::identity(n);
        let scale = a.frobenius_norm().max(1.0);

        for _sweep in 0..200 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.get(p, q).norm_sqr();
                }
            }
            if off.sqrt() <= 1e-14 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    let r = apq.norm();
                    if r <= 1e-300 {
                        continue;
                    }
                    let phase = apq / r; // e^{i phi}
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    let tau = (app - aqq) / (2.0 * r);
                    // Smaller-angle root of t^2 + 2 tau t - 1 = 0.
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // Right update: A <- A * U with U the (p,q) rotation
                    // [[c, -s e^{i phi}], [s e^{-i phi}, c]].
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, akp * c + akq * phase.conj() * s);
                        a.set(k, q, akq * c - akp * phase * s);
                    }
                    // Left update: A <- U^dagger * A.
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, apk * c + aqk * phase * s);
                        a.set(q, k, aqk * c - apk * phase.conj() * s);
                    }
                    // Accumulate eigenvectors: V <- V * U.
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, vkp * c + vkq * phase.conj() * s);
                        v.set(k, q, vkq * c - vkp * phase * s);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
        order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        let vectors = Self::from_fn(n, n, |i, j| v.get(i, order[j]));
        Ok((values, vectors))
    }

    /// Unique positive-semidefinite square root.
    ///
    /// Eigenvalues in `[-1e-10, 0)` are treated as rounding noise and clamped
    /// to zero; anything more negative is rejected.
    pub fn psd_sqrt(&self) -> Result<Self, CmatrixError> {
        let (values, vectors) = self.hermitian_eigen()?;
        let mut roots = Vec::with_capacity(values.len());
        for &ev in &values {
            if ev < -HERMITICITY_TOL {
                return Err(CmatrixError::NotPsd { eigenvalue: ev });
            }
            roots.push(ev.max(0.0).sqrt());
        }
        // V diag(sqrt) V^dagger
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += vectors.get(i, k) * vectors.get(j, k).conj() * roots[k];
                }
                out.set(i, j, s);
            }
        }
        Ok(out)
    }
}
