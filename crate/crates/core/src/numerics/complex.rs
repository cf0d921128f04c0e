use super::NumericsError;
use num_complex::Complex64;

/// A dense row-major complex matrix. Channel vectors are stored as plain
/// `&[Complex64]` slices; this type covers the matrix-valued quantities
/// (clutter channels, signal covariances).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::ONE;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(s, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Rank-one product `u vᴴ`.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, NumericsError> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == Complex64::ZERO {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, NumericsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "add {}x{} to {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), NumericsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch("add_assign".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }
}

/// Hermitian inner product `aᴴ b`.
pub fn herm_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix-vector product `M v`.
pub fn mat_vec(m: &ComplexMatrix, v: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
    if m.cols() != v.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "mat_vec {}x{} by {}",
            m.rows(),
            m.cols(),
            v.len()
        )));
    }
    Ok((0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c) * v[c]).sum())
        .collect())
}

/// Quadratic form `wᴴ M w` for Hermitian `M`, returned as a real scalar.
///
/// The imaginary residue is checked against the magnitude of the summed
/// terms before being dropped, so a genuinely non-Hermitian argument is
/// reported instead of silently truncated.
pub fn quadratic_form(w: &[Complex64], m: &ComplexMatrix) -> Result<f64, NumericsError> {
    if m.rows() != w.len() || m.cols() != w.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "quadratic form {}x{} with vector {}",
            m.rows(),
            m.cols(),
            w.len()
        )));
    }
    let mut acc = Complex64::ZERO;
    let mut mag = 0.0f64;
    for r in 0..w.len() {
        for c in 0..w.len() {
            let term = w[r].conj() * m.get(r, c) * w[c];
            acc += term;
            mag += term.norm();
        }
    }
    let tol = 1e-12 * mag.max(1.0);
    if acc.im.abs() > tol {
        return Err(NumericsError::NotHermitian(acc.im));
    }
    Ok(acc.re)
}
