//! Symmetric matrix functions via eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Eigenvalues below this fraction of the largest one are clamped to zero
/// for PSD inputs.
pub const PSD_CLAMP: f64 = 1e-12;
/// Accepted negative eigenvalue (relative to the largest magnitude) for a
/// matrix still treated as PSD.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn asymmetry(a: &Mat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn ensure_square(a: &Mat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    Ok(())
}

/// Symmetry to `1e-12` relative to the largest entry.
pub fn ensure_symmetric(a: &Mat) -> Result<()> {
    ensure_square(a)?;
    let asym = asymmetry(a);
    if asym > 1e-12 * max_abs(a).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

pub fn ensure_dim(a: &Mat, n: usize) -> Result<()> {
    ensure_square(a)?;
    if a.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    Ok(())
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

pub fn eigh(a: &Mat) -> Eigen {
    let sym = symmetrize(a);
    let e = SymmetricEigen::new(sym);
    Eigen {
        values: e.eigenvalues.iter().copied().collect(),
        vectors: e.eigenvectors,
    }
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

impl Eigen {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues with round-off negativity removed; errors if the matrix is
    /// materially indefinite.
    pub fn clamped_psd_values(&self) -> Result<Vec<f64>> {
        let top = self.max_abs_value();
        if self.min_value() < -PSD_TOLERANCE * top.max(1e-300) {
            return Err(Error::NotPsd(self.min_value()));
        }
        Ok(self
            .values
            .iter()
            .map(|&l| if l < PSD_CLAMP * top { 0.0 } else { l })
            .collect())
    }
}

/// `|A|`: eigenvalues replaced by their absolute values.
pub fn abs(a: &Mat) -> Mat {
    eigh(a).apply(f64::abs)
}

/// `|A|^s`.
pub fn abs_pow(a: &Mat, s: f64) -> Mat {
    eigh(a).apply(|l| l.abs().powf(s))
}

pub fn ensure_psd(a: &Mat) -> Result<()> {
    eigh(a).clamped_psd_values().map(|_| ())
}

/// Real power of a PSD matrix (`A^0 = I`).
pub fn psd_pow(a: &Mat, r: f64) -> Result<Mat> {
    let e = eigh(a);
    let values = e.clamped_psd_values()?;
    let clamped = Eigen {
        values,
        vectors: e.vectors,
    };
    Ok(clamped.apply(|l| if r == 0.0 { 1.0 } else { l.powf(r) }))
}

pub fn psd_sqrt(a: &Mat) -> Result<Mat> {
    psd_pow(a, 0.5)
}

/// `Tr |A|^s`.
pub fn trace_abs_pow(a: &Mat, s: f64) -> f64 {
    eigh(a).values.iter().map(|l| l.abs().powf(s)).sum()
}

/// Schatten norm `(Tr |A|^p)^{1/p}`, scaled by the largest eigenvalue so
/// large `p` neither underflows nor overflows.
pub fn schatten_norm(a: &Mat, p: f64) -> f64 {
    let e = eigh(a);
    let top = e.max_abs_value();
    if top == 0.0 {
        return 0.0;
    }
    let sum: f64 = e.values.iter().map(|l| (l.abs() / top).powf(p)).sum();
    top * sum.powf(1.0 / p)
}

/// Spectral norm of a symmetric matrix.
pub fn op_norm(a: &Mat) -> f64 {
    eigh(a).max_abs_value()
}

/// `A^k` by repeated multiplication (`A^0 = I`).
pub fn int_pow(a: &Mat, k: u32) -> Mat {
    let mut out = Mat::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

/// Build a symmetric matrix from row-major entries.
pub fn from_rows(n: usize, entries: &[f64]) -> Mat {
    Mat::from_row_slice(n, n, entries)
}
