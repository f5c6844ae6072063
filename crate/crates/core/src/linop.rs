//! Dense complex operator arithmetic on a truncated Hilbert space.
//!
//! [`OperatorMatrix`] is a thin newtype over a square `DMatrix<C64>`. Spectral
//! calculus goes through [`SpectralDecomposition`], propagators through
//! [`Propagation`], which picks the spectral route for Hermitian generators and
//! Padé scaling-and-squaring otherwise.

use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::TOL;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

/// A square complex matrix acting on a `dim`-dimensional truncation.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct OperatorMatrix(DMatrix<C64>);

/// Wire format: `{dim, entries: [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl TryFrom<MatrixRepr> for OperatorMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        if r.dim == 0 {
            return Err(Error::BadDimension {
                dim: 0,
                reason: "dimension must be positive".into(),
            });
        }
        if r.entries.len() != r.dim * r.dim {
            return Err(Error::BadDimension {
                dim: r.dim,
                reason: format!("expected {} entries, found {}", r.dim * r.dim, r.entries.len()),
            });
        }
        let d = r.dim;
        Ok(Self(DMatrix::from_fn(d, d, |i, j| {
            let [re, im] = r.entries[i * d + j];
            C64::new(re, im)
        })))
    }
}

impl From<OperatorMatrix> for MatrixRepr {
    fn from(m: OperatorMatrix) -> Self {
        let d = m.dim();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = m.0[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        MatrixRepr { dim: d, entries }
    }
}

impl fmt::Debug for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "OperatorMatrix({}x{}) {:?}",
            self.dim(),
            self.dim(),
            self.0.as_slice()
        )
    }
}

/// Result of a Hermiticity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiticityReport {
    pub is_hermitian: bool,
    /// `max |X - X^dagger|`
    pub defect: f64,
}

impl OperatorMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::BadDimension {
                dim: 0,
                reason: "dimension must be positive".into(),
            });
        }
        Ok(Self(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self::from_fn(d, |i, j| if i == j { C64::from(diag[i]) } else { ZERO })
    }

    pub fn from_complex_diagonal(diag: &[C64]) -> Self {
        let d = diag.len();
        Self::from_fn(d, |i, j| if i == j { diag[i] } else { ZERO })
    }

    /// Builds a matrix from row slices of real numbers.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::NotSquare {
                rows: d,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| C64::from(rows[i][j])))
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        let d = u.len();
        Self::from_fn(d, |i, j| u[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::from(c))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |self - other|`, panicking on a dimension mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity(&self) -> HermiticityReport {
        let d = self.dim();
        let mut defect: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                defect = defect.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        HermiticityReport {
            is_hermitian: defect <= TOL.herm * (1.0 + self.max_abs()),
            defect,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity().is_hermitian
    }

    /// Checked product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.0 * v
    }

    pub fn column(&self, j: usize) -> DVector<C64> {
        self.0.column(j).into_owned()
    }

    /// Top-left `dim x dim` block.
    pub fn compress(&self, dim: usize) -> Self {
        assert!(dim <= self.dim());
        Self(self.0.view((0, 0), (dim, dim)).into_owned())
    }

    /// Multiplies row `i` by `left[i]` and column `j` by `right[j]`.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Self {
        let d = self.dim();
        Self::from_fn(d, |i, j| self.0[(i, j)] * (left[i] * right[j]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn same_dim(x: &OperatorMatrix, y: &OperatorMatrix) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(())
}

impl Index<(usize, usize)> for OperatorMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&OperatorMatrix> for &OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: &OperatorMatrix) -> OperatorMatrix {
                assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
                OperatorMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $tr<OperatorMatrix> for OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: OperatorMatrix) -> OperatorMatrix {
                &self $op &rhs
            }
        }
        impl $tr<&OperatorMatrix> for OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: &OperatorMatrix) -> OperatorMatrix {
                &self $op rhs
            }
        }
        impl $tr<OperatorMatrix> for &OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: OperatorMatrix) -> OperatorMatrix {
                self $op &rhs
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl AddAssign<&OperatorMatrix> for OperatorMatrix {
    fn add_assign(&mut self, rhs: &OperatorMatrix) {
        self.0 += &rhs.0;
    }
}

impl Neg for OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        OperatorMatrix(-self.0)
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        OperatorMatrix(-&self.0)
    }
}

pub fn adjoint(x: &OperatorMatrix) -> OperatorMatrix {
    x.adjoint()
}

/// `XY - YX`
pub fn commutator(x: &OperatorMatrix, y: &OperatorMatrix) -> Result<OperatorMatrix> {
    same_dim(x, y)?;
    Ok(OperatorMatrix(&x.0 * &y.0 - &y.0 * &x.0))
}

/// `XY + YX`
pub fn anticommutator(x: &OperatorMatrix, y: &OperatorMatrix) -> Result<OperatorMatrix> {
    same_dim(x, y)?;
    Ok(OperatorMatrix(&x.0 * &y.0 + &y.0 * &x.0))
}

/// `X^k` by repeated squaring; `X^0 = I`.
pub fn power(x: &OperatorMatrix, k: u32) -> OperatorMatrix {
    let mut result: Option<DMatrix<C64>> = None;
    let mut base = x.0.clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r * &base,
            });
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result.map_or_else(|| OperatorMatrix::identity(x.dim()), OperatorMatrix)
}

/// Largest singular value.
pub fn operator_norm(x: &OperatorMatrix) -> Result<f64> {
    let svd = SVD::try_new(x.0.clone(), false, false, f64::EPSILON, TOL.solver_iterations)
        .ok_or(Error::ConvergenceFailure { what: "SVD" })?;
    Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
}

/// Singular values in descending order.
pub fn singular_values(x: &OperatorMatrix) -> Result<Vec<f64>> {
    let svd = SVD::try_new(x.0.clone(), false, false, f64::EPSILON, TOL.solver_iterations)
        .ok_or(Error::ConvergenceFailure { what: "SVD" })?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: OperatorMatrix,
}

impl SpectralDecomposition {
    /// Assembles a decomposition from parts; `eigenvectors` must be unitary.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: OperatorMatrix) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.dim() {
            return Err(Error::DimensionMismatch {
                left: eigenvalues.len(),
                right: eigenvectors.dim(),
            });
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// The spectral decomposition of a real diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let d = values.len();
        let vecs = OperatorMatrix::from_fn(d, |i, j| if idx[j] == i { ONE } else { ZERO });
        Self {
            eigenvalues: idx.iter().map(|&i| values[i]).collect(),
            eigenvectors: vecs,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &OperatorMatrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, j: usize) -> DVector<C64> {
        self.eigenvectors.column(j)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// `U Λ U^dagger`
    pub fn reconstruct(&self) -> OperatorMatrix {
        self.from_eigenbasis_diagonal(&self.eigenvalues.iter().map(|&x| C64::from(x)).collect::<Vec<_>>())
    }

    /// `U diag(values) U^dagger`
    pub fn from_eigenbasis_diagonal(&self, values: &[C64]) -> OperatorMatrix {
        let u = &self.eigenvectors.0;
        let mut scaled = u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[j];
        }
        OperatorMatrix(scaled * u.adjoint())
    }

    /// `U^dagger A U`
    pub fn to_eigenbasis(&self, a: &OperatorMatrix) -> OperatorMatrix {
        let u = &self.eigenvectors.0;
        OperatorMatrix(u.adjoint() * &a.0 * u)
    }

    /// `U A U^dagger`
    pub fn from_eigenbasis(&self, a: &OperatorMatrix) -> OperatorMatrix {
        let u = &self.eigenvectors.0;
        OperatorMatrix(u * &a.0 * u.adjoint())
    }

    pub fn apply(&self, phi: impl Fn(f64) -> C64) -> Result<OperatorMatrix> {
        matrix_function(self, phi)
    }

    /// `S^p` for real `p`; negative powers require a positive spectrum.
    pub fn real_power(&self, p: f64) -> Result<OperatorMatrix> {
        if p < 0.0 && self.min() <= 0.0 {
            return Err(Error::NonFiniteValue { at: self.min() });
        }
        matrix_function(self, |x| C64::from(x.powf(p)))
    }

    /// `S^k` for integer `k >= 0`, exact on diagonal inputs.
    pub fn int_power(&self, k: i32) -> Result<OperatorMatrix> {
        if k < 0 && self.min() <= 0.0 {
            return Err(Error::NonFiniteValue { at: self.min() });
        }
        matrix_function(self, |x| C64::from(x.powi(k)))
    }

    /// Returns `max|U^dagger U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let u = &self.eigenvectors.0;
        let g = OperatorMatrix(u.adjoint() * u);
        g.max_abs_diff(&OperatorMatrix::identity(self.dim()))
    }
}

/// Spectral decomposition of a Hermitian matrix.
pub fn hermitian_eig(x: &OperatorMatrix) -> Result<SpectralDecomposition> {
    let report = x.hermiticity();
    if !report.is_hermitian {
        return Err(Error::NotHermitian { defect: report.defect });
    }
    let sym = (&x.0 + x.0.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, TOL.solver_iterations).ok_or(Error::ConvergenceFailure {
        what: "Hermitian eigensolver",
    })?;
    let d = x.dim();
    let mut order: Vec<usize> = (0..d).collect();
    // stable: degenerate eigenvalues keep solver order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: OperatorMatrix(vecs),
    })
}

/// `U diag(phi(λ_1), ..., phi(λ_d)) U^dagger`.
pub fn matrix_function(s: &SpectralDecomposition, phi: impl Fn(f64) -> C64) -> Result<OperatorMatrix> {
    let mut values = Vec::with_capacity(s.dim());
    for &x in s.eigenvalues() {
        let v = phi(x);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFiniteValue { at: x });
        }
        values.push(v);
    }
    Ok(s.from_eigenbasis_diagonal(&values))
}

/// Eigen-data of a general (possibly non-normal) matrix.
#[derive(Clone, Debug)]
pub struct GeneralEigen {
    pub eigenvalues: Vec<C64>,
    /// Unit-norm eigenvectors as columns.
    pub eigenvectors: OperatorMatrix,
    /// 2-norm condition number of the eigenvector matrix.
    pub condition: f64,
}

/// Eigendecomposition of a general square matrix through its complex Schur form.
pub fn general_eig(x: &OperatorMatrix) -> Result<GeneralEigen> {
    let d = x.dim();
    let schur = Schur::try_new(x.0.clone(), f64::EPSILON, TOL.solver_iterations)
        .ok_or(Error::ConvergenceFailure { what: "Schur" })?;
    let (q, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut y = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let lambda = t[(k, k)];
        y[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < small {
                denom = C64::from(small);
            }
            y[(i, k)] = -acc / denom;
        }
    }
    let mut v = q * y;
    for mut col in v.column_iter_mut() {
        let n = col.norm();
        col /= C64::from(n);
    }
    let sv = SVD::try_new(v.clone(), false, false, f64::EPSILON, TOL.solver_iterations)
        .ok_or(Error::ConvergenceFailure { what: "SVD" })?;
    let smax = sv.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = sv.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok(GeneralEigen {
        eigenvalues: (0..d).map(|k| t[(k, k)]).collect(),
        eigenvectors: OperatorMatrix(v),
        condition,
    })
}

/// `V phi(Λ) V^{-1}` for a diagonalizable matrix; refuses eigenvector bases
/// with condition number at or above `TOL.eigvec_condition`.
pub fn matrix_function_general(x: &OperatorMatrix, phi: impl Fn(C64) -> C64) -> Result<OperatorMatrix> {
    let eig = general_eig(x)?;
    if !(eig.condition < TOL.eigvec_condition) {
        return Err(Error::NonDiagonalizable {
            condition: eig.condition,
        });
    }
    let v = eig.eigenvectors.0;
    let vinv = v.clone().try_inverse().ok_or(Error::NonDiagonalizable {
        condition: f64::INFINITY,
    })?;
    let mut scaled = v;
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let val = phi(eig.eigenvalues[j]);
        if !(val.re.is_finite() && val.im.is_finite()) {
            return Err(Error::NonFiniteValue {
                at: eig.eigenvalues[j].re,
            });
        }
        col *= val;
    }
    Ok(OperatorMatrix(scaled * vinv))
}

/// Matrix exponential `e^X` by Padé scaling-and-squaring.
pub fn expm(x: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix(x.0.exp())
}

/// How a propagator was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagatorPath {
    /// Spectral calculus on a Hermitian generator; the result is unitary.
    Spectral,
    /// Scaling-and-squaring on a non-Hermitian generator; no unitarity guarantee.
    ScalingSquaring,
}

#[derive(Debug, Clone)]
pub struct Propagator {
    pub matrix: OperatorMatrix,
    pub path: PropagatorPath,
}

/// A generator `H` prepared for repeated evaluation of `e^{iHt}`.
#[derive(Debug, Clone)]
pub struct Propagation {
    generator: OperatorMatrix,
    spectral: Option<SpectralDecomposition>,
}

impl Propagation {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        let spectral = if h.is_hermitian() {
            Some(hermitian_eig(h)?)
        } else {
            None
        };
        Ok(Self {
            generator: h.clone(),
            spectral,
        })
    }

    pub fn generator(&self) -> &OperatorMatrix {
        &self.generator
    }

    pub fn spectral(&self) -> Option<&SpectralDecomposition> {
        self.spectral.as_ref()
    }

    pub fn path(&self) -> PropagatorPath {
        if self.spectral.is_some() {
            PropagatorPath::Spectral
        } else {
            PropagatorPath::ScalingSquaring
        }
    }

    /// `e^{iHt}`
    pub fn at(&self, t: f64) -> Propagator {
        let path = self.path();
        if t == 0.0 {
            return Propagator {
                matrix: OperatorMatrix::identity(self.generator.dim()),
                path,
            };
        }
        let matrix = match &self.spectral {
            Some(s) => {
                let phases: Vec<C64> = s.eigenvalues().iter().map(|&x| (I * (x * t)).exp()).collect();
                s.from_eigenbasis_diagonal(&phases)
            }
            None => expm(&self.generator.scale(I * t)),
        };
        Propagator { matrix, path }
    }

    pub fn unitary(&self, t: f64) -> OperatorMatrix {
        self.at(t).matrix
    }
}

/// `e^{iHt}`, spectral for Hermitian `H`, scaling-and-squaring otherwise.
pub fn propagator(h: &OperatorMatrix, t: f64) -> Result<Propagator> {
    Ok(Propagation::new(h)?.at(t))
}
