//! Numeric tolerances used throughout the crate.
//!
//! Every guard and every comparison in the test suite goes through a named
//! field of [`TOL`], so the acceptance thresholds live in one place.

/// Named numeric tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max-abs entry of `U^dagger U - I` for unitary matrices.
    pub unitary: f64,
    /// Relative Frobenius error of a spectral reconstruction.
    pub recon: f64,
    /// Relative Hermiticity guard, scaled by `1 + max|x_ij|`.
    pub herm: f64,
    /// Idempotency, symmetry and nesting of spectral projectors.
    pub projector: f64,
    /// Eigenvalues within this distance of a cutoff count as below it.
    pub tie: f64,
    /// Exact algebraic identities between cutoff operators.
    pub identity: f64,
    /// Lower bound on spectra after the canonical shift (`1 - spectrum_floor`).
    pub spectrum_floor: f64,
    /// Successive-panel agreement for composite Gauss-Legendre integration.
    pub quadrature: f64,
    /// Panel budget for composite Gauss-Legendre integration.
    pub quadrature_budget: usize,
    /// Relative size of `C_{m+1}` that counts as a vanished commutator.
    pub nilpotent: f64,
    /// Largest acceptable eigenvector condition number for non-normal spectral calculus.
    pub eigvec_condition: f64,
    /// Smallest value kept in log-log rate fits.
    pub fit_floor: f64,
    /// Iteration budget handed to the dense eigen/SVD/Schur solvers.
    pub solver_iterations: usize,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        unitary: 1e-10,
        recon: 1e-10,
        herm: 1e-12,
        projector: 1e-12,
        tie: 1e-12,
        identity: 1e-11,
        spectrum_floor: 1e-10,
        quadrature: 1e-9,
        quadrature_budget: 1 << 14,
        nilpotent: 1e-10,
        eigvec_condition: 1e6,
        fit_floor: 1e-13,
        solver_iterations: 200_000,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// The crate-wide tolerance record.
pub const TOL: Tolerances = Tolerances::DEFAULT;
