//! Test functions and the quasi-uniform seminorms
//! `||A||^{f,k} = max(||S^k A f(S)||, ||f(S) A S^k||)`.
//!
//! Both orderings are evaluated in the eigenbasis of `S`, where `S^k` and
//! `f(S)` are diagonal and the operator norm is unchanged.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{expm, operator_norm, power, OperatorMatrix, SpectralDecomposition};
use crate::models::{build_model, top_octave_variation, ModelInstance, ModelKind, ModelParams};
use crate::tolerance::TOL;

/// Positive, bounded, rapidly decreasing functions on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `e^{-alpha x}`
    Exponential { alpha: f64 },
    /// `e^{-alpha x^2}`
    Gaussian { alpha: f64 },
    /// `x^m e^{-alpha x}`
    PolyExp { m: u32, alpha: f64 },
}

impl TestFunction {
    pub fn exp(alpha: f64) -> Self {
        TestFunction::Exponential { alpha }
    }

    pub fn gauss(alpha: f64) -> Self {
        TestFunction::Gaussian { alpha }
    }

    pub fn poly_exp(m: u32, alpha: f64) -> Self {
        TestFunction::PolyExp { m, alpha }
    }

    /// `{e^{-x}, e^{-x^2}, x^2 e^{-x}}`
    pub fn default_set() -> Vec<TestFunction> {
        vec![Self::exp(1.0), Self::gauss(1.0), Self::poly_exp(2, 1.0)]
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            TestFunction::Exponential { alpha }
            | TestFunction::Gaussian { alpha }
            | TestFunction::PolyExp { alpha, .. } => alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::BadParams(format!("test function needs alpha > 0, got {alpha}")));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Exponential { alpha } => (-alpha * x).exp(),
            TestFunction::Gaussian { alpha } => (-alpha * x * x).exp(),
            TestFunction::PolyExp { m, alpha } => x.powi(m as i32) * (-alpha * x).exp(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TestFunction::Exponential { .. } => "exp",
            TestFunction::Gaussian { .. } => "gauss",
            TestFunction::PolyExp { .. } => "polyexp",
        }
    }

    /// `alpha=1` or `m=2;alpha=1`
    pub fn params_string(&self) -> String {
        match *self {
            TestFunction::Exponential { alpha } | TestFunction::Gaussian { alpha } => format!("alpha={alpha}"),
            TestFunction::PolyExp { m, alpha } => format!("m={m};alpha={alpha}"),
        }
    }

    /// `f(S)` by spectral calculus.
    pub fn on_spectrum(&self, s: &SpectralDecomposition) -> Result<OperatorMatrix> {
        s.apply(|x| self.eval(x).into())
    }

    /// `f(X)` for an arbitrary square `X` from exponentials of `X`, so that no
    /// eigenvector basis is needed: `e^{-aX}`, `e^{-aX^2}`, `X^m e^{-aX}`.
    pub fn on_matrix(&self, x: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.validate()?;
        let out = match *self {
            TestFunction::Exponential { alpha } => expm(&x.scale_real(-alpha)),
            TestFunction::Gaussian { alpha } => expm(&(x * x).scale_real(-alpha)),
            TestFunction::PolyExp { m, alpha } => power(x, m) * expm(&x.scale_real(-alpha)),
        };
        if !out.is_finite() {
            return Err(Error::NonFiniteValue { at: f64::NAN });
        }
        Ok(out)
    }

    /// `max_j lambda_j^k f(lambda_j)` over the spectrum.
    pub fn weighted_sup(&self, s: &SpectralDecomposition, k: u32) -> f64 {
        s.eigenvalues()
            .iter()
            .map(|&x| x.powi(k as i32) * self.eval(x))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind_name(), self.params_string())
    }
}

/// Which generator a seminorm is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    H0,
    H,
}

impl Reference {
    pub fn name(self) -> &'static str {
        match self {
            Reference::H0 => "H0",
            Reference::H => "H",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormValue {
    pub f: TestFunction,
    pub k: u32,
    pub reference: Reference,
    /// `||S^k A f(S)||`
    pub left: f64,
    /// `||f(S) A S^k||`
    pub right: f64,
    pub value: f64,
}

/// A generator prepared for repeated seminorm evaluation.
#[derive(Debug, Clone)]
pub struct Seminorm<'a> {
    spectrum: &'a SpectralDecomposition,
    reference: Reference,
    symmetric_shortcut: bool,
}

impl<'a> Seminorm<'a> {
    pub fn new(spectrum: &'a SpectralDecomposition, reference: Reference) -> Result<Self> {
        if spectrum.min() < 1.0 - TOL.spectrum_floor {
            return Err(Error::SpectrumBelowOne { min: spectrum.min() });
        }
        Ok(Self {
            spectrum,
            reference,
            symmetric_shortcut: false,
        })
    }

    /// For Hermitian `A` evaluate only `||f(S) A S^k||`, which equals the other ordering.
    pub fn symmetric_shortcut(mut self, on: bool) -> Self {
        self.symmetric_shortcut = on;
        self
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        self.spectrum
    }

    /// `A` in the eigenbasis of `S`.
    pub fn prepare(&self, a: &OperatorMatrix) -> Result<PreparedObservable> {
        if a.dim() != self.spectrum.dim() {
            return Err(Error::DimensionMismatch {
                left: a.dim(),
                right: self.spectrum.dim(),
            });
        }
        Ok(PreparedObservable {
            rotated: self.spectrum.to_eigenbasis(a),
            hermitian: a.is_hermitian(),
        })
    }

    pub fn eval(&self, a: &OperatorMatrix, f: &TestFunction, k: u32) -> Result<SeminormValue> {
        self.eval_prepared(&self.prepare(a)?, f, k)
    }

    pub fn eval_prepared(&self, a: &PreparedObservable, f: &TestFunction, k: u32) -> Result<SeminormValue> {
        f.validate()?;
        let ev = self.spectrum.eigenvalues();
        let pow: Vec<f64> = ev.iter().map(|x| x.powi(k as i32)).collect();
        let fv: Vec<f64> = ev.iter().map(|&x| f.eval(x)).collect();
        let right = operator_norm(&a.rotated.scale_rows_cols(&fv, &pow))?;
        let left = if self.symmetric_shortcut && a.hermitian {
            right
        } else {
            operator_norm(&a.rotated.scale_rows_cols(&pow, &fv))?
        };
        Ok(SeminormValue {
            f: *f,
            k,
            reference: self.reference,
            left,
            right,
            value: left.max(right),
        })
    }

    /// All `(f, k)` pairs with `k = 0..=k_max`, functions outermost.
    pub fn grid(&self, a: &OperatorMatrix, f_set: &[TestFunction], k_max: u32) -> Result<Vec<SeminormValue>> {
        if f_set.is_empty() {
            return Err(Error::BadParams("empty test-function set".into()));
        }
        let prepared = self.prepare(a)?;
        let mut out = Vec::with_capacity(f_set.len() * (k_max as usize + 1));
        for f in f_set {
            for k in 0..=k_max {
                out.push(self.eval_prepared(&prepared, f, k)?);
            }
        }
        Ok(out)
    }
}

/// An observable rotated into a generator's eigenbasis.
#[derive(Debug, Clone)]
pub struct PreparedObservable {
    rotated: OperatorMatrix,
    hermitian: bool,
}

/// `||A||^{f,k}` with respect to `S`, taken as the `H0` reference.
pub fn quasi_uniform_seminorm(
    a: &OperatorMatrix,
    s: &SpectralDecomposition,
    f: &TestFunction,
    k: u32,
) -> Result<SeminormValue> {
    Seminorm::new(s, Reference::H0)?.eval(a, f, k)
}

pub fn seminorm_grid(
    a: &OperatorMatrix,
    s: &SpectralDecomposition,
    f_set: &[TestFunction],
    k_max: u32,
) -> Result<Vec<SeminormValue>> {
    Seminorm::new(s, Reference::H0)?.grid(a, f_set, k_max)
}

/// Finite-dimensional comparison of the `H0`- and `H`-seminorm families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceProfile {
    pub k: u32,
    /// Smallest exponent tried that kept both profiles bounded, else the last tried.
    pub ell: u32,
    pub bounded: bool,
    /// `(dim, ||H^k H0^{-ell}||, ||H0^k H^{-ell}||)`
    pub rows: Vec<(usize, f64, f64)>,
}

/// Relative variation below which a profile counts as bounded.
pub const BOUNDED_VARIATION: f64 = 0.1;

/// `(||H^k H0^{-ell}||, ||H0^k H^{-ell}||)` at the model's dimension.
pub fn equivalence_at(m: &ModelInstance, k: u32, ell: u32) -> Result<(f64, f64)> {
    let (hs, _) = m.shifted_h_spectrum()?;
    let h0s = m.h0_spectrum();
    let left = operator_norm(&(hs.int_power(k as i32)? * h0s.int_power(-(ell as i32))?))?;
    let right = operator_norm(&(h0s.int_power(k as i32)? * hs.int_power(-(ell as i32))?))?;
    Ok((left, right))
}

/// Searches `ell = 0..=k+4` for the first exponent with bounded profiles over `dims`.
pub fn equivalence_profile(
    kind: ModelKind,
    params: &ModelParams,
    k: u32,
    dims: &[usize],
) -> Result<EquivalenceProfile> {
    let models: Vec<ModelInstance> = dims
        .iter()
        .map(|&d| build_model(kind, d, params))
        .collect::<Result<_>>()?;
    let mut last = None;
    for ell in 0..=k + 4 {
        let rows: Vec<(usize, f64, f64)> = models
            .iter()
            .map(|m| equivalence_at(m, k, ell).map(|(l, r)| (m.dim, l, r)))
            .collect::<Result<_>>()?;
        let left: Vec<(usize, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
        let right: Vec<(usize, f64)> = rows.iter().map(|r| (r.0, r.2)).collect();
        let bounded =
            top_octave_variation(&left) < BOUNDED_VARIATION && top_octave_variation(&right) < BOUNDED_VARIATION;
        let profile = EquivalenceProfile { k, ell, bounded, rows };
        if bounded {
            return Ok(profile);
        }
        last = Some(profile);
    }
    Ok(last.unwrap())
}
