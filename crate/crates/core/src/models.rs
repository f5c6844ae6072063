//! Catalog of truncated `(H0, B)` pairs and finite-dimensional domain diagnostics.
//!
//! Polynomials in the ladder operators are built as exact Fock matrix elements:
//! the product is formed on a padded space and compressed back, so that for
//! instance `p^2 + q^2` is exactly `diag(1, 3, 5, ...)` with no corner defect.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{
    hermitian_eig, matrix_function, operator_norm, power, OperatorMatrix, SpectralDecomposition, C64, I, ONE, ZERO,
};
use crate::tolerance::TOL;

/// Annihilation operator `a` and its adjoint on a `dim`-level truncation.
pub fn fock_ladder(dim: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if dim < 2 {
        return Err(Error::BadDimension {
            dim,
            reason: "ladder operators need dim >= 2".into(),
        });
    }
    let a = OperatorMatrix::from_fn(dim, |i, j| if j == i + 1 { C64::from((j as f64).sqrt()) } else { ZERO });
    let ad = a.adjoint();
    Ok((a, ad))
}

/// Exact Fock matrix elements of a ladder polynomial of degree at most `pad`.
pub fn galerkin(
    dim: usize,
    pad: usize,
    build: impl FnOnce(&OperatorMatrix, &OperatorMatrix) -> OperatorMatrix,
) -> Result<OperatorMatrix> {
    let (a, ad) = fock_ladder(dim + pad)?;
    Ok(build(&a, &ad).compress(dim))
}

/// `q = (a + a^dagger)/sqrt 2`
pub fn position(dim: usize) -> Result<OperatorMatrix> {
    let (a, ad) = fock_ladder(dim)?;
    Ok((a + ad).scale_real(std::f64::consts::FRAC_1_SQRT_2))
}

/// `p = i(a^dagger - a)/sqrt 2`
pub fn momentum(dim: usize) -> Result<OperatorMatrix> {
    let (a, ad) = fock_ladder(dim)?;
    Ok((ad - a).scale(I * std::f64::consts::FRAC_1_SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// `H0 = a^dagger a + 1`, `B = a^n`
    #[serde(rename = "number-aN")]
    NumberAN,
    /// `H0 = a^dagger a + 1`, `B = g (a^n + a^dagger^n)`
    #[serde(rename = "number-aN-sym")]
    NumberANSym,
    /// `H0 = p^2 + q^2`, `B = alpha q`
    #[serde(rename = "oscillator-linear")]
    OscillatorLinear,
    /// `H0 = p^2 + q^2`, `B = -q^2`
    #[serde(rename = "oscillator-minus-q2")]
    OscillatorMinusQ2,
    /// `H0 = a^dagger a + 1`, `B = |f><f|`
    #[serde(rename = "rank-one")]
    RankOne,
    /// `H0 = a^dagger a + 1`, `B = c / H0`
    #[serde(rename = "commuting")]
    Commuting,
    /// Hand-assembled pair outside the catalog.
    #[serde(rename = "custom")]
    Custom,
}

impl ModelKind {
    pub const CATALOG: [ModelKind; 6] = [
        ModelKind::NumberAN,
        ModelKind::NumberANSym,
        ModelKind::OscillatorLinear,
        ModelKind::OscillatorMinusQ2,
        ModelKind::RankOne,
        ModelKind::Commuting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NumberAN => "number-aN",
            ModelKind::NumberANSym => "number-aN-sym",
            ModelKind::OscillatorLinear => "oscillator-linear",
            ModelKind::OscillatorMinusQ2 => "oscillator-minus-q2",
            ModelKind::RankOne => "rank-one",
            ModelKind::Commuting => "commuting",
            ModelKind::Custom => "custom",
        }
    }

    /// Short label, `M1` ... `M5`.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::NumberAN => "M1",
            ModelKind::NumberANSym => "M1s",
            ModelKind::OscillatorLinear => "M2",
            ModelKind::OscillatorMinusQ2 => "M3",
            ModelKind::RankOne => "M4",
            ModelKind::Commuting => "M5",
            ModelKind::Custom => "custom",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelKind::NumberAN => "H0 = a^dagger a + 1, B = a^n (non-Hermitian B)",
            ModelKind::NumberANSym => "H0 = a^dagger a + 1, B = g (a^n + a^dagger^n)",
            ModelKind::OscillatorLinear => "H0 = p^2 + q^2, B = alpha q",
            ModelKind::OscillatorMinusQ2 => "H0 = p^2 + q^2, B = -q^2",
            ModelKind::RankOne => "H0 = a^dagger a + 1, B = projection onto f with f_n ~ 1/(n+1)",
            ModelKind::Commuting => "H0 = a^dagger a + 1, B = c / H0",
            ModelKind::Custom => "hand-assembled pair",
        }
    }

    /// True for models whose `H0` is the shifted number operator.
    pub fn is_number_model(self) -> bool {
        matches!(
            self,
            ModelKind::NumberAN | ModelKind::NumberANSym | ModelKind::RankOne | ModelKind::Commuting
        )
    }

    pub fn params(self) -> Vec<ParamSpec> {
        let p = |name: &'static str, kind: &'static str, default: f64, doc: &'static str| ParamSpec {
            name,
            kind,
            default,
            doc,
        };
        match self {
            ModelKind::NumberAN => vec![p("n", "integer", 2.0, "power of a, 1 <= n < dim")],
            ModelKind::NumberANSym => vec![
                p("n", "integer", 2.0, "power of a, 1 <= n < dim"),
                p("coupling", "real", DEFAULT_COUPLING, "prefactor g"),
            ],
            ModelKind::OscillatorLinear => vec![p("alpha", "real", 1.0, "coefficient of q")],
            ModelKind::Commuting => vec![p("c", "real", DEFAULT_COMMUTING_C, "B = c / H0")],
            ModelKind::OscillatorMinusQ2 | ModelKind::RankOne | ModelKind::Custom => vec![],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::CATALOG
            .into_iter()
            .find(|k| k.name() == s || k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

pub const DEFAULT_N: usize = 2;
pub const DEFAULT_COUPLING: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_COMMUTING_C: f64 = 0.5;

/// One tunable parameter of a catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

/// Catalog listing entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub label: &'static str,
    pub description: &'static str,
    pub b_hermitian: bool,
    pub params: Vec<ParamSpec>,
}

pub fn catalog() -> Vec<CatalogEntry> {
    ModelKind::CATALOG
        .into_iter()
        .map(|k| CatalogEntry {
            name: k.name(),
            label: k.label(),
            description: k.description(),
            b_hermitian: k != ModelKind::NumberAN,
            params: k.params(),
        })
        .collect()
}

/// Optional overrides; unset fields take the catalog defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl ModelParams {
    pub fn with_n(n: usize) -> Self {
        Self {
            n: Some(n),
            ..Self::default()
        }
    }

    pub fn with_coupling(n: usize, coupling: f64) -> Self {
        Self {
            n: Some(n),
            coupling: Some(coupling),
            ..Self::default()
        }
    }

    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha: Some(alpha),
            ..Self::default()
        }
    }

    pub fn with_c(c: f64) -> Self {
        Self {
            c: Some(c),
            ..Self::default()
        }
    }

    fn resolve(&self, kind: ModelKind, dim: usize) -> Result<ModelParams> {
        let allowed: Vec<&str> = kind.params().iter().map(|p| p.name).collect();
        for (name, set) in [
            ("n", self.n.is_some()),
            ("coupling", self.coupling.is_some()),
            ("alpha", self.alpha.is_some()),
            ("c", self.c.is_some()),
        ] {
            if set && !allowed.contains(&name) {
                return Err(Error::BadParams(format!("parameter `{name}` is not used by `{kind}`")));
            }
        }
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::BadParams(format!("parameter `{name}` must be finite")))
            }
        };
        let mut out = ModelParams::default();
        if allowed.contains(&"n") {
            let n = self.n.unwrap_or(DEFAULT_N);
            if n == 0 || n >= dim {
                return Err(Error::BadParams(format!("n = {n} must satisfy 1 <= n < dim = {dim}")));
            }
            out.n = Some(n);
        }
        if allowed.contains(&"coupling") {
            out.coupling = Some(finite("coupling", self.coupling.unwrap_or(DEFAULT_COUPLING))?);
        }
        if allowed.contains(&"alpha") {
            out.alpha = Some(finite("alpha", self.alpha.unwrap_or(DEFAULT_ALPHA))?);
        }
        if allowed.contains(&"c") {
            out.c = Some(finite("c", self.c.unwrap_or(DEFAULT_COMMUTING_C))?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetadata {
    pub description: String,
    pub b_hermitian: bool,
    pub notes: Vec<String>,
}

/// A truncated `(H0, B)` pair with `H0 >= 1`.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub kind: ModelKind,
    pub dim: usize,
    pub params: ModelParams,
    pub h0: OperatorMatrix,
    pub b: OperatorMatrix,
    /// Added to the raw `H0` to reach a spectrum starting at 1.
    pub shift: f64,
    pub metadata: ModelMetadata,
    h0_spectrum: SpectralDecomposition,
}

pub fn build_model(kind: ModelKind, dim: usize, params: &ModelParams) -> Result<ModelInstance> {
    if kind == ModelKind::Custom {
        return Err(Error::UnknownModel("custom".into()));
    }
    if dim < 4 {
        return Err(Error::BadDimension {
            dim,
            reason: "catalog models need dim >= 4".into(),
        });
    }
    let params = params.resolve(kind, dim)?;
    let (a, ad) = fock_ladder(dim)?;
    let number_levels: Vec<f64> = (0..dim).map(|j| j as f64).collect();
    let oscillator_levels: Vec<f64> = (0..dim).map(|j| (2 * j + 1) as f64).collect();
    let mut notes = Vec::new();

    let (raw_levels, b) = match kind {
        ModelKind::NumberAN => {
            let n = params.n.unwrap();
            (number_levels, power(&a, n as u32))
        }
        ModelKind::NumberANSym => {
            let n = params.n.unwrap() as u32;
            let g = params.coupling.unwrap();
            if n >= 3 && g != 0.0 {
                notes.push("H is unbounded below in the untruncated limit (n >= 3)".into());
            } else if n == 2 && g.abs() >= 0.5 {
                notes.push("H is not bounded below in the untruncated limit (|g| >= 1/2)".into());
            }
            (number_levels, (power(&a, n) + power(&ad, n)).scale_real(g))
        }
        ModelKind::OscillatorLinear => {
            let alpha = params.alpha.unwrap();
            (oscillator_levels, position(dim)?.scale_real(alpha))
        }
        ModelKind::OscillatorMinusQ2 => {
            let q2 = galerkin(dim, 2, |a, ad| {
                let q = (a + ad).scale_real(std::f64::consts::FRAC_1_SQRT_2);
                &q * &q
            })?;
            (oscillator_levels, -q2)
        }
        ModelKind::RankOne => {
            let raw: Vec<f64> = (0..dim).map(|j| 1.0 / (j + 1) as f64).collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let f: Vec<C64> = raw.iter().map(|x| C64::from(x / norm)).collect();
            (number_levels, OperatorMatrix::outer(&f, &f))
        }
        ModelKind::Commuting => {
            let c = params.c.unwrap();
            let g: Vec<f64> = (0..dim).map(|j| c / (j + 1) as f64).collect();
            (number_levels, OperatorMatrix::from_diagonal(&g))
        }
        ModelKind::Custom => unreachable!(),
    };
    let min = raw_levels.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 1.0 { 1.0 - min } else { 0.0 };
    let levels: Vec<f64> = raw_levels.iter().map(|x| x + shift).collect();
    let metadata = ModelMetadata {
        description: kind.description().to_string(),
        b_hermitian: b.is_hermitian(),
        notes,
    };
    Ok(ModelInstance {
        kind,
        dim,
        params,
        h0: OperatorMatrix::from_diagonal(&levels),
        b,
        shift,
        metadata,
        h0_spectrum: SpectralDecomposition::diagonal(&levels),
    })
}

/// Builds a catalog model by name or label.
pub fn build_named(name: &str, dim: usize, params: &ModelParams) -> Result<ModelInstance> {
    build_model(name.parse()?, dim, params)
}

impl ModelInstance {
    /// A pair outside the catalog. `h0` must be Hermitian with spectrum `>= 1`.
    pub fn custom(description: &str, h0: OperatorMatrix, b: OperatorMatrix, shift: f64) -> Result<Self> {
        if h0.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                left: h0.dim(),
                right: b.dim(),
            });
        }
        let spectrum = hermitian_eig(&h0)?;
        if spectrum.min() < 1.0 - TOL.spectrum_floor {
            return Err(Error::SpectrumBelowOne { min: spectrum.min() });
        }
        Ok(Self {
            kind: ModelKind::Custom,
            dim: h0.dim(),
            params: ModelParams::default(),
            metadata: ModelMetadata {
                description: description.to_string(),
                b_hermitian: b.is_hermitian(),
                notes: vec![],
            },
            h0,
            b,
            shift,
            h0_spectrum: spectrum,
        })
    }

    /// A non-Hermitian pair with a nilpotent commutator chain: `H0 = a^dagger a + 1`
    /// and `B = -H0 + eps a`, so that `H = eps a` is strictly upper triangular.
    pub fn nilpotent_fixture(dim: usize, eps: f64) -> Result<Self> {
        let (a, ad) = fock_ladder(dim)?;
        let h0 = &ad * &a + OperatorMatrix::identity(dim);
        let b = a.scale_real(eps) - &h0;
        Self::custom("H0 = a^dagger a + 1, B = -H0 + eps a (nilpotent H)", h0, b, 1.0)
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn h0_spectrum(&self) -> &SpectralDecomposition {
        &self.h0_spectrum
    }

    /// `H = H0 + B`
    pub fn h(&self) -> OperatorMatrix {
        &self.h0 + &self.b
    }

    pub fn b_is_hermitian(&self) -> bool {
        self.metadata.b_hermitian
    }

    pub fn ladder(&self) -> (OperatorMatrix, OperatorMatrix) {
        fock_ladder(self.dim).expect("dim >= 2")
    }

    /// The power `n` of the number models' perturbation.
    pub fn n(&self) -> Option<usize> {
        self.params.n
    }

    /// Spectral decomposition of `H`, rejecting non-Hermitian perturbations.
    pub fn h_spectrum(&self) -> Result<SpectralDecomposition> {
        if !self.b_is_hermitian() {
            return Err(Error::NotHermitianH {
                model: self.name().into(),
            });
        }
        hermitian_eig(&self.h())
    }

    /// Spectral decomposition of `H + s I` with `s = max(0, 1 - min spec H)`, and `s`.
    pub fn shifted_h_spectrum(&self) -> Result<(SpectralDecomposition, f64)> {
        let s = self.h_spectrum()?;
        let shift = if s.min() < 1.0 { 1.0 - s.min() } else { 0.0 };
        let values = s.eigenvalues().iter().map(|x| x + shift).collect();
        Ok((
            SpectralDecomposition::from_parts(values, s.eigenvectors().clone())?,
            shift,
        ))
    }

    /// Eigenvalue of `H0` carrying the unshifted label `l`.
    pub fn level(&self, l: usize) -> f64 {
        l as f64 + self.shift
    }
}

/// Sampled relative bound `a(lambda) = ||B (H0 - i lambda)^{-1}||`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeBoundEstimate {
    pub a_values: Vec<(f64, f64)>,
    pub a_inf: f64,
    /// `b` such that `||B phi|| <= a_inf ||H0 phi|| + b ||phi||` on the truncation.
    pub b_witness: f64,
}

pub fn relative_bound_profile(m: &ModelInstance, lambda_grid: &[f64]) -> Result<RelativeBoundEstimate> {
    relative_bound_of(m.h0_spectrum(), &m.b, lambda_grid)
}

/// Relative bound of an arbitrary `B` against the Hermitian operator with spectrum `s`.
pub fn relative_bound_of(
    s: &SpectralDecomposition,
    b: &OperatorMatrix,
    lambda_grid: &[f64],
) -> Result<RelativeBoundEstimate> {
    if lambda_grid.is_empty() {
        return Err(Error::BadParams("empty lambda grid".into()));
    }
    if lambda_grid.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadParams(
            "lambda grid must be positive and strictly ascending".into(),
        ));
    }
    let mut a_values = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        if s.eigenvalues().iter().any(|&x| C64::new(x, -lambda).norm() == 0.0) {
            return Err(Error::SingularResolvent { lambda });
        }
        let resolvent = matrix_function(s, |x| ONE / C64::new(x, -lambda))?;
        a_values.push((lambda, operator_norm(&(b * &resolvent))?));
    }
    let (lambda_max, a_inf) = *a_values.last().unwrap();
    Ok(RelativeBoundEstimate {
        a_inf,
        b_witness: a_inf * lambda_max,
        a_values,
    })
}

/// `C(dim) = ||H0^k H^{-l}||` over truncation dimensions, `H` shifted to spectrum `>= 1`.
pub fn cross_bound_profile(
    kind: ModelKind,
    params: &ModelParams,
    k: u32,
    l: u32,
    dims: &[usize],
) -> Result<Vec<(usize, f64)>> {
    dims.iter()
        .map(|&d| {
            let m = build_model(kind, d, params)?;
            Ok((d, cross_bound_at(&m, k, l)?))
        })
        .collect()
}

/// `||H0^k H^{-l}||` at the model's own dimension.
pub fn cross_bound_at(m: &ModelInstance, k: u32, l: u32) -> Result<f64> {
    let (hs, _) = m.shifted_h_spectrum()?;
    let h_inv = hs.int_power(-(l as i32))?;
    let h0k = m.h0_spectrum().int_power(k as i32)?;
    operator_norm(&(h0k * h_inv))
}

/// Relative spread `(max - min)/min` of a profile over its top octave `[d_max/2, d_max]`.
pub fn top_octave_variation(profile: &[(usize, f64)]) -> f64 {
    let Some(d_max) = profile.iter().map(|p| p.0).max() else {
        return 0.0;
    };
    let top: Vec<f64> = profile.iter().filter(|p| 2 * p.0 >= d_max).map(|p| p.1).collect();
    let max = top.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = top.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        if max == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (max - min) / min
    }
}

/// Outcome of matching `p^2 + q^2 + alpha q` against `p^2 + (q - beta)^2 + c I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletedSquare {
    pub beta: f64,
    /// Sign `s` in `c = s beta^2`.
    pub constant_sign: f64,
    pub defect: f64,
    /// `(beta sign, constant sign, defect)` for every candidate.
    pub candidates: Vec<(f64, f64, f64)>,
}

/// Tries `beta = +-alpha/2` and `c = +-beta^2` and returns the candidate that closes.
pub fn completing_square(alpha: f64, dim: usize) -> Result<CompletedSquare> {
    let m = build_model(ModelKind::OscillatorLinear, dim, &ModelParams::with_alpha(alpha))?;
    let h = m.h();
    let p2 = galerkin(dim, 2, |a, ad| {
        let p = (ad - a).scale(I * std::f64::consts::FRAC_1_SQRT_2);
        &p * &p
    })?;
    let q = position(dim)?;
    let q2 = galerkin(dim, 2, |a, ad| {
        let q = (a + ad).scale_real(std::f64::consts::FRAC_1_SQRT_2);
        &q * &q
    })?;
    let id = OperatorMatrix::identity(dim);
    let mut candidates = Vec::new();
    for beta_sign in [1.0, -1.0] {
        let beta = beta_sign * alpha / 2.0;
        // (q - beta)^2 = q^2 - 2 beta q + beta^2
        let shifted_sq = &q2 - &q.scale_real(2.0 * beta) + id.scale_real(beta * beta);
        for const_sign in [1.0, -1.0] {
            let candidate = &p2 + &shifted_sq + id.scale_real(const_sign * beta * beta);
            candidates.push((beta_sign, const_sign, candidate.max_abs_diff(&h)));
        }
    }
    let best = candidates.iter().copied().min_by(|x, y| x.2.total_cmp(&y.2)).unwrap();
    Ok(CompletedSquare {
        beta: best.0 * alpha / 2.0,
        constant_sign: best.1,
        defect: best.2,
        candidates,
    })
}

/// Max defect of `a H0 = (H0 + 1) a` and `B H0 = (H0 + n) B` on the first `dim - n` rows.
/// Returns `(defect, interior_rows)`.
pub fn number_model_interior_identity(m: &ModelInstance) -> Result<(f64, usize)> {
    if m.kind != ModelKind::NumberAN {
        return Err(Error::WrongModelFamily { model: m.name().into() });
    }
    let n = m.n().unwrap();
    let (a, _) = m.ladder();
    let id = OperatorMatrix::identity(m.dim);
    let lhs_a = &a * &m.h0;
    let rhs_a = (&m.h0 + &id) * &a;
    let lhs_b = &m.b * &m.h0;
    let rhs_b = (&m.h0 + &id.scale_real(n as f64)) * &m.b;
    let rows = m.dim - n;
    let mut defect: f64 = 0.0;
    for i in 0..rows {
        for j in 0..m.dim {
            defect = defect
                .max((lhs_a[(i, j)] - rhs_a[(i, j)]).norm())
                .max((lhs_b[(i, j)] - rhs_b[(i, j)]).norm());
        }
    }
    Ok((defect, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_examples() {
        let (a, ad) = fock_ladder(2).unwrap();
        assert_eq!(a, OperatorMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap());
        assert_eq!(ad, a.adjoint());

        let (a, ad) = fock_ladder(4).unwrap();
        let n = &ad * &a;
        assert!(n.max_abs_diff(&OperatorMatrix::from_diagonal(&[0.0, 1.0, 2.0, 3.0])) < 1e-15);
        assert!((a[(1, 2)].re - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(matches!(fock_ladder(1), Err(Error::BadDimension { dim: 1, .. })));
    }

    #[test]
    fn galerkin_oscillator_is_exact() {
        for d in [4, 9, 32] {
            let h0 = galerkin(d, 2, |a, ad| {
                let q = (a + ad).scale_real(std::f64::consts::FRAC_1_SQRT_2);
                let p = (ad - a).scale(I * std::f64::consts::FRAC_1_SQRT_2);
                &p * &p + &q * &q
            })
            .unwrap();
            let m = build_model(ModelKind::OscillatorLinear, d, &ModelParams::default()).unwrap();
            assert!(h0.max_abs_diff(&m.h0) < 1e-13);
            assert_eq!(m.shift, 0.0);
        }
    }

    #[test]
    fn number_an_example() {
        let m = build_model(ModelKind::NumberAN, 6, &ModelParams::with_n(2)).unwrap();
        assert_eq!(m.h0, OperatorMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(m.shift, 1.0);
        assert!((m.b[(0, 2)].re - 2f64.sqrt()).abs() < 1e-14);
        for i in 0..4 {
            let expect = (((i + 1) * (i + 2)) as f64).sqrt();
            assert!((m.b[(i, i + 2)].re - expect).abs() < 1e-13);
        }
        assert!(!m.b_is_hermitian());
        assert!(matches!(m.h_spectrum(), Err(Error::NotHermitianH { .. })));
    }

    #[test]
    fn oscillator_linear_unperturbed() {
        let m = build_model(ModelKind::OscillatorLinear, 6, &ModelParams::with_alpha(0.0)).unwrap();
        assert_eq!(m.b.max_abs(), 0.0);
        assert_eq!(m.h(), m.h0);
    }

    #[test]
    fn rank_one_projector() {
        let m = build_model(ModelKind::RankOne, 4, &ModelParams::default()).unwrap();
        assert!((m.b.trace().re - 1.0).abs() < 1e-12);
        assert!((&m.b * &m.b).max_abs_diff(&m.b) < 1e-12);
        let s = hermitian_eig(&m.b).unwrap();
        let ev = s.eigenvalues();
        assert!(ev[..3].iter().all(|x| x.abs() < 1e-12));
        assert!((ev[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!("nope".parse::<ModelKind>(), Err(Error::UnknownModel(_))));
        assert_eq!("M5".parse::<ModelKind>().unwrap(), ModelKind::Commuting);
        assert_eq!("m1s".parse::<ModelKind>().unwrap(), ModelKind::NumberANSym);
        assert!(matches!(
            build_model(ModelKind::NumberAN, 6, &ModelParams::with_n(6)),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            build_model(ModelKind::NumberAN, 6, &ModelParams::with_alpha(1.0)),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            build_model(ModelKind::Commuting, 3, &ModelParams::default()),
            Err(Error::BadDimension { .. })
        ));
        assert_eq!(catalog().len(), 6);
    }

    #[test]
    fn rebuild_is_bit_identical() {
        for kind in ModelKind::CATALOG {
            let x = build_model(kind, 12, &ModelParams::default()).unwrap();
            let y = build_model(kind, 12, &ModelParams::default()).unwrap();
            assert_eq!(x.h0, y.h0);
            assert_eq!(x.b, y.b);
            assert_eq!(x.shift, y.shift);
        }
    }

    #[test]
    fn spectra_start_at_one() {
        for kind in ModelKind::CATALOG {
            let m = build_model(kind, 16, &ModelParams::default()).unwrap();
            let s = hermitian_eig(&m.h0).unwrap();
            assert!(s.min() >= 1.0 - TOL.spectrum_floor, "{kind}");
            assert!(m.h0.hermiticity().defect <= TOL.herm);
        }
    }

    #[test]
    fn interior_identity() {
        for n in [1, 2, 3] {
            let m = build_model(ModelKind::NumberAN, 10, &ModelParams::with_n(n)).unwrap();
            let (defect, rows) = number_model_interior_identity(&m).unwrap();
            assert_eq!(defect, 0.0);
            assert_eq!(rows, 10 - n);
        }
        let m = build_model(ModelKind::Commuting, 10, &ModelParams::default()).unwrap();
        assert!(matches!(
            number_model_interior_identity(&m),
            Err(Error::WrongModelFamily { .. })
        ));
    }

    #[test]
    fn completing_square_sign() {
        for alpha in [1.0, -0.7, 2.5] {
            let cs = completing_square(alpha, 24).unwrap();
            assert!(cs.defect < 1e-10);
            assert_eq!(cs.beta, -alpha / 2.0);
            assert_eq!(cs.constant_sign, -1.0);
            // every other candidate misses
            assert_eq!(cs.candidates.iter().filter(|c| c.2 < 1e-10).count(), 1);
        }
    }

    #[test]
    fn relative_bound_examples() {
        let grid: Vec<f64> = (0..8).map(|j| 2f64.powi(j)).collect();
        let m = build_model(ModelKind::Commuting, 16, &ModelParams::with_c(0.5)).unwrap();
        let est = relative_bound_profile(&m, &grid).unwrap();
        assert!(est.a_inf <= 0.5 / 128.0 + 1e-15);
        assert!(est.a_values.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-8));

        let s = m.h0_spectrum();
        let est = relative_bound_of(s, &m.h0, &[0.01, 1.0, 10.0]).unwrap();
        for &(lambda, a) in &est.a_values {
            let oracle = s
                .eigenvalues()
                .iter()
                .map(|mu| mu / (mu * mu + lambda * lambda).sqrt())
                .fold(0.0, f64::max);
            assert!((a - oracle).abs() < 1e-12);
            assert!(a < 1.0);
        }
        assert!(est.a_values[0].1 > 0.9999);

        let zero = OperatorMatrix::zeros(16);
        let est = relative_bound_of(s, &zero, &grid).unwrap();
        assert!(est.a_values.iter().all(|p| p.1 == 0.0));
        assert!(relative_bound_of(s, &zero, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn cross_bound_examples() {
        let dims = [16, 32, 64];
        let free =
            cross_bound_profile(ModelKind::OscillatorLinear, &ModelParams::with_alpha(0.0), 2, 2, &dims).unwrap();
        assert!(free.iter().all(|p| (p.1 - 1.0).abs() < 1e-12));
        assert!(matches!(
            cross_bound_profile(ModelKind::NumberAN, &ModelParams::default(), 1, 1, &dims),
            Err(Error::NotHermitianH { .. })
        ));
    }

    #[test]
    fn nilpotent_fixture_is_strictly_upper() {
        let m = ModelInstance::nilpotent_fixture(8, 0.1).unwrap();
        let h = m.h();
        for i in 0..8 {
            for j in 0..=i {
                assert_eq!(h[(i, j)], ZERO);
            }
        }
        assert_eq!(m.kind, ModelKind::Custom);
    }

    #[test]
    fn params_json() {
        let p: ModelParams = serde_json::from_str(r#"{"n":3}"#).unwrap();
        assert_eq!(p, ModelParams::with_n(3));
        assert!(serde_json::from_str::<ModelParams>(r#"{"m":3}"#).is_err());
    }
}
