//! Spectral projections `Q_L`, cutoff Hamiltonians `H_L = Q_L H Q_L`, band
//! projectors and tail norms.
//!
//! `L` is an energy in the spectrum of the shifted `H0` unless a function says
//! it takes a label. Labels count levels of the unshifted number operator, so
//! label `l` sits at eigenvalue `l + shift`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linop::{commutator, operator_norm, OperatorMatrix, SpectralDecomposition, C64, ONE, ZERO};
use crate::models::ModelInstance;
use crate::tolerance::TOL;

/// `sum_{lambda_j <= L} |u_j><u_j|`, eigenvalues within `TOL.tie` of `L` included.
pub fn spectral_projection(s: &SpectralDecomposition, l: f64) -> OperatorMatrix {
    let mask: Vec<C64> = s
        .eigenvalues()
        .iter()
        .map(|&x| if x <= l + TOL.tie { ONE } else { ZERO })
        .collect();
    s.from_eigenbasis_diagonal(&mask)
}

/// Number of eigenvalues counted by `spectral_projection(s, l)`.
pub fn rank_below(s: &SpectralDecomposition, l: f64) -> usize {
    s.eigenvalues().iter().filter(|&&x| x <= l + TOL.tie).count()
}

/// `max(|Q^2 - Q|, |Q - Q^dagger|)`
pub fn projector_defect(q: &OperatorMatrix) -> f64 {
    (q * q).max_abs_diff(q).max(q.hermiticity().defect)
}

/// `Q_{L+n} - Q_L`
pub fn band_projector(s: &SpectralDecomposition, l: f64, n: usize) -> Result<OperatorMatrix> {
    if n == 0 {
        return Err(Error::BadParams("band width n must be >= 1".into()));
    }
    Ok(spectral_projection(s, l + n as f64) - spectral_projection(s, l))
}

/// `||H0^{-l} (I - Q_L)||`
pub fn tail_norm(s: &SpectralDecomposition, l: f64, ell: u32) -> Result<f64> {
    if s.min() < 1.0 - TOL.spectrum_floor {
        return Err(Error::SpectrumBelowOne { min: s.min() });
    }
    if ell == 0 {
        return Err(Error::BadParams("tail exponent must be >= 1".into()));
    }
    let weights: Vec<C64> = s
        .eigenvalues()
        .iter()
        .map(|&x| {
            if x <= l + TOL.tie {
                ZERO
            } else {
                C64::from(x.powi(-(ell as i32)))
            }
        })
        .collect();
    operator_norm(&s.from_eigenbasis_diagonal(&weights))
}

/// `Q_L (H0 + B) Q_L`, checked against `H0 Q_L + Q_L B Q_L`.
pub fn cutoff_hamiltonian(m: &ModelInstance, q: &OperatorMatrix) -> Result<OperatorMatrix> {
    let defect = projector_defect(q);
    if defect > TOL.projector {
        return Err(Error::ProjectionMismatch { defect });
    }
    let h_l = q * m.h() * q;
    let split = &m.h0 * q + q * &m.b * q;
    let defect = h_l.max_abs_diff(&split);
    if defect > TOL.identity * (1.0 + h_l.max_abs()) {
        return Err(Error::ProjectionMismatch { defect });
    }
    Ok(h_l)
}

/// Projectors of one `H0` over an ascending cutoff grid, built once.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    source: SpectralDecomposition,
    l_grid: Vec<f64>,
    projectors: Vec<OperatorMatrix>,
}

/// Largest invariant defects over a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyDefects {
    pub projector: f64,
    pub nesting: f64,
    pub commutes_with_h0: f64,
}

impl CutoffFamily {
    pub fn new(source: &SpectralDecomposition, l_grid: &[f64]) -> Result<Self> {
        if l_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadParams("cutoff grid must be strictly ascending".into()));
        }
        let projectors = l_grid.iter().map(|&l| spectral_projection(source, l)).collect();
        Ok(Self {
            source: source.clone(),
            l_grid: l_grid.to_vec(),
            projectors,
        })
    }

    pub fn for_model(m: &ModelInstance, l_grid: &[f64]) -> Result<Self> {
        Self::new(m.h0_spectrum(), l_grid)
    }

    pub fn source(&self) -> &SpectralDecomposition {
        &self.source
    }

    pub fn l_grid(&self) -> &[f64] {
        &self.l_grid
    }

    pub fn len(&self) -> usize {
        self.l_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l_grid.is_empty()
    }

    pub fn projector(&self, i: usize) -> &OperatorMatrix {
        &self.projectors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &OperatorMatrix)> {
        self.l_grid.iter().copied().zip(self.projectors.iter())
    }

    pub fn defects(&self) -> FamilyDefects {
        let h0 = self.source.reconstruct();
        let mut out = FamilyDefects {
            projector: 0.0,
            nesting: 0.0,
            commutes_with_h0: 0.0,
        };
        for (i, q) in self.projectors.iter().enumerate() {
            out.projector = out.projector.max(projector_defect(q));
            let c = commutator(q, &h0).expect("same dim");
            out.commutes_with_h0 = out.commutes_with_h0.max(c.max_abs());
            for q2 in &self.projectors[i..] {
                out.nesting = out.nesting.max((q * q2).max_abs_diff(q));
            }
        }
        out
    }
}

/// Midpoints between consecutive distinct eigenvalues.
pub fn eigenvalue_midpoints(s: &SpectralDecomposition) -> Vec<f64> {
    let ev = s.eigenvalues();
    ev.windows(2)
        .filter(|w| w[1] - w[0] > TOL.tie)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect()
}

/// `count` geometrically spaced cutoffs between the `ceil(d/8)`-th and the
/// `ceil(d/2)`-th eigenvalue, snapped to eigenvalue midpoints and deduplicated.
pub fn default_grid(s: &SpectralDecomposition, count: usize) -> Vec<f64> {
    let d = s.dim();
    let lo = s.eigenvalues()[d.div_ceil(8).max(1) - 1];
    let hi = s.eigenvalues()[d.div_ceil(2).max(1) - 1];
    geometric_grid(s, lo, hi, count)
}

/// `count` geometric targets in `[lo, hi]` snapped to the nearest midpoint in that window.
pub fn geometric_grid(s: &SpectralDecomposition, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mids: Vec<f64> = eigenvalue_midpoints(s)
        .into_iter()
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    if mids.is_empty() || count == 0 {
        return vec![];
    }
    let lo = lo.max(f64::MIN_POSITIVE);
    let mut grid: Vec<f64> = (0..count)
        .map(|i| {
            let t = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
            let target = lo * (hi / lo).powf(t);
            *mids
                .iter()
                .min_by(|a, b| (*a - target).abs().total_cmp(&(*b - target).abs()))
                .unwrap()
        })
        .collect();
    grid.dedup();
    grid
}

/// `count` integer labels evenly spread over `0 ..= max_label`, deduplicated.
pub fn label_grid(max_label: usize, count: usize) -> Vec<usize> {
    if count == 0 {
        return vec![];
    }
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            if count == 1 {
                max_label
            } else {
                ((i * max_label) as f64 / (count - 1) as f64).round() as usize
            }
        })
        .collect();
    out.dedup();
    out
}

/// `Q` onto the levels with label `<= l`.
pub fn label_projection(m: &ModelInstance, l: usize) -> OperatorMatrix {
    spectral_projection(m.h0_spectrum(), m.level(l))
}

fn require_number_model(m: &ModelInstance) -> Result<()> {
    if !m.kind.is_number_model() {
        return Err(Error::WrongModelFamily { model: m.name().into() });
    }
    Ok(())
}

/// `max |Q_l a - a Q_{l+1}|` with `l` a label.
pub fn ladder_commutation_check(m: &ModelInstance, l: usize) -> Result<f64> {
    require_number_model(m)?;
    let (a, _) = m.ladder();
    let lhs = label_projection(m, l) * &a;
    let rhs = &a * label_projection(m, l + 1);
    Ok(lhs.max_abs_diff(&rhs))
}

/// `max_l |Pi_l a - a Pi_{l+1}|` over the interior labels `0 ..= dim - 2`.
pub fn level_commutation_check(m: &ModelInstance) -> Result<f64> {
    require_number_model(m)?;
    let (a, _) = m.ladder();
    let s = m.h0_spectrum();
    let level = |l: usize| {
        let x = m.level(l);
        spectral_projection(s, x) - spectral_projection(s, x - 0.5)
    };
    let mut defect: f64 = 0.0;
    for l in 0..m.dim - 1 {
        defect = defect.max((level(l) * &a).max_abs_diff(&(&a * level(l + 1))));
    }
    Ok(defect)
}
