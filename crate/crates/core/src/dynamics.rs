//! Regularized and full dynamics: propagator differences `g_L(t)`, Heisenberg
//! maps, the compressed maps `V_L^t` and `beta_L^t`, inner derivations, the
//! compressed derivation `eta_L` and its defect `Delta_L`, and the adjoint series
//! for nilpotent commutator chains.
//!
//! Conventions: `delta(A) = i[A, H]`, `[X, Y]_1 = [X, Y]`, `[X, Y]_{j+1} = [X, [X, Y]_j]`.

use serde::Serialize;

use crate::cutoff::{band_projector, cutoff_hamiltonian, CutoffFamily};
use crate::error::{Error, Result};
use crate::linop::{
    anticommutator, commutator, expm, general_eig, operator_norm, power, OperatorMatrix, Propagation, PropagatorPath,
    C64, I, ONE,
};
use crate::models::{ModelInstance, ModelKind};
use crate::quadrature::{Converged, GaussLegendre, Refinement};
use crate::seminorms::{Seminorm, TestFunction};
use crate::tolerance::TOL;

/// A model, its cutoffs, one observable and a time grid.
#[derive(Debug, Clone)]
pub struct DynamicsScene {
    pub model: ModelInstance,
    pub cutoffs: CutoffFamily,
    pub observable: OperatorMatrix,
    pub times: Vec<f64>,
}

impl DynamicsScene {
    pub fn new(
        model: ModelInstance,
        cutoffs: CutoffFamily,
        observable: OperatorMatrix,
        times: Vec<f64>,
    ) -> Result<Self> {
        for d in [cutoffs.source().dim(), observable.dim()] {
            if d != model.dim {
                return Err(Error::DimensionMismatch {
                    left: model.dim,
                    right: d,
                });
            }
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadParams("time grid must be strictly ascending".into()));
        }
        Ok(Self {
            model,
            cutoffs,
            observable,
            times,
        })
    }

    /// Fails unless the time grid supports quadrature.
    pub fn require_quadrature(&self) -> Result<()> {
        if self.times.len() < 2 {
            return Err(Error::BadParams("quadrature needs at least two time points".into()));
        }
        Ok(())
    }
}

/// `e^{iHt} A e^{-iHt}`
pub fn heisenberg(h: &OperatorMatrix, a: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    if h.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            left: h.dim(),
            right: a.dim(),
        });
    }
    let p = Propagation::new(h)?;
    Ok(conjugate(&p, a, t))
}

fn conjugate(p: &Propagation, a: &OperatorMatrix, t: f64) -> OperatorMatrix {
    p.unitary(t) * a * p.unitary(-t)
}

/// `i[A, H]`
pub fn derivation(h: &OperatorMatrix, a: &OperatorMatrix) -> Result<OperatorMatrix> {
    Ok(commutator(a, h)?.scale(I))
}

/// `D(AB) - D(A)B - A D(B)`
pub fn leibniz_defect(
    map: impl Fn(&OperatorMatrix) -> Result<OperatorMatrix>,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    Ok(map(&(a * b))? - map(a)? * b - a * map(b)?)
}

/// `Q_L delta(A) Q_L`
pub fn eta_map(m: &ModelInstance, q: &OperatorMatrix, a: &OperatorMatrix) -> Result<OperatorMatrix> {
    Ok(q * derivation(&m.h(), a)? * q)
}

/// Constant `c` in `Delta_L(A) = c ({Q H0, [Q, A]} + Q B [Q, A] + [Q, A] B Q)`
/// that makes `eta_L + Delta_L = i[A, H_L]`.
pub const DELTA_PREFACTOR: C64 = C64::new(0.0, -1.0);

pub fn delta_defect(m: &ModelInstance, q: &OperatorMatrix, a: &OperatorMatrix) -> Result<OperatorMatrix> {
    let qa = commutator(q, a)?;
    let s = anticommutator(&(q * &m.h0), &qa)? + q * &m.b * &qa + &qa * &m.b * q;
    Ok(s.scale(DELTA_PREFACTOR))
}

/// `eta_L(A) + Delta_L(A)`
pub fn regularized_derivation(m: &ModelInstance, q: &OperatorMatrix, a: &OperatorMatrix) -> Result<OperatorMatrix> {
    Ok(eta_map(m, q, a)? + delta_defect(m, q, a)?)
}

/// `max |eta_L(A) + Delta_L(A) - i[A, H_L]|`
pub fn closure_defect(m: &ModelInstance, q: &OperatorMatrix, a: &OperatorMatrix) -> Result<f64> {
    let h_l = cutoff_hamiltonian(m, q)?;
    Ok(regularized_derivation(m, q, a)?.max_abs_diff(&derivation(&h_l, a)?))
}

/// `[X, Y]_m` with `[X, Y]_1 = [X, Y]`.
pub fn iterated_commutator(x: &OperatorMatrix, y: &OperatorMatrix, m: usize) -> Result<OperatorMatrix> {
    if m == 0 {
        return Err(Error::BadParams("commutator order must be >= 1".into()));
    }
    let mut c = commutator(x, y)?;
    for _ in 1..m {
        c = commutator(x, &c)?;
    }
    Ok(c)
}

/// Smallest `m` with `||[X, Y]_{m+1}|| <= TOL.nilpotent ||[X, Y]_1||`, searching `m <= max_m`.
/// Commuting pairs give `Some(0)`.
pub fn nilpotency_order(x: &OperatorMatrix, y: &OperatorMatrix, max_m: usize) -> Result<Option<usize>> {
    let c1 = commutator(x, y)?;
    let n1 = operator_norm(&c1)?;
    if n1 == 0.0 {
        return Ok(Some(0));
    }
    let mut c = c1;
    for m in 1..=max_m {
        c = commutator(x, &c)?;
        if operator_norm(&c)? <= TOL.nilpotent * n1 {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// `sum_{j=0}^{m} (i tau)^j / j! [H_L, H]_j` with `[H_L, H]_0 = H`, after checking
/// that `[H_L, H]_{m+1}` vanishes.
pub fn adjoint_series(h_l: &OperatorMatrix, h: &OperatorMatrix, tau: f64, m: usize) -> Result<OperatorMatrix> {
    let terms = series_terms(h_l, h, m)?;
    let mut sum = OperatorMatrix::zeros(h.dim());
    let mut coeff = ONE;
    for (j, c) in terms.iter().enumerate() {
        if j > 0 {
            coeff *= I * tau / j as f64;
        }
        sum += &c.scale(coeff);
    }
    Ok(sum)
}

fn series_terms(h_l: &OperatorMatrix, h: &OperatorMatrix, m: usize) -> Result<Vec<OperatorMatrix>> {
    let mut terms = vec![h.clone()];
    for _ in 0..m {
        let next = commutator(h_l, terms.last().unwrap())?;
        terms.push(next);
    }
    let tail = commutator(h_l, terms.last().unwrap())?;
    let scale = if m == 0 {
        operator_norm(h)?.max(operator_norm(h_l)?)
    } else {
        operator_norm(&terms[1])?
    };
    if operator_norm(&tail)? > TOL.nilpotent * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotNilpotent { order: m + 1 });
    }
    Ok(terms)
}

/// Precomputed propagators of `H` and of one cutoff Hamiltonian `H_L`.
#[derive(Debug, Clone)]
pub struct CutoffDynamics {
    pub q: OperatorMatrix,
    pub h: OperatorMatrix,
    pub h_l: OperatorMatrix,
    prop_h: Propagation,
    prop_h_l: Propagation,
}

impl CutoffDynamics {
    pub fn new(m: &ModelInstance, q: &OperatorMatrix) -> Result<Self> {
        let h = m.h();
        let h_l = cutoff_hamiltonian(m, q)?;
        Ok(Self {
            q: q.clone(),
            prop_h: Propagation::new(&h)?,
            prop_h_l: Propagation::new(&h_l)?,
            h,
            h_l,
        })
    }

    pub fn path(&self) -> PropagatorPath {
        match (self.prop_h.path(), self.prop_h_l.path()) {
            (PropagatorPath::Spectral, PropagatorPath::Spectral) => PropagatorPath::Spectral,
            _ => PropagatorPath::ScalingSquaring,
        }
    }

    pub fn e_h(&self, t: f64) -> OperatorMatrix {
        self.prop_h.unitary(t)
    }

    pub fn e_h_l(&self, t: f64) -> OperatorMatrix {
        self.prop_h_l.unitary(t)
    }

    /// `e^{iH_L t} - e^{iHt}`
    pub fn g_direct(&self, t: f64) -> OperatorMatrix {
        self.e_h_l(t) - self.e_h(t)
    }

    /// Integrand `i e^{iH_L(t - s)} (H_L - H) e^{iHs}`.
    pub fn g_integrand(&self, t: f64, s: f64) -> OperatorMatrix {
        (self.e_h_l(t - s) * (&self.h_l - &self.h) * self.e_h(s)).scale(I)
    }

    pub fn g_integral_panels(&self, t: f64, rule: &GaussLegendre, panels: usize) -> OperatorMatrix {
        rule.operator(0.0, t, panels, self.h.dim(), |s| self.g_integrand(t, s))
    }

    pub fn g_integral(&self, t: f64, rule: &GaussLegendre, refine: Refinement) -> Result<Converged<OperatorMatrix>> {
        if !(t >= 0.0) {
            return Err(Error::BadParams(format!("integral form needs t >= 0, got {t}")));
        }
        rule.adaptive_operator(0.0, t, self.h.dim(), refine, |s| self.g_integrand(t, s))
    }

    /// `i H_L g_L(t) + i (H_L - H) e^{iHt}`
    pub fn g_rhs(&self, t: f64) -> OperatorMatrix {
        (&self.h_l * self.g_direct(t) + (&self.h_l - &self.h) * self.e_h(t)).scale(I)
    }

    /// Max-abs of a central difference of `g_L` minus its right-hand side.
    pub fn g_ode_residual(&self, t: f64, dt: f64) -> f64 {
        let fd = (self.g_direct(t + dt) - self.g_direct(t - dt)).scale_real(0.5 / dt);
        fd.max_abs_diff(&self.g_rhs(t))
    }

    /// `int_0^T ||f(H0) e^{iH_L(T - s)} H0^s|| ds` with `f(H0) H0^s` passed in as
    /// `left` and `right` factors.
    pub fn integrand_bound(
        &self,
        f_h0: &OperatorMatrix,
        h0_s: &OperatorMatrix,
        t_end: f64,
        rule: &GaussLegendre,
        refine: Refinement,
    ) -> Result<Converged<f64>> {
        rule.adaptive_scalar(0.0, t_end, refine, |s| {
            operator_norm(&(f_h0 * self.e_h_l(t_end - s) * h0_s)).unwrap_or(f64::NAN)
        })
    }

    /// `Q_L (iH)^n e^{iHt} Q_L`, the `n`-th time derivative of `V_L^t`.
    pub fn v(&self, t: f64, order: u32) -> OperatorMatrix {
        let ih = power(&self.h.scale(I), order);
        &self.q * ih * self.e_h(t) * &self.q
    }

    /// `n`-th time derivative of `V_L^t A V_L^{-t}`, `n <= 2`.
    pub fn beta(&self, a: &OperatorMatrix, t: f64, order: u32) -> Result<OperatorMatrix> {
        let vm = |s: f64, n: u32| self.v(s, n);
        Ok(match order {
            0 => vm(t, 0) * a * vm(-t, 0),
            1 => vm(t, 1) * a * vm(-t, 0) - vm(t, 0) * a * vm(-t, 1),
            2 => vm(t, 2) * a * vm(-t, 0) - (vm(t, 1) * a * vm(-t, 1)).scale_real(2.0) + vm(t, 0) * a * vm(-t, 2),
            _ => return Err(Error::BadParams("derivative order must be <= 2".into())),
        })
    }

    /// `n`-th time derivative of `e^{iHt} A e^{-iHt}`, `n <= 2`.
    pub fn alpha(&self, a: &OperatorMatrix, t: f64, order: u32) -> Result<OperatorMatrix> {
        if order > 2 {
            return Err(Error::BadParams("derivative order must be <= 2".into()));
        }
        let mut x = a.clone();
        for _ in 0..order {
            x = commutator(&self.h, &x)?.scale(I);
        }
        Ok(conjugate(&self.prop_h, &x, t))
    }

    /// `||H^n (d/dt)^j (V_L^t psi - e^{iHt} psi)||`
    pub fn vector_distance(&self, psi: &nalgebra::DVector<C64>, t: f64, n: u32, order: u32) -> f64 {
        let ih = power(&self.h.scale(I), order);
        let full = &ih * self.e_h(t);
        let cut = &self.q * &full * &self.q;
        let diff = (cut - full).apply(psi);
        power(&self.h, n).apply(&diff).norm()
    }

    /// `sup ||H^n (d/dt)^j (V_L^t - e^{iHt}) psi||` over unit `psi` in the range of the projector `p`.
    pub fn block_distance(&self, p: &OperatorMatrix, t: f64, n: u32, order: u32) -> Result<f64> {
        let ih = power(&self.h.scale(I), order);
        let full = &ih * self.e_h(t);
        let cut = &self.q * &full * &self.q;
        operator_norm(&(power(&self.h, n) * (cut - full) * p))
    }
}

/// `e^{iH_L t} - e^{iHt}`
pub fn g_l_direct(m: &ModelInstance, q: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    Ok(CutoffDynamics::new(m, q)?.g_direct(t))
}

/// `i int_0^t e^{iH_L(t - s)} (H_L - H) e^{iHs} ds` by adaptive composite Gauss-Legendre.
pub fn g_l_integral(
    m: &ModelInstance,
    q: &OperatorMatrix,
    t: f64,
    rule: &GaussLegendre,
    refine: Refinement,
) -> Result<Converged<OperatorMatrix>> {
    CutoffDynamics::new(m, q)?.g_integral(t, rule, refine)
}

/// `||H0^{-s} (H_L - H) H0^k||`
pub fn lemma59_quantity(m: &ModelInstance, q: &OperatorMatrix, s: u32, k: u32) -> Result<f64> {
    let h_l = cutoff_hamiltonian(m, q)?;
    let sp = m.h0_spectrum();
    let x = sp.int_power(-(s as i32))? * (h_l - m.h()) * sp.int_power(k as i32)?;
    operator_norm(&x)
}

/// Smallest `s` in `s_range` with `lemma59_quantity < threshold`.
pub fn smallest_decaying_s(
    m: &ModelInstance,
    q: &OperatorMatrix,
    k: u32,
    s_range: std::ops::RangeInclusive<u32>,
    threshold: f64,
) -> Result<Option<u32>> {
    for s in s_range {
        if lemma59_quantity(m, q, s, k)? < threshold {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// `int_0^T ||f(H0) e^{iH_L(T - s)} H0^s|| ds`
pub fn prop60_integrand_bound(
    m: &ModelInstance,
    q: &OperatorMatrix,
    f: &TestFunction,
    s: u32,
    t_end: f64,
    rule: &GaussLegendre,
    refine: Refinement,
) -> Result<f64> {
    if !(t_end > 0.0) {
        return Err(Error::BadParams(format!("T must be positive, got {t_end}")));
    }
    let d = CutoffDynamics::new(m, q)?;
    let f_h0 = f.on_spectrum(m.h0_spectrum())?;
    let h0_s = m.h0_spectrum().int_power(s as i32)?;
    Ok(d.integrand_bound(&f_h0, &h0_s, t_end, rule, refine)?.value)
}

/// `||f(H) (H_L^l - H^l) H^k||`
pub fn lemma61_quantity(m: &ModelInstance, q: &OperatorMatrix, f: &TestFunction, ell: u32, k: u32) -> Result<f64> {
    let hs = m.h_spectrum()?;
    let h = m.h();
    let h_l = cutoff_hamiltonian(m, q)?;
    let x = f.on_spectrum(&hs)? * (power(&h_l, ell) - power(&h, ell)) * power(&h, k);
    operator_norm(&x)
}

/// `Q_L e^{iHt} Q_L`
pub fn v_map(m: &ModelInstance, q: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    m.h_spectrum()?;
    Ok(CutoffDynamics::new(m, q)?.v(t, 0))
}

/// `V_L^t A V_L^{-t}`
pub fn beta_map(m: &ModelInstance, q: &OperatorMatrix, a: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    m.h_spectrum()?;
    CutoffDynamics::new(m, q)?.beta(a, t, 0)
}

/// `||beta_L^t(A) - alpha^t(A)||^{f,k}` and its first two time derivatives, per `(f, k)`.
pub fn beta_seminorm_distance(
    d: &CutoffDynamics,
    seminorm: &Seminorm<'_>,
    a: &OperatorMatrix,
    t: f64,
    order: u32,
    f: &TestFunction,
    k: u32,
) -> Result<f64> {
    let diff = d.beta(a, t, order)? - d.alpha(a, t, order)?;
    Ok(seminorm.eval(&diff, f, k)?.value)
}

/// The displayed estimate for `H0 = a^dagger a + 1`, `B = a^n` at one test function.
#[derive(Debug, Clone)]
pub struct ExampleBound {
    n: usize,
    h: OperatorMatrix,
    a_n: OperatorMatrix,
    f_h: OperatorMatrix,
    model: ModelInstance,
    pub rhs: f64,
    /// Eigenvector condition number of `H`.
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExampleBoundValue {
    pub label: usize,
    pub tau: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl ExampleBound {
    /// `f(H)` is taken from exponentials of `H` (no eigenvector basis needed).
    pub fn new(m: &ModelInstance, f: &TestFunction) -> Result<Self> {
        if m.kind != ModelKind::NumberAN {
            return Err(Error::WrongModelFamily { model: m.name().into() });
        }
        let n = m.n().unwrap();
        let h = m.h();
        let f_h = f.on_matrix(&h)?;
        let a_n = m.b.clone();
        let rhs = operator_norm(&(&f_h * &h))? + 2.0 * operator_norm(&(&f_h * &a_n))?;
        let condition = general_eig(&h)?.condition;
        Ok(Self {
            n,
            h,
            a_n,
            f_h,
            model: m.clone(),
            rhs,
            condition,
        })
    }

    /// Whether `f(H)` would be admitted by the eigenvector-basis route.
    pub fn well_conditioned(&self) -> bool {
        self.condition < TOL.eigvec_condition
    }

    /// `lhs = ||f(H) (H + (e^{iH tau} - 1) a^n P_{l,n})||` with `l` a label.
    pub fn check(&self, label: usize, tau: f64) -> Result<ExampleBoundValue> {
        let p = band_projector(self.model.h0_spectrum(), self.model.level(label), self.n)?;
        let u = if tau == 0.0 {
            OperatorMatrix::identity(self.h.dim())
        } else {
            expm(&self.h.scale(I * tau))
        };
        let inner = &self.h + (u - OperatorMatrix::identity(self.h.dim())) * &self.a_n * p;
        let lhs = operator_norm(&(&self.f_h * inner))?;
        Ok(ExampleBoundValue {
            label,
            tau,
            lhs,
            rhs: self.rhs,
        })
    }
}

/// `(lhs, rhs)` of the displayed estimate.
pub fn example_bound_check(m: &ModelInstance, f: &TestFunction, label: usize, tau: f64) -> Result<(f64, f64)> {
    let v = ExampleBound::new(m, f)?.check(label, tau)?;
    Ok((v.lhs, v.rhs))
}
