//! Composite Gauss-Legendre quadrature for scalar and operator-valued integrands.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linop::OperatorMatrix;
use crate::tolerance::TOL;

/// `n`-point Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParams("quadrature needs at least one node".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// The 8-point rule.
    pub fn eight() -> Self {
        Self::new(8).expect("n > 0")
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights of the composite rule with `panels` equal panels on `[a, b]`.
    pub fn composite_points(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.order());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        out
    }

    pub fn scalar(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        self.composite_points(a, b, panels)
            .into_iter()
            .map(|(x, w)| w * f(x))
            .sum()
    }

    pub fn operator(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        dim: usize,
        f: impl Fn(f64) -> OperatorMatrix,
    ) -> OperatorMatrix {
        let mut acc = OperatorMatrix::zeros(dim);
        for (x, w) in self.composite_points(a, b, panels) {
            acc += &f(x).scale_real(w);
        }
        acc
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Panel-doubling schedule and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Refinement {
    pub start_panels: usize,
    /// Successive values must agree to this, measured in max-abs.
    pub tol: f64,
    pub budget: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            start_panels: 1,
            tol: TOL.quadrature,
            budget: TOL.quadrature_budget,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Converged<T> {
    pub value: T,
    pub panels: usize,
    /// Max-abs change at the last doubling.
    pub change: f64,
}

impl GaussLegendre {
    /// Doubles the panel count until successive values agree.
    pub fn adaptive_operator(
        &self,
        a: f64,
        b: f64,
        dim: usize,
        refine: Refinement,
        f: impl Fn(f64) -> OperatorMatrix,
    ) -> Result<Converged<OperatorMatrix>> {
        if a == b {
            return Ok(Converged {
                value: OperatorMatrix::zeros(dim),
                panels: 0,
                change: 0.0,
            });
        }
        let mut panels = refine.start_panels.max(1);
        let mut prev = self.operator(a, b, panels, dim, &f);
        loop {
            let next_panels = panels * 2;
            if next_panels > refine.budget {
                return Err(Error::QuadratureBudgetExceeded {
                    tol: refine.tol,
                    panels: refine.budget,
                });
            }
            let next = self.operator(a, b, next_panels, dim, &f);
            let change = next.max_abs_diff(&prev);
            if change <= refine.tol {
                return Ok(Converged {
                    value: next,
                    panels: next_panels,
                    change,
                });
            }
            prev = next;
            panels = next_panels;
        }
    }

    pub fn adaptive_scalar(
        &self,
        a: f64,
        b: f64,
        refine: Refinement,
        f: impl Fn(f64) -> f64,
    ) -> Result<Converged<f64>> {
        let r = self.adaptive_vector(a, b, 1, refine, |x| vec![f(x)])?;
        Ok(Converged {
            value: r.value[0],
            panels: r.panels,
            change: r.change,
        })
    }

    /// Composite rule applied componentwise to a vector-valued integrand of length `len`.
    pub fn vector(&self, a: f64, b: f64, panels: usize, len: usize, f: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
        let mut acc = vec![0.0; len];
        for (x, w) in self.composite_points(a, b, panels) {
            for (s, v) in acc.iter_mut().zip(f(x)) {
                *s += w * v;
            }
        }
        acc
    }

    /// Doubles the panel count until every component agrees with the previous pass.
    pub fn adaptive_vector(
        &self,
        a: f64,
        b: f64,
        len: usize,
        refine: Refinement,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Converged<Vec<f64>>> {
        if a == b {
            return Ok(Converged {
                value: vec![0.0; len],
                panels: 0,
                change: 0.0,
            });
        }
        let mut panels = refine.start_panels.max(1);
        let mut prev = self.vector(a, b, panels, len, &f);
        loop {
            let next_panels = panels * 2;
            if next_panels > refine.budget {
                return Err(Error::QuadratureBudgetExceeded {
                    tol: refine.tol,
                    panels: refine.budget,
                });
            }
            let next = self.vector(a, b, next_panels, len, &f);
            let change = next.iter().zip(&prev).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if change <= refine.tol {
                return Ok(Converged {
                    value: next,
                    panels: next_panels,
                    change,
                });
            }
            prev = next;
            panels = next_panels;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::C64;

    #[test]
    fn nodes_and_weights() {
        let g = GaussLegendre::new(2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((g.nodes()[0] + x).abs() < 1e-15 && (g.nodes()[1] - x).abs() < 1e-15);
        assert!((g.weights()[0] - 1.0).abs() < 1e-15);

        let g = GaussLegendre::new(3).unwrap();
        assert_eq!(g.nodes()[1], 0.0);
        assert!((g.weights()[1] - 8.0 / 9.0).abs() < 1e-15);

        for n in [1, 5, 8, 16, 33] {
            let g = GaussLegendre::new(n).unwrap();
            assert!((g.weights().iter().sum::<f64>() - 2.0).abs() < 1e-13);
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        }
        assert!(GaussLegendre::new(0).is_err());
    }

    #[test]
    fn exact_for_polynomials() {
        let g = GaussLegendre::eight();
        for deg in 0..16 {
            let v = g.scalar(0.0, 2.0, 1, |x| x.powi(deg));
            let exact = 2f64.powi(deg + 1) / (deg + 1) as f64;
            assert!((v - exact).abs() < 1e-12 * exact, "deg {deg}");
        }
    }

    #[test]
    fn adaptive_vector_matches_scalar() {
        let g = GaussLegendre::eight();
        let v = g
            .adaptive_vector(0.0, 2.0, 2, Refinement::default(), |x| vec![x.sin(), x * x])
            .unwrap();
        assert!((v.value[0] - (1.0 - 2f64.cos())).abs() < 1e-12);
        assert!((v.value[1] - 8.0 / 3.0).abs() < 1e-12);
        let s = g.adaptive_scalar(0.0, 2.0, Refinement::default(), |x| x.sin()).unwrap();
        assert_eq!(s.value, v.value[0]);
    }

    #[test]
    fn adaptive_scalar_converges() {
        let g = GaussLegendre::eight();
        let r = g
            .adaptive_scalar(0.0, 10.0, Refinement::default(), |x| (3.0 * x).sin())
            .unwrap();
        assert!((r.value - (1.0 - 30f64.cos()) / 3.0).abs() < 1e-12);
        assert_eq!(
            g.adaptive_scalar(1.0, 1.0, Refinement::default(), |x| x).unwrap().value,
            0.0
        );
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let g = GaussLegendre::new(1).unwrap();
        let refine = Refinement {
            start_panels: 1,
            tol: 1e-15,
            budget: 8,
        };
        assert!(matches!(
            g.adaptive_scalar(0.0, 1.0, refine, |x| x.exp()),
            Err(Error::QuadratureBudgetExceeded { panels: 8, .. })
        ));
    }

    #[test]
    fn operator_integrand() {
        let g = GaussLegendre::eight();
        let r = g
            .adaptive_operator(0.0, 1.0, 2, Refinement::default(), |t| {
                OperatorMatrix::from_complex_diagonal(&[C64::new(0.0, t).exp(), C64::from(t * t)])
            })
            .unwrap();
        let e = (C64::new(0.0, 1.0).exp() - 1.0) / C64::new(0.0, 1.0);
        assert!((r.value[(0, 0)] - e).norm() < 1e-13);
        assert!((r.value[(1, 1)].re - 1.0 / 3.0).abs() < 1e-14);
    }
}
