//! Closed-form values for the commuting model `H0 = diag(1..d)`, `B = c / H0`.
//!
//! Everything here is built from entrywise formulas in the number basis
//! (`lambda_j = j`, `mu_j = lambda_j + c / lambda_j`, `q_j = [lambda_j <= L]`)
//! and plain `nalgebra` matrices, without the core crate's spectral machinery.

use cutlab_core::models::{ModelKind, DEFAULT_COMMUTING_C};
use cutlab_core::seminorms::{TestFunction, BOUNDED_VARIATION};
use cutlab_core::TOL;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::{StudyConfig, StudyKind};
use crate::error::{HarnessError, Result};
use crate::observables::{named, random_polynomial};
use crate::report::{Axis, ConvergenceReport, Criterion, Point, Series};
use crate::study::{cutoff_grid, profile_dims, study_id, RESOLVENT_GRID};

type M = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest singular value as `sqrt(max eig(X^dagger X))`.
fn norm(x: &M) -> f64 {
    let gram = x.adjoint() * x;
    let eig = nalgebra::SymmetricEigen::new(gram);
    eig.eigenvalues.iter().copied().fold(0.0, f64::max).max(0.0).sqrt()
}

fn weighted(x: &M, left: &[f64], right: &[f64]) -> M {
    M::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * left[i] * right[j])
}

#[derive(Debug, Clone)]
struct Commuting {
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl Commuting {
    fn new(dim: usize, c: f64) -> Self {
        let lambda: Vec<f64> = (1..=dim).map(|j| j as f64).collect();
        let mu = lambda.iter().map(|&x| x + c / x).collect();
        Self { lambda, mu }
    }

    fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn mask(&self, l: f64) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|&x| if x <= l + TOL.tie { 1.0 } else { 0.0 })
            .collect()
    }

    fn f_of(&self, f: &TestFunction, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| f.eval(x)).collect()
    }

    fn pow(&self, k: i32) -> Vec<f64> {
        self.lambda.iter().map(|x| x.powi(k)).collect()
    }

    /// `max(||lambda^k X f||, ||f X lambda^k||)`
    fn seminorm(&self, x: &M, f: &TestFunction, k: u32) -> f64 {
        let fv = self.f_of(f, &self.lambda);
        let pk = self.pow(k as i32);
        norm(&weighted(x, &pk, &fv)).max(norm(&weighted(x, &fv, &pk)))
    }

    /// `max_j |w_j|` for a diagonal operator.
    fn diag_max(w: impl Iterator<Item = f64>) -> f64 {
        w.map(f64::abs).fold(0.0, f64::max)
    }
}

fn to_m(x: &cutlab_core::OperatorMatrix) -> M {
    x.matrix().clone()
}

fn entrywise(a: &M, phase: impl Fn(usize, usize) -> Complex64) -> M {
    M::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * phase(i, j))
}

/// Oracle report for the configured study; the model must be `commuting`.
pub fn oracle_report(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let kind: ModelKind = cfg
        .model
        .parse()
        .map_err(|_| HarnessError::Config(format!("oracle needs the commuting model, got `{}`", cfg.model)))?;
    if kind != ModelKind::Commuting {
        return Err(HarnessError::Config(format!(
            "oracle needs the commuting model, got `{}`",
            cfg.model
        )));
    }
    let c = cfg.params.c.unwrap_or(DEFAULT_COMMUTING_C);
    let o = Oracle::new(cfg, c)?;
    let mut report = ConvergenceReport::new(cfg, format!("oracle-{}", study_id(cfg)));
    report.series = match cfg.kind {
        StudyKind::Lemma22 => o.lemma2_2()?,
        StudyKind::C1c2c3 => o.c1c2c3()?,
        StudyKind::Corollary23 => o.corollary2_3()?,
        StudyKind::Lemma59 => o.lemma59(),
        StudyKind::Prop60 => o.prop60(false),
        StudyKind::ExampleAN => vec![],
        StudyKind::Lemma61 => o.lemma61(),
        StudyKind::Prop62 => o.prop60(true),
        StudyKind::Prop49 => o.prop49()?,
        StudyKind::Section4Defect => o.section4()?,
        StudyKind::Diagnostics => o.diagnostics(),
    };
    Ok(report)
}

struct Oracle<'a> {
    cfg: &'a StudyConfig,
    c: f64,
    m: Commuting,
    grid: Vec<f64>,
}

impl<'a> Oracle<'a> {
    fn new(cfg: &'a StudyConfig, c: f64) -> Result<Self> {
        let dim = cfg.dim();
        let grid = cutoff_grid(cfg, &cfg.build(dim)?)?;
        Ok(Self {
            cfg,
            c,
            m: Commuting::new(dim, c),
            grid,
        })
    }

    fn series(&self, study: &str, criterion: Criterion, values: impl Fn(f64) -> f64) -> Series {
        let points = self.grid.iter().map(|&l| Point::ok(l, values(l))).collect();
        Series::new(study, &self.cfg.model, self.m.dim(), Axis::Cutoff, criterion).with_points(points)
    }

    fn decay(&self) -> Criterion {
        Criterion::Decay {
            threshold: self.cfg.thresholds.final_value,
            stability: self.cfg.thresholds.stability,
        }
    }

    fn fk(&self) -> Vec<(TestFunction, u32)> {
        self.cfg
            .f_set
            .iter()
            .flat_map(|f| (0..=self.cfg.k_max).map(move |k| (*f, k)))
            .collect()
    }

    fn observable(&self) -> Result<M> {
        let d = self.m.dim();
        if self.cfg.options.observable == "q" {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            return Ok(M::from_fn(d, d, |i, j| {
                if i + 1 == j {
                    Complex64::from(s * (j as f64).sqrt())
                } else if j + 1 == i {
                    Complex64::from(s * (i as f64).sqrt())
                } else {
                    Complex64::from(0.0)
                }
            }));
        }
        Ok(to_m(&named(&self.cfg.options.observable, d, self.cfg.seed)?))
    }

    fn finish(series: Vec<Series>) -> Vec<Series> {
        series.into_iter().map(Series::finish).collect()
    }

    fn lemma2_2(&self) -> Result<Vec<Series>> {
        let d = self.m.dim();
        let b = M::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::from(self.c / self.m.lambda[i])
            } else {
                Complex64::from(0.0)
            }
        });
        let random = to_m(&random_polynomial(d, self.cfg.seed, 0)?);
        let mut out = vec![];
        for (name, x) in [("B", &b), ("random", &random)] {
            for (f, k) in self.fk() {
                let fv = self.m.f_of(&f, &self.m.lambda);
                let pk = self.m.pow(k as i32);
                out.push(
                    self.series(&format!("lemma2_2/{name}"), self.decay(), |l| {
                        let q = self.m.mask(l);
                        let outside = entrywise(x, |i, j| Complex64::from(1.0 - q[i] * q[j]));
                        norm(&weighted(&outside, &fv, &pk))
                    })
                    .with_f(&f)
                    .with_k(k),
                );
            }
        }
        Ok(Self::finish(out))
    }

    fn c1c2c3(&self) -> Result<Vec<Series>> {
        let a = self.observable()?;
        let lam = &self.m.lambda;
        let mut out = vec![];
        for (f, k) in self.fk() {
            out.push(
                self.series("c1c2c3/c1", self.decay(), |l| {
                    let q = self.m.mask(l);
                    Commuting::diag_max(
                        (0..lam.len()).map(|j| f.eval(lam[j]) * lam[j].powi(k as i32) * lam[j] * (1.0 - q[j])),
                    )
                })
                .with_f(&f)
                .with_k(k),
            );
        }
        for &t in &self.cfg.times {
            for (f, k) in self.fk() {
                out.push(
                    self.series("c1c2c3/c2", self.decay(), |l| {
                        let q = self.m.mask(l);
                        Commuting::diag_max((0..lam.len()).map(|j| {
                            let gap = (I * q[j] * lam[j] * t).exp() - (I * lam[j] * t).exp();
                            f.eval(lam[j]) * lam[j].powi(k as i32) * gap.norm()
                        }))
                    })
                    .with_f(&f)
                    .with_params(format!("{};t={t}", f.params_string()))
                    .with_k(k),
                );
            }
        }
        for &t in &self.cfg.times {
            for (f, k) in self.fk() {
                out.push(
                    self.series("c1c2c3/c3", self.decay(), |l| {
                        let q = self.m.mask(l);
                        let x = entrywise(&a, |i, j| {
                            (I * (q[i] * lam[i] - q[j] * lam[j]) * t).exp() - (I * (lam[i] - lam[j]) * t).exp()
                        });
                        self.m.seminorm(&x, &f, k)
                    })
                    .with_f(&f)
                    .with_params(format!("{};t={t}", f.params_string()))
                    .with_k(k),
                );
            }
        }
        Ok(Self::finish(out))
    }

    fn corollary2_3(&self) -> Result<Vec<Series>> {
        let a = self.observable()?;
        let mu = &self.m.mu;
        let out = self
            .fk()
            .into_iter()
            .map(|(f, k)| {
                self.series("corollary2_3", self.decay(), |l| {
                    let q = self.m.mask(l);
                    let x = entrywise(&a, |i, j| I * ((q[j] * mu[j] - q[i] * mu[i]) - (mu[j] - mu[i])));
                    self.m.seminorm(&x, &f, k)
                })
                .with_f(&f)
                .with_k(k)
            })
            .collect();
        Ok(Self::finish(out))
    }

    fn lemma59(&self) -> Vec<Series> {
        let (lam, mu) = (&self.m.lambda, &self.m.mu);
        let mut out = vec![];
        for &k in &self.cfg.options.k_values {
            for &s in &self.cfg.options.s_values {
                out.push(
                    self.series("lemma59", self.decay(), |l| {
                        let q = self.m.mask(l);
                        Commuting::diag_max(
                            (0..lam.len())
                                .map(|j| lam[j].powi(-(s as i32)) * mu[j] * (1.0 - q[j]) * lam[j].powi(k as i32)),
                        )
                    })
                    .with_params(format!("s={s}"))
                    .with_k(k),
                );
            }
        }
        Self::finish(out)
    }

    /// The integrand norm is constant in time because every factor is diagonal.
    fn prop60(&self, nilpotent_kind: bool) -> Vec<Series> {
        let lam = &self.m.lambda;
        let t_end = *self.cfg.times.last().unwrap();
        let mut out = vec![];
        let (study, criterion) = if nilpotent_kind {
            ("prop62/integrand_bound", Criterion::Uniform { ratio: 1.0 + 1e-6 })
        } else {
            (
                "prop60",
                Criterion::Uniform {
                    ratio: self.cfg.thresholds.uniform_ratio,
                },
            )
        };
        for f in &self.cfg.f_set {
            for &s in &self.cfg.options.s_values {
                let bound = t_end * Commuting::diag_max(lam.iter().map(|&x| f.eval(x) * x.powi(s as i32)));
                out.push(
                    self.series(study, criterion, |_| bound)
                        .with_f(f)
                        .with_params(format!("{};s={s};T={t_end}", f.params_string())),
                );
            }
        }
        if nilpotent_kind {
            let order_tol = (2 * self.m.dim()) as f64;
            out.push(self.series("prop62/order", Criterion::AtMost { tol: order_tol }, |_| 0.0));
            let mut taus: Vec<f64> = self.cfg.times.iter().map(|t| -t).rev().collect();
            taus.extend(self.cfg.times.iter().copied());
            for tau in taus {
                out.push(
                    self.series("prop62/series_error", Criterion::AtMost { tol: 1e-9 }, |_| 0.0)
                        .with_params(format!("tau={tau}")),
                );
            }
        } else {
            for &t in &self.cfg.times {
                out.push(
                    self.series("prop60/g_consistency", Criterion::AtMost { tol: 1e-8 }, |_| 0.0)
                        .with_params(format!("t={t}")),
                );
            }
        }
        Self::finish(out)
    }

    fn lemma61(&self) -> Vec<Series> {
        let mu = &self.m.mu;
        let mut out = vec![];
        for f in &self.cfg.f_set {
            for &ell in &self.cfg.options.ell_values {
                for &k in &self.cfg.options.k_values {
                    out.push(
                        self.series("lemma61", self.decay(), |l| {
                            let q = self.m.mask(l);
                            Commuting::diag_max(
                                (0..mu.len()).map(|j| f.eval(mu[j]) * mu[j].powi((ell + k) as i32) * (1.0 - q[j])),
                            )
                        })
                        .with_f(f)
                        .with_params(format!("{};ell={ell}", f.params_string()))
                        .with_k(k),
                    );
                }
            }
        }
        Self::finish(out)
    }

    fn prop49(&self) -> Result<Vec<Series>> {
        let a = self.observable()?;
        let mu = &self.m.mu;
        let mut low: Vec<usize> = (0..mu.len()).collect();
        low.sort_by(|&i, &j| mu[i].total_cmp(&mu[j]));
        low.truncate(8);
        let mut out = vec![];
        for &t in &self.cfg.times {
            for order in 0..=2i32 {
                for (f, k) in self.fk() {
                    out.push(
                        self.series(&format!("prop49/beta_d{order}"), self.decay(), |l| {
                            let q = self.m.mask(l);
                            let x = entrywise(&a, |i, j| {
                                let w = mu[i] - mu[j];
                                (q[i] * q[j] - 1.0) * (I * w).powi(order) * (I * w * t).exp()
                            });
                            self.m.seminorm(&x, &f, k)
                        })
                        .with_f(&f)
                        .with_params(format!("{};t={t}", f.params_string()))
                        .with_k(k),
                    );
                }
            }
            for order in 0..=2i32 {
                for n in 0..=2i32 {
                    out.push(
                        self.series(&format!("prop49/vector_d{order}"), self.decay(), |l| {
                            let q = self.m.mask(l);
                            Commuting::diag_max(low.iter().map(|&j| mu[j].powi(n + order) * (1.0 - q[j])))
                        })
                        .with_params(format!("n={n};t={t}")),
                    );
                }
            }
        }
        Ok(Self::finish(out))
    }

    fn section4(&self) -> Result<Vec<Series>> {
        let d = self.m.dim();
        let mu = &self.m.mu;
        let randoms = (0..self.cfg.options.random_count as u64)
            .map(|i| random_polynomial(d, self.cfg.seed, i).map(|x| to_m(&x)))
            .collect::<Result<Vec<_>>>()?;
        let eta = |z: &M, q: &[f64]| entrywise(z, |i, j| I * q[i] * q[j] * (mu[j] - mu[i]));
        let mut out = vec![
            self.series("section4/closure", Criterion::AtMost { tol: 1e-11 }, |_| 0.0),
            self.series("section4/leibniz_delta", Criterion::AtMost { tol: 1e-10 }, |_| 0.0),
            self.series("section4/leibniz_eta", Criterion::Exceeds { min: 1e-3 }, |l| {
                let q = self.m.mask(l);
                (0..randoms.len())
                    .map(|i| {
                        let (x, y) = (&randoms[i], &randoms[(i + 1) % randoms.len()]);
                        norm(&(eta(&(x * y), &q) - eta(x, &q) * y - x * eta(y, &q)))
                    })
                    .fold(0.0, f64::max)
            }),
        ];
        let a = self.observable()?;
        for (f, k) in self.fk() {
            out.push(
                self.series("section4/delta_norm", self.decay(), |l| {
                    let q = self.m.mask(l);
                    let x = entrywise(&a, |i, j| {
                        I * ((q[j] * mu[j] - q[i] * mu[i]) - q[i] * q[j] * (mu[j] - mu[i]))
                    });
                    self.m.seminorm(&x, &f, k)
                })
                .with_f(&f)
                .with_k(k),
            );
        }
        Ok(Self::finish(out))
    }

    fn diagnostics(&self) -> Vec<Series> {
        let model = &self.cfg.model;
        let d = self.m.dim();
        let lam = &self.m.lambda;
        let mut out = vec![];
        let rb: Vec<Point> = RESOLVENT_GRID
            .iter()
            .map(|&x| {
                Point::ok(
                    x,
                    Commuting::diag_max(lam.iter().map(|&y| (self.c / y) / Complex64::new(y, -x).norm())),
                )
            })
            .collect();
        out.push(
            Series::new(
                "diagnostics/relative_bound",
                model,
                d,
                Axis::Lambda,
                Criterion::NonIncreasing { slack: 1e-8 },
            )
            .with_points(rb),
        );
        let dims = profile_dims(self.cfg);
        let models: Vec<Commuting> = dims.iter().map(|&n| Commuting::new(n, self.c)).collect();
        let bounded = Criterion::Bounded {
            variation: BOUNDED_VARIATION,
        };
        let profile = |study: &str, params: String, k: u32, value: &dyn Fn(&Commuting) -> f64| {
            let points = dims
                .iter()
                .zip(&models)
                .map(|(&n, cm)| Point::ok(n as f64, value(cm)))
                .collect();
            Series::new(study, model, d, Axis::Dim, bounded)
                .with_params(params)
                .with_k(k)
                .with_points(points)
                .finish()
        };
        let ratio = |cm: &Commuting, a: &[f64], ka: u32, b: &[f64], lb: u32| {
            Commuting::diag_max((0..cm.dim()).map(|j| a[j].powi(ka as i32) / b[j].powi(lb as i32)))
        };
        for (k, l) in [(1u32, 1u32), (2, 2)] {
            out.push(profile("diagnostics/cross_bound", format!("ell={l}"), k, &|cm| {
                ratio(cm, &cm.lambda, k, &cm.mu, l)
            }));
        }
        for k in 1..=2u32 {
            let mut chosen = None;
            for ell in 0..=k + 4 {
                let left = profile("diagnostics/equivalence_left", format!("ell={ell}"), k, &|cm| {
                    ratio(cm, &cm.mu, k, &cm.lambda, ell)
                });
                let right = profile("diagnostics/equivalence_right", format!("ell={ell}"), k, &|cm| {
                    ratio(cm, &cm.lambda, k, &cm.mu, ell)
                });
                let done = left.verdict.is_converged() && right.verdict.is_converged();
                chosen = Some((left, right));
                if done {
                    break;
                }
            }
            let (left, right) = chosen.unwrap();
            out.push(left);
            out.push(right);
        }
        for &ell in &self.cfg.options.tail_exponents {
            let tail =
                |l: f64| Commuting::diag_max(lam.iter().filter(|&&x| x > l + TOL.tie).map(|x| x.powi(-(ell as i32))));
            out.push(
                self.series("diagnostics/tail_norm", Criterion::NonIncreasing { slack: 0.0 }, tail)
                    .with_params(format!("ell={ell}")),
            );
            out.push(
                self.series("diagnostics/tail_margin", Criterion::AtMost { tol: 1.0 + 1e-12 }, |l| {
                    tail(l) * l.powi(ell as i32)
                })
                .with_params(format!("ell={ell}")),
            );
        }
        Self::finish(out)
    }
}

/// Key identifying a series across study and oracle reports.
pub fn series_key(s: &Series) -> String {
    let k = s.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
    format!("{}|{}|{}|{}|{}", s.study, s.f_kind, s.f_params, k, s.dim)
}

/// Mismatches between every evaluated study series and its oracle counterpart,
/// compared pointwise with `|a - b| <= tol * max(1, |b|)`.
pub fn cross_check(study: &ConvergenceReport, oracle: &ConvergenceReport, tol: f64) -> Vec<String> {
    let mut problems = vec![];
    let mut compared = 0usize;
    for s in &study.series {
        if matches!(s.verdict, crate::report::Verdict::Skipped { .. }) {
            continue;
        }
        let key = series_key(s);
        let Some(o) = oracle.series.iter().find(|o| series_key(o) == key) else {
            problems.push(format!("{key}: no oracle series"));
            continue;
        };
        if s.points.len() != o.points.len() {
            problems.push(format!(
                "{key}: {} points vs {} oracle points",
                s.points.len(),
                o.points.len()
            ));
            continue;
        }
        for (p, q) in s.points.iter().zip(&o.points) {
            compared += 1;
            let ok = p.x == q.x && (p.value - q.value).abs() <= tol * q.value.abs().max(1.0);
            if !ok {
                problems.push(format!("{key} at x={}: {:e} vs oracle {:e}", p.x, p.value, q.value));
            }
        }
    }
    if compared == 0 {
        problems.push("no series were compared".into());
    }
    problems
}
