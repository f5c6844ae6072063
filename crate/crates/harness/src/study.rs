//! Study orchestration: one function per study kind, each producing series over a
//! cutoff grid (or a dimension / resolvent grid for diagnostics).

use cutlab_core::cutoff::{
    cutoff_hamiltonian, default_grid, geometric_grid, label_grid, label_projection, ladder_commutation_check,
    spectral_projection, tail_norm,
};
use cutlab_core::dynamics::{
    adjoint_series, closure_defect, derivation, eta_map, leibniz_defect, lemma59_quantity, lemma61_quantity,
    nilpotency_order, regularized_derivation, CutoffDynamics, ExampleBound,
};
use cutlab_core::linop::{operator_norm, OperatorMatrix, Propagation, SpectralDecomposition};
use cutlab_core::models::{cross_bound_at, relative_bound_profile, ModelInstance, ModelKind};
use cutlab_core::quadrature::{GaussLegendre, Refinement};
use cutlab_core::seminorms::{equivalence_at, Reference, Seminorm, TestFunction, BOUNDED_VARIATION};
use rayon::prelude::*;

use crate::config::{Placement, StudyConfig, StudyKind};
use crate::error::{HarnessError, Result};
use crate::observables::{named, random_polynomial};
use crate::report::{Axis, ConvergenceReport, Criterion, Point, Series, Stability};

/// `<kind>-<model>-d<dim>`
pub fn study_id(cfg: &StudyConfig) -> String {
    format!("{}-{}-d{}", cfg.kind, cfg.model, cfg.dim())
}

/// Runs the configured study on a worker pool of `cfg.threads` threads.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let ctx = Ctx::new(cfg)?;
    let mut report = ConvergenceReport::new(cfg, study_id(cfg));
    if ctx.m.shift != 0.0 {
        report
            .notes
            .push(format!("H0 shifted by {} to start at 1", ctx.m.shift));
    }
    report.notes.extend(ctx.m.metadata.notes.iter().cloned());
    let series = match cfg.kind {
        StudyKind::Lemma22 => lemma2_2(&ctx)?,
        StudyKind::C1c2c3 => c1c2c3(&ctx)?,
        StudyKind::Corollary23 => corollary2_3(&ctx)?,
        StudyKind::Lemma59 => lemma59(&ctx, &mut report.notes)?,
        StudyKind::Prop60 => prop60(&ctx)?,
        StudyKind::ExampleAN => example_an(&ctx, &mut report.notes)?,
        StudyKind::Lemma61 => lemma61(&ctx)?,
        StudyKind::Prop62 => prop62(&ctx, &mut report.notes)?,
        StudyKind::Prop49 => prop49(&ctx)?,
        StudyKind::Section4Defect => section4(&ctx)?,
        StudyKind::Diagnostics => diagnostics(&ctx, &mut report.notes)?,
    };
    report.series = series;
    Ok(report)
}

/// Cutoff grid for `m` according to the config.
pub fn cutoff_grid(cfg: &StudyConfig, m: &ModelInstance) -> Result<Vec<f64>> {
    let s = m.h0_spectrum();
    let d = s.dim();
    let half = s.eigenvalues()[d.div_ceil(2) - 1];
    let grid = match cfg.grid.placement {
        Placement::Geometric if cfg.grid.upper_half => {
            geometric_grid(s, s.eigenvalues()[d.div_ceil(8) - 1], s.max(), cfg.grid.count)
        }
        Placement::Geometric => default_grid(s, cfg.grid.count),
        Placement::Labels => {
            let top = if cfg.grid.upper_half { d - 1 } else { d.div_ceil(2) - 1 };
            label_grid(top, cfg.grid.count)
                .into_iter()
                .map(|l| m.level(l))
                .collect()
        }
        Placement::Explicit => cfg.grid.values.clone().unwrap_or_default(),
    };
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Config("cutoff grid must be strictly ascending".into()));
    }
    if !cfg.grid.upper_half {
        if let Some(&l) = grid.iter().find(|&&l| l > half + cutlab_core::TOL.tie) {
            return Err(HarnessError::Config(format!(
                "cutoff {l} lies above the lower half of the spectrum (max {half}); set grid.upper_half"
            )));
        }
    }
    if grid.is_empty() {
        return Err(HarnessError::Config("cutoff grid is empty".into()));
    }
    Ok(grid)
}

/// Labels used by the label-axis studies.
pub fn label_axis(cfg: &StudyConfig, m: &ModelInstance) -> Vec<usize> {
    let d = m.dim;
    let top = if cfg.grid.upper_half { d - 1 } else { d.div_ceil(2) - 1 };
    match cfg.grid.placement {
        Placement::Explicit => cfg
            .grid
            .values
            .clone()
            .unwrap_or_default()
            .into_iter()
            .map(|x| x.round() as usize)
            .collect(),
        _ => label_grid(top, cfg.grid.count),
    }
}

/// Evenly spaced `tau` points in `[0, tau_max]`.
pub fn tau_grid(cfg: &StudyConfig) -> Vec<f64> {
    let n = cfg.options.tau_count;
    if n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| cfg.options.tau_max * i as f64 / (n - 1) as f64)
        .collect()
}

/// Profile dimensions for the diagnostics study.
pub fn profile_dims(cfg: &StudyConfig) -> Vec<usize> {
    if cfg.dims.len() > 1 {
        return cfg.dims.clone();
    }
    let d = cfg.dim();
    let mut v: Vec<usize> = [d / 4, d / 2, d, 2 * d].into_iter().filter(|&x| x >= 4).collect();
    v.dedup();
    v
}

pub const RESOLVENT_GRID: [f64; 11] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];

struct Ctx<'a> {
    cfg: &'a StudyConfig,
    m: ModelInstance,
    grid: Vec<f64>,
    name: String,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a StudyConfig) -> Result<Self> {
        let m = cfg.build(cfg.dim())?;
        let grid = cutoff_grid(cfg, &m)?;
        Ok(Self {
            name: cfg.model.clone(),
            cfg,
            m,
            grid,
        })
    }

    fn dim(&self) -> usize {
        self.m.dim
    }

    fn series(&self, study: &str, criterion: Criterion) -> Series {
        Series::new(study, &self.name, self.dim(), Axis::Cutoff, criterion)
    }

    fn decay(&self) -> Criterion {
        Criterion::Decay {
            threshold: self.cfg.thresholds.final_value,
            stability: self.cfg.thresholds.stability,
        }
    }

    fn fk_pairs(&self) -> Vec<(TestFunction, u32)> {
        let mut out = vec![];
        for f in &self.cfg.f_set {
            for k in 0..=self.cfg.k_max {
                out.push((*f, k));
            }
        }
        out
    }

    fn refinement(&self) -> Refinement {
        Refinement {
            start_panels: 1,
            tol: self.cfg.tolerances.quadrature,
            budget: self.cfg.tolerances.quadrature_budget,
        }
    }

    /// Evaluates `eval` at every cutoff (in parallel) and splits the per-cutoff
    /// vectors into the template series. Decay series are recomputed at twice the
    /// dimension on the same grid when stability checks are on.
    fn sweep<P: Sync>(
        &self,
        templates: Vec<Series>,
        prepare: impl Fn(&ModelInstance) -> Result<P>,
        eval: impl Fn(&P, &ModelInstance, f64) -> Result<Vec<f64>> + Sync,
    ) -> Result<Vec<Series>> {
        let n = templates.len();
        let run = |m: &ModelInstance| -> Result<Vec<Vec<Point>>> {
            let prepared = prepare(m)?;
            let per_l: Vec<Vec<Point>> = self
                .grid
                .par_iter()
                .map(|&l| match eval(&prepared, m, l) {
                    Ok(v) => {
                        assert_eq!(v.len(), n, "series count mismatch");
                        v.into_iter().map(|x| Point::from_result::<String>(l, Ok(x))).collect()
                    }
                    Err(e) => (0..n).map(|_| Point::failed(l, e.to_string())).collect(),
                })
                .collect();
            Ok((0..n)
                .map(|i| per_l.iter().map(|row| row[i].clone()).collect())
                .collect())
        };
        let base = run(&self.m)?;
        let wants_stability = self.cfg.options.stability_check
            && templates.iter().any(|t| matches!(t.criterion, Criterion::Decay { .. }));
        let doubled = if wants_stability {
            let m2 = self.cfg.build(2 * self.dim())?;
            Some(run(&m2)?)
        } else {
            None
        };
        Ok(templates
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let mut s = t.with_points(base[i].clone());
                if let (Some(d), Criterion::Decay { .. }) = (&doubled, s.criterion) {
                    let v2 = d[i].iter().map(|p| p.value).collect();
                    s.stability = Some(Stability::new(2 * self.dim(), &s.values(), v2));
                }
                s.finish()
            })
            .collect())
    }
}

fn lemma2_2(ctx: &Ctx) -> Result<Vec<Series>> {
    let obs = ["B", "random"];
    let mut templates = vec![];
    for o in obs {
        for (f, k) in ctx.fk_pairs() {
            templates.push(ctx.series(&format!("lemma2_2/{o}"), ctx.decay()).with_f(&f).with_k(k));
        }
    }
    let seed = ctx.cfg.seed;
    let pairs = ctx.fk_pairs();
    ctx.sweep(
        templates,
        |m| Ok(vec![m.b.clone(), random_polynomial(m.dim, seed, 0)?]),
        |xs, m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            let sn = Seminorm::new(m.h0_spectrum(), Reference::H0)?;
            let mut out = vec![];
            for x in xs {
                let prepared = sn.prepare(&(x - &q * x * &q))?;
                for (f, k) in &pairs {
                    // single ordering f(H0) (X - QXQ) H0^k
                    out.push(sn.eval_prepared(&prepared, f, *k)?.right);
                }
            }
            Ok(out)
        },
    )
}

fn c1c2c3(ctx: &Ctx) -> Result<Vec<Series>> {
    let times = ctx.cfg.times.clone();
    let pairs = ctx.fk_pairs();
    let mut templates = vec![];
    for (f, k) in &pairs {
        templates.push(ctx.series("c1c2c3/c1", ctx.decay()).with_f(f).with_k(*k));
    }
    for study in ["c1c2c3/c2", "c1c2c3/c3"] {
        for &t in &times {
            for (f, k) in &pairs {
                templates.push(
                    ctx.series(study, ctx.decay())
                        .with_f(f)
                        .with_params(format!("{};t={t}", f.params_string()))
                        .with_k(*k),
                );
            }
        }
    }
    let obs = ctx.cfg.options.observable.clone();
    let seed = ctx.cfg.seed;
    ctx.sweep(
        templates,
        |m| {
            let a = named(&obs, m.dim, seed)?;
            Ok((a, Propagation::new(&m.h0)?))
        },
        |(a, prop0), m, l| {
            let s = m.h0_spectrum();
            let q = spectral_projection(s, l);
            let h_l = &q * &m.h0 * &q;
            let prop_l = Propagation::new(&h_l)?;
            let sn = Seminorm::new(s, Reference::H0)?;
            let mut out = vec![];
            let c1 = sn.prepare(&(&h_l - &m.h0))?;
            for (f, k) in &pairs {
                out.push(sn.eval_prepared(&c1, f, *k)?.value);
            }
            let mut c3_all = vec![];
            for &t in &times {
                let (ul, u0) = (prop_l.unitary(t), prop0.unitary(t));
                let c2 = sn.prepare(&(&ul - &u0))?;
                for (f, k) in &pairs {
                    out.push(sn.eval_prepared(&c2, f, *k)?.value);
                }
                let al = &ul * a * prop_l.unitary(-t);
                let a0 = &u0 * a * prop0.unitary(-t);
                c3_all.push(sn.prepare(&(al - a0))?);
            }
            for c3 in &c3_all {
                for (f, k) in &pairs {
                    out.push(sn.eval_prepared(c3, f, *k)?.value);
                }
            }
            Ok(out)
        },
    )
}

fn corollary2_3(ctx: &Ctx) -> Result<Vec<Series>> {
    let pairs = ctx.fk_pairs();
    let templates = pairs
        .iter()
        .map(|(f, k)| ctx.series("corollary2_3", ctx.decay()).with_f(f).with_k(*k))
        .collect();
    let obs = ctx.cfg.options.observable.clone();
    let seed = ctx.cfg.seed;
    ctx.sweep(
        templates,
        |m| {
            let a = named(&obs, m.dim, seed)?;
            let full = derivation(&m.h(), &a)?;
            Ok((a, full))
        },
        |(a, full), m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            let h_l = cutoff_hamiltonian(m, &q)?;
            let diff = derivation(&h_l, a)? - full;
            let sn = Seminorm::new(m.h0_spectrum(), Reference::H0)?;
            let prepared = sn.prepare(&diff)?;
            pairs
                .iter()
                .map(|(f, k)| Ok(sn.eval_prepared(&prepared, f, *k)?.value))
                .collect()
        },
    )
}

fn lemma59(ctx: &Ctx, notes: &mut Vec<String>) -> Result<Vec<Series>> {
    let o = &ctx.cfg.options;
    let mut keys = vec![];
    for &k in &o.k_values {
        for &s in &o.s_values {
            keys.push((s, k));
        }
    }
    let templates = keys
        .iter()
        .map(|(s, k)| {
            ctx.series("lemma59", ctx.decay())
                .with_params(format!("s={s}"))
                .with_k(*k)
        })
        .collect();
    let series = ctx.sweep(
        templates,
        |_| Ok(()),
        |_, m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            keys.iter().map(|(s, k)| Ok(lemma59_quantity(m, &q, *s, *k)?)).collect()
        },
    )?;
    for &k in &o.k_values {
        let smallest = keys
            .iter()
            .zip(&series)
            .filter(|((_, kk), _)| *kk == k)
            .find(|(_, s)| s.last().is_some_and(|v| v < ctx.cfg.thresholds.final_value))
            .map(|((s, _), _)| *s);
        notes.push(match smallest {
            Some(s) => format!("k={k}: smallest s with final value below threshold is {s}"),
            None => format!("k={k}: no tested s reaches the threshold at the top cutoff"),
        });
    }
    Ok(series)
}

fn prop60(ctx: &Ctx) -> Result<Vec<Series>> {
    let o = &ctx.cfg.options;
    let t_end = *ctx.cfg.times.last().unwrap();
    let uniform = Criterion::Uniform {
        ratio: ctx.cfg.thresholds.uniform_ratio,
    };
    let mut keys = vec![];
    let mut templates = vec![];
    for f in &ctx.cfg.f_set {
        for &s in &o.s_values {
            keys.push((*f, s));
            templates.push(
                ctx.series("prop60", uniform)
                    .with_f(f)
                    .with_params(format!("{};s={s};T={t_end}", f.params_string())),
            );
        }
    }
    for &t in &ctx.cfg.times {
        templates.push(
            ctx.series("prop60/g_consistency", Criterion::AtMost { tol: 1e-8 })
                .with_params(format!("t={t}")),
        );
    }
    let refine = ctx.refinement();
    let times = ctx.cfg.times.clone();
    let rule = GaussLegendre::eight();
    ctx.sweep(
        templates,
        |m| {
            let s = m.h0_spectrum();
            keys.iter()
                .map(|(f, sp)| Ok((f.on_spectrum(s)?, s.int_power(*sp as i32)?)))
                .collect::<Result<Vec<_>>>()
        },
        |weights, m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            let d = CutoffDynamics::new(m, &q)?;
            let mut out = vec![];
            for (f_h0, h0_s) in weights {
                out.push(d.integrand_bound(f_h0, h0_s, t_end, &rule, refine)?.value);
            }
            for &t in &times {
                let integral = d.g_integral(t, &rule, refine)?.value;
                out.push(integral.max_abs_diff(&d.g_direct(t)));
            }
            Ok(out)
        },
    )
}

fn example_an(ctx: &Ctx, notes: &mut Vec<String>) -> Result<Vec<Series>> {
    let m = &ctx.m;
    let labels = label_axis(ctx.cfg, m);
    let taus = tau_grid(ctx.cfg);
    let slack = ctx.cfg.thresholds.bound_slack;
    let margin_template = |f: &TestFunction, tau: f64| {
        Series::new(
            "example_aN/margin",
            &ctx.name,
            m.dim,
            Axis::Label,
            Criterion::AtMost { tol: slack },
        )
        .with_f(f)
        .with_params(format!("{};tau={tau}", f.params_string()))
    };
    let ident_template = Series::new(
        "example_aN/identities",
        &ctx.name,
        m.dim,
        Axis::Label,
        Criterion::AtMost { tol: 1e-11 },
    );
    if m.kind != ModelKind::NumberAN {
        let reason = format!("requires the number-aN model, got {}", m.name());
        let mut out = vec![ident_template.skipped(&reason)];
        for f in &ctx.cfg.f_set {
            for &tau in &taus {
                out.push(margin_template(f, tau).skipped(&reason));
            }
        }
        return Ok(out);
    }
    let identities: Vec<Point> = labels
        .par_iter()
        .map(|&l| {
            let x = l as f64;
            let r = (|| -> cutlab_core::Result<f64> {
                let ladder = ladder_commutation_check(m, l)?;
                let q = label_projection(m, l);
                let h_l = cutoff_hamiltonian(m, &q)?;
                Ok(ladder.max(h_l.max_abs_diff(&(m.h() * &q))))
            })();
            Point::from_result(x, r)
        })
        .collect();
    let mut out = vec![ident_template.with_points(identities).finish()];
    for f in &ctx.cfg.f_set {
        let bound = match ExampleBound::new(m, f) {
            Ok(b) => b,
            Err(e) => {
                for &tau in &taus {
                    out.push(margin_template(f, tau).skipped(e.to_string()));
                }
                continue;
            }
        };
        notes.push(format!(
            "{f}: eigenvector condition of H is {:.3e}; f(H) formed from exponentials of H; rhs = {:e}",
            bound.condition, bound.rhs
        ));
        let rows: Vec<Series> = taus
            .par_iter()
            .map(|&tau| {
                let points = labels
                    .iter()
                    .map(|&l| Point::from_result(l as f64, bound.check(l, tau).map(|v| v.lhs - v.rhs)))
                    .collect();
                margin_template(f, tau).with_points(points).finish()
            })
            .collect();
        out.extend(rows);
    }
    Ok(out)
}

fn lemma61(ctx: &Ctx) -> Result<Vec<Series>> {
    let o = &ctx.cfg.options;
    let mut keys = vec![];
    let mut templates = vec![];
    for f in &ctx.cfg.f_set {
        for &ell in &o.ell_values {
            for &k in &o.k_values {
                keys.push((*f, ell, k));
                templates.push(
                    ctx.series("lemma61", ctx.decay())
                        .with_f(f)
                        .with_params(format!("{};ell={ell}", f.params_string()))
                        .with_k(k),
                );
            }
        }
    }
    if !ctx.m.b_is_hermitian() {
        let reason = format!("H is not Hermitian for {}", ctx.m.name());
        return Ok(templates.into_iter().map(|t| t.skipped(&reason)).collect());
    }
    ctx.sweep(
        templates,
        |_| Ok(()),
        |_, m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            keys.iter()
                .map(|(f, ell, k)| Ok(lemma61_quantity(m, &q, f, *ell, *k)?))
                .collect()
        },
    )
}

fn prop62(ctx: &Ctx, notes: &mut Vec<String>) -> Result<Vec<Series>> {
    let mut taus: Vec<f64> = ctx.cfg.times.iter().map(|t| -t).rev().collect();
    taus.extend(ctx.cfg.times.iter().copied());
    let o = &ctx.cfg.options;
    let t_end = *ctx.cfg.times.last().unwrap();
    let mut templates = vec![ctx.series(
        "prop62/order",
        Criterion::AtMost {
            tol: (2 * ctx.dim()) as f64,
        },
    )];
    for &tau in &taus {
        templates.push(
            ctx.series("prop62/series_error", Criterion::AtMost { tol: 1e-9 })
                .with_params(format!("tau={tau}")),
        );
    }
    let mut keys = vec![];
    for f in &ctx.cfg.f_set {
        for &s in &o.s_values {
            keys.push((*f, s));
            templates.push(
                ctx.series("prop62/integrand_bound", Criterion::Uniform { ratio: 1.0 + 1e-6 })
                    .with_f(f)
                    .with_params(format!("{};s={s};T={t_end}", f.params_string())),
            );
        }
    }
    let refine = ctx.refinement();
    let rule = GaussLegendre::eight();
    let max_m = 2 * ctx.dim();
    let series = ctx.sweep(
        templates,
        |m| {
            let s = m.h0_spectrum();
            keys.iter()
                .map(|(f, sp)| Ok((f.on_spectrum(s)?, s.int_power(*sp as i32)?)))
                .collect::<Result<Vec<_>>>()
        },
        |weights, m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            let d = CutoffDynamics::new(m, &q)?;
            let order =
                nilpotency_order(&d.h_l, &d.h, max_m)?.ok_or(cutlab_core::Error::NotNilpotent { order: max_m + 1 })?;
            let mut out = vec![order as f64];
            for &tau in &taus {
                let series = adjoint_series(&d.h_l, &d.h, tau, order)?;
                let direct = d.e_h_l(tau) * &d.h * d.e_h_l(-tau);
                out.push(series.max_abs_diff(&direct));
            }
            for (f_h0, h0_s) in weights {
                out.push(d.integrand_bound(f_h0, h0_s, t_end, &rule, refine)?.value);
            }
            Ok(out)
        },
    )?;
    if let Some(s) = series.first() {
        let orders: Vec<String> = s.points.iter().map(|p| format!("{}", p.value)).collect();
        notes.push(format!("nilpotency order per cutoff: [{}]", orders.join(", ")));
    }
    Ok(series)
}

fn prop49(ctx: &Ctx) -> Result<Vec<Series>> {
    let pairs = ctx.fk_pairs();
    let times = ctx.cfg.times.clone();
    let mut templates = vec![];
    for &t in &times {
        for order in 0..=2u32 {
            for (f, k) in &pairs {
                templates.push(
                    ctx.series(&format!("prop49/beta_d{order}"), ctx.decay())
                        .with_f(f)
                        .with_params(format!("{};t={t}", f.params_string()))
                        .with_k(*k),
                );
            }
        }
        for order in 0..=2u32 {
            for n in 0..=2u32 {
                templates.push(
                    ctx.series(&format!("prop49/vector_d{order}"), ctx.decay())
                        .with_params(format!("n={n};t={t}")),
                );
            }
        }
    }
    if !ctx.m.b_is_hermitian() {
        let reason = format!("H is not Hermitian for {}", ctx.m.name());
        return Ok(templates.into_iter().map(|t| t.skipped(&reason)).collect());
    }
    let obs = ctx.cfg.options.observable.clone();
    let seed = ctx.cfg.seed;
    ctx.sweep(
        templates,
        |m| {
            let a = named(&obs, m.dim, seed)?;
            let hs = m.h_spectrum()?;
            Ok((a, low_energy_projector(&hs, 8)))
        },
        |(a, p8), m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            let d = CutoffDynamics::new(m, &q)?;
            let sn = Seminorm::new(m.h0_spectrum(), Reference::H0)?;
            let mut out = vec![];
            for &t in &times {
                for order in 0..=2u32 {
                    let diff = d.beta(a, t, order)? - d.alpha(a, t, order)?;
                    let prepared = sn.prepare(&diff)?;
                    for (f, k) in &pairs {
                        out.push(sn.eval_prepared(&prepared, f, *k)?.value);
                    }
                }
                for order in 0..=2u32 {
                    for n in 0..=2u32 {
                        out.push(d.block_distance(p8, t, n, order)?);
                    }
                }
            }
            Ok(out)
        },
    )
}

/// Projector onto the span of the lowest `count` eigenvectors.
pub fn low_energy_projector(s: &SpectralDecomposition, count: usize) -> OperatorMatrix {
    let mask: Vec<_> = (0..s.dim())
        .map(|j| {
            if j < count {
                cutlab_core::linop::ONE
            } else {
                cutlab_core::linop::ZERO
            }
        })
        .collect();
    s.from_eigenbasis_diagonal(&mask)
}

fn section4(ctx: &Ctx) -> Result<Vec<Series>> {
    let pairs = ctx.fk_pairs();
    let mut templates = vec![
        ctx.series("section4/closure", Criterion::AtMost { tol: 1e-11 }),
        ctx.series("section4/leibniz_delta", Criterion::AtMost { tol: 1e-10 }),
        ctx.series("section4/leibniz_eta", Criterion::Exceeds { min: 1e-3 }),
    ];
    for (f, k) in &pairs {
        templates.push(ctx.series("section4/delta_norm", ctx.decay()).with_f(f).with_k(*k));
    }
    let obs = ctx.cfg.options.observable.clone();
    let seed = ctx.cfg.seed;
    let count = ctx.cfg.options.random_count as u64;
    ctx.sweep(
        templates,
        |m| {
            let randoms = (0..count)
                .map(|i| random_polynomial(m.dim, seed, i))
                .collect::<Result<Vec<_>>>()?;
            Ok((named(&obs, m.dim, seed)?, randoms))
        },
        |(a, randoms), m, l| {
            let q = spectral_projection(m.h0_spectrum(), l);
            let mut closure: f64 = 0.0;
            let mut leib_delta: f64 = 0.0;
            let mut leib_eta: f64 = 0.0;
            for (i, x) in randoms.iter().enumerate() {
                closure = closure.max(closure_defect(m, &q, x)?);
                let y = &randoms[(i + 1) % randoms.len()];
                let dl = leibniz_defect(|z| regularized_derivation(m, &q, z), x, y)?;
                leib_delta = leib_delta.max(dl.max_abs());
                let de = leibniz_defect(|z| eta_map(m, &q, z), x, y)?;
                leib_eta = leib_eta.max(operator_norm(&de)?);
            }
            let mut out = vec![closure, leib_delta, leib_eta];
            let defect = cutlab_core::dynamics::delta_defect(m, &q, a)?;
            let sn = Seminorm::new(m.h0_spectrum(), Reference::H0)?;
            let prepared = sn.prepare(&defect)?;
            for (f, k) in &pairs {
                out.push(sn.eval_prepared(&prepared, f, *k)?.value);
            }
            Ok(out)
        },
    )
}

fn diagnostics(ctx: &Ctx, notes: &mut Vec<String>) -> Result<Vec<Series>> {
    let m = &ctx.m;
    let mut out = vec![];

    let rb = Series::new(
        "diagnostics/relative_bound",
        &ctx.name,
        m.dim,
        Axis::Lambda,
        Criterion::NonIncreasing { slack: 1e-8 },
    );
    out.push(match relative_bound_profile(m, &RESOLVENT_GRID) {
        Ok(est) => {
            notes.push(format!(
                "relative bound: a_inf = {:e}, b_witness = {:e}",
                est.a_inf, est.b_witness
            ));
            rb.with_points(est.a_values.iter().map(|&(x, a)| Point::ok(x, a)).collect())
                .finish()
        }
        Err(e) => rb.skipped(e.to_string()),
    });

    let dims = profile_dims(ctx.cfg);
    let models: Vec<std::result::Result<ModelInstance, String>> = dims
        .par_iter()
        .map(|&d| ctx.cfg.build(d).map_err(|e| e.to_string()))
        .collect();
    let bounded = Criterion::Bounded {
        variation: BOUNDED_VARIATION,
    };
    let dim_series =
        |study: &str, params: String| Series::new(study, &ctx.name, m.dim, Axis::Dim, bounded).with_params(params);
    for (k, l) in [(1u32, 1u32), (2, 2)] {
        let template = dim_series("diagnostics/cross_bound", format!("ell={l}")).with_k(k);
        if !m.b_is_hermitian() {
            out.push(template.skipped(format!("H is not Hermitian for {}", m.name())));
            continue;
        }
        let points = dims
            .iter()
            .zip(&models)
            .map(|(&d, mm)| match mm {
                Ok(mm) => Point::from_result(d as f64, cross_bound_at(mm, k, l)),
                Err(e) => Point::failed(d as f64, e.clone()),
            })
            .collect();
        out.push(template.with_points(points).finish());
    }
    for k in 1..=2u32 {
        let left_t = |ell: u32| dim_series("diagnostics/equivalence_left", format!("ell={ell}")).with_k(k);
        let right_t = |ell: u32| dim_series("diagnostics/equivalence_right", format!("ell={ell}")).with_k(k);
        if !m.b_is_hermitian() {
            let reason = format!("H is not Hermitian for {}", m.name());
            out.push(left_t(k).skipped(&reason));
            out.push(right_t(k).skipped(&reason));
            continue;
        }
        let mut chosen = None;
        for ell in 0..=k + 4 {
            let rows: Vec<(Point, Point)> = dims
                .iter()
                .zip(&models)
                .map(|(&d, mm)| {
                    let x = d as f64;
                    match mm
                        .as_ref()
                        .map_err(|e| e.clone())
                        .and_then(|mm| equivalence_at(mm, k, ell).map_err(|e| e.to_string()))
                    {
                        Ok((a, b)) => (Point::ok(x, a), Point::ok(x, b)),
                        Err(e) => (Point::failed(x, e.clone()), Point::failed(x, e)),
                    }
                })
                .collect();
            let (lp, rp): (Vec<Point>, Vec<Point>) = rows.into_iter().unzip();
            let left = left_t(ell).with_points(lp).finish();
            let right = right_t(ell).with_points(rp).finish();
            let done = left.verdict.is_converged() && right.verdict.is_converged();
            chosen = Some((left, right));
            if done {
                break;
            }
        }
        let (left, right) = chosen.unwrap();
        notes.push(format!("equivalence k={k}: searched exponent {}", left.f_params));
        out.push(left);
        out.push(right);
    }

    for &ell in &ctx.cfg.options.tail_exponents {
        let s = m.h0_spectrum();
        let tail: Vec<Point> = ctx
            .grid
            .iter()
            .map(|&l| Point::from_result(l, tail_norm(s, l, ell)))
            .collect();
        let margin: Vec<Point> = tail
            .iter()
            .map(|p| Point::ok(p.x, p.value * p.x.powi(ell as i32)))
            .collect();
        out.push(
            ctx.series("diagnostics/tail_norm", Criterion::NonIncreasing { slack: 0.0 })
                .with_params(format!("ell={ell}"))
                .with_points(tail)
                .finish(),
        );
        out.push(
            ctx.series("diagnostics/tail_margin", Criterion::AtMost { tol: 1.0 + 1e-12 })
                .with_params(format!("ell={ell}"))
                .with_points(margin)
                .finish(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: StudyKind, model: &str, dim: usize) -> StudyConfig {
        let mut c = StudyConfig::quick(kind, model, dim);
        c.threads = 2;
        c
    }

    #[test]
    fn grid_rules() {
        let cfg = quick(StudyKind::Lemma59, "commuting", 32);
        let m = cfg.build(32).unwrap();
        let g = cutoff_grid(&cfg, &m).unwrap();
        assert!(*g.last().unwrap() <= 16.0);
        let mut c = cfg.clone();
        c.grid.placement = Placement::Explicit;
        c.grid.values = Some(vec![4.5, 30.5]);
        assert!(cutoff_grid(&c, &m).is_err());
        c.grid.upper_half = true;
        assert_eq!(cutoff_grid(&c, &m).unwrap(), vec![4.5, 30.5]);
        let mut c = cfg.clone();
        c.grid.placement = Placement::Labels;
        c.grid.count = 4;
        assert_eq!(cutoff_grid(&c, &m).unwrap(), vec![1.0, 6.0, 11.0, 16.0]);
    }

    #[test]
    fn tau_and_dims() {
        let cfg = quick(StudyKind::ExampleAN, "number-aN", 32);
        let t = tau_grid(&cfg);
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[9], 10.0);
        assert_eq!(profile_dims(&cfg), vec![8, 16, 32, 64]);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut a = quick(StudyKind::Lemma22, "commuting", 16);
        a.threads = 1;
        let mut b = a.clone();
        b.threads = 3;
        let ra = run_study(&a).unwrap();
        let rb = run_study(&b).unwrap();
        assert_eq!(ra.to_csv(), rb.to_csv());
    }

    #[test]
    fn example_skipped_off_model() {
        let r = run_study(&quick(StudyKind::ExampleAN, "commuting", 16)).unwrap();
        assert!(r
            .series
            .iter()
            .all(|s| matches!(s.verdict, crate::report::Verdict::Skipped { .. })));
    }
}
