//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

use std::process::Command;
use std::time::Instant;

use cutlab::config::{StudyConfig, StudyKind, NILPOTENT_MODEL};
use cutlab::fit::FIT_FLOOR;
use cutlab::oracle::{cross_check, oracle_report};
use cutlab::report::{ConvergenceReport, Verdict};
use cutlab::run_study;
use cutlab::study::cutoff_grid;
use cutlab_core::cutoff::{spectral_projection, tail_norm};
use cutlab_core::dynamics::CutoffDynamics;
use cutlab_core::linop::{hermitian_eig, OperatorMatrix, Propagation, C64};
use cutlab_core::models::{build_model, ModelKind, ModelParams};
use cutlab_core::quadrature::{GaussLegendre, Refinement};
use cutlab_core::TOL;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn run(cfg: &StudyConfig) -> ConvergenceReport {
    run_study(cfg).unwrap_or_else(|e| panic!("{} on {}: {e}", cfg.kind, cfg.model))
}

fn verdict_failures(r: &ConvergenceReport, prefix: &str) -> Vec<String> {
    r.series
        .iter()
        .filter(|s| s.study.starts_with(prefix))
        .filter_map(|s| match &s.verdict {
            Verdict::Converged => None,
            v => Some(format!("{} [{} {} k={:?}] {:?}", s.study, s.f_kind, s.f_params, s.k, v)),
        })
        .collect()
}

fn summarize(problems: Vec<String>, ok: String) -> Outcome {
    if problems.is_empty() {
        Ok(ok)
    } else {
        let n = problems.len();
        let mut shown: Vec<String> = problems.into_iter().take(3).collect();
        if n > 3 {
            shown.push(format!("... {} more", n - 3));
        }
        Err(shown.join("; "))
    }
}

fn c1_tail_bound() -> Outcome {
    let mut problems = vec![];
    let mut checked = 0;
    for kind in ModelKind::CATALOG {
        let cfg = StudyConfig::quick(StudyKind::Diagnostics, kind.name(), 64);
        let m = cfg.build(64).unwrap();
        let s = m.h0_spectrum();
        for l in cutoff_grid(&cfg, &m).unwrap() {
            for ell in [1u32, 2, 3] {
                let t = tail_norm(s, l, ell).unwrap();
                let brute = s
                    .eigenvalues()
                    .iter()
                    .filter(|&&x| x > l + TOL.tie)
                    .map(|x| x.powi(-(ell as i32)))
                    .fold(0.0, f64::max);
                checked += 1;
                if t > l.powi(-(ell as i32)) + 1e-12 || (t - brute).abs() > 1e-12 {
                    problems.push(format!("{kind} L={l} ell={ell}: tail {t:e}, brute {brute:e}"));
                }
            }
        }
    }
    summarize(problems, format!("{checked} (model, L, ell) triples"))
}

fn c2_lemma22() -> Outcome {
    let mut problems = vec![];
    let mut series = 0;
    let mut min_r2 = f64::INFINITY;
    for model in ["number-aN-sym", "oscillator-linear"] {
        let cfg = StudyConfig::quick(StudyKind::Lemma22, model, 64);
        let r = run(&cfg);
        problems.extend(verdict_failures(&r, "lemma2_2"));
        for s in &r.series {
            series += 1;
            match &s.fit {
                Some(f) if f.rho > 0.0 && f.r2 > 0.9 => min_r2 = min_r2.min(f.r2),
                Some(f) => problems.push(format!(
                    "{model} {} {} k={:?}: rho {} R2 {}",
                    s.study, s.f_params, s.k, f.rho, f.r2
                )),
                None if s.last().is_some_and(|v| v <= FIT_FLOOR) => {}
                None => problems.push(format!("{model} {} {} k={:?}: no fit", s.study, s.f_params, s.k)),
            }
        }
    }
    summarize(
        problems,
        format!("{series} series converged at dim 64 with doubling, min fitted R2 {min_r2:.4}"),
    )
}

fn c3_example() -> Outcome {
    let mut problems = vec![];
    let mut worst = (0.0f64, String::new());
    for n in [2u32, 3] {
        let mut cfg = StudyConfig::quick(StudyKind::ExampleAN, "number-aN", 32);
        cfg.params = ModelParams::with_n(n as usize);
        let r = run(&cfg);
        problems.extend(
            verdict_failures(&r, "example_aN")
                .into_iter()
                .map(|p| format!("n={n}: {p}")),
        );
        for s in r.find("example_aN/margin") {
            let rhs_rel = s.values().into_iter().fold(f64::NEG_INFINITY, f64::max);
            if rhs_rel > worst.0 {
                worst = (rhs_rel, format!("n={n} {} {}", s.f_kind, s.f_params));
            }
        }
    }
    if !problems.is_empty() {
        problems.insert(0, format!("worst margin lhs - rhs = {:e} at {}", worst.0, worst.1));
    }
    summarize(
        problems,
        "identities and uniform bound hold for n = 2, 3 at dim 32".into(),
    )
}

fn c4_g_consistency() -> Outcome {
    let mut problems = vec![];
    let mut worst: f64 = 0.0;
    let rule = GaussLegendre::eight();
    for kind in [ModelKind::NumberANSym, ModelKind::OscillatorLinear] {
        let m = build_model(kind, 32, &ModelParams::default()).unwrap();
        let cfg = StudyConfig::quick(StudyKind::Prop60, kind.name(), 32);
        let grid = cutoff_grid(&cfg, &m).unwrap();
        for l in [grid[0], grid[grid.len() / 2], grid[grid.len() - 1]] {
            let d = CutoffDynamics::new(&m, &spectral_projection(m.h0_spectrum(), l)).unwrap();
            for t in [0.5, 1.0, 2.0] {
                let integral = d.g_integral(t, &rule, Refinement::default()).unwrap().value;
                let gap = integral.max_abs_diff(&d.g_direct(t));
                worst = worst.max(gap);
                if gap > 1e-8 {
                    problems.push(format!("{kind} L={l} t={t}: integral vs direct {gap:e}"));
                }
                let (r1, r2) = (d.g_ode_residual(t, 2e-3), d.g_ode_residual(t, 1e-3));
                let order = (r1 / r2).log2();
                if !(1.8..2.2).contains(&order) {
                    problems.push(format!("{kind} L={l} t={t}: residual order {order:.3}"));
                }
            }
        }
    }
    summarize(
        problems,
        format!("max |integral - direct| {worst:e}, ODE residual second order"),
    )
}

fn c5_closure() -> Outcome {
    let mut problems = vec![];
    for kind in ModelKind::CATALOG {
        let cfg = StudyConfig::quick(StudyKind::Section4Defect, kind.name(), 32);
        let r = run(&cfg);
        for study in ["section4/closure", "section4/leibniz_delta", "section4/leibniz_eta"] {
            problems.extend(verdict_failures(&r, study).into_iter().map(|p| format!("{kind}: {p}")));
        }
    }
    summarize(
        problems,
        "closure <= 1e-11, delta_L Leibniz <= 1e-10, eta_L Leibniz > 1e-3 on all 6 models".into(),
    )
}

fn c6_prop49() -> Outcome {
    let mut cfg = StudyConfig::quick(StudyKind::Prop49, "oscillator-linear", 64);
    cfg.times = vec![1.0];
    cfg.options.stability_check = false;
    let r = run(&cfg);
    let mut problems = vec![];
    let mut worst: f64 = 0.0;
    for s in r.series.iter().filter(|s| s.study.starts_with("prop49/")) {
        let last = s.last().unwrap_or(f64::NAN);
        worst = worst.max(last);
        if last.is_nan() || last >= 1e-3 {
            problems.push(format!(
                "{} {} {} k={:?}: final {last:e}",
                s.study, s.f_kind, s.f_params, s.k
            ));
        }
    }
    summarize(
        problems,
        format!("{} series, largest final value {worst:e}", r.series.len()),
    )
}

fn c7_oracle() -> Outcome {
    let mut problems = vec![];
    for kind in StudyKind::ALL {
        let cfg = StudyConfig::quick(kind, "commuting", 32);
        let study = run(&cfg);
        let oracle = oracle_report(&cfg).unwrap();
        if kind == StudyKind::ExampleAN {
            continue;
        }
        problems.extend(
            cross_check(&study, &oracle, 1e-9)
                .into_iter()
                .map(|p| format!("{kind}: {p}")),
        );
    }
    summarize(
        problems,
        "10 study kinds match the closed forms within 1e-9 (example_aN does not apply)".into(),
    )
}

fn c8_nilpotent() -> Outcome {
    let cfg = StudyConfig::quick(StudyKind::Prop62, NILPOTENT_MODEL, 16);
    let r = run(&cfg);
    let mut problems = verdict_failures(&r, "prop62/series_error");
    problems.extend(verdict_failures(&r, "prop62/integrand_bound"));
    let worst = r
        .find("prop62/series_error")
        .flat_map(|s| s.values())
        .fold(0.0, f64::max);
    summarize(
        problems,
        format!("series error <= {worst:e} for |tau| <= 2, integrand bound uniform within 1e-6"),
    )
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> OperatorMatrix {
    let x = OperatorMatrix::from_fn(dim, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    (&x + &x.adjoint()).scale_real(0.5)
}

fn c9_core_and_cli() -> Outcome {
    let mut problems = vec![];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = (0.0f64, 0.0f64);
    for dim in [8, 64, 256, 512] {
        let h = random_hermitian(dim, &mut rng);
        let s = hermitian_eig(&h).unwrap();
        let recon = (s.reconstruct() - &h).frobenius() / h.frobenius();
        let u = Propagation::new(&h).unwrap().unitary(1.3);
        let unit = (u.adjoint() * &u - OperatorMatrix::identity(dim)).max_abs();
        worst = (worst.0.max(recon), worst.1.max(unit));
        if recon > 1e-10 || unit > 1e-10 {
            problems.push(format!("dim {dim}: reconstruction {recon:e}, unitarity {unit:e}"));
        }
    }

    let bin = env!("CARGO_BIN_EXE_cutlab");
    let dir = tempfile::tempdir().unwrap();
    let exec =
        |args: &[&str], out: &std::path::Path| Command::new(bin).args(args).arg("--out").arg(out).output().unwrap();
    let base = [
        "study",
        "run",
        "--kind",
        "diagnostics",
        "--model",
        "commuting",
        "--dim",
        "32",
    ];
    let (a, c) = (dir.path().join("a"), dir.path().join("c"));
    let read = |d: &std::path::Path, ext: &str| std::fs::read(d.join(format!("diagnostics-commuting-d32.{ext}"))).ok();
    let ra = exec(&base, &a);
    let first = [read(&a, "csv"), read(&a, "json")];
    let rb = exec(&base, &a);
    let second = [read(&a, "csv"), read(&a, "json")];
    let rc = exec(&[&base[..], &["--threads", "3"]].concat(), &c);
    if first.iter().any(Option::is_none) || first != second {
        problems.push("output differs between identical runs".into());
    }
    if read(&a, "csv") != read(&c, "csv") {
        problems.push("csv output depends on the thread count".into());
    }
    let code = |o: &std::process::Output| o.status.code().unwrap_or(-1);
    if [&ra, &rb, &rc].iter().any(|o| code(o) != 0) {
        problems.push(format!(
            "converged study exit codes {} {} {}",
            code(&ra),
            code(&rb),
            code(&rc)
        ));
    }
    let nc = exec(
        &[
            "study",
            "run",
            "--kind",
            "lemma2_2",
            "--model",
            "commuting",
            "--dim",
            "16",
        ],
        &dir.path().join("d"),
    );
    if code(&nc) != 2 {
        problems.push(format!("not-converged study exit code {}", code(&nc)));
    }
    let bad = Command::new(bin)
        .args(["study", "run", "--no-such-flag"])
        .output()
        .unwrap();
    if code(&bad) != 1 || !String::from_utf8_lossy(&bad.stderr).contains("Usage") {
        problems.push(format!("unknown flag exit code {}", code(&bad)));
    }
    summarize(
        problems,
        format!(
            "reconstruction {:e}, unitarity {:e} up to dim 512; CLI byte-identical across thread counts, exit codes 0/2/1",
            worst.0, worst.1
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("tail bound", c1_tail_bound),
        ("lemma2_2 convergence", c2_lemma22),
        ("example identities and uniform bound", c3_example),
        ("g_L consistency", c4_g_consistency),
        ("closure and Leibniz defects", c5_closure),
        ("beta_L and vector convergence", c6_prop49),
        ("commuting-model oracle", c7_oracle),
        ("nilpotent series", c8_nilpotent),
        ("core numerics and CLI", c9_core_and_cli),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
