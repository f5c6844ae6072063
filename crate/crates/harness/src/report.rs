//! Series, verdicts and the CSV/JSON report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::StudyConfig;
use crate::error::{HarnessError, Result};
use crate::fit::{fit_rate, Fit};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "study,model,dim,f_kind,f_params,k,L,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Point {
    pub fn ok(x: f64, value: f64) -> Self {
        Self { x, value, reason: None }
    }

    pub fn failed(x: f64, reason: impl Into<String>) -> Self {
        Self {
            x,
            value: f64::NAN,
            reason: Some(reason.into()),
        }
    }

    pub fn from_result<E: std::fmt::Display>(x: f64, r: std::result::Result<f64, E>) -> Self {
        match r {
            Ok(v) if v.is_finite() => Self::ok(x, v),
            Ok(v) => Self::failed(x, format!("non-finite value {v}")),
            Err(e) => Self::failed(x, e.to_string()),
        }
    }
}

/// What the x column of a series means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Cutoff,
    Label,
    Dim,
    Lambda,
}

/// Rule turning a series into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Criterion {
    /// Final value below `threshold` and truncation-stability delta below `stability`.
    Decay { threshold: f64, stability: f64 },
    /// Every value at most `tol`.
    AtMost { tol: f64 },
    /// Some value above `min`.
    Exceeds { min: f64 },
    /// `max/min <= ratio` over the series.
    Uniform { ratio: f64 },
    /// Relative spread over the top octave of the axis below `variation`.
    Bounded { variation: f64 },
    /// Consecutive values never increase by more than `slack`.
    NonIncreasing { slack: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    NotConverged { reason: String },
    Skipped { reason: String },
}

impl Verdict {
    pub fn is_converged(&self) -> bool {
        matches!(self, Verdict::Converged)
    }

    pub fn is_not_converged(&self) -> bool {
        matches!(self, Verdict::NotConverged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub dim: usize,
    #[serde(with = "nullable::vec")]
    pub values: Vec<f64>,
    #[serde(with = "nullable")]
    /// `max_L |v_2d - v_d| / max(v_d, v_2d, floor)`
    pub delta: f64,
}

impl Stability {
    pub fn new(dim: usize, base: &[f64], doubled: Vec<f64>) -> Self {
        let floor = crate::fit::FIT_FLOOR;
        let delta = base
            .iter()
            .zip(&doubled)
            .map(|(a, b)| {
                if a.is_finite() && b.is_finite() {
                    (a - b).abs() / a.abs().max(b.abs()).max(floor)
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        Self {
            dim,
            values: doubled,
            delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub study: String,
    pub model: String,
    pub dim: usize,
    pub f_kind: String,
    pub f_params: String,
    pub k: Option<u32>,
    pub axis: Axis,
    pub points: Vec<Point>,
    pub criterion: Criterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<Stability>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<Fit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_note: Option<String>,
    pub verdict: Verdict,
}

impl Series {
    pub fn new(study: impl Into<String>, model: &str, dim: usize, axis: Axis, criterion: Criterion) -> Self {
        Self {
            study: study.into(),
            model: model.to_string(),
            dim,
            f_kind: "-".into(),
            f_params: "-".into(),
            k: None,
            axis,
            points: vec![],
            criterion,
            stability: None,
            fit: None,
            fit_note: None,
            verdict: Verdict::Skipped {
                reason: "not evaluated".into(),
            },
        }
    }

    pub fn with_f(mut self, f: &cutlab_core::seminorms::TestFunction) -> Self {
        self.f_kind = f.kind_name().into();
        self.f_params = f.params_string();
        self
    }

    pub fn with_params(mut self, params: impl Into<String>) -> Self {
        self.f_params = params.into();
        self
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_points(mut self, points: Vec<Point>) -> Self {
        self.points = points;
        self
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x, p.value)).collect()
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.value)
    }

    pub fn skipped(mut self, reason: impl Into<String>) -> Self {
        self.verdict = Verdict::Skipped { reason: reason.into() };
        self
    }

    /// Fits a rate for decay series and settles the verdict.
    pub fn finish(mut self) -> Self {
        if matches!(self.verdict, Verdict::Skipped { ref reason } if reason != "not evaluated") {
            return self;
        }
        if let Criterion::Decay { .. } = self.criterion {
            match fit_rate(&self.xy()) {
                Ok(f) => self.fit = Some(f),
                Err(e) => self.fit_note = Some(e.to_string()),
            }
        }
        self.verdict = self.judge();
        self
    }

    fn judge(&self) -> Verdict {
        let nc = |r: String| Verdict::NotConverged { reason: r };
        if self.points.is_empty() {
            return Verdict::Skipped {
                reason: "empty series".into(),
            };
        }
        if self.points.iter().all(|p| !p.value.is_finite()) {
            let reason = self.points[0]
                .reason
                .clone()
                .unwrap_or_else(|| "no finite values".into());
            return Verdict::Skipped { reason };
        }
        if let Some(p) = self.points.iter().find(|p| !p.value.is_finite()) {
            return nc(format!(
                "grid point {} failed: {}",
                p.x,
                p.reason.clone().unwrap_or_else(|| "non-finite".into())
            ));
        }
        let v = self.values();
        match self.criterion {
            Criterion::Decay { threshold, stability } => {
                let last = *v.last().unwrap();
                if !(last < threshold) {
                    return nc(format!("final value {last:e} not below {threshold:e}"));
                }
                if let Some(s) = &self.stability {
                    if !(s.delta < stability) {
                        return nc(format!("stability delta {:e} not below {stability:e}", s.delta));
                    }
                }
                Verdict::Converged
            }
            Criterion::AtMost { tol } => match v.iter().copied().fold(f64::NEG_INFINITY, f64::max) {
                max if max <= tol => Verdict::Converged,
                max => nc(format!("max value {max:e} exceeds {tol:e}")),
            },
            Criterion::Exceeds { min } => match v.iter().copied().fold(f64::NEG_INFINITY, f64::max) {
                max if max > min => Verdict::Converged,
                max => nc(format!("max value {max:e} does not exceed {min:e}")),
            },
            Criterion::Uniform { ratio } => {
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                if max == 0.0 && min == 0.0 {
                    return Verdict::Converged;
                }
                let r = if min > 0.0 { max / min } else { f64::INFINITY };
                if r <= ratio {
                    Verdict::Converged
                } else {
                    nc(format!("max/min ratio {r:.4} exceeds {ratio}"))
                }
            }
            Criterion::Bounded { variation } => {
                let profile: Vec<(usize, f64)> = self.points.iter().map(|p| (p.x as usize, p.value)).collect();
                let var = cutlab_core::models::top_octave_variation(&profile);
                if var < variation {
                    Verdict::Converged
                } else {
                    nc(format!("top-octave variation {var:.4} not below {variation}"))
                }
            }
            Criterion::NonIncreasing { slack } => match v.windows(2).find(|w| w[1] > w[0] + slack) {
                None => Verdict::Converged,
                Some(w) => nc(format!("value rises from {:e} to {:e}", w[0], w[1])),
            },
        }
    }
}

/// Everything a study produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema: u32,
    pub tool_version: String,
    pub study_id: String,
    pub seed: u64,
    pub config: StudyConfig,
    /// Convergence verdicts hold for the tested test functions and powers only.
    pub scope: String,
    pub notes: Vec<String>,
    pub series: Vec<Series>,
}

impl ConvergenceReport {
    pub fn new(config: &StudyConfig, study_id: String) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            study_id,
            seed: config.seed,
            config: config.clone(),
            scope: "verdicts cover the tested (f, k) pairs only".into(),
            notes: vec![],
            series: vec![],
        }
    }

    pub fn any_not_converged(&self) -> bool {
        self.series.iter().any(|s| s.verdict.is_not_converged())
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in &self.series {
            match s.verdict {
                Verdict::Converged => c.0 += 1,
                Verdict::NotConverged { .. } => c.1 += 1,
                Verdict::Skipped { .. } => c.2 += 1,
            }
        }
        c
    }

    pub fn find(&self, study: &str) -> impl Iterator<Item = &Series> {
        let study = study.to_string();
        self.series.iter().filter(move |s| s.study == study)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.series {
            let k = s.k.map_or_else(|| "-".to_string(), |k| k.to_string());
            for p in &s.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    s.study,
                    s.model,
                    s.dim,
                    s.f_kind,
                    s.f_params,
                    k,
                    fmt_num(p.x),
                    fmt_num(p.value)
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Shortest round-trip decimal; `NaN` spelled out.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:?}")
    }
}

/// Non-finite floats travel as `null` and come back as `NaN`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            ser.serialize_f64(*x)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NAN))
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(xs: &[f64], ser: S) -> Result<S::Ok, S::Error> {
            ser.collect_seq(xs.iter().map(|x| x.is_finite().then_some(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(de)?
                .into_iter()
                .map(|x| x.unwrap_or(f64::NAN))
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes `<id>.csv` and/or `<id>.json` into `dir`.
pub fn emit_report(r: &ConvergenceReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = vec![];
    for f in formats {
        let (path, body) = match f {
            Format::Csv => (dir.join(format!("{}.csv", r.study_id)), r.to_csv()),
            Format::Json => (dir.join(format!("{}.json", r.study_id)), r.to_json()?),
        };
        std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{StudyConfig, StudyKind};

    fn series(crit: Criterion, values: &[f64]) -> Series {
        Series::new("t", "m", 8, Axis::Cutoff, crit)
            .with_points(
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| Point::ok(i as f64 + 1.0, v))
                    .collect(),
            )
            .finish()
    }

    #[test]
    fn verdict_rules() {
        let d = Criterion::Decay {
            threshold: 1e-3,
            stability: 0.01,
        };
        assert!(series(d, &[1.0, 0.1, 1e-4]).verdict.is_converged());
        assert!(series(d, &[1.0, 0.1, 1e-2]).verdict.is_not_converged());
        let mut s = series(d, &[1.0, 0.1, 1e-4]);
        s.stability = Some(Stability::new(16, &[1.0, 0.1, 1e-4], vec![1.0, 0.1, 2e-4]));
        assert!(s.finish().verdict.is_not_converged());

        assert!(series(Criterion::AtMost { tol: 1e-8 }, &[0.0, 1e-9])
            .verdict
            .is_converged());
        assert!(series(Criterion::Exceeds { min: 1e-3 }, &[0.0, 1e-2])
            .verdict
            .is_converged());
        assert!(series(Criterion::Uniform { ratio: 1.2 }, &[1.0, 1.1])
            .verdict
            .is_converged());
        assert!(series(Criterion::Uniform { ratio: 1.2 }, &[1.0, 1.5])
            .verdict
            .is_not_converged());
        assert!(series(Criterion::NonIncreasing { slack: 1e-8 }, &[3.0, 2.0, 2.0])
            .verdict
            .is_converged());
    }

    #[test]
    fn failed_points() {
        let s = Series::new("t", "m", 8, Axis::Cutoff, Criterion::AtMost { tol: 1.0 })
            .with_points(vec![Point::ok(1.0, 0.5), Point::failed(2.0, "boom")])
            .finish();
        assert!(s.verdict.is_not_converged());
        let s = Series::new("t", "m", 8, Axis::Cutoff, Criterion::AtMost { tol: 1.0 })
            .with_points(vec![Point::failed(2.0, "boom")])
            .finish();
        assert_eq!(s.verdict, Verdict::Skipped { reason: "boom".into() });
        assert!(s.to_owned().points[0].value.is_nan());
    }

    #[test]
    fn decay_fit_attached() {
        let s = series(
            Criterion::Decay {
                threshold: 1.0,
                stability: 0.01,
            },
            &[1.0, 0.25, 1.0 / 9.0, 1.0 / 16.0],
        );
        assert!((s.fit.unwrap().rho - 2.0).abs() < 1e-12);
        let s = series(
            Criterion::Decay {
                threshold: 1.0,
                stability: 0.01,
            },
            &[1e-3, 1e-20, 0.0, 0.0],
        );
        assert!(s.fit.is_none());
        assert!(s.fit_note.is_some());
    }

    #[test]
    fn empty_report_and_round_trip() {
        let cfg = StudyConfig::quick(StudyKind::Lemma59, "commuting", 16);
        let mut r = ConvergenceReport::new(&cfg, "x".into());
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
        let back = ConvergenceReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);

        r.series.push(series(Criterion::Uniform { ratio: 1.2 }, &[1.0, 1.5]));
        let back = ConvergenceReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.series[0].verdict, r.series[0].verdict);
        assert_eq!(back, r);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1e-20), "1e-20");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(3.0), "3.0");
    }
}
