//! Study configuration, read from TOML or assembled from CLI flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cutlab_core::models::{build_model, ModelInstance, ModelKind, ModelParams};
use cutlab_core::seminorms::TestFunction;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Model name accepted in configs for the hand-built nilpotent pair.
pub const NILPOTENT_MODEL: &str = "nilpotent-fixture";
pub const NILPOTENT_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    #[serde(rename = "lemma2_2")]
    Lemma22,
    C1c2c3,
    #[serde(rename = "corollary2_3")]
    Corollary23,
    Lemma59,
    Prop60,
    #[serde(rename = "example_aN")]
    ExampleAN,
    Lemma61,
    Prop62,
    Prop49,
    #[serde(rename = "section4_defect")]
    Section4Defect,
    Diagnostics,
}

impl StudyKind {
    pub const ALL: [StudyKind; 11] = [
        StudyKind::Lemma22,
        StudyKind::C1c2c3,
        StudyKind::Corollary23,
        StudyKind::Lemma59,
        StudyKind::Prop60,
        StudyKind::ExampleAN,
        StudyKind::Lemma61,
        StudyKind::Prop62,
        StudyKind::Prop49,
        StudyKind::Section4Defect,
        StudyKind::Diagnostics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Lemma22 => "lemma2_2",
            StudyKind::C1c2c3 => "c1c2c3",
            StudyKind::Corollary23 => "corollary2_3",
            StudyKind::Lemma59 => "lemma59",
            StudyKind::Prop60 => "prop60",
            StudyKind::ExampleAN => "example_aN",
            StudyKind::Lemma61 => "lemma61",
            StudyKind::Prop62 => "prop62",
            StudyKind::Prop49 => "prop49",
            StudyKind::Section4Defect => "section4_defect",
            StudyKind::Diagnostics => "diagnostics",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown study kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Geometric points in the lower half of the spectrum, snapped to eigenvalue midpoints.
    Geometric,
    /// Evenly spread integer labels; `L` sits on the level itself.
    Labels,
    /// `values` as given.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_l_count")]
    pub count: usize,
    #[serde(default = "default_placement")]
    pub placement: Placement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Permit cutoffs above the `ceil(d/2)`-th eigenvalue.
    #[serde(default)]
    pub upper_half: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            count: default_l_count(),
            placement: default_placement(),
            values: None,
            upper_half: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_final_value")]
    pub final_value: f64,
    #[serde(default = "default_stability")]
    pub stability: f64,
    /// Largest admissible `max/min` ratio across the cutoff grid.
    #[serde(default = "default_uniform_ratio")]
    pub uniform_ratio: f64,
    /// Slack in `lhs <= rhs` checks.
    #[serde(default = "default_bound_slack")]
    pub bound_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            final_value: default_final_value(),
            stability: default_stability(),
            uniform_ratio: default_uniform_ratio(),
            bound_slack: default_bound_slack(),
        }
    }
}

/// Knobs read by individual study kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyOptions {
    /// Exponents `s` for the `H0^{-s}` and `H0^s` weights.
    #[serde(default = "default_s_values")]
    pub s_values: Vec<u32>,
    /// Right powers `k` where a study fixes them.
    #[serde(default = "default_k_values")]
    pub k_values: Vec<u32>,
    /// Powers `l` of `H_L^l - H^l`.
    #[serde(default = "default_ell_values")]
    pub ell_values: Vec<u32>,
    /// Tail exponents for the tail-norm diagnostic.
    #[serde(default = "default_tail_exponents")]
    pub tail_exponents: Vec<u32>,
    /// Fixed observable where a study uses one: `q`, `p`, `a`, `number` or `random`.
    #[serde(default = "default_observable")]
    pub observable: String,
    /// Seeded random observables per cutoff where a study draws several.
    #[serde(default = "default_random_count")]
    pub random_count: usize,
    /// Recompute decay series at twice the dimension.
    #[serde(default = "default_true")]
    pub stability_check: bool,
    /// Number of `tau` points in `[0, tau_max]`.
    #[serde(default = "default_tau_count")]
    pub tau_count: usize,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            s_values: default_s_values(),
            k_values: default_k_values(),
            ell_values: default_ell_values(),
            tail_exponents: default_tail_exponents(),
            observable: default_observable(),
            random_count: default_random_count(),
            stability_check: true,
            tau_count: default_tau_count(),
            tau_max: default_tau_max(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default = "default_quadrature")]
    pub quadrature: f64,
    #[serde(default = "default_quadrature_budget")]
    pub quadrature_budget: usize,
}

impl Default for ToleranceOverrides {
    fn default() -> Self {
        Self {
            quadrature: default_quadrature(),
            quadrature_budget: default_quadrature_budget(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub model: String,
    #[serde(default)]
    pub params: ModelParams,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "TestFunction::default_set")]
    pub f_set: Vec<TestFunction>,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub options: StudyOptions,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_l_count() -> usize {
    8
}
fn default_placement() -> Placement {
    Placement::Geometric
}
fn default_final_value() -> f64 {
    1e-3
}
fn default_stability() -> f64 {
    0.01
}
fn default_uniform_ratio() -> f64 {
    1.2
}
fn default_bound_slack() -> f64 {
    1e-8
}
fn default_s_values() -> Vec<u32> {
    vec![0, 1, 2, 3, 4]
}
fn default_k_values() -> Vec<u32> {
    vec![1]
}
fn default_ell_values() -> Vec<u32> {
    vec![1, 2]
}
fn default_tail_exponents() -> Vec<u32> {
    vec![1, 2, 3]
}
fn default_observable() -> String {
    "q".into()
}
fn default_random_count() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_tau_count() -> usize {
    10
}
fn default_tau_max() -> f64 {
    10.0
}
fn default_quadrature() -> f64 {
    cutlab_core::TOL.quadrature
}
fn default_quadrature_budget() -> usize {
    cutlab_core::TOL.quadrature_budget
}
fn default_k_max() -> u32 {
    4
}
fn default_times() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

impl StudyConfig {
    /// Defaults for a config-free run.
    pub fn quick(kind: StudyKind, model: &str, dim: usize) -> Self {
        Self {
            kind,
            model: model.to_string(),
            params: ModelParams::default(),
            dims: vec![dim],
            grid: GridSpec::default(),
            f_set: TestFunction::default_set(),
            k_max: default_k_max(),
            times: default_times(),
            seed: 0,
            threads: 0,
            thresholds: Thresholds::default(),
            options: StudyOptions::default(),
            tolerances: ToleranceOverrides::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.dims.is_empty() {
            return bad("dims must not be empty".into());
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return bad("dims must be strictly ascending".into());
        }
        if self.dims[0] < 4 {
            return bad("dims must be >= 4".into());
        }
        if self.f_set.is_empty() {
            return bad("f_set must not be empty".into());
        }
        for f in &self.f_set {
            f.validate()?;
        }
        if self.times.iter().any(|t| !t.is_finite() || *t <= 0.0) || self.times.windows(2).any(|w| w[0] >= w[1]) {
            return bad("times must be positive and strictly ascending".into());
        }
        if self.grid.placement == Placement::Explicit && self.grid.values.as_ref().is_none_or(|v| v.is_empty()) {
            return bad("explicit grid placement needs `values`".into());
        }
        if self.grid.placement != Placement::Explicit && self.grid.count == 0 {
            return bad("grid count must be positive".into());
        }
        if self.options.random_count == 0 {
            return bad("random_count must be positive".into());
        }
        if !(self.tolerances.quadrature > 0.0) || self.tolerances.quadrature_budget < 2 {
            return bad("quadrature tolerance must be positive and budget >= 2".into());
        }
        self.build(self.dims[0])?;
        Ok(())
    }

    /// The configured model at dimension `dim`.
    pub fn build(&self, dim: usize) -> Result<ModelInstance> {
        resolve_model(&self.model, dim, &self.params)
    }

    pub fn dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CUTLAB_OUT";
pub const DEFAULT_OUT: &str = "cutlab-out";

pub fn resolve_model(name: &str, dim: usize, params: &ModelParams) -> Result<ModelInstance> {
    if name == NILPOTENT_MODEL {
        if *params != ModelParams::default() {
            return Err(HarnessError::Config(format!("`{NILPOTENT_MODEL}` takes no parameters")));
        }
        return Ok(ModelInstance::nilpotent_fixture(dim, NILPOTENT_EPS)?);
    }
    let kind: ModelKind = name.parse()?;
    Ok(build_model(kind, dim, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
kind = "lemma2_2"
model = "oscillator-linear"
dims = [32]
seed = 3

[params]
alpha = 1.0

[grid]
count = 6

[options]
observable = "random"
"#;
        let cfg = StudyConfig::from_toml(text).unwrap();
        assert_eq!(cfg.kind, StudyKind::Lemma22);
        assert_eq!(cfg.grid.count, 6);
        assert_eq!(cfg.k_max, 4);
        assert_eq!(cfg.f_set.len(), 3);
        let back = toml::to_string(&cfg).unwrap();
        assert_eq!(StudyConfig::from_toml(&back).unwrap(), cfg);
    }

    #[test]
    fn toml_test_functions() {
        let text = r#"
kind = "lemma59"
model = "commuting"
dims = [16]
f_set = [{ kind = "poly_exp", m = 3, alpha = 0.5 }]
"#;
        let cfg = StudyConfig::from_toml(text).unwrap();
        assert_eq!(cfg.f_set, vec![TestFunction::poly_exp(3, 0.5)]);
    }

    #[test]
    fn validation_errors() {
        let base = StudyConfig::quick(StudyKind::Lemma59, "commuting", 16);
        let mut c = base.clone();
        c.dims = vec![32, 16];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.model = "nope".into();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.f_set.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.grid.placement = Placement::Explicit;
        assert!(c.validate().is_err());
        assert!(StudyConfig::from_toml("kind = \"x\"\nmodel = \"commuting\"\ndims = [8]").is_err());
        assert!(StudyConfig::from_toml("kind = \"lemma59\"\nmodel = \"commuting\"\ndims = [8]\nbogus = 1").is_err());
        base.validate().unwrap();
    }

    #[test]
    fn kinds_parse() {
        for k in StudyKind::ALL {
            assert_eq!(k.name().parse::<StudyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn nilpotent_model_resolves() {
        let m = resolve_model(NILPOTENT_MODEL, 8, &ModelParams::default()).unwrap();
        assert_eq!(m.dim, 8);
        assert!(resolve_model(NILPOTENT_MODEL, 8, &ModelParams::with_n(2)).is_err());
    }
}
