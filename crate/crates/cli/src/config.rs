//! Experiment configuration.
//!
//! A config is one JSON document with four sections:
//!
//! ```json
//! {
//!   "problems": [{ "name": "reg", "seed": 0, "x0": 1.0,
//!                  "generator": { "kind": "regression", "n": 10000, "d": 20 } }],
//!   "schemes":  [{ "method": "tr", "batching": "fixed", "batch_size": 500 }],
//!   "solver":   { "tr": { "max_iters": 300 }, "arc": { "sigma0": 1.0 } },
//!   "seeds":    [1, 2, 3]
//! }
//! ```
//!
//! `schemes` defaults to the six standard variants, `seeds` to `[0]`.
//! Solver settings are layered: library defaults, then the `solver` section
//! for the method, then the scheme's `overrides`. The sampling policy always
//! comes from the scheme's batching. A growing batch starts at `batch_size`
//! and is multiplied by `growth_factor` every `growth_period` iterations
//! (one iteration stands in for one epoch).

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use strarc::problem::{QuadraticSpec, RegressionSpec};
use strarc::{FiniteSumProblem, SamplingPolicy, SarcConfig, StrConfig, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemEntry>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemEntry {
    pub name: String,
    /// Seed of the generator; independent of the solver seeds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x0: StartPoint,
    pub generator: ProblemSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic(QuadraticSpec),
    Regression(RegressionSpec),
}

/// Either a constant fill value or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartPoint {
    Fill(f64),
    Point(Vec<f64>),
}

impl Default for StartPoint {
    fn default() -> Self {
        StartPoint::Fill(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Tr,
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    Fixed,
    Growing,
    /// Exact gradient and function values; the Hessian uses `batch_size`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub method: MethodKind,
    pub batching: Batching,
    pub batch_size: usize,
    #[serde(default = "default_growth_factor")]
    pub growth_factor: f64,
    #[serde(default = "default_growth_period")]
    pub growth_period: usize,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub overrides: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub tr: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub arc: Map<String, Value>,
}

/// A fully resolved solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Tr(StrConfig),
    Arc(SarcConfig),
}

fn default_growth_factor() -> f64 {
    2.0
}

fn default_growth_period() -> usize {
    10
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// The six standard schemes: {tr, arc} × {fixed, growing, full}.
pub fn default_schemes() -> Vec<SchemeSpec> {
    let mut out = Vec::new();
    for method in [MethodKind::Tr, MethodKind::Arc] {
        for batching in [Batching::Fixed, Batching::Growing, Batching::Full] {
            out.push(SchemeSpec {
                name: None,
                method,
                batching,
                batch_size: if batching == Batching::Growing { 64 } else { 500 },
                growth_factor: default_growth_factor(),
                growth_period: default_growth_period(),
                overrides: Map::new(),
            });
        }
    }
    out
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodKind::Tr => "tr",
            MethodKind::Arc => "arc",
        })
    }
}

impl fmt::Display for Batching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Batching::Fixed => "fixed",
            Batching::Growing => "growing",
            Batching::Full => "full",
        })
    }
}

impl SchemeSpec {
    /// `name`, or `{method}-{batching}` when unset.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}-{}", self.method, self.batching))
    }

    pub fn sampling(&self) -> SamplingPolicy {
        match self.batching {
            Batching::Fixed => SamplingPolicy::Fixed { batch: self.batch_size },
            Batching::Growing => SamplingPolicy::Growing {
                start: self.batch_size,
                factor: self.growth_factor,
                period: self.growth_period,
            },
            Batching::Full => SamplingPolicy::FullGradient { hessian_batch: self.batch_size },
        }
    }

    /// Layers the solver section and the overrides over the library
    /// defaults. Full-sum diagnostics are always on: the trace CSV reports
    /// exact `f`, `‖∇f‖` and `λ_min` for every row.
    pub fn solver_config(&self, section: &SolverSection) -> Result<SolverChoice> {
        if self.overrides.contains_key("sampling") {
            bail!("scheme {}: `sampling` is set by `batching` and cannot be overridden", self.label());
        }
        let base = match self.method {
            MethodKind::Tr => &section.tr,
            MethodKind::Arc => &section.arc,
        };
        if base.contains_key("sampling") {
            bail!("solver.{}: `sampling` is set per scheme by `batching`", self.method);
        }
        let mut merged = base.clone();
        merged.extend(self.overrides.clone());
        merged.insert("sampling".into(), serde_json::to_value(self.sampling())?);
        merged.insert("diagnostics".into(), Value::Bool(true));
        let value = Value::Object(merged);
        let ctx = || format!("scheme {}: invalid {} solver settings", self.label(), self.method);
        Ok(match self.method {
            MethodKind::Tr => {
                let c: StrConfig = serde_json::from_value(value).with_context(ctx)?;
                c.validate().with_context(ctx)?;
                SolverChoice::Tr(c)
            }
            MethodKind::Arc => {
                let c: SarcConfig = serde_json::from_value(value).with_context(ctx)?;
                c.validate().with_context(ctx)?;
                SolverChoice::Arc(c)
            }
        })
    }
}

impl ProblemEntry {
    pub fn build(&self) -> Result<FiniteSumProblem> {
        let p = match &self.generator {
            ProblemSpec::Quadratic(s) => s.build(self.seed),
            ProblemSpec::Regression(s) => s.build(self.seed),
        };
        p.map_err(|e| anyhow!("problem {}: {e}", self.name))
    }

    pub fn start(&self, d: usize) -> Result<Vector> {
        match &self.x0 {
            StartPoint::Fill(v) => Ok(Vector::from_element(d, *v)),
            StartPoint::Point(v) if v.len() == d => Ok(Vector::from_column_slice(v)),
            StartPoint::Point(v) => bail!("problem {}: x0 has length {} but d = {d}", self.name, v.len()),
        }
    }
}

/// One (problem, scheme, seed) combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub problem: usize,
    pub scheme: usize,
    pub seed: u64,
}

fn is_file_safe(s: &str) -> bool {
    !s.is_empty() && !s.contains("__") && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl ExperimentConfig {
    /// Parses and validates; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| anyhow!("config error at line {}, column {}: {e}", e.line(), e.column()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks names and resolves every scheme's solver settings.
    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.schemes.is_empty() || self.seeds.is_empty() {
            bail!("problems, schemes and seeds must all be nonempty");
        }
        let mut names = HashSet::new();
        for p in &self.problems {
            if !is_file_safe(&p.name) {
                bail!("problem name {:?} must be nonempty [A-Za-z0-9._-] without `__`", p.name);
            }
            if !names.insert(p.name.as_str()) {
                bail!("duplicate problem name {:?}", p.name);
            }
        }
        let mut labels = HashSet::new();
        for s in &self.schemes {
            let label = s.label();
            if !is_file_safe(&label) {
                bail!("scheme name {label:?} must be nonempty [A-Za-z0-9._-] without `__`");
            }
            if !labels.insert(label.clone()) {
                bail!("duplicate scheme name {label:?}");
            }
            s.solver_config(&self.solver)?;
        }
        let mut seeds = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seeds.insert(**s)) {
            bail!("duplicate seed {dup}");
        }
        Ok(())
    }

    /// Problem-major, then scheme, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for problem in 0..self.problems.len() {
            for scheme in 0..self.schemes.len() {
                for &seed in &self.seeds {
                    out.push(Cell { problem, scheme, seed });
                }
            }
        }
        out
    }

    pub fn cell_stem(&self, cell: &Cell) -> String {
        format!("{}__{}__s{}", self.problems[cell.problem].name, self.schemes[cell.scheme].label(), cell.seed)
    }

    /// Inverse of [`cell_stem`](Self::cell_stem).
    pub fn find_cell(&self, stem: &str) -> Result<Cell> {
        let parts: Vec<&str> = stem.split("__").collect();
        let [problem, scheme, seed] = parts[..] else {
            bail!("{stem:?} is not of the form <problem>__<scheme>__s<seed>");
        };
        let seed: u64 = seed
            .strip_prefix('s')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| anyhow!("bad seed component {seed:?} in {stem:?}"))?;
        let problem = self
            .problems
            .iter()
            .position(|p| p.name == problem)
            .ok_or_else(|| anyhow!("no problem named {problem:?} in the config"))?;
        let scheme = self
            .schemes
            .iter()
            .position(|s| s.label() == scheme)
            .ok_or_else(|| anyhow!("no scheme named {scheme:?} in the config"))?;
        Ok(Cell { problem, scheme, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problems": [{ "name": "q", "generator": { "kind": "quadratic", "n": 20, "d": 3 } }]
    }"#;

    #[test]
    fn defaults_fill_in_six_schemes() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let labels: Vec<_> = cfg.schemes.iter().map(SchemeSpec::label).collect();
        assert_eq!(labels, ["tr-fixed", "tr-growing", "tr-full", "arc-fixed", "arc-growing", "arc-full"]);
        assert_eq!(cfg.seeds, [0]);
        assert_eq!(cfg.cells().len(), 6);
    }

    #[test]
    fn errors_point_at_the_line() {
        let text = "{\n  \"problems\": [],\n  \"seeds\": [1,\n  \"x\"]\n}";
        let err = ExperimentConfig::from_json(text).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let text =
            "{\n \"problems\": [{ \"name\": \"q\",\n  \"generator\": { \"kind\": \"quadratic\", \"nn\": 3 } }]\n}";
        let err = ExperimentConfig::from_json(text).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("nn"), "{err}");
    }

    #[test]
    fn overrides_layer_over_the_solver_section() {
        let text = r#"{
            "problems": [{ "name": "q", "generator": { "kind": "quadratic" } }],
            "schemes": [{ "method": "tr", "batching": "growing", "batch_size": 8,
                          "overrides": { "eta": 0.2 } }],
            "solver": { "tr": { "eta": 0.3, "max_iters": 7 } }
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let SolverChoice::Tr(c) = cfg.schemes[0].solver_config(&cfg.solver).unwrap() else { panic!() };
        assert_eq!((c.eta, c.max_iters), (0.2, 7));
        assert!(c.diagnostics);
        assert_eq!(c.sampling, SamplingPolicy::Growing { start: 8, factor: 2.0, period: 10 });
    }

    #[test]
    fn bad_settings_are_rejected() {
        let bad = [
            r#"{"problems": [{ "name": "a b", "generator": { "kind": "quadratic" } }]}"#,
            r#"{"problems": [{ "name": "q", "generator": { "kind": "cubic" } }]}"#,
            r#"{"problems": [{ "name": "q", "generator": { "kind": "quadratic" } }], "seeds": [1, 1]}"#,
            r#"{"problems": [{ "name": "q", "generator": { "kind": "quadratic" } }],
                "solver": { "tr": { "etaa": 0.1 } }}"#,
            r#"{"problems": [{ "name": "q", "generator": { "kind": "quadratic" } }],
                "schemes": [{ "method": "arc", "batching": "fixed", "batch_size": 4,
                              "overrides": { "sampling": { "kind": "bernstein" } } }]}"#,
            r#"{"problems": [{ "name": "q", "generator": { "kind": "quadratic" } }],
                "schemes": [{ "method": "arc", "batching": "fixed", "batch_size": 0 }]}"#,
        ];
        for text in bad {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn stems_round_trip() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        for cell in cfg.cells() {
            assert_eq!(cfg.find_cell(&cfg.cell_stem(&cell)).unwrap(), cell);
        }
        assert!(cfg.find_cell("q__tr-fixed").is_err());
        assert!(cfg.find_cell("q__nope__s0").is_err());
    }

    #[test]
    fn start_points() {
        let mut p: ProblemEntry =
            serde_json::from_str(r#"{ "name": "q", "x0": [1, 2], "generator": { "kind": "quadratic" } }"#).unwrap();
        assert_eq!(p.start(2).unwrap(), Vector::from_vec(vec![1.0, 2.0]));
        assert!(p.start(3).is_err());
        p.x0 = StartPoint::Fill(0.5);
        assert_eq!(p.start(3).unwrap(), Vector::from_element(3, 0.5));
    }
}
