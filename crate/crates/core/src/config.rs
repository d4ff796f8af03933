//! JSON experiment descriptions and their validation into runnable pieces.
//!
//! A single JSON document fixes the graph, the objective suite, the
//! algorithm, the sampling scheme, the gains, and the run options. Parsing is
//! strict — unknown keys are rejected — and [`ExperimentConfig::build`]
//! validates every section against its module before any computation starts.
//! The initial stack is drawn deterministically from the config seed, so an
//! identical config always produces an identical trace.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controllers::catalog::{make_descriptor, AlgorithmDescriptor, ControllerError};
use crate::graph::{build_mixing, GraphError, MixingMatrix, Topology, WeightScheme};
use crate::problem::{generate_synthetic, ObjectiveSuite, ProblemError, SyntheticKind, SyntheticSpec};
use crate::simulator::{
    run, DiscretizationScheme, GainPiece, GainSchedule, RunOptions, RunOutcome, SimError,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Scheme(#[from] SimError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Graph families a config can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    ErdosRenyi,
    Path,
    Complete,
    Explicit,
}

/// Mixing-weight rules by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedWeights {
    Metropolis,
    Lazy,
    Optimal,
}

/// Either a named weight rule or one weight per edge in sorted edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsSpec {
    Named(NamedWeights),
    Explicit(Vec<f64>),
}

impl Default for WeightsSpec {
    fn default() -> Self {
        WeightsSpec::Named(NamedWeights::Metropolis)
    }
}

/// The `graph` section: topology family plus mixing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(rename = "type")]
    pub kind: GraphKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    pub weights: WeightsSpec,
}

impl GraphSpec {
    /// Validates the per-family fields and builds the topology and mixing
    /// matrix.
    pub fn build(&self) -> Result<(Topology, MixingMatrix), ConfigError> {
        let forbid = |field: &str, present: bool| -> Result<(), ConfigError> {
            if present {
                Err(invalid(format!(
                    "graph field `{field}` does not apply to type `{:?}`",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        let topo = match self.kind {
            GraphKind::Path => {
                forbid("density", self.density.is_some())?;
                forbid("seed", self.seed.is_some())?;
                forbid("edges", self.edges.is_some())?;
                Topology::path(self.n)?
            }
            GraphKind::Complete => {
                forbid("density", self.density.is_some())?;
                forbid("seed", self.seed.is_some())?;
                forbid("edges", self.edges.is_some())?;
                Topology::complete(self.n)?
            }
            GraphKind::ErdosRenyi => {
                forbid("edges", self.edges.is_some())?;
                let density = self
                    .density
                    .ok_or_else(|| invalid("graph type `erdos_renyi` requires `density`"))?;
                Topology::erdos_renyi(self.n, density, self.seed.unwrap_or(0))?
            }
            GraphKind::Explicit => {
                forbid("density", self.density.is_some())?;
                forbid("seed", self.seed.is_some())?;
                let edges = self
                    .edges
                    .as_ref()
                    .ok_or_else(|| invalid("graph type `explicit` requires `edges`"))?;
                Topology::new(self.n, edges)?
            }
        };
        let scheme = match &self.weights {
            WeightsSpec::Named(NamedWeights::Metropolis) => WeightScheme::Metropolis,
            WeightsSpec::Named(NamedWeights::Lazy) => WeightScheme::LazyMetropolis,
            WeightsSpec::Named(NamedWeights::Optimal) => WeightScheme::OptimalConstant,
            WeightsSpec::Explicit(w) => WeightScheme::Explicit(w.clone()),
        };
        let mix = build_mixing(&topo, &scheme)?;
        Ok((topo, mix))
    }
}

/// Objective families a config can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Logistic,
    Quadratic,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.1
}

/// The `problem` section: a synthetic objective suite recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Number of agents; must match the graph.
    pub n: usize,
    /// Samples per agent.
    pub m: usize,
    /// Decision-variable dimension.
    pub d: usize,
    /// Regularizer shape (logistic only).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Regularizer strength (logistic only).
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ObjectiveSuite, ConfigError> {
        let spec = SyntheticSpec {
            kind: match self.kind {
                ProblemKind::Logistic => SyntheticKind::Logistic,
                ProblemKind::Quadratic => SyntheticKind::Quadratic,
            },
            n_agents: self.n,
            samples_per_agent: self.m,
            dim: self.d,
            heterogeneity: self.heterogeneity,
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
        };
        Ok(generate_synthetic(&spec)?)
    }
}

/// The `algorithm` section: a catalog name plus optional coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

/// The `scheme` section: which loops are sampled and on what grid.
///
/// `case` is one of `continuous`, `i`, `ii`, `iii`, `iv`, `v`. Fields that
/// do not apply to the chosen case are rejected, and redundant fields (such
/// as `tau_g` under case `iv`) are cross-checked against the grid relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro_step: Option<f64>,
}

impl SchemeSpec {
    pub fn build(&self) -> Result<DiscretizationScheme, ConfigError> {
        let forbid = |field: &str, present: bool| -> Result<(), ConfigError> {
            if present {
                Err(invalid(format!(
                    "scheme field `{field}` does not apply to case `{}`",
                    self.case
                )))
            } else {
                Ok(())
            }
        };
        let require = |field: &str, value: Option<f64>| -> Result<f64, ConfigError> {
            value.ok_or_else(|| invalid(format!("case `{}` requires `{field}`", self.case)))
        };
        let scheme = match self.case.as_str() {
            "continuous" => {
                forbid("tau_g", self.tau_g.is_some())?;
                forbid("tau_l", self.tau_l.is_some())?;
                forbid("tau", self.tau.is_some())?;
                forbid("q", self.q.is_some())?;
                forbid("k", self.k.is_some())?;
                DiscretizationScheme::continuous(self.micro_step)?
            }
            "i" => {
                forbid("tau_l", self.tau_l.is_some())?;
                forbid("tau", self.tau.is_some())?;
                forbid("q", self.q.is_some())?;
                forbid("k", self.k.is_some())?;
                DiscretizationScheme::case_i(require("tau_g", self.tau_g)?, self.micro_step)?
            }
            "ii" => {
                forbid("tau_g", self.tau_g.is_some())?;
                forbid("tau", self.tau.is_some())?;
                forbid("q", self.q.is_some())?;
                forbid("k", self.k.is_some())?;
                DiscretizationScheme::case_ii(require("tau_l", self.tau_l)?, self.micro_step)?
            }
            "iii" => {
                forbid("tau_g", self.tau_g.is_some())?;
                forbid("tau_l", self.tau_l.is_some())?;
                forbid("q", self.q.is_some())?;
                forbid("k", self.k.is_some())?;
                forbid("micro_step", self.micro_step.is_some())?;
                DiscretizationScheme::case_iii(require("tau", self.tau)?)?
            }
            "iv" => {
                forbid("tau", self.tau.is_some())?;
                forbid("k", self.k.is_some())?;
                forbid("micro_step", self.micro_step.is_some())?;
                let tau_l = require("tau_l", self.tau_l)?;
                let q = self
                    .q
                    .ok_or_else(|| invalid("case `iv` requires `q`"))?;
                if let Some(tau_g) = self.tau_g {
                    let expected = q as f64 * tau_l;
                    if (tau_g - expected).abs() > 1e-12 * tau_g.abs().max(expected) {
                        return Err(invalid(format!(
                            "case `iv` requires tau_g = Q * tau_l (communication fires \
                             every Q-th computation step); got tau_g = {tau_g}, \
                             Q * tau_l = {expected}"
                        )));
                    }
                }
                DiscretizationScheme::case_iv(tau_l, q)?
            }
            "v" => {
                forbid("tau", self.tau.is_some())?;
                forbid("q", self.q.is_some())?;
                forbid("micro_step", self.micro_step.is_some())?;
                let tau_g = require("tau_g", self.tau_g)?;
                let k = self
                    .k
                    .ok_or_else(|| invalid("case `v` requires `k`"))?;
                if let Some(tau_l) = self.tau_l {
                    let expected = k as f64 * tau_g;
                    if (tau_l - expected).abs() > 1e-12 * tau_l.abs().max(expected) {
                        return Err(invalid(format!(
                            "case `v` requires tau_l = K * tau_g (computation fires \
                             every K-th communication step); got tau_l = {tau_l}, \
                             K * tau_g = {expected}"
                        )));
                    }
                }
                DiscretizationScheme::case_v(tau_g, k)?
            }
            other => {
                return Err(invalid(format!(
                    "unknown scheme case `{other}` (expected continuous, i, ii, iii, iv, or v)"
                )))
            }
        };
        Ok(scheme)
    }
}

/// One piece of a piecewise-constant gain schedule in a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainPieceSpec {
    pub t: f64,
    pub eta_g: f64,
    pub eta_l: f64,
}

/// The `gains` section. Omitted values fall back to the algorithm's
/// catalog defaults; `sqrt_horizon` divides the computation gain by
/// `sqrt(horizon)`; `pieces` replaces the constants outright.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_l: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sqrt_horizon: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<GainPieceSpec>>,
}

impl GainsSpec {
    pub fn build(
        &self,
        desc: &AlgorithmDescriptor,
        horizon: f64,
    ) -> Result<GainSchedule, ConfigError> {
        if let Some(pieces) = &self.pieces {
            if self.eta_g.is_some() || self.eta_l.is_some() || self.sqrt_horizon {
                return Err(invalid(
                    "gains `pieces` cannot be combined with `eta_g`, `eta_l`, or \
                     `sqrt_horizon`",
                ));
            }
            return Ok(GainSchedule::Piecewise {
                pieces: pieces
                    .iter()
                    .map(|p| GainPiece {
                        t_start: p.t,
                        eta_g: p.eta_g,
                        eta_l: p.eta_l,
                    })
                    .collect(),
            });
        }
        let eta_g = self.eta_g.unwrap_or(desc.default_eta_g);
        let eta_l = self.eta_l.unwrap_or(desc.default_eta_l);
        if self.sqrt_horizon {
            Ok(GainSchedule::SqrtHorizon {
                eta_g,
                eta_l0: eta_l,
                horizon,
            })
        } else {
            Ok(GainSchedule::constant(eta_g, eta_l))
        }
    }
}

fn default_stride() -> u64 {
    1
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    pub scheme: SchemeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsSpec>,
    /// Horizon in time units.
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    /// Seeds the initial stack (and nothing else; graph and problem carry
    /// their own seeds).
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_gap: Option<f64>,
}

/// Everything needed to launch a run, validated and ready.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub descriptor: AlgorithmDescriptor,
    pub suite: ObjectiveSuite,
    pub scheme: DiscretizationScheme,
    pub gains: GainSchedule,
    pub options: RunOptions,
    pub x0: DMatrix<f64>,
}

impl ExperimentSetup {
    pub fn execute(&self) -> Result<RunOutcome, SimError> {
        run(
            &self.descriptor,
            &self.suite,
            &self.scheme,
            &self.gains,
            &self.x0,
            &self.options,
        )
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Hex SHA-256 of the canonical (compact, sorted-key) serialization;
    /// insensitive to key order and whitespace of the source document.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates every section and assembles the runnable pieces. The
    /// initial stack is standard normal, seeded by `seed`.
    pub fn build(&self) -> Result<ExperimentSetup, ConfigError> {
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride must be at least 1"));
        }
        if self.graph.n != self.problem.n {
            return Err(invalid(format!(
                "graph has {} agents but problem has {}",
                self.graph.n, self.problem.n
            )));
        }
        let (topo, mix) = self.graph.build()?;
        let suite = self.problem.build()?;
        let descriptor = make_descriptor(
            &self.algorithm.name,
            &topo,
            &mix,
            &suite,
            &self.algorithm.params,
        )?;
        let scheme = self.scheme.build()?;
        let gains = self
            .gains
            .clone()
            .unwrap_or_default()
            .build(&descriptor, self.horizon)?;
        gains.validate(&scheme)?;
        let mut opts = RunOptions::new(self.horizon);
        opts.record_stride = self.record_stride;
        opts.target_gap = self.target_gap;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let x0 = DMatrix::from_fn(self.problem.n, self.problem.d, |_, _| {
            StandardNormal.sample(&mut rng)
        });
        Ok(ExperimentSetup {
            descriptor,
            suite,
            scheme,
            gains,
            options: opts,
            x0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dgt_config_json() -> &'static str {
        r#"{
            "graph": {"type": "path", "n": 3, "weights": "metropolis"},
            "problem": {"kind": "quadratic", "n": 3, "m": 1, "d": 2, "seed": 7},
            "algorithm": {"name": "dgt", "params": {"c": 0.5}},
            "scheme": {"case": "iii", "tau": 0.05},
            "gains": {"eta_g": 1.0, "eta_l": 0.2},
            "horizon": 2.0,
            "record_stride": 2,
            "seed": 11
        }"#
    }

    #[test]
    fn round_trip_is_identity() {
        let parsed = ExperimentConfig::from_json(dgt_config_json()).unwrap();
        let reparsed = ExperimentConfig::from_json(&parsed.to_json()).unwrap();
        assert_eq!(parsed, reparsed);
        assert_eq!(parsed.hash(), reparsed.hash());
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let top = r#"{"graph": {"type": "path", "n": 2}, "problem": {"kind": "quadratic",
            "n": 2, "m": 1, "d": 1}, "algorithm": {"name": "dgd"},
            "scheme": {"case": "continuous"}, "horizon": 1.0, "bogus": 1}"#;
        assert!(matches!(
            ExperimentConfig::from_json(top),
            Err(ConfigError::Parse(_))
        ));
        let nested = r#"{"graph": {"type": "path", "n": 2, "fanout": 3}, "problem":
            {"kind": "quadratic", "n": 2, "m": 1, "d": 1}, "algorithm": {"name": "dgd"},
            "scheme": {"case": "continuous"}, "horizon": 1.0}"#;
        assert!(matches!(
            ExperimentConfig::from_json(nested),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn graph_spec_builds_each_family() {
        let path: GraphSpec =
            serde_json::from_str(r#"{"type": "path", "n": 4, "weights": "lazy"}"#).unwrap();
        let (topo, mix) = path.build().unwrap();
        assert_eq!(topo.n_agents(), 4);
        assert_eq!(mix.matrix.nrows(), 4);

        let er: GraphSpec = serde_json::from_str(
            r#"{"type": "erdos_renyi", "n": 8, "density": 0.5, "seed": 3, "weights": "optimal"}"#,
        )
        .unwrap();
        let (topo, _) = er.build().unwrap();
        assert_eq!(topo.n_agents(), 8);

        let explicit: GraphSpec = serde_json::from_str(
            r#"{"type": "explicit", "n": 3, "edges": [[0, 1], [1, 2]],
                "weights": [0.25, 0.25]}"#,
        )
        .unwrap();
        let (topo, mix) = explicit.build().unwrap();
        assert_eq!(topo.n_edges(), 2);
        assert_relative_eq!(mix.matrix[(0, 1)], 0.25);
    }

    #[test]
    fn graph_spec_rejects_misplaced_fields() {
        let spec: GraphSpec =
            serde_json::from_str(r#"{"type": "path", "n": 4, "density": 0.5}"#).unwrap();
        let err = spec.build().unwrap_err();
        assert!(err.to_string().contains("density"));

        let spec: GraphSpec = serde_json::from_str(r#"{"type": "erdos_renyi", "n": 4}"#).unwrap();
        let err = spec.build().unwrap_err();
        assert!(err.to_string().contains("density"));
    }

    #[test]
    fn scheme_spec_cross_checks_the_grid_relation() {
        // Computation slower than communication contradicts the case-iv grid.
        let spec: SchemeSpec = serde_json::from_str(
            r#"{"case": "iv", "tau_l": 0.1, "q": 20, "tau_g": 0.005}"#,
        )
        .unwrap();
        let err = spec.build().unwrap_err();
        assert!(err.to_string().contains("tau_g = Q * tau_l"));

        // A consistent redundant tau_g is accepted.
        let spec: SchemeSpec = serde_json::from_str(
            r#"{"case": "iv", "tau_l": 0.005, "q": 20, "tau_g": 0.1}"#,
        )
        .unwrap();
        let scheme = spec.build().unwrap();
        assert_relative_eq!(scheme.tau_g, 0.1);

        let spec: SchemeSpec =
            serde_json::from_str(r#"{"case": "continuous", "tau_g": 0.1}"#).unwrap();
        assert!(spec.build().is_err());

        let spec: SchemeSpec = serde_json::from_str(r#"{"case": "vi"}"#).unwrap();
        assert!(spec.build().unwrap_err().to_string().contains("unknown"));
    }

    #[test]
    fn gains_default_to_the_catalog_values() {
        let mut cfg = ExperimentConfig::from_json(dgt_config_json()).unwrap();
        cfg.gains = None;
        cfg.algorithm.name = "dgd".to_string();
        cfg.algorithm.params.clear();
        let setup = cfg.build().unwrap();
        assert_relative_eq!(setup.gains.eta_g(0.0), 1.0);
        assert_relative_eq!(setup.gains.eta_l(0.0), 0.1);
    }

    #[test]
    fn hash_ignores_formatting_but_not_content() {
        let a = ExperimentConfig::from_json(dgt_config_json()).unwrap();
        let shuffled = r#"{
            "seed": 11,
            "horizon": 2.0,
            "record_stride": 2,
            "gains": {"eta_l": 0.2, "eta_g": 1.0},
            "scheme": {"case": "iii", "tau": 0.05},
            "algorithm": {"params": {"c": 0.5}, "name": "dgt"},
            "problem": {"kind": "quadratic", "n": 3, "m": 1, "d": 2, "seed": 7},
            "graph": {"type": "path", "n": 3, "weights": "metropolis"}
        }"#;
        let b = ExperimentConfig::from_json(shuffled).unwrap();
        assert_eq!(a.hash(), b.hash());

        let mut c = a.clone();
        c.seed = 12;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn mismatched_agent_counts_are_caught_early() {
        let mut cfg = ExperimentConfig::from_json(dgt_config_json()).unwrap();
        cfg.problem.n = 4;
        let err = cfg.build().unwrap_err();
        assert!(err.to_string().contains("3 agents but problem has 4"));
    }

    #[test]
    fn built_setup_runs_deterministically() {
        let cfg = ExperimentConfig::from_json(dgt_config_json()).unwrap();
        let first = cfg.build().unwrap().execute().unwrap();
        let second = cfg.build().unwrap().execute().unwrap();
        assert_eq!(first.trace.rows, second.trace.rows);
        let mut bytes = Vec::new();
        first.trace.write_csv(&mut bytes).unwrap();
        let mut bytes2 = Vec::new();
        second.trace.write_csv(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }
}
