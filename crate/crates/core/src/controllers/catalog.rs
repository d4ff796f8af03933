//! Named algorithms as controller pairs plus scheduling metadata.
//!
//! [`make_descriptor`] wires one of thirteen named methods into a
//! [`GlobalController`]/[`LocalController`] pair together with its default
//! discretization case, default gains, resolved parameters, and — where the
//! method has one — a native discrete update rule used by the simulator.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{GlobalController, LocalController};
use crate::graph::{build_incidence, IncidenceMatrix, MixingMatrix, Topology};
use crate::problem::ObjectiveSuite;

/// Errors from catalog lookup and parameter validation.
#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("unknown algorithm `{0}`; run with a catalog name")]
    UnknownAlgorithm(String),
    #[error("unknown case tag `{0}` (expected I..V or `continuous`)")]
    UnknownCase(String),
    #[error("algorithm `{algorithm}` does not accept parameter `{param}`")]
    UnknownParam { algorithm: String, param: String },
    #[error("algorithm `{algorithm}` requires parameter `{param}` (no default)")]
    MissingParam { algorithm: String, param: String },
    #[error("parameter `{param}` = {value} invalid for `{algorithm}`: {reason}")]
    InvalidParam {
        algorithm: String,
        param: String,
        value: f64,
        reason: String,
    },
    #[error("topology has {topo} agents, mixing matrix {mix}, objective suite {suite}")]
    DimensionMismatch {
        topo: usize,
        mix: usize,
        suite: usize,
    },
}

/// Scheduling class of a run: which loop is sampled, and how the sampling
/// intervals relate.
///
/// `I`: communication sampled, computation continuous. `II`: the reverse.
/// `III`: both sampled at the same interval. `IV`: computation faster by an
/// integer factor Q. `V`: communication faster by an integer factor K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    I,
    II,
    III,
    IV,
    V,
    Continuous,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::I => "I",
            CaseTag::II => "II",
            CaseTag::III => "III",
            CaseTag::IV => "IV",
            CaseTag::V => "V",
            CaseTag::Continuous => "continuous",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseTag {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(CaseTag::I),
            "II" | "2" => Ok(CaseTag::II),
            "III" | "3" => Ok(CaseTag::III),
            "IV" | "4" => Ok(CaseTag::IV),
            "V" | "5" => Ok(CaseTag::V),
            "CONTINUOUS" | "CT" => Ok(CaseTag::Continuous),
            other => Err(ControllerError::UnknownCase(other.to_string())),
        }
    }
}

/// Extra feedback terms some methods add on top of the certified consensus
/// core when simulated as a continuous double-feedback system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// The communication loop is exactly the certified core.
    None,
    /// Augmented-Lagrangian pair: `u_gx = c(I-W)x + v`, `u_gv = -c(I-W)x`.
    DlmDual { c: f64 },
    /// Server-mediated dual pair: `u_gx = (I-R)x + v`, `u_gv = -(I-R)x`.
    FedPdDual,
    /// Proportional-integral pair: `u_gx = (I-W)x + k_i v`,
    /// `u_gv = -k_i (I-W)x`.
    PiDual { k_i: f64 },
}

/// How the simulator realizes a descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimDynamics {
    /// Integrable double-feedback dynamics; all five sampling cases apply.
    DoubleFeedback { coupling: Coupling },
    /// Continuous local flow punctuated by exact averaging events at
    /// communication instants (the communication loop is not persistent).
    ImpulseAveraging,
    /// Only the native discrete update is simulated; the continuous form
    /// contains state derivatives on both sides and is not integrated.
    NativeOnly,
}

/// Which native discrete stepper implements the published update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NativeKind {
    Dgd,
    /// Shared by the gradient-tracking family (`dgt`, `next`, `d_fedgt`).
    Tracking,
    Dlm,
    FedProx,
    FedPd,
    FedAvg,
    Scaffold,
    XFilter,
    Dgpda,
    DAgt,
}

/// A catalog entry: controllers, scheduling class, gains, and parameters.
#[derive(Debug, Clone)]
pub struct AlgorithmDescriptor {
    pub name: String,
    pub gcfl: GlobalController,
    pub lcfl: LocalController,
    /// Default scheduling class of the method as usually run.
    pub case: CaseTag,
    pub default_eta_g: f64,
    pub default_eta_l: f64,
    /// Resolved parameters (defaults merged with user overrides).
    pub params: BTreeMap<String, f64>,
    pub has_v: bool,
    pub has_z: bool,
    pub dynamics: SimDynamics,
    pub native: Option<NativeKind>,
    /// False when the communication loop acts only at sampling instants, in
    /// which case the energy-descent certificate is expected to fail.
    pub persistent_gcfl: bool,
    /// Signed edge incidence, carried only by methods whose native update
    /// works on edge variables.
    pub incidence: Option<IncidenceMatrix>,
    pub notes: Vec<String>,
}

impl AlgorithmDescriptor {
    pub fn n_agents(&self) -> usize {
        self.gcfl.n_agents()
    }

    /// Column count of the `v` stack for feature dimension `d`.
    pub fn d_v(&self, d: usize) -> usize {
        if self.has_v {
            d
        } else {
            0
        }
    }

    /// Column count of the `z` stack for feature dimension `d`.
    pub fn d_z(&self, d: usize) -> usize {
        if self.has_z {
            d
        } else {
            0
        }
    }

    /// Parameter lookup that panics on absent keys; resolved params always
    /// contain every declared parameter.
    pub fn param(&self, name: &str) -> f64 {
        *self
            .params
            .get(name)
            .unwrap_or_else(|| panic!("descriptor `{}` has no param `{name}`", self.name))
    }
}

const NAMES: [&str; 13] = [
    "dgd", "dgt", "next", "dlm", "fedprox", "fedpd", "fedavg", "scaffold", "xfilter", "dgpda",
    "pi", "d_fedgt", "d_agt",
];

/// The exact set of catalog names accepted by [`make_descriptor`].
pub fn algorithm_names() -> &'static [&'static str] {
    &NAMES
}

struct ParamSpec {
    name: &'static str,
    default: Option<f64>,
    positive: bool,
}

impl ParamSpec {
    fn required(name: &'static str) -> Self {
        ParamSpec {
            name,
            default: None,
            positive: true,
        }
    }

    fn positive(name: &'static str, default: f64) -> Self {
        ParamSpec {
            name,
            default: Some(default),
            positive: true,
        }
    }
}

fn resolve_params(
    algorithm: &str,
    specs: &[ParamSpec],
    user: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, ControllerError> {
    for key in user.keys() {
        if !specs.iter().any(|s| s.name == key) {
            return Err(ControllerError::UnknownParam {
                algorithm: algorithm.to_string(),
                param: key.clone(),
            });
        }
    }
    let mut out = BTreeMap::new();
    for spec in specs {
        let value = match user.get(spec.name) {
            Some(v) => *v,
            None => spec.default.ok_or_else(|| ControllerError::MissingParam {
                algorithm: algorithm.to_string(),
                param: spec.name.to_string(),
            })?,
        };
        if !value.is_finite() {
            return Err(ControllerError::InvalidParam {
                algorithm: algorithm.to_string(),
                param: spec.name.to_string(),
                value,
                reason: "must be finite".to_string(),
            });
        }
        if spec.positive && value <= 0.0 {
            return Err(ControllerError::InvalidParam {
                algorithm: algorithm.to_string(),
                param: spec.name.to_string(),
                value,
                reason: "must be > 0".to_string(),
            });
        }
        out.insert(spec.name.to_string(), value);
    }
    Ok(out)
}

fn integer_param(
    algorithm: &str,
    params: &BTreeMap<String, f64>,
    name: &str,
) -> Result<usize, ControllerError> {
    let v = params[name];
    if v.fract() != 0.0 || v < 1.0 {
        return Err(ControllerError::InvalidParam {
            algorithm: algorithm.to_string(),
            param: name.to_string(),
            value: v,
            reason: "must be an integer >= 1".to_string(),
        });
    }
    Ok(v as usize)
}

/// Builds the descriptor for a catalog name.
///
/// Server-mediated methods (`fedavg`, `fedprox`, `fedpd`, `scaffold`) replace
/// the gossip matrix by uniform averaging regardless of the supplied graph;
/// every other method communicates through `mix`.
pub fn make_descriptor(
    name: &str,
    topo: &Topology,
    mix: &MixingMatrix,
    suite: &ObjectiveSuite,
    user_params: &BTreeMap<String, f64>,
) -> Result<AlgorithmDescriptor, ControllerError> {
    let n = suite.n_agents();
    if topo.n_agents() != n || mix.matrix.nrows() != n {
        return Err(ControllerError::DimensionMismatch {
            topo: topo.n_agents(),
            mix: mix.matrix.nrows(),
            suite: n,
        });
    }
    let lambda2 = mix.spectral.lambda2;
    let gossip = |couples_v: bool| {
        GlobalController::consensus(mix.matrix.clone(), lambda2, couples_v)
    };

    let desc = match name {
        "dgd" => {
            // x <- Wx - eta * grad f; the stepsize lives entirely in the
            // gains, keeping the computation controller a pure gradient.
            let params = resolve_params(name, &[], user_params)?;
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::III,
                default_eta_g: 1.0,
                default_eta_l: 0.1,
                params,
                has_v: false,
                has_z: false,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::None,
                },
                native: Some(NativeKind::Dgd),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![],
            }
        }
        "dgt" => {
            let params = resolve_params(name, &[ParamSpec::positive("c", 1.0)], user_params)?;
            let c = params["c"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(true),
                lcfl: LocalController::tracking(suite, c),
                case: CaseTag::III,
                default_eta_g: 1.0,
                default_eta_l: 1.0,
                params,
                has_v: true,
                has_z: true,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::None,
                },
                native: Some(NativeKind::Tracking),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![],
            }
        }
        "next" => {
            // Best-response form with a quadratic surrogate of weight `eta`;
            // the x-step weight collapses to n*alpha/eta (1 with defaults).
            let params = resolve_params(
                name,
                &[
                    ParamSpec::positive("alpha", 1.0),
                    ParamSpec::positive("eta", n as f64),
                ],
                user_params,
            )?;
            let c_eff = n as f64 * params["alpha"] / params["eta"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(true),
                lcfl: LocalController::tracking(suite, c_eff),
                case: CaseTag::I,
                default_eta_g: 1.0,
                default_eta_l: 1.0,
                params,
                has_v: true,
                has_z: true,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::None,
                },
                native: Some(NativeKind::Tracking),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "x-step weight is n*alpha/eta; the auxiliary z trails x by one step"
                        .to_string(),
                ],
            }
        }
        "dlm" => {
            let params = resolve_params(name, &[ParamSpec::positive("c", 1.0)], user_params)?;
            let c = params["c"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::III,
                default_eta_g: 0.05,
                default_eta_l: 0.05,
                params,
                has_v: true,
                has_z: false,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::DlmDual { c },
                },
                native: Some(NativeKind::Dlm),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "the dual feedback on v is the negative of the x-coupling so the \
                     discrete iteration reproduces the augmented-Lagrangian method"
                        .to_string(),
                ],
            }
        }
        "fedprox" => {
            // eta1: local gradient step; eta2: proximal pull toward the
            // round-start anchor.
            let params = resolve_params(
                name,
                &[
                    ParamSpec::positive("eta1", 0.05),
                    ParamSpec::positive("eta2", 0.1),
                ],
                user_params,
            )?;
            let (eta1, eta2) = (params["eta1"], params["eta2"]);
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: GlobalController::centralized(n, false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::I,
                default_eta_g: eta2,
                default_eta_l: eta1,
                params,
                has_v: false,
                has_z: false,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::None,
                },
                native: Some(NativeKind::FedProx),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "continuous runs map the proximal pull to the communication gain \
                     (eta_g = eta2) and the gradient step to the computation gain"
                        .to_string(),
                ],
            }
        }
        "fedpd" => {
            let params = resolve_params(
                name,
                &[
                    ParamSpec::positive("eta1", 0.05),
                    ParamSpec::positive("eta2", 1.0),
                ],
                user_params,
            )?;
            let eta1 = params["eta1"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: GlobalController::centralized(n, false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::IV,
                default_eta_g: 1.0,
                default_eta_l: eta1,
                params,
                has_v: true,
                has_z: false,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::FedPdDual,
                },
                native: Some(NativeKind::FedPd),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "dual ascent uses the freshly averaged iterate; eta2 scales the \
                     penalty in the x-step and 1/eta2 the dual step"
                        .to_string(),
                ],
            }
        }
        "fedavg" => {
            let params = resolve_params(name, &[ParamSpec::positive("eta", 0.05)], user_params)?;
            let eta = params["eta"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: GlobalController::centralized(n, false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::IV,
                default_eta_g: 1.0,
                default_eta_l: eta,
                params,
                has_v: false,
                has_z: false,
                dynamics: SimDynamics::ImpulseAveraging,
                native: Some(NativeKind::FedAvg),
                persistent_gcfl: false,
                incidence: None,
                notes: vec![
                    "the communication loop is not persistent: averaging acts only at \
                     isolated instants, so the energy-descent certificate (P5) fails by \
                     design between rounds"
                        .to_string(),
                ],
            }
        }
        "scaffold" => {
            let params = resolve_params(
                name,
                &[
                    ParamSpec::positive("eta1", 0.05),
                    ParamSpec::positive("eta2", 1.0),
                ],
                user_params,
            )?;
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: GlobalController::centralized(n, false),
                lcfl: LocalController::variate_corrected(suite),
                case: CaseTag::IV,
                default_eta_g: 1.0,
                default_eta_l: params["eta1"],
                params,
                has_v: true,
                has_z: true,
                dynamics: SimDynamics::NativeOnly,
                native: Some(NativeKind::Scaffold),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "simulated through its native discrete updates; the continuous form \
                     has xdot on both sides and is documentation only"
                        .to_string(),
                ],
            }
        }
        "xfilter" => {
            let params = resolve_params(
                name,
                &[
                    ParamSpec::required("eta1"),
                    ParamSpec::required("eta2"),
                    ParamSpec::required("eta3"),
                ],
                user_params,
            )?;
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::II,
                default_eta_g: 1.0,
                default_eta_l: 1.0,
                params,
                has_v: true,
                has_z: false,
                dynamics: SimDynamics::NativeOnly,
                native: Some(NativeKind::XFilter),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "communication runs every step while the local refresh fires every \
                     K-th step; simulated through its native discrete updates"
                        .to_string(),
                ],
            }
        }
        "dgpda" => {
            let params = resolve_params(
                name,
                &[
                    ParamSpec::positive("eta1", 1.0),
                    ParamSpec::positive("eta2", 1.0),
                    ParamSpec::positive("k_inner", 10.0),
                ],
                user_params,
            )?;
            integer_param(name, &params, "k_inner")?;
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::II,
                default_eta_g: 1.0,
                default_eta_l: 1.0,
                params,
                has_v: false,
                has_z: false,
                dynamics: SimDynamics::NativeOnly,
                native: Some(NativeKind::Dgpda),
                persistent_gcfl: true,
                incidence: Some(build_incidence(topo)),
                notes: vec![
                    "the local argmin is realized as k_inner gradient-descent steps on \
                     the primal subproblem; the dual lives on edges"
                        .to_string(),
                ],
            }
        }
        "pi" => {
            let params = resolve_params(name, &[ParamSpec::positive("k_i", 1.0)], user_params)?;
            let k_i = params["k_i"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(false),
                lcfl: LocalController::gradient(suite),
                case: CaseTag::Continuous,
                default_eta_g: 1.0,
                default_eta_l: 1.0,
                params,
                has_v: true,
                has_z: false,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::PiDual { k_i },
                },
                native: None,
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "proportional-integral consensus; no native discrete rule, run it \
                     with the continuous scheme (eta_g is the proportional gain, eta_l \
                     the gradient gain)"
                        .to_string(),
                ],
            }
        }
        "d_fedgt" => {
            let params = resolve_params(name, &[ParamSpec::positive("c", 1.0)], user_params)?;
            let c = params["c"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: gossip(true),
                lcfl: LocalController::tracking(suite, c),
                case: CaseTag::IV,
                default_eta_g: 1.0,
                default_eta_l: 1.0,
                params,
                has_v: true,
                has_z: true,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::None,
                },
                native: Some(NativeKind::Tracking),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "the communication term fires once per round with the lumped weight \
                     tau_g * eta_g"
                        .to_string(),
                ],
            }
        }
        "d_agt" => {
            let params = resolve_params(name, &[ParamSpec::positive("c", 1.0)], user_params)?;
            let c = params["c"];
            AlgorithmDescriptor {
                name: name.to_string(),
                gcfl: GlobalController::accelerated(mix.matrix.clone(), lambda2),
                lcfl: LocalController::tracking(suite, c),
                case: CaseTag::III,
                default_eta_g: 1.0,
                default_eta_l: 1.0,
                params,
                has_v: true,
                has_z: true,
                dynamics: SimDynamics::DoubleFeedback {
                    coupling: Coupling::None,
                },
                native: Some(NativeKind::DAgt),
                persistent_gcfl: true,
                incidence: None,
                notes: vec![
                    "momentum memories refresh to the pre-update state at every \
                     communication instant"
                        .to_string(),
                ],
            }
        }
        other => return Err(ControllerError::UnknownAlgorithm(other.to_string())),
    };
    Ok(desc)
}
