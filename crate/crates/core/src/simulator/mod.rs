//! Multi-rate simulation engine.
//!
//! The two feedback loops can each run in continuous time (micro-integrated
//! with a classical 4th-order step) or be sampled with a zero-order hold.
//! [`DiscretizationScheme`] names the five sampling patterns plus the fully
//! continuous reference; [`run`] dispatches a configured algorithm to the
//! hybrid integrator or to its native discrete update rule and records a
//! [`Trace`] of energy, consensus error, and stationarity gap.

mod continuous;
mod native;

pub use continuous::micro_step;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::controllers::{
    AlgorithmDescriptor, CaseTag, Coupling, GcflKind, SimDynamics,
};
use crate::problem::{ObjectiveSuite, ProblemError};

/// Errors raised while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid gain schedule: {0}")]
    InvalidGains(String),
    #[error("algorithm `{algorithm}` cannot run under case {case}: {reason}")]
    UnsupportedScheme {
        algorithm: String,
        case: CaseTag,
        reason: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("trace io: {0}")]
    Io(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Sampling pattern of a run: which loop is held, and the exact grid.
///
/// Discrete cases (III, IV, V) step on the base grid `min(tau_g, tau_l)`;
/// the slower loop fires every `ratio`-th step, so the interleaving is exact
/// by construction rather than by floating-point comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationScheme {
    pub case: CaseTag,
    pub tau_g: f64,
    pub tau_l: f64,
    /// Q for case IV (`tau_g = Q tau_l`), K for case V (`tau_l = K tau_g`),
    /// 1 for case III; unused otherwise.
    pub ratio: usize,
    /// Micro-integration step for continuous loops.
    pub micro_step: f64,
}

fn default_micro(tau_g: f64, tau_l: f64) -> f64 {
    let mut m = 1.0f64;
    if tau_g > 0.0 {
        m = m.min(tau_g);
    }
    if tau_l > 0.0 {
        m = m.min(tau_l);
    }
    m / 100.0
}

impl DiscretizationScheme {
    /// Fully continuous reference dynamics.
    pub fn continuous(h: Option<f64>) -> Result<Self, SimError> {
        let scheme = DiscretizationScheme {
            case: CaseTag::Continuous,
            tau_g: 0.0,
            tau_l: 0.0,
            ratio: 1,
            micro_step: h.unwrap_or_else(|| default_micro(0.0, 0.0)),
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Sampled communication, continuous computation.
    pub fn case_i(tau_g: f64, h: Option<f64>) -> Result<Self, SimError> {
        let scheme = DiscretizationScheme {
            case: CaseTag::I,
            tau_g,
            tau_l: 0.0,
            ratio: 1,
            micro_step: h.unwrap_or_else(|| default_micro(tau_g, 0.0)),
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Continuous communication, sampled computation.
    pub fn case_ii(tau_l: f64, h: Option<f64>) -> Result<Self, SimError> {
        let scheme = DiscretizationScheme {
            case: CaseTag::II,
            tau_g: 0.0,
            tau_l,
            ratio: 1,
            micro_step: h.unwrap_or_else(|| default_micro(0.0, tau_l)),
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Both loops sampled at the same interval.
    pub fn case_iii(tau: f64) -> Result<Self, SimError> {
        let scheme = DiscretizationScheme {
            case: CaseTag::III,
            tau_g: tau,
            tau_l: tau,
            ratio: 1,
            micro_step: tau,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Computation every `tau_l`, communication every `q`-th step.
    pub fn case_iv(tau_l: f64, q: usize) -> Result<Self, SimError> {
        let scheme = DiscretizationScheme {
            case: CaseTag::IV,
            tau_g: q as f64 * tau_l,
            tau_l,
            ratio: q,
            micro_step: tau_l,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Communication every `tau_g`, computation every `k`-th step.
    pub fn case_v(tau_g: f64, k: usize) -> Result<Self, SimError> {
        let scheme = DiscretizationScheme {
            case: CaseTag::V,
            tau_g,
            tau_l: k as f64 * tau_g,
            ratio: k,
            micro_step: tau_g,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Checks the case-specific relations between the fields.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScheme(msg));
        if !(self.tau_g.is_finite() && self.tau_l.is_finite() && self.micro_step.is_finite()) {
            return bad("sampling intervals must be finite".into());
        }
        if self.tau_g < 0.0 || self.tau_l < 0.0 {
            return bad("sampling intervals must be nonnegative".into());
        }
        if self.micro_step <= 0.0 {
            return bad("micro step must be positive".into());
        }
        if self.ratio < 1 {
            return bad("rate ratio must be >= 1".into());
        }
        let rel_eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        match self.case {
            CaseTag::Continuous => {
                if self.tau_g != 0.0 || self.tau_l != 0.0 {
                    return bad("continuous scheme must have tau_g = tau_l = 0".into());
                }
            }
            CaseTag::I => {
                if self.tau_g <= 0.0 || self.tau_l != 0.0 {
                    return bad("case I needs tau_g > 0 and tau_l = 0".into());
                }
            }
            CaseTag::II => {
                if self.tau_l <= 0.0 || self.tau_g != 0.0 {
                    return bad("case II needs tau_l > 0 and tau_g = 0".into());
                }
            }
            CaseTag::III => {
                if self.tau_g <= 0.0 || !rel_eq(self.tau_g, self.tau_l) || self.ratio != 1 {
                    return bad("case III needs tau_g = tau_l > 0 and ratio 1".into());
                }
            }
            CaseTag::IV => {
                if self.tau_l <= 0.0 || !rel_eq(self.tau_g, self.ratio as f64 * self.tau_l) {
                    return bad("case IV needs tau_g = Q * tau_l with tau_l > 0".into());
                }
            }
            CaseTag::V => {
                if self.tau_g <= 0.0 || !rel_eq(self.tau_l, self.ratio as f64 * self.tau_g) {
                    return bad("case V needs tau_l = K * tau_g with tau_g > 0".into());
                }
            }
        }
        // Continuous loops need the micro step well under the sampling grid.
        if matches!(self.case, CaseTag::I | CaseTag::II) {
            let tau = self.tau_g.max(self.tau_l);
            if self.micro_step > tau / 10.0 + 1e-15 {
                return bad(format!(
                    "micro step {} must be at most a tenth of the sampling interval {}",
                    self.micro_step, tau
                ));
            }
        }
        Ok(())
    }

    /// Base step and fire periods for the pure-discrete cases.
    pub(crate) fn discrete_grid(&self) -> Option<(f64, u64, u64)> {
        match self.case {
            CaseTag::III => Some((self.tau_g, 1, 1)),
            CaseTag::IV => Some((self.tau_l, self.ratio as u64, 1)),
            CaseTag::V => Some((self.tau_g, 1, self.ratio as u64)),
            _ => None,
        }
    }
}

/// One piece of a piecewise-constant gain schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPiece {
    pub t_start: f64,
    pub eta_g: f64,
    pub eta_l: f64,
}

/// Loop gains as functions of time. Values are piecewise constant; for
/// sampled loops they are read only at sampling instants, so piece
/// boundaries must land on the sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSchedule {
    Constant {
        eta_g: f64,
        eta_l: f64,
    },
    /// Constant gains with the computation gain pre-scaled by
    /// `1/sqrt(horizon)`, the usual horizon-aware damping.
    SqrtHorizon {
        eta_g: f64,
        eta_l0: f64,
        horizon: f64,
    },
    Piecewise {
        pieces: Vec<GainPiece>,
    },
}

impl GainSchedule {
    pub fn constant(eta_g: f64, eta_l: f64) -> Self {
        GainSchedule::Constant { eta_g, eta_l }
    }

    pub fn eta_g(&self, t: f64) -> f64 {
        match self {
            GainSchedule::Constant { eta_g, .. } => *eta_g,
            GainSchedule::SqrtHorizon { eta_g, .. } => *eta_g,
            GainSchedule::Piecewise { pieces } => {
                pieces
                    .iter()
                    .rev()
                    .find(|p| p.t_start <= t + 1e-12)
                    .map(|p| p.eta_g)
                    .unwrap_or(0.0)
            }
        }
    }

    pub fn eta_l(&self, t: f64) -> f64 {
        match self {
            GainSchedule::Constant { eta_l, .. } => *eta_l,
            GainSchedule::SqrtHorizon { eta_l0, horizon, .. } => eta_l0 / horizon.sqrt(),
            GainSchedule::Piecewise { pieces } => {
                pieces
                    .iter()
                    .rev()
                    .find(|p| p.t_start <= t + 1e-12)
                    .map(|p| p.eta_l)
                    .unwrap_or(0.0)
            }
        }
    }

    /// Piece boundaries after t = 0 (integration segments split there).
    pub fn change_points(&self) -> Vec<f64> {
        match self {
            GainSchedule::Piecewise { pieces } => {
                pieces.iter().skip(1).map(|p| p.t_start).collect()
            }
            _ => vec![],
        }
    }

    /// Validates values and checks piece boundaries against the sampling
    /// grid of `scheme`.
    pub fn validate(&self, scheme: &DiscretizationScheme) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidGains(msg));
        let check_val = |eta: f64, name: &str| -> Result<(), SimError> {
            if !eta.is_finite() || eta < 0.0 {
                return Err(SimError::InvalidGains(format!(
                    "{name} must be finite and nonnegative, got {eta}"
                )));
            }
            Ok(())
        };
        match self {
            GainSchedule::Constant { eta_g, eta_l } => {
                check_val(*eta_g, "eta_g")?;
                check_val(*eta_l, "eta_l")?;
            }
            GainSchedule::SqrtHorizon {
                eta_g,
                eta_l0,
                horizon,
            } => {
                check_val(*eta_g, "eta_g")?;
                check_val(*eta_l0, "eta_l0")?;
                if !horizon.is_finite() || *horizon <= 0.0 {
                    return bad("horizon must be positive".into());
                }
            }
            GainSchedule::Piecewise { pieces } => {
                if pieces.is_empty() {
                    return bad("piecewise schedule needs at least one piece".into());
                }
                if pieces[0].t_start != 0.0 {
                    return bad("first piece must start at t = 0".into());
                }
                for w in pieces.windows(2) {
                    if w[1].t_start <= w[0].t_start {
                        return bad("piece start times must be strictly increasing".into());
                    }
                }
                for p in pieces {
                    check_val(p.eta_g, "eta_g")?;
                    check_val(p.eta_l, "eta_l")?;
                    // Gains are read at sampling instants only; a change that
                    // falls inside a hold interval would be silently ignored
                    // or smeared, so reject it.
                    for tau in [scheme.tau_g, scheme.tau_l] {
                        if tau > 0.0 && p.t_start > 0.0 {
                            let ratio = p.t_start / tau;
                            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                                return bad(format!(
                                    "piece start {} does not lie on the sampling grid (tau = {tau})",
                                    p.t_start
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Last-sampled output of the global controller (memory channels are only
/// populated for the momentum kind).
#[derive(Debug, Clone)]
pub struct HeldGlobal {
    pub ux: DMatrix<f64>,
    pub uv: DMatrix<f64>,
    pub umx: DMatrix<f64>,
    pub umv: DMatrix<f64>,
}

/// Last-sampled output of the local controller (all channels agent-stacked).
#[derive(Debug, Clone)]
pub struct HeldLocal {
    pub ux: DMatrix<f64>,
    pub uv: DMatrix<f64>,
    pub uz: DMatrix<f64>,
}

/// The concatenated simulation state: agent stacks, held controller outputs,
/// and per-algorithm auxiliary memory.
#[derive(Debug, Clone)]
pub struct StackedState {
    /// Iterates, one row per agent.
    pub x: DMatrix<f64>,
    /// Tracking/dual stack (`n x 0` when the algorithm has none).
    pub v: DMatrix<f64>,
    /// Local-only stack (`n x 0` when the algorithm has none).
    pub z: DMatrix<f64>,
    pub t: f64,
    /// Step counter: micro steps for continuous loops, iterations otherwise.
    pub k: u64,
    pub held_g: HeldGlobal,
    pub held_l: HeldLocal,
    pub last_sample_g: f64,
    pub last_sample_l: f64,
    /// Named auxiliary memories (gradient memories, anchors, filters, edge
    /// duals) used by native update rules.
    pub aux: BTreeMap<String, DMatrix<f64>>,
}

impl StackedState {
    pub fn n_agents(&self) -> usize {
        self.x.nrows()
    }

    pub(crate) fn aux_mat(&self, key: &str) -> &DMatrix<f64> {
        self.aux
            .get(key)
            .unwrap_or_else(|| panic!("missing aux state `{key}`"))
    }
}

/// Sum of squared row deviations from the row mean: `||(I-R)m||^2`.
pub(crate) fn consensus_sq_of(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mean = ObjectiveSuite::row_mean(m);
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let diff = m.row(i).transpose() - &mean;
        acc += diff.norm_squared();
    }
    acc
}

/// Evaluates the global controller, including any dual/momentum coupling the
/// simulated dynamics add on top of the certified core.
pub(crate) fn eval_global(
    desc: &AlgorithmDescriptor,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
    mx: &DMatrix<f64>,
    mv: &DMatrix<f64>,
) -> HeldGlobal {
    let n = x.nrows();
    let w = &desc.gcfl.w;
    let empty = || DMatrix::zeros(n, 0);
    let coupling = match desc.dynamics {
        SimDynamics::DoubleFeedback { coupling } => coupling,
        _ => Coupling::None,
    };
    match (desc.gcfl.kind, coupling) {
        (GcflKind::Accelerated, _) => {
            let c = desc.gcfl.momentum;
            let ux = x - (w * x) * (1.0 + c) + mx * c;
            let uv = v - (w * v) * (1.0 + c) + mv * c;
            HeldGlobal {
                ux,
                uv,
                umx: mx - x,
                umv: mv - v,
            }
        }
        (GcflKind::Consensus, Coupling::None) => {
            let (ux, uv) = desc.gcfl.apply(x, v);
            HeldGlobal {
                ux,
                uv,
                umx: empty(),
                umv: empty(),
            }
        }
        (GcflKind::Consensus, Coupling::DlmDual { c }) => {
            let imw_x = x - w * x;
            HeldGlobal {
                ux: &imw_x * c + v,
                uv: imw_x * (-c),
                umx: empty(),
                umv: empty(),
            }
        }
        (GcflKind::Consensus, Coupling::FedPdDual) => {
            let imw_x = x - w * x;
            HeldGlobal {
                ux: &imw_x + v,
                uv: -imw_x,
                umx: empty(),
                umv: empty(),
            }
        }
        (GcflKind::Consensus, Coupling::PiDual { k_i }) => {
            let imw_x = x - w * x;
            HeldGlobal {
                ux: &imw_x + v * k_i,
                uv: imw_x * (-k_i),
                umx: empty(),
                umv: empty(),
            }
        }
    }
}

/// Evaluates the local controller over all agents. Every channel comes back
/// as an `n x d` stack; channels the algorithm does not carry are zeros.
pub(crate) fn eval_local(
    desc: &AlgorithmDescriptor,
    suite: &ObjectiveSuite,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> Result<HeldLocal, SimError> {
    let n = x.nrows();
    let d = x.ncols();
    let mut ux = DMatrix::zeros(n, d);
    let mut uv = DMatrix::zeros(n, d);
    let mut uz = DMatrix::zeros(n, d);
    let zero = nalgebra::DVector::zeros(d);
    for i in 0..n {
        let xi = x.row(i).transpose();
        let vi = if v.ncols() == d {
            v.row(i).transpose()
        } else {
            zero.clone()
        };
        let zi = if z.ncols() == d {
            z.row(i).transpose()
        } else {
            zero.clone()
        };
        let (uxi, uvi, uzi) = desc.lcfl.apply_i(suite, i, &xi, &vi, &zi)?;
        ux.row_mut(i).copy_from(&uxi.transpose());
        uv.row_mut(i).copy_from(&uvi.transpose());
        uz.row_mut(i).copy_from(&uzi.transpose());
    }
    Ok(HeldLocal { ux, uv, uz })
}

/// Builds the initial state for a descriptor: `v`/`z` from the controller's
/// init rule, native auxiliary memories, and held outputs sampled at t = 0.
pub fn init_state(
    desc: &AlgorithmDescriptor,
    suite: &ObjectiveSuite,
    x0: &DMatrix<f64>,
) -> Result<StackedState, SimError> {
    use crate::controllers::{InitRule, NativeKind};

    let n = suite.n_agents();
    let d = suite.dim();
    if x0.nrows() != n || x0.ncols() != d {
        return Err(SimError::Dimension(format!(
            "x0 is {}x{}, expected {}x{}",
            x0.nrows(),
            x0.ncols(),
            n,
            d
        )));
    }
    if x0.iter().any(|a| !a.is_finite()) {
        return Err(SimError::Dimension("x0 must be finite".into()));
    }

    let g0 = suite.gradient_stack(x0)?;
    let mut v = if desc.has_v {
        match desc.lcfl.init {
            InitRule::Zero => DMatrix::zeros(n, d),
            InitRule::TrackingWarmStart => g0.clone(),
        }
    } else {
        DMatrix::zeros(n, 0)
    };
    let z = if desc.has_z {
        match desc.lcfl.init {
            InitRule::Zero => DMatrix::zeros(n, d),
            InitRule::TrackingWarmStart => x0.clone(),
        }
    } else {
        DMatrix::zeros(n, 0)
    };

    let mut aux = BTreeMap::new();
    match desc.native {
        Some(NativeKind::Tracking) => {}
        Some(NativeKind::DAgt) => {
            // The tracker memory starts at zero: the relaxed memory conserves
            // the combination v - c*m per row mean, and a zero seed keeps that
            // combination equal to the tracked average gradient.
            aux.insert("v_x".to_string(), x0.clone());
            aux.insert("v_v".to_string(), DMatrix::zeros(n, d));
        }
        Some(NativeKind::FedProx) => {
            aux.insert("anchor".to_string(), x0.clone());
        }
        Some(NativeKind::FedPd) => {
            let r = &desc.gcfl.w;
            aux.insert("w".to_string(), r * x0);
            aux.insert("held_gap".to_string(), x0 - r * x0);
        }
        Some(NativeKind::Scaffold) => {
            aux.insert("w".to_string(), &desc.gcfl.w * x0);
            aux.insert("v_held".to_string(), v.clone());
        }
        Some(NativeKind::XFilter) => {
            // The filter state starts at one gradient step behind x.
            let eta3 = desc.param("eta3");
            v = x0 - &g0 * eta3;
            aux.insert("w1".to_string(), v.clone());
            aux.insert("w2".to_string(), v.clone());
            aux.insert("x_prev".to_string(), x0.clone());
            aux.insert("v_held".to_string(), v.clone());
        }
        Some(NativeKind::Dgpda) => {
            let edges = desc
                .incidence
                .as_ref()
                .map(|inc| inc.matrix.nrows())
                .unwrap_or(0);
            aux.insert("dual".to_string(), DMatrix::zeros(edges, d));
        }
        Some(NativeKind::Dgd) | Some(NativeKind::Dlm) | Some(NativeKind::FedAvg) | None => {}
    }

    let (mx, mv) = if desc.gcfl.kind == GcflKind::Accelerated {
        (
            aux.get("v_x").cloned().unwrap_or_else(|| x0.clone()),
            aux.get("v_v").cloned().unwrap_or_else(|| v.clone()),
        )
    } else {
        (DMatrix::zeros(n, 0), DMatrix::zeros(n, 0))
    };
    let held_g = eval_global(desc, x0, &v, &mx, &mv);
    let held_l = eval_local(desc, suite, x0, &v, &z)?;

    Ok(StackedState {
        x: x0.clone(),
        v,
        z,
        t: 0.0,
        k: 0,
        held_g,
        held_l,
        last_sample_g: 0.0,
        last_sample_l: 0.0,
        aux,
    })
}

/// One recorded sample of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub k: u64,
    pub energy: f64,
    pub grad_avg_sq: f64,
    pub consensus_sq: f64,
    pub gap: f64,
    pub min_gap: f64,
}

/// Recorded time series of a run.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// `||(I-R)[x; v]||^2` per row; kept in memory for the energy-descent
    /// regression but not serialized.
    pub consensus_y_sq: Vec<f64>,
}

impl Trace {
    /// Writes the pinned CSV layout:
    /// `t,k,energy,grad_avg_sq,consensus_sq,gap,min_gap`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "k", "energy", "grad_avg_sq", "consensus_sq", "gap", "min_gap"])
            .map_err(|e| SimError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.k.to_string(),
                r.energy.to_string(),
                r.grad_avg_sq.to_string(),
                r.consensus_sq.to_string(),
                r.gap.to_string(),
                r.min_gap.to_string(),
            ])
            .map_err(|e| SimError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| SimError::Io(e.to_string()))
    }

    /// Reads a trace written by [`Trace::write_csv`] (the in-memory consensus
    /// column is not serialized and comes back empty).
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Trace, SimError> {
        let mut rdr = csv::Reader::from_reader(input);
        let expected = ["t", "k", "energy", "grad_avg_sq", "consensus_sq", "gap", "min_gap"];
        let headers = rdr.headers().map_err(|e| SimError::Io(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(SimError::Io(format!("unexpected trace header: {headers:?}")));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| SimError::Io(e.to_string()))?;
            let field = |i: usize| -> Result<f64, SimError> {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| SimError::Io(format!("bad float in trace: {e}")))
            };
            rows.push(TraceRow {
                t: field(0)?,
                k: record[1]
                    .parse::<u64>()
                    .map_err(|e| SimError::Io(format!("bad step index: {e}")))?,
                energy: field(2)?,
                grad_avg_sq: field(3)?,
                consensus_sq: field(4)?,
                gap: field(5)?,
                min_gap: field(6)?,
            });
        }
        Ok(Trace {
            rows,
            consensus_y_sq: vec![],
        })
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// The stationarity gap reached the configured target.
    Converged,
    /// The time/iteration horizon was exhausted with finite state.
    Horizon,
    /// The state blew up (non-finite values or runaway energy).
    Diverged,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunStatus::Converged => "converged",
            RunStatus::Horizon => "horizon",
            RunStatus::Diverged => "diverged",
        };
        f.write_str(s)
    }
}

/// Summary of a finished run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub algorithm: String,
    pub status: RunStatus,
    pub steps: u64,
    pub final_t: f64,
    pub final_gap: f64,
    pub final_energy: f64,
    /// Largest observed Frobenius norms of the auxiliary stacks; boundedness
    /// is monitored, not asserted.
    pub max_v_norm: f64,
    pub max_z_norm: f64,
    pub wall_secs: f64,
}

/// A finished run: the recorded trace, its summary, and the final state.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Trace,
    pub meta: RunMeta,
    pub final_state: StackedState,
}

/// Knobs for [`run`].
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Horizon in time units; discrete runs take `ceil(horizon / base_tau)`
    /// steps.
    pub horizon_t: f64,
    /// Record every `record_stride`-th step (first and last always).
    pub record_stride: u64,
    /// Stop early once the stationarity gap falls to this value.
    pub target_gap: Option<f64>,
    /// Declare divergence when energy exceeds
    /// `divergence_factor * (1 + |initial energy|)`.
    pub divergence_factor: f64,
}

impl RunOptions {
    pub fn new(horizon_t: f64) -> Self {
        RunOptions {
            horizon_t,
            record_stride: 1,
            target_gap: None,
            divergence_factor: 1e8,
        }
    }
}

/// What the recorder decided after observing a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepVerdict {
    Continue,
    Stop(RunStatus),
}

/// Accumulates trace rows, tracks the running minimum gap, and applies the
/// stop conditions (target reached, divergence).
pub(crate) struct Recorder<'a> {
    desc: &'a AlgorithmDescriptor,
    suite: &'a ObjectiveSuite,
    stride: u64,
    target: Option<f64>,
    divergence_factor: f64,
    energy_ceiling: Option<f64>,
    min_gap: f64,
    pub(crate) max_v_norm: f64,
    pub(crate) max_z_norm: f64,
    pub(crate) trace: Trace,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        desc: &'a AlgorithmDescriptor,
        suite: &'a ObjectiveSuite,
        opts: &RunOptions,
    ) -> Self {
        Recorder {
            desc,
            suite,
            stride: opts.record_stride.max(1),
            target: opts.target_gap,
            divergence_factor: opts.divergence_factor,
            energy_ceiling: None,
            min_gap: f64::INFINITY,
            max_v_norm: 0.0,
            max_z_norm: 0.0,
            trace: Trace::default(),
        }
    }

    /// Observes the state after step `k`. Rows are recorded every `stride`
    /// steps or when `force` is set; stop conditions are checked on recorded
    /// rows, plus a cheap finiteness check on every call.
    pub(crate) fn observe(
        &mut self,
        t: f64,
        k: u64,
        x: &DMatrix<f64>,
        v: &DMatrix<f64>,
        z: &DMatrix<f64>,
        force: bool,
    ) -> Result<StepVerdict, SimError> {
        let finite =
            x.iter().all(|a| a.is_finite()) && v.iter().all(|a| a.is_finite());
        if !finite {
            return Ok(StepVerdict::Stop(RunStatus::Diverged));
        }
        if !force && k % self.stride != 0 {
            return Ok(StepVerdict::Continue);
        }

        let report = self.suite.stationarity_gap(x)?;
        let mut cons_y = report.consensus_sq;
        if self.desc.gcfl.couples_v && self.desc.has_v {
            cons_y += consensus_sq_of(v);
        }
        let mean = ObjectiveSuite::row_mean(x);
        let energy = self.suite.objective_at(&mean)? + 0.5 * cons_y;
        if !energy.is_finite() || !report.gap.is_finite() {
            return Ok(StepVerdict::Stop(RunStatus::Diverged));
        }
        let ceiling = *self
            .energy_ceiling
            .get_or_insert(self.divergence_factor * (1.0 + energy.abs()));
        if report.gap < self.min_gap {
            self.min_gap = report.gap;
        }
        self.max_v_norm = self.max_v_norm.max(v.norm());
        self.max_z_norm = self.max_z_norm.max(z.norm());
        self.trace.rows.push(TraceRow {
            t,
            k,
            energy,
            grad_avg_sq: report.grad_at_avg_sq,
            consensus_sq: report.consensus_sq,
            gap: report.gap,
            min_gap: self.min_gap,
        });
        self.trace.consensus_y_sq.push(cons_y);

        if energy > ceiling {
            return Ok(StepVerdict::Stop(RunStatus::Diverged));
        }
        if let Some(target) = self.target {
            if report.gap <= target {
                return Ok(StepVerdict::Stop(RunStatus::Converged));
            }
        }
        Ok(StepVerdict::Continue)
    }

    fn last_row(&self) -> Option<&TraceRow> {
        self.trace.rows.last()
    }
}

/// Runs a configured algorithm and records its trace.
///
/// Continuous and hybrid schemes (continuous, I, II) integrate the feedback
/// dynamics; pure-discrete schemes (III, IV, V) execute the native update
/// rule on the exact interleaved grid.
pub fn run(
    desc: &AlgorithmDescriptor,
    suite: &ObjectiveSuite,
    scheme: &DiscretizationScheme,
    gains: &GainSchedule,
    x0: &DMatrix<f64>,
    opts: &RunOptions,
) -> Result<RunOutcome, SimError> {
    scheme.validate()?;
    gains.validate(scheme)?;
    if !opts.horizon_t.is_finite() || opts.horizon_t <= 0.0 {
        return Err(SimError::InvalidScheme(format!(
            "horizon must be positive, got {}",
            opts.horizon_t
        )));
    }

    let start = Instant::now();
    let mut state = init_state(desc, suite, x0)?;
    let mut rec = Recorder::new(desc, suite, opts);

    let status = match scheme.case {
        CaseTag::Continuous | CaseTag::I | CaseTag::II => {
            continuous::run_hybrid(desc, suite, scheme, gains, &mut state, opts, &mut rec)?
        }
        CaseTag::III | CaseTag::IV | CaseTag::V => {
            run_discrete(desc, suite, scheme, gains, &mut state, opts, &mut rec)?
        }
    };

    let last = rec.last_row();
    let meta = RunMeta {
        algorithm: desc.name.clone(),
        status,
        steps: state.k,
        final_t: state.t,
        final_gap: last.map(|r| r.gap).unwrap_or(f64::NAN),
        final_energy: last.map(|r| r.energy).unwrap_or(f64::NAN),
        max_v_norm: rec.max_v_norm,
        max_z_norm: rec.max_z_norm,
        wall_secs: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        trace: rec.trace,
        meta,
        final_state: state,
    })
}

/// Pure-discrete execution (cases III/IV/V) via the native update rules.
fn run_discrete(
    desc: &AlgorithmDescriptor,
    suite: &ObjectiveSuite,
    scheme: &DiscretizationScheme,
    gains: &GainSchedule,
    state: &mut StackedState,
    opts: &RunOptions,
    rec: &mut Recorder,
) -> Result<RunStatus, SimError> {
    let kind = desc.native.ok_or_else(|| SimError::UnsupportedScheme {
        algorithm: desc.name.clone(),
        case: scheme.case,
        reason: "no native discrete update rule; use a continuous or hybrid scheme".into(),
    })?;
    let (base_tau, g_every, l_every) = scheme
        .discrete_grid()
        .expect("discrete case has a grid");
    let ctx = native::NativeCtx::new(desc, suite, scheme)?;
    let max_steps = (opts.horizon_t / base_tau).ceil().max(1.0) as u64;

    if let StepVerdict::Stop(s) = rec.observe(0.0, 0, &state.x, &state.v, &state.z, true)? {
        return Ok(s);
    }
    for k in 0..max_steps {
        let t_k = k as f64 * base_tau;
        let fire_g = k % g_every == 0;
        let fire_l = k % l_every == 0;
        let wg = gains.eta_g(t_k) * scheme.tau_g;
        let wl = gains.eta_l(t_k) * scheme.tau_l;
        native::native_step(kind, &ctx, state, fire_g, fire_l, wg, wl)?;
        state.k = k + 1;
        state.t = (k + 1) as f64 * base_tau;
        if fire_g {
            state.last_sample_g = t_k;
        }
        if fire_l {
            state.last_sample_l = t_k;
        }
        let force = k + 1 == max_steps;
        match rec.observe(state.t, state.k, &state.x, &state.v, &state.z, force)? {
            StepVerdict::Stop(s) => return Ok(s),
            StepVerdict::Continue => {}
        }
    }
    Ok(RunStatus::Horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::make_descriptor;
    use crate::graph::{build_mixing, Topology, WeightScheme};
    use crate::problem::{LocalObjective, ObjectiveSuite};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use std::collections::BTreeMap;

    fn path3() -> (Topology, crate::graph::MixingMatrix) {
        let topo = Topology::path(3).unwrap();
        let mix = build_mixing(&topo, &WeightScheme::Metropolis).unwrap();
        (topo, mix)
    }

    fn quad_suite(n: usize, targets: &[f64]) -> ObjectiveSuite {
        ObjectiveSuite::new(
            (0..n)
                .map(|i| LocalObjective::quadratic(1.0, DVector::from_vec(vec![targets[i]])))
                .collect(),
        )
        .unwrap()
    }

    fn descriptor(name: &str) -> (crate::controllers::AlgorithmDescriptor, ObjectiveSuite) {
        let (topo, mix) = path3();
        let suite = quad_suite(3, &[1.0, 0.0, -1.0]);
        let desc = make_descriptor(name, &topo, &mix, &suite, &BTreeMap::new()).unwrap();
        (desc, suite)
    }

    #[test]
    fn scheme_constructors_validate() {
        assert!(DiscretizationScheme::case_iii(0.1).is_ok());
        assert!(DiscretizationScheme::case_iii(0.0).is_err());
        assert!(DiscretizationScheme::case_iv(0.1, 0).is_err());
        let s = DiscretizationScheme::case_iv(0.1, 5).unwrap();
        assert_relative_eq!(s.tau_g, 0.5);
        let s = DiscretizationScheme::case_v(0.1, 4).unwrap();
        assert_relative_eq!(s.tau_l, 0.4);
        // Micro step must resolve the sampling interval.
        assert!(DiscretizationScheme::case_i(0.1, Some(0.05)).is_err());
        let s = DiscretizationScheme::case_i(0.1, None).unwrap();
        assert_relative_eq!(s.micro_step, 0.001);
    }

    #[test]
    fn gain_schedule_validation() {
        let scheme = DiscretizationScheme::case_iii(0.1).unwrap();
        assert!(GainSchedule::constant(1.0, 1.0).validate(&scheme).is_ok());
        assert!(GainSchedule::constant(-1.0, 1.0).validate(&scheme).is_err());
        // Zero gains are legal: they switch a loop off.
        assert!(GainSchedule::constant(0.0, 1.0).validate(&scheme).is_ok());

        let aligned = GainSchedule::Piecewise {
            pieces: vec![
                GainPiece { t_start: 0.0, eta_g: 1.0, eta_l: 1.0 },
                GainPiece { t_start: 0.5, eta_g: 1.0, eta_l: 0.1 },
            ],
        };
        assert!(aligned.validate(&scheme).is_ok());
        assert_relative_eq!(aligned.eta_l(0.49), 1.0);
        assert_relative_eq!(aligned.eta_l(0.5), 0.1);

        let misaligned = GainSchedule::Piecewise {
            pieces: vec![
                GainPiece { t_start: 0.0, eta_g: 1.0, eta_l: 1.0 },
                GainPiece { t_start: 0.55, eta_g: 1.0, eta_l: 0.1 },
            ],
        };
        assert!(misaligned.validate(&scheme).is_err());
    }

    #[test]
    fn init_state_follows_rules() {
        let (desc, suite) = descriptor("dgt");
        let x0 = DMatrix::from_column_slice(3, 1, &[0.5, -0.2, 0.1]);
        let s = init_state(&desc, &suite, &x0).unwrap();
        // Warm start: v(0) = grad f(x(0)), z(0) = x(0).
        let g0 = suite.gradient_stack(&x0).unwrap();
        assert_relative_eq!(s.v, g0);
        assert_relative_eq!(s.z, x0);

        let (desc, suite) = descriptor("dgd");
        let s = init_state(&desc, &suite, &x0).unwrap();
        assert_eq!(s.v.ncols(), 0);
        assert_eq!(s.z.ncols(), 0);
    }

    #[test]
    fn stationary_consensual_start_is_fixed() {
        // All agents at the common minimizer of identical objectives:
        // nothing moves under any scheme.
        let (topo, mix) = path3();
        let suite = quad_suite(3, &[0.7, 0.7, 0.7]);
        let desc = make_descriptor("dgt", &topo, &mix, &suite, &BTreeMap::new()).unwrap();
        let x0 = DMatrix::from_element(3, 1, 0.7);
        let scheme = DiscretizationScheme::case_iii(0.1).unwrap();
        let out = run(
            &desc,
            &suite,
            &scheme,
            &GainSchedule::constant(1.0, 1.0),
            &x0,
            &RunOptions::new(1.0),
        )
        .unwrap();
        assert_eq!(out.meta.status, RunStatus::Horizon);
        for r in &out.trace.rows {
            assert!(r.gap.abs() < 1e-28);
        }
        assert_relative_eq!(out.final_state.x, x0, epsilon = 1e-12);
    }

    #[test]
    fn tracking_step_matches_printed_iteration() {
        // Case III with unit gains and tau = 1 must give
        // x(k+1) = W x(k) - c v(k), with z trailing x by one step so the
        // gradient-difference increment reaches v on the following step.
        let (desc, suite) = descriptor("dgt");
        let x0 = DMatrix::from_column_slice(3, 1, &[0.8, -0.3, 0.4]);
        let scheme = DiscretizationScheme::case_iii(1.0).unwrap();
        let out = run(
            &desc,
            &suite,
            &scheme,
            &GainSchedule::constant(1.0, 1.0),
            &x0,
            &RunOptions::new(2.0),
        )
        .unwrap();
        let w = &desc.gcfl.w;
        let g0 = suite.gradient_stack(&x0).unwrap();
        let x1 = w * &x0 - &g0; // v(0) = grad(x(0)), c = 1
        let v1 = w * &g0; // z(0) = x(0): no increment yet
        let x2 = w * &x1 - &v1;
        let g1 = suite.gradient_stack(&x1).unwrap();
        let v2 = w * &v1 + &g1 - &g0; // z(1) = x(0)
        assert_relative_eq!(out.final_state.x, x2, epsilon = 1e-13);
        assert_relative_eq!(out.final_state.v, v2, epsilon = 1e-13);
        assert_relative_eq!(out.final_state.z, x1, epsilon = 1e-13);
    }

    #[test]
    fn case_iii_iv_v_merge_bitwise() {
        let (desc, suite) = descriptor("dgt");
        let x0 = DMatrix::from_column_slice(3, 1, &[0.8, -0.3, 0.4]);
        let gains = GainSchedule::constant(1.0, 0.3);
        let opts = RunOptions::new(2.0);
        let runs: Vec<Trace> = [
            DiscretizationScheme::case_iii(0.05).unwrap(),
            DiscretizationScheme::case_iv(0.05, 1).unwrap(),
            DiscretizationScheme::case_v(0.05, 1).unwrap(),
        ]
        .iter()
        .map(|s| run(&desc, &suite, s, &gains, &x0, &opts).unwrap().trace)
        .collect();
        let csv_of = |t: &Trace| {
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            buf
        };
        let base = csv_of(&runs[0]);
        assert_eq!(base, csv_of(&runs[1]));
        assert_eq!(base, csv_of(&runs[2]));
    }

    #[test]
    fn d_fedgt_with_unit_ratio_equals_dgt() {
        let (topo, mix) = path3();
        let suite = quad_suite(3, &[1.0, 0.0, -1.0]);
        let dgt = make_descriptor("dgt", &topo, &mix, &suite, &BTreeMap::new()).unwrap();
        let dfed = make_descriptor("d_fedgt", &topo, &mix, &suite, &BTreeMap::new()).unwrap();
        let x0 = DMatrix::from_column_slice(3, 1, &[0.8, -0.3, 0.4]);
        let gains = GainSchedule::constant(1.0, 0.3);
        let opts = RunOptions::new(2.0);
        let a = run(
            &dgt,
            &suite,
            &DiscretizationScheme::case_iii(0.05).unwrap(),
            &gains,
            &x0,
            &opts,
        )
        .unwrap();
        let b = run(
            &dfed,
            &suite,
            &DiscretizationScheme::case_iv(0.05, 1).unwrap(),
            &gains,
            &x0,
            &opts,
        )
        .unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.trace.write_csv(&mut ba).unwrap();
        b.trace.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn fedavg_reaches_the_average_minimizer_for_any_ratio() {
        // Equal curvatures: the round map's fixed point puts the row mean at
        // the average of the local targets, whatever the ratio.
        let suite = quad_suite(2, &[1.0, 0.2]);
        let topo = Topology::complete(2).unwrap();
        let mix = build_mixing(&topo, &WeightScheme::Metropolis).unwrap();
        let mut params = BTreeMap::new();
        params.insert("eta".to_string(), 0.2);
        let desc = make_descriptor("fedavg", &topo, &mix, &suite, &params).unwrap();
        let x0 = DMatrix::from_column_slice(2, 1, &[3.0, -2.0]);
        for q in [1usize, 2, 5] {
            let scheme = DiscretizationScheme::case_iv(1.0, q).unwrap();
            let out = run(
                &desc,
                &suite,
                &scheme,
                &GainSchedule::constant(desc.default_eta_g, desc.default_eta_l),
                &x0,
                &RunOptions::new(400.0),
            )
            .unwrap();
            let mean = ObjectiveSuite::row_mean(&out.final_state.x);
            assert_relative_eq!(mean[0], 0.6, epsilon = 1e-9);
        }
    }

    #[test]
    fn divergence_is_reported_with_partial_trace() {
        let (desc, suite) = descriptor("dgd");
        let x0 = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        // Stepsize far above 2/L blows up the quadratic flow.
        let scheme = DiscretizationScheme::case_iii(1.0).unwrap();
        let out = run(
            &desc,
            &suite,
            &scheme,
            &GainSchedule::constant(0.0, 50.0),
            &x0,
            &RunOptions::new(100.0),
        )
        .unwrap();
        assert_eq!(out.meta.status, RunStatus::Diverged);
        assert!(!out.trace.rows.is_empty());
        let last = out.trace.rows.last().unwrap();
        assert!(last.t < 100.0);
    }

    #[test]
    fn trace_round_trips_through_csv() {
        let (desc, suite) = descriptor("dgt");
        let x0 = DMatrix::from_column_slice(3, 1, &[0.8, -0.3, 0.4]);
        let out = run(
            &desc,
            &suite,
            &DiscretizationScheme::case_iii(0.1).unwrap(),
            &GainSchedule::constant(1.0, 0.5),
            &x0,
            &RunOptions::new(1.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let back = Trace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows.len(), out.trace.rows.len());
        for (a, b) in back.rows.iter().zip(&out.trace.rows) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.gap.to_bits(), b.gap.to_bits());
        }
    }

    #[test]
    fn identical_configs_give_identical_trace_bytes() {
        let (desc, suite) = descriptor("dgt");
        let x0 = DMatrix::from_column_slice(3, 1, &[0.8, -0.3, 0.4]);
        let go = || {
            let out = run(
                &desc,
                &suite,
                &DiscretizationScheme::case_iv(0.05, 3).unwrap(),
                &GainSchedule::constant(1.0, 0.4),
                &x0,
                &RunOptions::new(3.0),
            )
            .unwrap();
            let mut buf = Vec::new();
            out.trace.write_csv(&mut buf).unwrap();
            buf
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn min_gap_is_nonincreasing_and_t_increases() {
        let (desc, suite) = descriptor("dgt");
        let x0 = DMatrix::from_column_slice(3, 1, &[2.0, -1.0, 0.3]);
        let out = run(
            &desc,
            &suite,
            &DiscretizationScheme::case_iii(0.05).unwrap(),
            &GainSchedule::constant(1.0, 0.3),
            &x0,
            &RunOptions::new(5.0),
        )
        .unwrap();
        for w in out.trace.rows.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].min_gap <= w[0].min_gap + 1e-30);
        }
    }
}
