//! The two feedback controllers and their declared constants.
//!
//! A [`GlobalController`] is the communication loop: a linear operator on the
//! stacked state that vanishes on consensus and (for the plain consensus kind)
//! satisfies the descent inequality
//! `<(I-R)y, G(y)> >= contraction * ||(I-R)y||^2`.
//!
//! A [`LocalController`] is the computation loop: a per-agent map of
//! `(x_i, v_i, z_i)` and the local objective to update directions
//! `(u_x, u_v, u_z)`. Its declared constants are the channel-wise Lipschitz
//! bound `L`, the gradient-descent alignment `alpha`
//! (`<grad f_i, u_x> >= alpha * ||grad f_i||^2` from properly initialized
//! states), and the norm envelopes `C_x, C_v, C_z`
//! (`||u_*|| <= C_* * ||grad f_i||`).
//!
//! Declared constants are *promises* checked empirically by
//! [`crate::diagnostics`]; nothing here trusts them.

pub mod catalog;

pub use catalog::{
    algorithm_names, make_descriptor, AlgorithmDescriptor, CaseTag, ControllerError, Coupling,
    NativeKind, SimDynamics,
};

use crate::graph::averaging_matrix;
use crate::problem::{ObjectiveSuite, ProblemError};
use nalgebra::DMatrix;

/// Shape of the global (communication) controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcflKind {
    /// `u_x = (I-W)x` and, if the controller also steers `v`, `u_v = (I-W)v`.
    Consensus,
    /// Momentum form on `[x; m]` where `m` remembers the previous iterate:
    /// `u_x = (I-(1+c)W)x + c*m`, `u_m = -x + m`. Its declared rate is the
    /// improved modal figure, not a pointwise inner-product bound.
    Accelerated,
}

/// The global consensus feedback controller.
#[derive(Debug, Clone)]
pub struct GlobalController {
    pub kind: GcflKind,
    /// Gossip matrix (or the uniform averaging matrix for server-mediated
    /// algorithms).
    pub w: DMatrix<f64>,
    /// Momentum coefficient (accelerated kind only; 0 otherwise).
    pub momentum: f64,
    /// Declared contraction rate: `1 - lambda2` for the consensus kind, the
    /// accelerated modal rate for the momentum kind.
    pub declared_rate: f64,
    /// Whether the second stack (`v` for tracking algorithms, the momentum
    /// memory for the accelerated kind) is part of the controller's state.
    pub couples_v: bool,
}

impl GlobalController {
    /// Plain consensus controller for a gossip matrix with known `lambda2`.
    pub fn consensus(w: DMatrix<f64>, lambda2: f64, couples_v: bool) -> Self {
        GlobalController {
            kind: GcflKind::Consensus,
            w,
            momentum: 0.0,
            declared_rate: 1.0 - lambda2,
            couples_v,
        }
    }

    /// Consensus controller through a central server: `W = R`.
    pub fn centralized(n: usize, couples_v: bool) -> Self {
        GlobalController::consensus(averaging_matrix(n), 0.0, couples_v)
    }

    /// Accelerated (momentum) controller. The coefficient and rate are
    /// functions of `lambda2` alone.
    pub fn accelerated(w: DMatrix<f64>, lambda2: f64) -> Self {
        GlobalController {
            kind: GcflKind::Accelerated,
            momentum: accelerated_momentum(lambda2),
            declared_rate: accelerated_rate_from_lambda2(lambda2),
            w,
            couples_v: true,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.w.nrows()
    }

    /// Applies the controller to the stacked state. `v` is ignored (and an
    /// empty matrix returned for `u_v`) unless the controller couples it.
    pub fn apply(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        match self.kind {
            GcflKind::Consensus => {
                let ux = x - &self.w * x;
                let uv = if self.couples_v {
                    v - &self.w * v
                } else {
                    DMatrix::zeros(x.nrows(), 0)
                };
                (ux, uv)
            }
            GcflKind::Accelerated => {
                let c = self.momentum;
                let wx = &self.w * x;
                let ux = x - wx * (1.0 + c) + v * c;
                let uv = v - x;
                (ux, uv)
            }
        }
    }

    /// The explicit agent-level matrix of the operator (acting on one
    /// coordinate of every agent): `n x n` if only `x` is coupled, `2n x 2n`
    /// otherwise.
    pub fn stacked_matrix(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        let imw = DMatrix::identity(n, n) - &self.w;
        match self.kind {
            GcflKind::Consensus => {
                if !self.couples_v {
                    return imw;
                }
                let mut m = DMatrix::zeros(2 * n, 2 * n);
                m.view_mut((0, 0), (n, n)).copy_from(&imw);
                m.view_mut((n, n), (n, n)).copy_from(&imw);
                m
            }
            GcflKind::Accelerated => {
                let c = self.momentum;
                let eye = DMatrix::identity(n, n);
                let mut m = DMatrix::zeros(2 * n, 2 * n);
                m.view_mut((0, 0), (n, n))
                    .copy_from(&(&eye - &self.w * (1.0 + c)));
                m.view_mut((0, n), (n, n)).copy_from(&(&eye * c));
                m.view_mut((n, 0), (n, n)).copy_from(&(-&eye));
                m.view_mut((n, n), (n, n)).copy_from(&eye);
                m
            }
        }
    }
}

/// Momentum coefficient of the accelerated controller:
/// `(1 - sqrt(1 - l2)) / (1 + sqrt(1 - l2^2))`.
pub fn accelerated_momentum(lambda2: f64) -> f64 {
    (1.0 - (1.0 - lambda2).sqrt()) / (1.0 + (1.0 - lambda2 * lambda2).sqrt())
}

/// Modal contraction rate of the accelerated controller in terms of
/// `lambda2`: `1 - l2 / (1 + sqrt(1 - l2^2))`.
pub fn accelerated_rate_from_lambda2(lambda2: f64) -> f64 {
    1.0 - lambda2 / (1.0 + (1.0 - lambda2 * lambda2).sqrt())
}

/// The same rate expressed in terms of the plain contraction `c_g = 1 - l2`:
/// `c_g * (sqrt(c_g) + sqrt(2 - c_g)) / (sqrt(c_g) + c_g * sqrt(2 - c_g))`.
/// Algebraically identical to [`accelerated_rate_from_lambda2`]; kept because
/// it makes the `sqrt(c_g)` scaling explicit as `c_g -> 0`.
pub fn accelerated_rate_from_contraction(c_g: f64) -> f64 {
    let s = c_g.sqrt();
    let r = (2.0 - c_g).sqrt();
    c_g * (s + r) / (s + c_g * r)
}

/// Shape of the local (computation) controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LcflKind {
    /// `u_x = grad f_i(x_i)`; `v` and `z` untouched.
    Gradient,
    /// Gradient tracking: `u_x = c*v_i`, `u_v = grad f_i(z_i) - grad f_i(x_i)`,
    /// `u_z = z_i - x_i`. Under the sign convention `vdot = -u_v` this makes
    /// `v` chase the local gradient while `z` trails `x`.
    Tracking { c: f64 },
    /// Variate-corrected gradient: `u_x = grad f_i(x_i) - z_i`. The rest of
    /// the correction bookkeeping is algorithm-specific.
    VariateCorrected,
}

/// Declared analysis constants of a local controller for a given suite.
#[derive(Debug, Clone, Copy)]
pub struct LcflConstants {
    /// Channel-wise Lipschitz bound of the map.
    pub lipschitz: f64,
    /// Descent alignment of `u_x` with the local gradient.
    pub alpha: f64,
    pub c_x: f64,
    pub c_v: f64,
    pub c_z: f64,
    /// True when the constants are empirical placeholders rather than derived
    /// bounds.
    pub estimated: bool,
}

/// How `v` and `z` must be initialized for the declared constants to hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitRule {
    /// `v(0) = 0`, `z(0) = 0`.
    Zero,
    /// `v(0) = grad f_i(x_i(0))`, `z(0) = x_i(0)`.
    TrackingWarmStart,
}

/// The local computation feedback controller.
#[derive(Debug, Clone)]
pub struct LocalController {
    pub kind: LcflKind,
    pub constants: LcflConstants,
    pub init: InitRule,
}

impl LocalController {
    /// Plain gradient controller; exact constants.
    pub fn gradient(suite: &ObjectiveSuite) -> Self {
        LocalController {
            kind: LcflKind::Gradient,
            constants: LcflConstants {
                lipschitz: suite.lipschitz_bound(),
                alpha: 1.0,
                c_x: 1.0,
                c_v: 0.0,
                c_z: 0.0,
                estimated: false,
            },
            init: InitRule::Zero,
        }
    }

    /// Gradient-tracking controller with step coefficient `c`.
    pub fn tracking(suite: &ObjectiveSuite, c: f64) -> Self {
        let l_f = suite.lipschitz_bound();
        LocalController {
            kind: LcflKind::Tracking { c },
            constants: LcflConstants {
                lipschitz: l_f.max(c).max(1.0),
                alpha: c,
                c_x: c,
                c_v: 2.0,
                c_z: c,
                estimated: false,
            },
            init: InitRule::TrackingWarmStart,
        }
    }

    /// Variate-corrected controller (used by the control-variate federated
    /// family); constants are empirical.
    pub fn variate_corrected(suite: &ObjectiveSuite) -> Self {
        LocalController {
            kind: LcflKind::VariateCorrected,
            constants: LcflConstants {
                lipschitz: suite.lipschitz_bound().max(1.0),
                alpha: 1.0,
                c_x: 1.0,
                c_v: 0.0,
                c_z: 0.0,
                estimated: true,
            },
            init: InitRule::Zero,
        }
    }

    /// Applies the per-agent map. Empty `v`/`z` rows are treated as zeros.
    /// Returns `(u_x, u_v, u_z)` rows for agent `i`.
    #[allow(clippy::type_complexity)]
    pub fn apply_i(
        &self,
        suite: &ObjectiveSuite,
        i: usize,
        x_i: &nalgebra::DVector<f64>,
        v_i: &nalgebra::DVector<f64>,
        z_i: &nalgebra::DVector<f64>,
    ) -> Result<
        (
            nalgebra::DVector<f64>,
            nalgebra::DVector<f64>,
            nalgebra::DVector<f64>,
        ),
        ProblemError,
    > {
        let d = x_i.len();
        let zeros = || nalgebra::DVector::zeros(d);
        match self.kind {
            LcflKind::Gradient => {
                let g = suite.local(i).gradient(x_i)?;
                Ok((g, zeros(), zeros()))
            }
            LcflKind::Tracking { c } => {
                let gx = suite.local(i).gradient(x_i)?;
                let gz = suite.local(i).gradient(z_i)?;
                Ok((v_i * c, gz - gx, z_i - x_i))
            }
            LcflKind::VariateCorrected => {
                let g = suite.local(i).gradient(x_i)?;
                Ok((g - z_i, zeros(), zeros()))
            }
        }
    }

    /// Whether the controller reads/writes the `v` and `z` stacks.
    pub fn uses_vz(&self) -> (bool, bool) {
        match self.kind {
            LcflKind::Gradient => (false, false),
            LcflKind::Tracking { .. } => (true, true),
            LcflKind::VariateCorrected => (false, true),
        }
    }
}
