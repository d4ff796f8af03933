//! Native discrete update rules.
//!
//! Each algorithm's published iteration, executed on the interleaved base
//! grid: the communication part fires on `fire_g` steps with the lumped
//! weight `wg = eta_g * tau_g`, the computation part on `fire_l` steps with
//! `wl = eta_l * tau_l`. Updates read a consistent snapshot of the incoming
//! state; ordering within a step follows each method's published form.

use nalgebra::DMatrix;

use crate::controllers::{
    AlgorithmDescriptor, Coupling, LcflKind, NativeKind, SimDynamics,
};
use crate::problem::ObjectiveSuite;

use super::{DiscretizationScheme, SimError, StackedState};

/// Quadratic-model pieces for the edge-based primal-dual solver.
struct GpdaModel {
    /// Model Hessian `eta1^2 L + 2 eta1^2 |L| + 2 eta2^2 I`.
    h: DMatrix<f64>,
    /// Anchor part `2 eta1^2 |L| + 2 eta2^2 I`.
    b: DMatrix<f64>,
    /// Edge incidence and its transpose.
    a: DMatrix<f64>,
    at: DMatrix<f64>,
    /// Safe inner gradient step from a Gershgorin bound on `h`.
    inner_step: f64,
    k_inner: usize,
    eta1_sq: f64,
}

/// Precomputed quantities shared by every step of a discrete run.
pub(crate) struct NativeCtx<'a> {
    desc: &'a AlgorithmDescriptor,
    suite: &'a ObjectiveSuite,
    imw: DMatrix<f64>,
    /// Round length in base steps (Q for case IV, K for case V, 1 for III).
    ratio: f64,
    model: Option<GpdaModel>,
}

impl<'a> NativeCtx<'a> {
    pub(crate) fn new(
        desc: &'a AlgorithmDescriptor,
        suite: &'a ObjectiveSuite,
        scheme: &DiscretizationScheme,
    ) -> Result<Self, SimError> {
        let n = desc.gcfl.n_agents();
        let imw = DMatrix::identity(n, n) - &desc.gcfl.w;
        let model = if desc.native == Some(NativeKind::Dgpda) {
            let inc = desc.incidence.as_ref().ok_or_else(|| {
                SimError::Dimension("edge-based solver needs incidence structure".into())
            })?;
            let a = inc.matrix.clone();
            let a_abs = a.map(f64::abs);
            let eta1 = desc.param("eta1");
            let eta2 = desc.param("eta2");
            let e1s = eta1 * eta1;
            let e2s = eta2 * eta2;
            let lap = a.transpose() * &a;
            let lap_abs = a_abs.transpose() * &a_abs;
            let b = &lap_abs * (2.0 * e1s) + DMatrix::identity(n, n) * (2.0 * e2s);
            let h = &lap * e1s + &b;
            let row_bound = (0..n)
                .map(|i| h.row(i).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0f64, f64::max);
            NativeCtx::check_positive(row_bound)?;
            Some(GpdaModel {
                at: a.transpose(),
                a,
                h,
                b,
                inner_step: 1.0 / row_bound,
                k_inner: desc.param("k_inner") as usize,
                eta1_sq: e1s,
            })
        } else {
            None
        };
        Ok(NativeCtx {
            desc,
            suite,
            imw,
            ratio: scheme.ratio as f64,
            model,
        })
    }

    fn check_positive(bound: f64) -> Result<(), SimError> {
        if bound > 0.0 && bound.is_finite() {
            Ok(())
        } else {
            Err(SimError::Dimension(
                "degenerate quadratic model in edge-based solver".into(),
            ))
        }
    }

    fn grad(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, SimError> {
        Ok(self.suite.gradient_stack(x)?)
    }

    fn tracking_c(&self) -> f64 {
        match self.desc.lcfl.kind {
            LcflKind::Tracking { c } => c,
            _ => 1.0,
        }
    }
}

/// Advances `state` by one base-grid step of the algorithm's native rule.
pub(crate) fn native_step(
    kind: NativeKind,
    ctx: &NativeCtx,
    state: &mut StackedState,
    fire_g: bool,
    fire_l: bool,
    wg: f64,
    wl: f64,
) -> Result<(), SimError> {
    match kind {
        NativeKind::Dgd => {
            let mut xn = state.x.clone();
            if fire_g {
                xn -= (&ctx.imw * &state.x) * wg;
            }
            if fire_l {
                xn -= ctx.grad(&state.x)? * wl;
            }
            state.x = xn;
        }

        NativeKind::Tracking => {
            // Lumped-weight Euler step of the tracking controller field:
            //   x+ = x - wg (I-W) x - wl c v
            //   v+ = v - wg (I-W) v + wl (grad(x) - grad(z))
            //   z+ = z + wl (x - z)
            // At unit weights z becomes the one-step delay and the published
            // iteration x(k+1) = W x(k) - c v(k) is recovered.
            let c = ctx.tracking_c();
            let mut xn = state.x.clone();
            let mut vn = state.v.clone();
            if fire_g {
                xn -= (&ctx.imw * &state.x) * wg;
                vn -= (&ctx.imw * &state.v) * wg;
            }
            if fire_l {
                xn -= &state.v * (c * wl);
                vn += (ctx.grad(&state.x)? - ctx.grad(&state.z)?) * wl;
                let zn = &state.z + (&state.x - &state.z) * wl;
                state.z = zn;
            }
            state.x = xn;
            state.v = vn;
        }

        NativeKind::DAgt => {
            // Accelerated consensus on the doubled state (y, m): the y-row
            // applies (I-(1+c)W) y + c m, the memory row relaxes m toward y.
            // The local part is the sampled tracking controller. Unit weights
            // recover the published iteration with m(k+1) = y(k).
            let cm = ctx.desc.gcfl.momentum;
            let ct = ctx.tracking_c();
            let w = &ctx.desc.gcfl.w;
            let x0 = state.x.clone();
            let v0 = state.v.clone();
            let mut xn = x0.clone();
            let mut vn = v0.clone();
            if fire_g {
                let mx = state.aux_mat("v_x").clone();
                let mv = state.aux_mat("v_v").clone();
                xn -= (&x0 - (w * &x0) * (1.0 + cm) + &mx * cm) * wg;
                vn -= (&v0 - (w * &v0) * (1.0 + cm) + &mv * cm) * wg;
                state.aux.insert("v_x".to_string(), &mx + (&x0 - &mx) * wg);
                state.aux.insert("v_v".to_string(), &mv + (&v0 - &mv) * wg);
            }
            if fire_l {
                xn -= &v0 * (ct * wl);
                vn += (ctx.grad(&x0)? - ctx.grad(&state.z)?) * wl;
                let zn = &state.z + (&x0 - &state.z) * wl;
                state.z = zn;
            }
            state.x = xn;
            state.v = vn;
        }

        NativeKind::Dlm => {
            // x+ = x - wl grad(x) - wg (c (I-W) x + v)
            // v+ = v + wg c (I-W) x+   (unit gains recover the published dual)
            let c = match ctx.desc.dynamics {
                SimDynamics::DoubleFeedback {
                    coupling: Coupling::DlmDual { c },
                } => c,
                _ => 1.0,
            };
            let mut xn = state.x.clone();
            if fire_l {
                xn -= ctx.grad(&state.x)? * wl;
            }
            if fire_g {
                xn -= ((&ctx.imw * &state.x) * c + &state.v) * wg;
            }
            if fire_g {
                state.v += (&ctx.imw * &xn) * (c * wg);
            }
            state.x = xn;
        }

        NativeKind::FedProx => {
            // Round anchor refreshes to the pre-average iterate; the proximal
            // pull therefore vanishes exactly on averaging steps.
            let eta1 = ctx.desc.param("eta1");
            let eta2 = ctx.desc.param("eta2");
            if fire_g {
                state.aux.insert("anchor".to_string(), state.x.clone());
            }
            let anchor = state.aux_mat("anchor").clone();
            let mut xn = if fire_g {
                &ctx.desc.gcfl.w * &state.x
            } else {
                state.x.clone()
            };
            if fire_l {
                xn -= ctx.grad(&state.x)? * wl;
                let prox_w = wl * eta2 / eta1;
                xn -= (&state.x - &anchor) * prox_w;
            }
            state.x = xn;
        }

        NativeKind::FedPd => {
            // Dual ascent on the held consensus gap once per round; the
            // primal row keeps the pre-ascent dual.
            let eta2 = ctx.desc.param("eta2");
            let r = &ctx.desc.gcfl.w;
            let x0 = state.x.clone();
            let v0 = state.v.clone();
            if fire_g {
                let gap = &x0 - r * &x0;
                state.v += &gap * (1.0 / eta2);
                state.aux.insert("w".to_string(), r * &x0);
                state.aux.insert("held_gap".to_string(), gap);
            }
            if fire_l {
                let held_gap = state.aux_mat("held_gap").clone();
                let gn = ctx.grad(&x0)?;
                state.x = &x0 - (gn + &v0 + held_gap * eta2) * wl;
            }
        }

        NativeKind::FedAvg => {
            // Broadcast the average, then step from the received model.
            let base = if fire_g {
                &ctx.desc.gcfl.w * &state.x
            } else {
                state.x.clone()
            };
            let mut xn = base.clone();
            if fire_l {
                xn -= ctx.grad(&base)? * wl;
            }
            state.x = xn;
        }

        NativeKind::Scaffold => {
            // Client steps use the server variate sampled at the round start
            // (its pre-update value); the variate and the server anchor
            // refresh once per round.
            let eta2 = ctx.desc.param("eta2");
            let q = ctx.ratio;
            let eff = wl;
            let r = &ctx.desc.gcfl.w;
            let x0 = state.x.clone();
            let v0 = state.v.clone();
            let z0 = state.z.clone();
            let mut w_old = None;
            if fire_g {
                state.aux.insert("v_held".to_string(), v0.clone());
                let w_prev = state.aux_mat("w").clone();
                let inner = &v0 + (&w_prev - &x0) * (1.0 / (q * eff));
                state.v = &v0 - r * inner;
                state.aux.insert("w".to_string(), r * &x0);
                w_old = Some(w_prev);
            }
            let v_used = state.aux_mat("v_held").clone();
            let mut xn = x0.clone();
            if fire_l {
                let gn = ctx.grad(&x0)?;
                xn -= (gn - &z0 + &v_used) * eff;
            }
            if let Some(w_prev) = w_old {
                xn -= (&x0 - w_prev) * eta2;
            }
            if fire_l {
                state.z = &z0 - &v0 * (1.0 / q) - (&xn - &x0) * (1.0 / (q * eff));
            }
            state.x = xn;
        }

        NativeKind::XFilter => {
            // Filtered consensus every communication step with a held
            // innovation; the gradient filter refreshes on the slow grid.
            let e1 = ctx.desc.param("eta1");
            let e2 = ctx.desc.param("eta2");
            let e3 = ctx.desc.param("eta3");
            let w = &ctx.desc.gcfl.w;
            let x0 = state.x.clone();
            if fire_l {
                let w1_old = state.aux_mat("w1").clone();
                let w2_old = state.aux_mat("w2").clone();
                state.aux.insert("v_held".to_string(), state.v.clone());
                state.v += (&w1_old - &w2_old) - (&x0 - w * &x0);
                let gn = ctx.grad(&x0)?;
                state.aux.insert("w1".to_string(), &x0 - gn * e3);
                state.aux.insert("w2".to_string(), w1_old);
            }
            if fire_g {
                let v_used = state.aux_mat("v_held").clone();
                let x_prev = state.aux_mat("x_prev").clone();
                let spread = &x0 * 2.0 - w * &x0;
                let xn = &x0 - spread * (e1 * e2) - (&x0 - x_prev) * (1.0 - e1)
                    + v_used * (e1 * e2);
                state.aux.insert("x_prev".to_string(), x0);
                state.x = xn;
            }
        }

        NativeKind::Dgpda => {
            // Primal: a few gradient steps on the strongly convex model;
            // dual: edge ascent on the latest primal iterate.
            let model = ctx.model.as_ref().expect("edge model prepared");
            if fire_l {
                let g0 = ctx.grad(&state.x)?;
                let mu = state.aux_mat("dual");
                let cst = &model.b * &state.x - g0 - &model.at * mu;
                let mut y = state.x.clone();
                for _ in 0..model.k_inner {
                    y -= (&model.h * &y - &cst) * model.inner_step;
                }
                state.x = y;
            }
            if fire_g {
                let ax = &model.a * &state.x;
                let mu = state.aux.get_mut("dual").expect("dual state");
                *mu += ax * model.eta1_sq;
            }
        }
    }
    Ok(())
}
