//! Hybrid continuous/sampled integration.
//!
//! A classical 4th-order step advances the continuous loops; sampled loops
//! contribute their zero-order-held output, refreshed exactly on the
//! sampling grid. Integration segments never straddle a sampling instant or
//! a gain change, so holds and gains are constants inside every segment.

use nalgebra::DMatrix;

use crate::controllers::{AlgorithmDescriptor, CaseTag, GcflKind, SimDynamics};
use crate::problem::ObjectiveSuite;

use super::{
    eval_global, eval_local, DiscretizationScheme, GainSchedule, HeldGlobal, HeldLocal,
    Recorder, RunOptions, RunStatus, SimError, StackedState, StepVerdict,
};

/// Differential state bundle: iterates, auxiliary stacks, and the momentum
/// memories of the accelerated communication dynamics.
#[derive(Debug, Clone)]
struct Ode {
    x: DMatrix<f64>,
    v: DMatrix<f64>,
    z: DMatrix<f64>,
    mx: DMatrix<f64>,
    mv: DMatrix<f64>,
}

impl Ode {
    fn add_scaled(&self, a: f64, d: &Ode) -> Ode {
        Ode {
            x: &self.x + &d.x * a,
            v: &self.v + &d.v * a,
            z: &self.z + &d.z * a,
            mx: &self.mx + &d.mx * a,
            mv: &self.mv + &d.mv * a,
        }
    }

    fn rk4_combine(&self, h: f64, k1: &Ode, k2: &Ode, k3: &Ode, k4: &Ode) -> Ode {
        let w = h / 6.0;
        Ode {
            x: &self.x + (&k1.x + &k2.x * 2.0 + &k3.x * 2.0 + &k4.x) * w,
            v: &self.v + (&k1.v + &k2.v * 2.0 + &k3.v * 2.0 + &k4.v) * w,
            z: &self.z + (&k1.z + &k2.z * 2.0 + &k3.z * 2.0 + &k4.z) * w,
            mx: &self.mx + (&k1.mx + &k2.mx * 2.0 + &k3.mx * 2.0 + &k4.mx) * w,
            mv: &self.mv + (&k1.mv + &k2.mv * 2.0 + &k3.mv * 2.0 + &k4.mv) * w,
        }
    }
}

/// Frozen per-segment inputs: hold flags, gains, and held outputs.
struct SegCtx<'a> {
    desc: &'a AlgorithmDescriptor,
    suite: &'a ObjectiveSuite,
    hold_g: bool,
    hold_l: bool,
    eta_g: f64,
    eta_l: f64,
    held_eta_g: f64,
    held_eta_l: f64,
    held_g: HeldGlobal,
    held_l: HeldLocal,
    /// Impulse dynamics: no flow-through communication term at all.
    local_only: bool,
}

fn rhs(ctx: &SegCtx, s: &Ode) -> Result<Ode, SimError> {
    let n = s.x.nrows();
    let has_v = ctx.desc.has_v;
    let has_z = ctx.desc.has_z;
    let accel = ctx.desc.gcfl.kind == GcflKind::Accelerated;
    let empty = || DMatrix::zeros(n, 0);

    let (g, eg) = if ctx.local_only {
        (None, 0.0)
    } else if ctx.hold_g {
        (Some(ctx.held_g.clone()), ctx.held_eta_g)
    } else {
        (
            Some(eval_global(ctx.desc, &s.x, &s.v, &s.mx, &s.mv)),
            ctx.eta_g,
        )
    };
    let (l, el) = if ctx.hold_l {
        (ctx.held_l.clone(), ctx.held_eta_l)
    } else {
        (eval_local(ctx.desc, ctx.suite, &s.x, &s.v, &s.z)?, ctx.eta_l)
    };

    let mut dx = &l.ux * (-el);
    if let Some(hg) = &g {
        dx -= &hg.ux * eg;
    }
    let dv = if has_v {
        let mut dv = &l.uv * (-el);
        if let Some(hg) = &g {
            dv -= &hg.uv * eg;
        }
        dv
    } else {
        empty()
    };
    let dz = if has_z { &l.uz * (-el) } else { empty() };
    let (dmx, dmv) = if accel {
        match &g {
            Some(hg) => (&hg.umx * (-eg), &hg.umv * (-eg)),
            None => (empty(), empty()),
        }
    } else {
        (empty(), empty())
    };
    Ok(Ode {
        x: dx,
        v: dv,
        z: dz,
        mx: dmx,
        mv: dmv,
    })
}

fn rk4_step(ctx: &SegCtx, s: &Ode, h: f64) -> Result<Ode, SimError> {
    let k1 = rhs(ctx, s)?;
    let k2 = rhs(ctx, &s.add_scaled(h / 2.0, &k1))?;
    let k3 = rhs(ctx, &s.add_scaled(h / 2.0, &k2))?;
    let k4 = rhs(ctx, &s.add_scaled(h, &k3))?;
    Ok(s.rk4_combine(h, &k1, &k2, &k3, &k4))
}

fn ode_from_state(desc: &AlgorithmDescriptor, state: &StackedState) -> Ode {
    let n = state.x.nrows();
    let (mx, mv) = if desc.gcfl.kind == GcflKind::Accelerated {
        (
            state
                .aux
                .get("v_x")
                .cloned()
                .unwrap_or_else(|| state.x.clone()),
            state
                .aux
                .get("v_v")
                .cloned()
                .unwrap_or_else(|| state.v.clone()),
        )
    } else {
        (DMatrix::zeros(n, 0), DMatrix::zeros(n, 0))
    };
    Ode {
        x: state.x.clone(),
        v: state.v.clone(),
        z: state.z.clone(),
        mx,
        mv,
    }
}

fn write_back(desc: &AlgorithmDescriptor, state: &mut StackedState, s: Ode, t: f64, k: u64) {
    if desc.gcfl.kind == GcflKind::Accelerated {
        state.aux.insert("v_x".to_string(), s.mx.clone());
        state.aux.insert("v_v".to_string(), s.mv.clone());
    }
    state.x = s.x;
    state.v = s.v;
    state.z = s.z;
    state.t = t;
    state.k = k;
}

fn reject_unsupported(
    desc: &AlgorithmDescriptor,
    scheme: &DiscretizationScheme,
) -> Result<(), SimError> {
    match desc.dynamics {
        SimDynamics::NativeOnly => Err(SimError::UnsupportedScheme {
            algorithm: desc.name.clone(),
            case: scheme.case,
            reason: "defined only through its native discrete updates".into(),
        }),
        SimDynamics::ImpulseAveraging if scheme.case != CaseTag::I => {
            Err(SimError::UnsupportedScheme {
                algorithm: desc.name.clone(),
                case: scheme.case,
                reason: "averaging impulses need sampled communication instants (case I)".into(),
            })
        }
        _ => Ok(()),
    }
}

/// Integrates continuous and hybrid schemes (continuous, case I, case II).
pub(crate) fn run_hybrid(
    desc: &AlgorithmDescriptor,
    suite: &ObjectiveSuite,
    scheme: &DiscretizationScheme,
    gains: &GainSchedule,
    state: &mut StackedState,
    opts: &RunOptions,
    rec: &mut Recorder,
) -> Result<RunStatus, SimError> {
    reject_unsupported(desc, scheme)?;
    let horizon = opts.horizon_t;
    let impulse = matches!(desc.dynamics, SimDynamics::ImpulseAveraging);
    let sample_tau = match scheme.case {
        CaseTag::I => Some(scheme.tau_g),
        CaseTag::II => Some(scheme.tau_l),
        _ => None,
    };

    if let StepVerdict::Stop(s) = rec.observe(0.0, 0, &state.x, &state.v, &state.z, true)? {
        return Ok(s);
    }

    let mut s = ode_from_state(desc, state);
    let mut held_eta_g = gains.eta_g(0.0);
    let mut held_eta_l = gains.eta_l(0.0);
    let change_pts = gains.change_points();
    let mut seg_start = 0.0f64;
    let mut seg_index: u64 = 0;
    let mut steps: u64 = 0;
    let eps = 1e-12 * horizon.max(1.0);

    loop {
        if let Some(tau) = sample_tau {
            // Segment start lies exactly on the sampling grid: apply
            // impulses, then refresh the held loop from the current state.
            if impulse {
                s.x = &desc.gcfl.w * &s.x;
            }
            match scheme.case {
                CaseTag::I => {
                    state.held_g = eval_global(desc, &s.x, &s.v, &s.mx, &s.mv);
                    held_eta_g = gains.eta_g(seg_start);
                    state.last_sample_g = seg_start;
                }
                CaseTag::II => {
                    state.held_l = eval_local(desc, suite, &s.x, &s.v, &s.z)?;
                    held_eta_l = gains.eta_l(seg_start);
                    state.last_sample_l = seg_start;
                }
                _ => unreachable!("sampled hybrid case"),
            }
            let _ = tau;
        }
        let seg_end = match sample_tau {
            Some(tau) => ((seg_index + 1) as f64 * tau).min(horizon),
            None => change_pts
                .iter()
                .copied()
                .find(|&p| p > seg_start + eps && p < horizon - eps)
                .unwrap_or(horizon),
        };

        let ctx = SegCtx {
            desc,
            suite,
            hold_g: scheme.case == CaseTag::I,
            hold_l: scheme.case == CaseTag::II,
            eta_g: gains.eta_g(seg_start),
            eta_l: gains.eta_l(seg_start),
            held_eta_g,
            held_eta_l,
            held_g: state.held_g.clone(),
            held_l: state.held_l.clone(),
            local_only: impulse,
        };

        let len = seg_end - seg_start;
        let nsub = (len / scheme.micro_step).ceil().max(1.0) as u64;
        let h = len / nsub as f64;
        let last_segment = seg_end >= horizon - eps;
        for j in 0..nsub {
            s = rk4_step(&ctx, &s, h)?;
            steps += 1;
            let t_now = if j + 1 == nsub {
                seg_end
            } else {
                seg_start + (j + 1) as f64 * h
            };
            let force = last_segment && j + 1 == nsub;
            match rec.observe(t_now, steps, &s.x, &s.v, &s.z, force)? {
                StepVerdict::Stop(st) => {
                    write_back(desc, state, s, t_now, steps);
                    return Ok(st);
                }
                StepVerdict::Continue => {}
            }
        }
        seg_start = seg_end;
        seg_index += 1;
        if last_segment {
            break;
        }
    }
    write_back(desc, state, s, horizon, steps);
    Ok(RunStatus::Horizon)
}

/// Advances the state by one micro-integration step (at most
/// `scheme.micro_step`, never across a sampling instant), refreshing held
/// loops that are due at the current time.
///
/// This is the single-step face of the same integrator [`super::run`] uses;
/// it applies to the continuous and hybrid schemes only.
pub fn micro_step(
    desc: &AlgorithmDescriptor,
    suite: &ObjectiveSuite,
    scheme: &DiscretizationScheme,
    gains: &GainSchedule,
    state: &mut StackedState,
) -> Result<(), SimError> {
    scheme.validate()?;
    if !matches!(
        scheme.case,
        CaseTag::Continuous | CaseTag::I | CaseTag::II
    ) {
        return Err(SimError::InvalidScheme(
            "micro stepping applies to continuous and hybrid schemes; discrete cases advance \
             through their native update rule"
                .into(),
        ));
    }
    reject_unsupported(desc, scheme)?;
    let impulse = matches!(desc.dynamics, SimDynamics::ImpulseAveraging);
    let t = state.t;
    let sample_tau = match scheme.case {
        CaseTag::I => Some(scheme.tau_g),
        CaseTag::II => Some(scheme.tau_l),
        _ => None,
    };

    let mut s = ode_from_state(desc, state);
    if let Some(tau) = sample_tau {
        let ratio = t / tau;
        let on_grid = (ratio - ratio.round()).abs() <= 1e-9 * ratio.abs().max(1.0);
        if on_grid {
            let t_grid = ratio.round() * tau;
            let due = t_grid > state.last_sample_g.max(state.last_sample_l) + 1e-12 * tau
                || t_grid <= 1e-12 * tau;
            if due || t_grid == 0.0 {
                if impulse {
                    s.x = &desc.gcfl.w * &s.x;
                }
                match scheme.case {
                    CaseTag::I => {
                        state.held_g = eval_global(desc, &s.x, &s.v, &s.mx, &s.mv);
                        state.last_sample_g = t_grid;
                    }
                    CaseTag::II => {
                        state.held_l = eval_local(desc, suite, &s.x, &s.v, &s.z)?;
                        state.last_sample_l = t_grid;
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    let next_boundary = sample_tau.map(|tau| {
        let k = (t / tau + 1e-9).floor() as u64 + 1;
        k as f64 * tau
    });
    let mut h = scheme.micro_step;
    if let Some(b) = next_boundary {
        h = h.min(b - t);
    }

    let ctx = SegCtx {
        desc,
        suite,
        hold_g: scheme.case == CaseTag::I,
        hold_l: scheme.case == CaseTag::II,
        eta_g: gains.eta_g(t),
        eta_l: gains.eta_l(t),
        held_eta_g: gains.eta_g(state.last_sample_g),
        held_eta_l: gains.eta_l(state.last_sample_l),
        held_g: state.held_g.clone(),
        held_l: state.held_l.clone(),
        local_only: impulse,
    };
    s = rk4_step(&ctx, &s, h)?;
    let mut t_new = t + h;
    if let Some(b) = next_boundary {
        if (t_new - b).abs() <= 1e-12 * b.max(1.0) {
            t_new = b;
        }
    }
    let k = state.k + 1;
    write_back(desc, state, s, t_new, k);
    Ok(())
}
