//! Sampling-period budgets that keep the convergence certificate positive.
//!
//! A continuous-time run certified by the energy-descent property loses
//! `gamma1 * ||grad f(mean)||^2 + gamma2 * ||(I-R)y||^2` per unit time.
//! Sampling the loops replaces `(gamma1, gamma2)` by effective rates
//! `(gamma_hat1, gamma_hat2)` that shrink with the hold intervals; the
//! calculators here evaluate the closed-form error constants for each
//! discretization case, return the largest admissible intervals, and pick an
//! operating point where both effective rates stay strictly positive.
//!
//! Conventions shared by every calculator:
//!
//! * gains are treated as constants (their representative values at the start
//!   of the run), matching how the hold intervals freeze them;
//! * `max_tau_*` is the closed-form boundary where the certified margin
//!   vanishes; the reported constants and effective rates are evaluated at an
//!   *operating* interval of half the tightest boundary, halved further (with
//!   a warning) whenever that is what it takes to keep the margins strictly
//!   positive;
//! * every formula quirk (mismatched channel aggregates, a dimensionally
//!   inconsistent factor) is resolved toward the self-consistent reading and
//!   logged in the budget's `warnings`.
//!
//! There is no dedicated two-sided calculator for computation-dominant
//! sampling (`tau_l > tau_g`); [`case5_heuristic`] reuses the
//! computation-side bound and flags itself as heuristic.

use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error("infeasible: {constant} requires {requirement}")]
    Infeasible {
        constant: String,
        requirement: String,
    },
}

/// Where a pair of continuous-time descent rates came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Generic gain rule `eta_g = 1`, small `eta_l`: rates
    /// `(eta_l / 4, C_g / 4)`.
    Corollary1,
    /// Gradient-tracking case study: rates `(C_g^2 / 128 L_f, C_g / 4)`.
    DgtCaseStudy,
    User,
}

/// Certified energy-descent coefficients of a continuous-time run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContinuousRates {
    /// Weight of the average-gradient square in the descent certificate.
    pub gamma1: f64,
    /// Weight of the disagreement square.
    pub gamma2: f64,
    pub source: RateSource,
}

impl ContinuousRates {
    /// Rates under the generic small-local-gain rule (`eta_g = 1`).
    pub fn corollary1(c_g: f64, eta_l: f64) -> Self {
        ContinuousRates {
            gamma1: eta_l / 4.0,
            gamma2: c_g / 4.0,
            source: RateSource::Corollary1,
        }
    }

    /// Rates certified for the gradient-tracking case study.
    pub fn dgt_case_study(c_g: f64, l_f: f64) -> Self {
        ContinuousRates {
            gamma1: c_g * c_g / (128.0 * l_f),
            gamma2: c_g / 4.0,
            source: RateSource::DgtCaseStudy,
        }
    }

    pub fn user(gamma1: f64, gamma2: f64) -> Self {
        ContinuousRates {
            gamma1,
            gamma2,
            source: RateSource::User,
        }
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return Err(BoundsError::Invalid(format!(
                "gamma1 must be positive, got {}",
                self.gamma1
            )));
        }
        if !(self.gamma2 > 0.0 && self.gamma2.is_finite()) {
            return Err(BoundsError::Invalid(format!(
                "gamma2 must be positive, got {}",
                self.gamma2
            )));
        }
        Ok(())
    }
}

/// Admissible sampling intervals with the error constants and effective
/// descent rates at the chosen operating point.
#[derive(Debug, Clone)]
pub struct DiscretizationBudget {
    /// Which calculator produced this budget (`"I"`, `"II"`, `"III-IV"`, or
    /// `"V (heuristic)"`).
    pub case: String,
    /// Closed-form boundary for the communication interval (0 when the case
    /// keeps communication continuous).
    pub max_tau_g: f64,
    /// Closed-form boundary for the computation interval (0 when the case
    /// keeps computation continuous).
    pub max_tau_l: f64,
    pub recommended_q: usize,
    /// Named error constants evaluated at the operating intervals.
    pub constants: BTreeMap<String, f64>,
    /// Effective rates at the operating intervals; both strictly positive.
    pub gamma_hat1: f64,
    pub gamma_hat2: f64,
    pub warnings: Vec<String>,
}

impl DiscretizationBudget {
    /// Predicted slowdown of the sampled run relative to the continuous one:
    /// `max{gamma1/gamma_hat1, gamma2/gamma_hat2}`. At least 1, and exactly 2
    /// in the zero-interval limit where the effective rates are halved.
    pub fn slowdown(&self, rates: &ContinuousRates) -> f64 {
        (rates.gamma1 / self.gamma_hat1).max(rates.gamma2 / self.gamma_hat2)
    }
}

impl Serialize for DiscretizationBudget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DiscretizationBudget", 7)?;
        st.serialize_field("case", &self.case)?;
        st.serialize_field("max_tau_g", &self.max_tau_g)?;
        st.serialize_field("max_tau_l", &self.max_tau_l)?;
        st.serialize_field("Q", &self.recommended_q)?;
        st.serialize_field("constants", &self.constants)?;
        st.serialize_field("gamma_hat", &[self.gamma_hat1, self.gamma_hat2])?;
        st.serialize_field("warnings", &self.warnings)?;
        st.end()
    }
}

fn require_positive(pairs: &[(&str, f64)]) -> Result<(), BoundsError> {
    for (name, v) in pairs {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(BoundsError::Invalid(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

/// Inputs of the communication-sampling calculator.
#[derive(Debug, Clone, Copy)]
pub struct Case1Inputs {
    pub c_x: f64,
    pub c_v: f64,
    pub l_f: f64,
    pub n: usize,
    pub eta_l: f64,
    /// Unused by the case-I formulas; kept so every calculator takes the same
    /// gain pair.
    pub eta_g: f64,
}

/// Held-communication amplification at interval `tau_g`: the overshoot factor
/// `q_max` and the descent-rate penalty `C_11 = q_max^2 / (2 gamma2)`.
pub fn case1_error_constant(
    rates: &ContinuousRates,
    k: &Case1Inputs,
    tau_g: f64,
) -> (f64, f64) {
    let envelope = (k.c_x * k.c_x + k.c_v * k.c_v).sqrt();
    let growth = std::f64::consts::SQRT_2
        * tau_g
        * envelope
        * k.eta_l
        * (1.0 + k.l_f / k.n as f64).powi(2);
    let q_max = growth.exp() - 1.0;
    (q_max, q_max * q_max / (2.0 * rates.gamma2))
}

/// Budget for sampling communication only (computation stays continuous).
///
/// Positivity of both effective rates caps the overshoot at
/// `min{gamma2, sqrt(2 gamma1 gamma2)}`; inverting the exponential gives the
/// interval boundary. The closed-form boundary aggregates the channel
/// envelopes as `sqrt(C_x + C_v)` while the amplification factor uses
/// `sqrt(C_x^2 + C_v^2)`; both readings are reported.
pub fn case1_budget(
    rates: &ContinuousRates,
    k: &Case1Inputs,
) -> Result<DiscretizationBudget, BoundsError> {
    rates.validate()?;
    require_positive(&[
        ("C_x", k.c_x),
        ("C_v", k.c_v),
        ("L_f", k.l_f),
        ("N", k.n as f64),
        ("eta_l", k.eta_l),
        ("eta_g", k.eta_g),
    ])?;
    let cap = rates.gamma2.min((2.0 * rates.gamma1 * rates.gamma2).sqrt());
    let shape = k.eta_l * (k.l_f / k.n as f64 + 1.0).powi(2) * std::f64::consts::SQRT_2;
    let closed_form = (cap + 1.0).ln() / ((k.c_x + k.c_v).sqrt() * shape);
    let margin_bound =
        (cap + 1.0).ln() / ((k.c_x * k.c_x + k.c_v * k.c_v).sqrt() * shape);
    let tau_op = 0.5 * closed_form.min(margin_bound);
    let (q_max, c11) = case1_error_constant(rates, k, tau_op);
    let gamma_hat1 = rates.gamma1 - c11;
    let gamma_hat2 = rates.gamma2 / 2.0 - c11;
    if gamma_hat1 <= 0.0 || gamma_hat2 <= 0.0 {
        return Err(BoundsError::Inconsistent(format!(
            "effective rates ({gamma_hat1:.3e}, {gamma_hat2:.3e}) not positive at the \
             operating interval {tau_op:.3e}"
        )));
    }
    let mut constants = BTreeMap::new();
    constants.insert("q_max".to_string(), q_max);
    constants.insert("C_11".to_string(), c11);
    constants.insert("tau_g_closed_form".to_string(), closed_form);
    constants.insert("tau_g_margin".to_string(), margin_bound);
    constants.insert("tau_g_operating".to_string(), tau_op);
    let mut warnings = Vec::new();
    if (closed_form - margin_bound).abs() > 1e-12 * closed_form.max(margin_bound) {
        warnings.push(format!(
            "the closed-form interval bound aggregates the channel envelopes as \
             sqrt(C_x + C_v) ({closed_form:.6e}) while the amplification factor uses \
             sqrt(C_x^2 + C_v^2) ({margin_bound:.6e}); constants and effective rates \
             are evaluated at half the tighter one"
        ));
    }
    Ok(DiscretizationBudget {
        case: "I".to_string(),
        max_tau_g: closed_form,
        max_tau_l: 0.0,
        recommended_q: 1,
        constants,
        gamma_hat1,
        gamma_hat2,
        warnings,
    })
}

/// Inputs of the computation-sampling calculator.
#[derive(Debug, Clone, Copy)]
pub struct Case2Inputs {
    /// Squared envelope sum `C_x^2 + C_v^2 + C_z^2`.
    pub c_f: f64,
    pub c_g: f64,
    pub l: f64,
    pub n: usize,
    pub eta_l: f64,
    pub eta_g: f64,
}

/// Held-computation error constants at interval `tau_l`:
/// `(C_y, C_ell, C_21, C_22)`.
pub fn case2_error_constants(
    rates: &ContinuousRates,
    k: &Case2Inputs,
    tau_l: f64,
) -> Result<(f64, f64, f64, f64), BoundsError> {
    let c_y = (-k.c_g * tau_l * k.eta_g).exp();
    let c_ell = tau_l * k.eta_l / (2.0 * k.c_g * k.eta_g).min(1.0);
    let denom = 1.0 - 2.0 * k.l * k.l * c_ell * c_ell;
    if denom <= 0.0 {
        return Err(BoundsError::Infeasible {
            constant: "1 - 2 L^2 C_ell^2".to_string(),
            requirement: format!("positivity; got {denom:.3e} at tau_l = {tau_l:.3e}"),
        });
    }
    let m = (k.n as f64 * rates.gamma1).min(rates.gamma2);
    let l2e2 = k.l * k.l * k.eta_l * k.eta_l;
    let c21 = 4.0 * l2e2 * k.c_f * c_ell * c_ell / (2.0 * denom * m);
    let c22 = l2e2 * ((1.0 - c_y) / (c_y * c_y) + 4.0 * k.l * k.l * k.c_f * c_ell * c_ell)
        / (2.0 * denom * m);
    Ok((c_y, c_ell, c21, c22))
}

/// Budget for sampling computation only (communication stays continuous).
pub fn case2_budget(
    rates: &ContinuousRates,
    k: &Case2Inputs,
) -> Result<DiscretizationBudget, BoundsError> {
    rates.validate()?;
    require_positive(&[
        ("C_f", k.c_f),
        ("C_g", k.c_g),
        ("L", k.l),
        ("N", k.n as f64),
        ("eta_l", k.eta_l),
        ("eta_g", k.eta_g),
    ])?;
    let n = k.n as f64;
    let g1t = (n * rates.gamma1 * rates.gamma1).min(rates.gamma1 * rates.gamma2);
    let g2t = (rates.gamma2 * rates.gamma2).min(n * rates.gamma1 * rates.gamma2);
    let branch1 =
        g1t.sqrt() / ((2.0 * (g1t + 4.0 * k.c_f)).sqrt() * k.l * k.eta_l * k.eta_l);
    let branch2 =
        ((g2t.sqrt() + 2.0 * k.l * k.eta_l) / (2.0 * k.l * k.eta_l)).ln() / (k.c_g * k.eta_g);
    let max_tau_l = branch1.min(branch2);
    // The boundary must itself sit inside the feasible region of the mixing
    // constant.
    case2_error_constants(rates, k, max_tau_l)?;
    let mut tau_op = 0.5 * max_tau_l;
    let mut warnings = Vec::new();
    for attempt in 0..48 {
        let (c_y, c_ell, c21, c22) = case2_error_constants(rates, k, tau_op)?;
        let gamma_hat1 = rates.gamma1 / 2.0 - c21;
        let gamma_hat2 = rates.gamma2 / 2.0 - c22;
        if gamma_hat1 > 0.0 && gamma_hat2 > 0.0 {
            if attempt > 0 {
                warnings.push(format!(
                    "operating interval halved {attempt} extra time(s) below the \
                     closed-form bound to keep the effective rates positive"
                ));
            }
            let mut constants = BTreeMap::new();
            constants.insert("C_f".to_string(), k.c_f);
            constants.insert("C_y".to_string(), c_y);
            constants.insert("C_ell".to_string(), c_ell);
            constants.insert("C_21".to_string(), c21);
            constants.insert("C_22".to_string(), c22);
            constants.insert("tau_l_operating".to_string(), tau_op);
            return Ok(DiscretizationBudget {
                case: "II".to_string(),
                max_tau_g: 0.0,
                max_tau_l,
                recommended_q: 1,
                constants,
                gamma_hat1,
                gamma_hat2,
                warnings,
            });
        }
        tau_op *= 0.5;
    }
    Err(BoundsError::Inconsistent(
        "effective rates stayed non-positive after 48 interval halvings".to_string(),
    ))
}

/// Inputs of the two-sided calculator.
#[derive(Debug, Clone, Copy)]
pub struct Case34Inputs {
    pub l: f64,
    pub l_f: f64,
    pub c_x: f64,
    pub c_v: f64,
    pub c_g: f64,
    pub n: usize,
    pub eta_l: f64,
    pub eta_g: f64,
}

/// The two-sided error constants `C_43 .. C_47, C_41, C_42` at intervals
/// `(tau_g, tau_l)` with communication-to-computation ratio `q`.
#[derive(Debug, Clone, Copy)]
pub struct Case34Constants {
    pub c43: f64,
    pub c44: f64,
    pub c45: f64,
    pub c46: f64,
    pub c47: f64,
    pub c41: f64,
    pub c42: f64,
}

/// Evaluates the two-sided constants. The second factor of `C_44` is the
/// local gain squared; the alternative literal reading (the interval factor
/// repeated) is dimensionally inconsistent and is not used.
pub fn case34_error_constants(
    rates: &ContinuousRates,
    k: &Case34Inputs,
    tau_g: f64,
    tau_l: f64,
    q: usize,
) -> Result<Case34Constants, BoundsError> {
    let denom_g = 1.0 - 4.0 * tau_g * tau_g * k.eta_g * k.eta_g;
    if denom_g <= 0.0 {
        return Err(BoundsError::Infeasible {
            constant: "1 - 4 tau_g^2 eta_g^2".to_string(),
            requirement: format!("positivity; got {denom_g:.3e} at tau_g = {tau_g:.3e}"),
        });
    }
    let denom_l = 1.0 - 4.0 * k.l * k.l * tau_l * tau_l * k.eta_l * k.eta_l;
    if denom_l <= 0.0 {
        return Err(BoundsError::Infeasible {
            constant: "1 - 4 L^2 tau_l^2 eta_l^2".to_string(),
            requirement: format!("positivity; got {denom_l:.3e} at tau_l = {tau_l:.3e}"),
        });
    }
    let c43 = 4.0 * tau_g * tau_g * k.eta_g * k.eta_g / denom_g;
    let c44 = 2.0 * tau_l * tau_l * k.eta_l * k.eta_l / denom_g;
    let c45 = 4.0 * tau_l * tau_l * k.eta_g * k.eta_g / denom_l;
    let c46 = 8.0 * k.l * k.l * k.c_f() * tau_l * tau_l * k.eta_l * k.eta_l / denom_l;
    let c47 = (q * q) as f64 * c44 * c44 * (k.c_x * k.c_x + k.c_v * k.c_v);
    let m = (k.n as f64 * rates.gamma1).min(rates.gamma2);
    let l2e2 = k.l * k.l * k.eta_l * k.eta_l;
    let lf2 = k.l_f * k.l_f;
    let cge2 = k.c_g * k.eta_g * k.eta_g;
    let c41 = l2e2 * (c45 * (1.0 + lf2 * c47 + c45) + c46 * lf2) / (2.0 * m)
        + cge2 * (c43 + lf2 * c47) / (2.0 * rates.gamma2);
    let c42 =
        l2e2 * (c46 + c45 * c47) / (2.0 * m) + cge2 * c47 / (2.0 * rates.gamma2);
    Ok(Case34Constants {
        c43,
        c44,
        c45,
        c46,
        c47,
        c41,
        c42,
    })
}

impl Case34Inputs {
    /// Squared envelope sum with no `z` channel contribution beyond `C_x`
    /// (the two-sided lemma only aggregates the stacked `y` channels).
    fn c_f(&self) -> f64 {
        self.c_x * self.c_x + self.c_v * self.c_v
    }
}

/// Budget for sampling both loops with `tau_g = Q * tau_l`.
///
/// The stepsize scale `c` obeys
/// `c^2 < min{1/4, gamma-tilde^2} * min{1/(L^2 eta_l^2 (1 + L_f^2)), 1/(C_g eta_g^2)}`
/// and sets `tau_l = c / (2 L eta_l)`, `tau_g = c / (2 eta_g)`. The ratio
/// recommendation is `Q = round(2 L eta_l / eta_g)`; a caller-supplied
/// `q_target` is honored by shrinking `tau_l`. If the effective rates are not
/// positive at the operating intervals, `c` is halved until they are.
pub fn case34_budget(
    rates: &ContinuousRates,
    k: &Case34Inputs,
    q_target: Option<usize>,
) -> Result<DiscretizationBudget, BoundsError> {
    rates.validate()?;
    require_positive(&[
        ("L", k.l),
        ("L_f", k.l_f),
        ("C_x", k.c_x),
        ("C_v", k.c_v),
        ("C_g", k.c_g),
        ("N", k.n as f64),
        ("eta_l", k.eta_l),
        ("eta_g", k.eta_g),
    ])?;
    if q_target == Some(0) {
        return Err(BoundsError::Invalid("Q must be >= 1".to_string()));
    }
    let n = k.n as f64;
    let g1t = (n * rates.gamma1 * rates.gamma1).min(rates.gamma1 * rates.gamma2);
    let g2t = (rates.gamma2 * rates.gamma2).min(n * rates.gamma1 * rates.gamma2);
    let c_sq_bound = 0.25_f64.min(g1t.min(g2t))
        * (1.0 / (k.l * k.l * k.eta_l * k.eta_l * (1.0 + k.l_f * k.l_f)))
            .min(1.0 / (k.c_g * k.eta_g * k.eta_g));
    let q = q_target
        .unwrap_or_else(|| (2.0 * k.l * k.eta_l / k.eta_g).round().max(1.0) as usize);

    let mut c = 0.5 * c_sq_bound.sqrt();
    let mut warnings = Vec::new();
    for attempt in 0..48 {
        let tau_l_cap = c / (2.0 * k.l * k.eta_l);
        let tau_g_cap = c / (2.0 * k.eta_g);
        let tau_g = tau_g_cap.min(q as f64 * tau_l_cap);
        let tau_l = tau_g / q as f64;
        let cs = case34_error_constants(rates, k, tau_g, tau_l, q)?;
        let gamma_hat1 = rates.gamma1 / 2.0 - cs.c41;
        let gamma_hat2 = rates.gamma2 / 2.0 - cs.c42;
        if gamma_hat1 > 0.0 && gamma_hat2 > 0.0 {
            if attempt > 0 {
                warnings.push(format!(
                    "stepsize scale halved {attempt} time(s) to keep the effective \
                     rates positive"
                ));
            }
            let mut constants = BTreeMap::new();
            constants.insert("C_41".to_string(), cs.c41);
            constants.insert("C_42".to_string(), cs.c42);
            constants.insert("C_43".to_string(), cs.c43);
            constants.insert("C_44".to_string(), cs.c44);
            constants.insert("C_45".to_string(), cs.c45);
            constants.insert("C_46".to_string(), cs.c46);
            constants.insert("C_47".to_string(), cs.c47);
            constants.insert("c".to_string(), c);
            return Ok(DiscretizationBudget {
                case: "III-IV".to_string(),
                max_tau_g: tau_g,
                max_tau_l: tau_l,
                recommended_q: q,
                constants,
                gamma_hat1,
                gamma_hat2,
                warnings,
            });
        }
        c *= 0.5;
    }
    Err(BoundsError::Inconsistent(
        "effective rates stayed non-positive after 48 stepsize halvings".to_string(),
    ))
}

/// Heuristic budget for communication-dominant two-sided sampling
/// (`tau_l > tau_g`): no dedicated lemma exists, so the computation-side
/// bound is reused for `tau_l` and flagged.
pub fn case5_heuristic(
    rates: &ContinuousRates,
    k: &Case2Inputs,
) -> Result<DiscretizationBudget, BoundsError> {
    let mut budget = case2_budget(rates, k)?;
    budget.case = "V (heuristic)".to_string();
    budget.warnings.push(
        "no dedicated two-sided bound for computation-dominant sampling; the \
         computation-side interval bound is reused as a heuristic"
            .to_string(),
    );
    Ok(budget)
}
