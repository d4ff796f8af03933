//! Local objectives held by each agent and the stationarity measure used to
//! judge progress.
//!
//! Two objective families are provided: simple quadratics
//! `f_i(x) = h/2 * ||x - a||^2` (closed-form minimizers, ideal for oracle
//! tests) and binary logistic regression with a bounded nonconvex regularizer,
//!
//! ```text
//! f_i(x) = (1/m) * sum_j log(1 + exp(-b_j * <a_j, x>))
//!          + sum_d beta * alpha * x_d^2 / (1 + alpha * x_d^2).
//! ```
//!
//! Both families are bounded below by 0, so energies can be reported relative
//! to a zero floor without knowing the exact optimum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Probability that a synthetic logistic label is flipped.
const LABEL_FLIP_PROB: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("objective expects dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("objective suite is empty")]
    EmptySuite,
    #[error("agent {agent} has dimension {got}, suite dimension is {expected}")]
    MixedDimensions {
        agent: usize,
        expected: usize,
        got: usize,
    },
    #[error("logistic label {index} must be +1 or -1, got {value}")]
    BadLabel { index: usize, value: f64 },
    #[error("logistic features: {rows} rows but {labels} labels")]
    FeatureLabelMismatch { rows: usize, labels: usize },
    #[error("synthetic spec: {0}")]
    BadSpec(String),
}

/// Numerically stable `log(1 + exp(t))`.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid `1 / (1 + exp(-t))`.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Quadratic {
        curvature: f64,
        target: DVector<f64>,
    },
    Logistic {
        /// `m x d` feature matrix; one sample per row.
        features: DMatrix<f64>,
        /// `m` labels in {-1, +1}.
        labels: DVector<f64>,
        alpha: f64,
        beta: f64,
    },
}

/// One agent's objective, with a precomputed gradient-Lipschitz bound.
#[derive(Debug, Clone)]
pub struct LocalObjective {
    kind: Kind,
    lipschitz: f64,
}

impl LocalObjective {
    /// `f(x) = curvature/2 * ||x - target||^2`.
    pub fn quadratic(curvature: f64, target: DVector<f64>) -> Self {
        LocalObjective {
            lipschitz: curvature,
            kind: Kind::Quadratic { curvature, target },
        }
    }

    /// Mean logistic loss over `(features, labels)` plus the bounded nonconvex
    /// regularizer with strength `beta` and shape `alpha`. The Lipschitz bound
    /// is `lambda_max(A^T A) / (4m) + 2*beta*alpha`.
    pub fn logistic(
        features: DMatrix<f64>,
        labels: DVector<f64>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, ProblemError> {
        if features.nrows() != labels.len() {
            return Err(ProblemError::FeatureLabelMismatch {
                rows: features.nrows(),
                labels: labels.len(),
            });
        }
        if let Some((i, &v)) = labels.iter().enumerate().find(|(_, &v)| v != 1.0 && v != -1.0) {
            return Err(ProblemError::BadLabel { index: i, value: v });
        }
        let m = features.nrows() as f64;
        let gram = features.transpose() * &features;
        let data_lip = gram
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b))
            / (4.0 * m);
        Ok(LocalObjective {
            lipschitz: data_lip + 2.0 * beta * alpha,
            kind: Kind::Logistic {
                features,
                labels,
                alpha,
                beta,
            },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Quadratic { target, .. } => target.len(),
            Kind::Logistic { features, .. } => features.ncols(),
        }
    }

    /// Upper bound on the gradient Lipschitz constant.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<(), ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Objective value and gradient in one pass.
    pub fn value_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>), ProblemError> {
        self.check_dim(x)?;
        match &self.kind {
            Kind::Quadratic { curvature, target } => {
                let diff = x - target;
                Ok((0.5 * curvature * diff.norm_squared(), diff * *curvature))
            }
            Kind::Logistic {
                features,
                labels,
                alpha,
                beta,
            } => {
                let m = features.nrows() as f64;
                let margins = features * x; // m-vector of <a_j, x>
                let mut value = 0.0;
                let mut slope = DVector::zeros(features.nrows());
                for j in 0..features.nrows() {
                    let t = -labels[j] * margins[j];
                    value += softplus(t);
                    slope[j] = -labels[j] * sigmoid(t) / m;
                }
                value /= m;
                let mut grad = features.transpose() * slope;
                for d in 0..x.len() {
                    let xd = x[d];
                    let denom = 1.0 + alpha * xd * xd;
                    value += beta * alpha * xd * xd / denom;
                    grad[d] += 2.0 * beta * alpha * xd / (denom * denom);
                }
                Ok((value, grad))
            }
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64, ProblemError> {
        Ok(self.value_grad(x)?.0)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        Ok(self.value_grad(x)?.1)
    }
}

/// Decomposition of the stationarity gap at a stacked iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    /// `|| (1/N) * sum_i grad f_i(x_bar) ||^2`.
    pub grad_at_avg_sq: f64,
    /// `|| X - 1 x_bar^T ||_F^2`: total squared consensus violation.
    pub consensus_sq: f64,
    /// Sum of the two terms.
    pub gap: f64,
}

/// The collection of all agents' objectives.
#[derive(Debug, Clone)]
pub struct ObjectiveSuite {
    locals: Vec<LocalObjective>,
    dim: usize,
}

impl ObjectiveSuite {
    pub fn new(locals: Vec<LocalObjective>) -> Result<Self, ProblemError> {
        let dim = locals.first().ok_or(ProblemError::EmptySuite)?.dim();
        for (i, l) in locals.iter().enumerate() {
            if l.dim() != dim {
                return Err(ProblemError::MixedDimensions {
                    agent: i,
                    expected: dim,
                    got: l.dim(),
                });
            }
        }
        Ok(ObjectiveSuite { locals, dim })
    }

    pub fn n_agents(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local(&self, i: usize) -> &LocalObjective {
        &self.locals[i]
    }

    /// Largest per-agent gradient-Lipschitz bound.
    pub fn lipschitz_bound(&self) -> f64 {
        self.locals
            .iter()
            .fold(0.0f64, |a, l| a.max(l.lipschitz_bound()))
    }

    fn check_stack(&self, x: &DMatrix<f64>) -> Result<(), ProblemError> {
        if x.nrows() != self.n_agents() || x.ncols() != self.dim {
            return Err(ProblemError::DimensionMismatch {
                expected: self.n_agents() * self.dim,
                got: x.nrows() * x.ncols(),
            });
        }
        Ok(())
    }

    /// Stacked gradients: row `i` of the result is `grad f_i(x_i)` for row
    /// `i` of the input.
    pub fn gradient_stack(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, ProblemError> {
        self.check_stack(x)?;
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..self.n_agents() {
            let xi = x.row(i).transpose();
            let g = self.locals[i].gradient(&xi)?;
            out.row_mut(i).copy_from(&g.transpose());
        }
        Ok(out)
    }

    /// Mean of the local objective values at a single common point.
    pub fn objective_at(&self, point: &DVector<f64>) -> Result<f64, ProblemError> {
        let mut total = 0.0;
        for l in &self.locals {
            total += l.value(point)?;
        }
        Ok(total / self.n_agents() as f64)
    }

    /// Mean of the local gradients at a single common point.
    pub fn average_gradient_at(&self, point: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        let mut total = DVector::zeros(self.dim);
        for l in &self.locals {
            total += l.gradient(point)?;
        }
        Ok(total / self.n_agents() as f64)
    }

    /// Row-mean of a stacked iterate.
    pub fn row_mean(x: &DMatrix<f64>) -> DVector<f64> {
        let n = x.nrows() as f64;
        let mut mean = DVector::zeros(x.ncols());
        for i in 0..x.nrows() {
            mean += x.row(i).transpose();
        }
        mean / n
    }

    /// Stationarity gap of a stacked iterate: gradient norm of the average
    /// objective at the row-mean, plus the squared consensus violation.
    pub fn stationarity_gap(&self, x: &DMatrix<f64>) -> Result<StationarityReport, ProblemError> {
        self.check_stack(x)?;
        let mean = Self::row_mean(x);
        let grad_at_avg_sq = self.average_gradient_at(&mean)?.norm_squared();
        let mut consensus_sq = 0.0;
        for i in 0..x.nrows() {
            let diff = x.row(i).transpose() - &mean;
            consensus_sq += diff.norm_squared();
        }
        Ok(StationarityReport {
            grad_at_avg_sq,
            consensus_sq,
            gap: grad_at_avg_sq + consensus_sq,
        })
    }
}

/// Which synthetic family to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Quadratic,
    Logistic,
}

/// Recipe for a synthetic objective suite. `heterogeneity` scales the
/// per-agent offset added to the shared ground truth, so 0 gives i.i.d. data
/// across agents and larger values make local optima disagree more.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_agents: usize,
    pub samples_per_agent: usize,
    pub dim: usize,
    pub heterogeneity: f64,
    pub seed: u64,
    /// Regularizer shape (logistic only).
    pub alpha: f64,
    /// Regularizer strength (logistic only).
    pub beta: f64,
}

impl SyntheticSpec {
    /// Benchmark defaults: 20 agents, 500 samples each, dimension 10,
    /// regularizer `alpha = 1`, `beta = 0.1`.
    pub fn logistic_default(seed: u64) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Logistic,
            n_agents: 20,
            samples_per_agent: 500,
            dim: 10,
            heterogeneity: 0.0,
            seed,
            alpha: 1.0,
            beta: 0.1,
        }
    }
}

fn normal_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Draws a synthetic suite. Fully determined by the spec (ChaCha8 stream
/// seeded with `spec.seed`); per-agent data are drawn in agent order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ObjectiveSuite, ProblemError> {
    if spec.n_agents == 0 || spec.dim == 0 {
        return Err(ProblemError::BadSpec(
            "n_agents and dim must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = normal_vector(&mut rng, spec.dim);
    let mut locals = Vec::with_capacity(spec.n_agents);
    match spec.kind {
        SyntheticKind::Quadratic => {
            for _ in 0..spec.n_agents {
                let offset = normal_vector(&mut rng, spec.dim);
                let curvature = 0.5 + 1.5 * rng.random::<f64>();
                let target = &shared + offset * spec.heterogeneity;
                locals.push(LocalObjective::quadratic(curvature, target));
            }
        }
        SyntheticKind::Logistic => {
            if spec.samples_per_agent == 0 {
                return Err(ProblemError::BadSpec(
                    "samples_per_agent must be positive for logistic suites".into(),
                ));
            }
            for _ in 0..spec.n_agents {
                let offset = normal_vector(&mut rng, spec.dim);
                let truth = &shared + offset * spec.heterogeneity;
                let features = DMatrix::from_fn(spec.samples_per_agent, spec.dim, |_, _| {
                    rng.sample(StandardNormal)
                });
                let labels = DVector::from_fn(spec.samples_per_agent, |j, _| {
                    let margin = features.row(j).transpose().dot(&truth);
                    let clean = if margin >= 0.0 { 1.0 } else { -1.0 };
                    if rng.random::<f64>() < LABEL_FLIP_PROB {
                        -clean
                    } else {
                        clean
                    }
                });
                locals.push(LocalObjective::logistic(
                    features,
                    labels,
                    spec.alpha,
                    spec.beta,
                )?);
            }
        }
    }
    ObjectiveSuite::new(locals)
}
