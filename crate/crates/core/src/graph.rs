//! Communication topologies and the matrices derived from them.
//!
//! A [`Topology`] is an undirected graph on agent indices `0..n`. From it we
//! build the oriented edge incidence matrix `A` (one row per edge) and a gossip
//! mixing matrix `W = I - A^T diag(w) A` for a choice of edge weights `w`. The
//! consensus contraction rate of `W` is `1 - lambda2`, where `lambda2` is the
//! second-largest eigenvalue magnitude; it is what every downstream rate bound
//! depends on.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Tolerance used when deciding whether the top eigenvalue of a mixing matrix
/// is simple (i.e. whether the underlying graph is connected).
const SIMPLE_EIG_TOL: f64 = 1e-9;

/// Maximum number of resampling attempts for random-graph generation.
const MAX_SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("topology needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({0}, {1}) appears more than once")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) references an agent outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("edge density must lie in [0, 1], got {0}")]
    BadDensity(f64),
    #[error("no connected graph found after {0} sampling attempts (density too low?)")]
    SamplingFailed(usize),
    #[error("explicit weights: expected {expected} entries (one per edge), got {got}")]
    WeightCountMismatch { expected: usize, got: usize },
    #[error("explicit weights: entry {index} is not finite ({value})")]
    NonFiniteWeight { index: usize, value: f64 },
    #[error("eigenvalue 1 of the mixing matrix is not simple (lambda2 = {lambda2:.6}); the graph is disconnected or the weights destroy mixing")]
    EigenvalueOneNotSimple { lambda2: f64 },
    #[error("mixing matrix has spectral radius {0:.6} > 1; the supplied weights are too large")]
    SpectralRadiusExceedsOne(f64),
}

/// How edge weights for the mixing matrix are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    /// `w_e = 1 / (1 + max(deg_i, deg_j))` for edge `e = (i, j)`.
    Metropolis,
    /// Metropolis weights halved. Guarantees a nonnegative spectrum, so the
    /// consensus operator `I - W` satisfies the strict eigenvalue bound
    /// `|lambda| <= 1` (plain Metropolis can exceed it on some graphs).
    LazyMetropolis,
    /// The single constant weight `2 / (lambda_max(L) + lambda_fiedler(L))`
    /// that minimizes `lambda2` over constant-weight schemes (`L = A^T A`).
    OptimalConstant,
    /// Caller-supplied weights, one per edge in sorted edge order.
    Explicit(Vec<f64>),
}

impl WeightScheme {
    /// Short name used in metadata and config files.
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Metropolis => "metropolis",
            WeightScheme::LazyMetropolis => "lazy",
            WeightScheme::OptimalConstant => "optimal",
            WeightScheme::Explicit(_) => "explicit",
        }
    }
}

/// An undirected graph on agents `0..n`. Edges are stored as `(lo, hi)` pairs
/// in sorted (lexicographic) order; that order defines edge indices everywhere
/// else (incidence rows, weight vectors).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Builds a topology from an edge list, normalizing pair order and
    /// rejecting self-loops, duplicates, and out-of-range indices.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a, b));
            }
            if a >= n || b >= n {
                return Err(GraphError::EdgeOutOfRange(a, b, n));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(Topology { n, edges: norm })
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Topology::new(n, &edges)
    }

    /// Complete graph on `n` agents.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Topology::new(n, &edges)
    }

    /// Samples an Erdos-Renyi graph `G(n, density)` with a seeded RNG,
    /// resampling (deterministically) until the draw is connected. Fails after
    /// a bounded number of attempts so unlucky parameters cannot hang.
    pub fn erdos_renyi(n: usize, density: f64, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        if !(0.0..=1.0).contains(&density) || !density.is_finite() {
            return Err(GraphError::BadDensity(density));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_SAMPLING_ATTEMPTS {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < density {
                        edges.push((i, j));
                    }
                }
            }
            let topo = Topology { n, edges };
            if topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(GraphError::SamplingFailed(MAX_SAMPLING_ATTEMPTS))
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    /// Edges as `(lo, hi)` pairs in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Degree of every agent.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Breadth-first connectivity check.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(0);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }
}

/// Oriented edge incidence matrix: row `e` for edge `(lo, hi)` has `+1` in
/// column `hi` and `-1` in column `lo`. Rows follow sorted edge order.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    pub matrix: DMatrix<f64>,
    pub edges: Vec<(usize, usize)>,
}

impl IncidenceMatrix {
    /// The unweighted graph Laplacian `A^T A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        self.matrix.transpose() * &self.matrix
    }
}

/// Builds the incidence matrix of a topology.
pub fn build_incidence(topo: &Topology) -> IncidenceMatrix {
    let mut m = DMatrix::zeros(topo.n_edges(), topo.n_agents());
    for (e, &(lo, hi)) in topo.edges().iter().enumerate() {
        m[(e, lo)] = -1.0;
        m[(e, hi)] = 1.0;
    }
    IncidenceMatrix {
        matrix: m,
        edges: topo.edges().to_vec(),
    }
}

/// Spectral summary of a mixing matrix.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    /// All eigenvalues, sorted in descending order. The first is 1.
    pub eigenvalues: Vec<f64>,
    /// Second-largest eigenvalue magnitude.
    pub lambda2: f64,
    /// Consensus contraction rate `1 - lambda2`.
    pub contraction: f64,
    /// Unit eigenvector attaining `lambda2` (useful for worst-case starts).
    pub lambda2_vector: DVector<f64>,
}

/// A symmetric, doubly-stochastic gossip matrix together with the edge weights
/// that produced it and its spectral summary.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    pub matrix: DMatrix<f64>,
    pub edge_weights: Vec<f64>,
    pub scheme: WeightScheme,
    pub spectral: SpectralInfo,
}

/// Builds `W = I - A^T diag(w) A` for the requested weight scheme and verifies
/// that it actually mixes: eigenvalue 1 must be simple (fails for disconnected
/// graphs) and the spectral radius must not exceed 1.
pub fn build_mixing(topo: &Topology, scheme: &WeightScheme) -> Result<MixingMatrix, GraphError> {
    let inc = build_incidence(topo);
    let deg = topo.degrees();
    let weights: Vec<f64> = match scheme {
        WeightScheme::Metropolis => topo
            .edges()
            .iter()
            .map(|&(a, b)| 1.0 / (1.0 + deg[a].max(deg[b]) as f64))
            .collect(),
        WeightScheme::LazyMetropolis => topo
            .edges()
            .iter()
            .map(|&(a, b)| 0.5 / (1.0 + deg[a].max(deg[b]) as f64))
            .collect(),
        WeightScheme::OptimalConstant => {
            let lap = inc.laplacian();
            let mut eigs: Vec<f64> = lap.symmetric_eigenvalues().iter().cloned().collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // Ascending order: eigs[0] ~ 0, eigs[1] is the Fiedler value.
            let fiedler = eigs[1];
            let lap_max = eigs[eigs.len() - 1];
            let w = 2.0 / (lap_max + fiedler);
            vec![w; topo.n_edges()]
        }
        WeightScheme::Explicit(w) => {
            if w.len() != topo.n_edges() {
                return Err(GraphError::WeightCountMismatch {
                    expected: topo.n_edges(),
                    got: w.len(),
                });
            }
            if let Some((i, &v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(GraphError::NonFiniteWeight { index: i, value: v });
            }
            w.clone()
        }
    };

    let n = topo.n_agents();
    let mut w_mat = DMatrix::identity(n, n);
    for (e, &(lo, hi)) in topo.edges().iter().enumerate() {
        let w = weights[e];
        w_mat[(lo, lo)] -= w;
        w_mat[(hi, hi)] -= w;
        w_mat[(lo, hi)] += w;
        w_mat[(hi, lo)] += w;
    }

    let spectral = spectral_info(&w_mat)?;
    Ok(MixingMatrix {
        matrix: w_mat,
        edge_weights: weights,
        scheme: scheme.clone(),
        spectral,
    })
}

/// Eigen-summary of a symmetric mixing matrix with validity checks.
fn spectral_info(w: &DMatrix<f64>) -> Result<SpectralInfo, GraphError> {
    let eig = w.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let top = eigenvalues[0];
    let radius = eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if radius > top + SIMPLE_EIG_TOL || top > 1.0 + SIMPLE_EIG_TOL {
        return Err(GraphError::SpectralRadiusExceedsOne(radius));
    }
    // lambda2 = largest magnitude among the non-top eigenvalues.
    let (l2_pos, lambda2) = eigenvalues
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &v)| (i, v.abs()))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("mixing matrix has at least 2 eigenvalues");
    if lambda2 >= 1.0 - SIMPLE_EIG_TOL {
        return Err(GraphError::EigenvalueOneNotSimple { lambda2 });
    }
    let lambda2_vector = eig.eigenvectors.column(order[l2_pos]).into_owned();
    Ok(SpectralInfo {
        contraction: 1.0 - lambda2,
        lambda2,
        eigenvalues,
        lambda2_vector,
    })
}

/// The uniform averaging matrix `R = (1/n) * ones`, i.e. the mixing matrix of
/// a centralized (all-to-all, server-mediated) exchange.
pub fn averaging_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0 / n as f64)
}
