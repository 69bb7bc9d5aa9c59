//! Communication graph, Laplacian matrix and spectral quantities.
//!
//! Graphs are undirected, unweighted and must be connected. The Laplacian
//! follows the degree-minus-adjacency convention, so `L * 1 = 0` and `L` is
//! symmetric positive semi-definite.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph is disconnected: node {0} is not reachable from node 1")]
    DisconnectedGraph(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node index {0} out of range 1..={1}")]
    IndexOutOfRange(usize, usize),
    #[error("at least 2 agents are required, got {0}")]
    TooFewAgents(usize),
    #[error("eigensolver did not converge within {0} sweeps")]
    EigensolverFailure(usize),
    #[error("vector is not zero-sum: |1^T x| = {0:.3e} exceeds tolerance {1:.3e}")]
    NotZeroSum(f64, f64),
    #[error("graph file parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
}

/// Validated undirected communication graph over agents `1..=N`.
///
/// Edges are stored normalized as `(i, j)` with `i < j`, 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    agent_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Validates indices, rejects self-loops and duplicates, and checks
    /// connectivity by breadth-first traversal.
    pub fn new(agent_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if agent_count < 2 {
            return Err(GraphError::TooFewAgents(agent_count));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            for idx in [i, j] {
                if idx < 1 || idx > agent_count {
                    return Err(GraphError::IndexOutOfRange(idx, agent_count));
                }
            }
            let e = (i.min(j), i.max(j));
            if normalized.contains(&e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            normalized.push(e);
        }
        let topo = Topology {
            agent_count,
            edges: normalized,
        };
        // BFS from node 1
        let mut seen = vec![false; agent_count + 1];
        seen[1] = true;
        let mut queue = vec![1usize];
        while let Some(v) = queue.pop() {
            for &(i, j) in &topo.edges {
                let other = if i == v {
                    j
                } else if j == v {
                    i
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    queue.push(other);
                }
            }
        }
        if let Some(v) = (1..=agent_count).find(|&v| !seen[v]) {
            return Err(GraphError::DisconnectedGraph(v));
        }
        Ok(topo)
    }

    /// Parses the plain-text graph format: first line `N`, then one `i j`
    /// pair per line (1-based). Blank lines and `#` comments are skipped.
    pub fn from_graph_file(text: &str) -> Result<Self, GraphError> {
        let mut agent_count = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            if agent_count.is_none() {
                let n: usize = fields.next().unwrap().parse().map_err(|_| GraphError::ParseError {
                    line: lineno + 1,
                    reason: format!("expected agent count, got `{line}`"),
                })?;
                if fields.next().is_some() {
                    return Err(GraphError::ParseError {
                        line: lineno + 1,
                        reason: "first data line must contain only the agent count".into(),
                    });
                }
                agent_count = Some(n);
            } else {
                let parse = |f: Option<&str>| -> Result<usize, GraphError> {
                    f.and_then(|s| s.parse().ok()).ok_or(GraphError::ParseError {
                        line: lineno + 1,
                        reason: format!("expected `i j` pair, got `{line}`"),
                    })
                };
                let i = parse(fields.next())?;
                let j = parse(fields.next())?;
                edges.push((i, j));
            }
        }
        let n = agent_count.ok_or(GraphError::ParseError {
            line: 0,
            reason: "empty graph file".into(),
        })?;
        Topology::new(n, &edges)
    }

    pub fn agent_count(&self) -> usize {
        self.agent_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.agent_count];
        for &(i, j) in &self.edges {
            d[i - 1] += 1;
            d[j - 1] += 1;
        }
        d
    }
}

/// Dense symmetric graph Laplacian, row sums exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
}

impl LaplacianMatrix {
    pub fn from_topology(topology: &Topology) -> Self {
        let n = topology.agent_count();
        let mut m = DMatrix::zeros(n, n);
        for &(i, j) in topology.edges() {
            m[(i - 1, j - 1)] = -1.0;
            m[(j - 1, i - 1)] = -1.0;
            m[(i - 1, i - 1)] += 1.0;
            m[(j - 1, j - 1)] += 1.0;
        }
        LaplacianMatrix { entries: m }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.entries * x
    }

    /// Induced matrix 1-norm (maximum absolute column sum).
    pub fn induced_one_norm(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.entries.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Entrywise absolute sum, recorded alongside the induced norm since the
    /// two conventions differ.
    pub fn entrywise_one_norm(&self) -> f64 {
        self.entries.iter().map(|v| v.abs()).sum()
    }
}

/// Convenience wrapper matching the operation name.
pub fn laplacian(topology: &Topology) -> LaplacianMatrix {
    LaplacianMatrix::from_topology(topology)
}

/// Ascending Laplacian eigenvalues with the two spectral quantities that
/// drive the convergence analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    eigenvalues: Vec<f64>,
}

impl SpectralSummary {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Algebraic connectivity, the smallest nonzero eigenvalue.
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn lambda_n(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;

/// Symmetric eigendecomposition by the cyclic Jacobi method.
///
/// Convergence tolerance 1e-12 on the scaled off-diagonal mass, at most 100
/// sweeps. Fails with [`GraphError::EigensolverFailure`] on non-convergence.
pub fn spectrum(laplacian: &LaplacianMatrix) -> Result<SpectralSummary, GraphError> {
    let eigenvalues = jacobi_eigenvalues(laplacian.entries())?;
    Ok(SpectralSummary { eigenvalues })
}

pub(crate) fn jacobi_eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<f64>, GraphError> {
    let n = matrix.nrows();
    let mut a = matrix.clone();
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return Ok(ev);
        }
        let _ = sweep;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::EPSILON * scale {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(GraphError::EigensolverFailure(JACOBI_MAX_SWEEPS))
}

/// The projector `I - 1*1^T / N` onto the zero-sum subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteringMatrix {
    entries: DMatrix<f64>,
}

impl CenteringMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

pub fn centering(agent_count: usize) -> CenteringMatrix {
    let n = agent_count;
    let inv = 1.0 / n as f64;
    let entries = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - inv
        } else {
            -inv
        }
    });
    CenteringMatrix { entries }
}

/// One-sided residuals of the Laplacian norm inequalities for zero-sum
/// vectors. Each field is `upper - lower` of one inequality, so every value
/// must be nonnegative up to floating-point slack.
#[derive(Debug, Clone, Copy)]
pub struct Lemma2Residuals {
    /// `lambda_N * ||x||^2 - x^T L x`
    pub quad_upper: f64,
    /// `x^T L x - lambda_2 * ||x||^2`
    pub quad_lower: f64,
    /// `lambda_N^2 * ||x||^2 - ||L x||_2^2`
    pub square_upper: f64,
    /// `||L x||_2^2 - lambda_2^2 * ||x||^2`
    pub square_lower: f64,
    /// `||L x||_1 - lambda_2 * ||x||_2`
    pub one_norm_lower: f64,
    /// Slack of the `||x||_2 <= ||x||_1 <= sqrt(N) ||x||_2` chain (the
    /// tighter of its two sides).
    pub norm_chain: f64,
}

impl Lemma2Residuals {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.quad_upper,
            self.quad_lower,
            self.square_upper,
            self.square_lower,
            self.one_norm_lower,
            self.norm_chain,
        ]
    }

    pub fn min(&self) -> f64 {
        self.as_array().into_iter().fold(f64::INFINITY, f64::min)
    }
}

pub const ZERO_SUM_TOL: f64 = 1e-9;

/// Evaluates the Lemma-style inequality residuals for a zero-sum vector.
pub fn lemma2_residuals(
    laplacian: &LaplacianMatrix,
    spectrum: &SpectralSummary,
    x: &DVector<f64>,
) -> Result<Lemma2Residuals, GraphError> {
    let norm2 = x.norm();
    let sum: f64 = x.iter().sum();
    let tol = ZERO_SUM_TOL * norm2.max(1.0);
    if sum.abs() > tol {
        return Err(GraphError::NotZeroSum(sum.abs(), tol));
    }
    let lam2 = spectrum.lambda2();
    let lam_n = spectrum.lambda_n();
    let lx = laplacian.apply(x);
    let norm2_sq = norm2 * norm2;
    let quad = x.dot(&lx);
    let lx_sq = lx.norm_squared();
    let lx_one: f64 = lx.iter().map(|v| v.abs()).sum();
    let x_one: f64 = x.iter().map(|v| v.abs()).sum();
    let n = laplacian.dim() as f64;
    Ok(Lemma2Residuals {
        quad_upper: lam_n * norm2_sq - quad,
        quad_lower: quad - lam2 * norm2_sq,
        square_upper: lam_n * lam_n * norm2_sq - lx_sq,
        square_lower: lx_sq - lam2 * lam2 * norm2_sq,
        one_norm_lower: lx_one - lam2 * norm2,
        norm_chain: (x_one - norm2).min(n.sqrt() * norm2 - x_one),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn fig1_edges() -> Vec<(usize, usize)> {
        vec![
            (1, 4),
            (1, 5),
            (2, 3),
            (3, 6),
            (4, 10),
            (2, 8),
            (6, 7),
            (9, 10),
            (4, 8),
            (6, 10),
        ]
    }

    fn fig1() -> Topology {
        Topology::new(10, &fig1_edges()).unwrap()
    }

    #[test]
    fn path_graph_is_valid() {
        let t = Topology::new(2, &[(1, 2)]).unwrap();
        assert_eq!(t.degrees(), vec![1, 1]);
    }

    #[test]
    fn fig1_topology_degrees() {
        assert_eq!(fig1().degrees(), vec![2, 2, 2, 3, 1, 3, 1, 2, 1, 3]);
    }

    #[test]
    fn disconnected_graph_rejected() {
        assert_eq!(
            Topology::new(3, &[(1, 2)]),
            Err(GraphError::DisconnectedGraph(3))
        );
    }

    #[test]
    fn self_loop_and_duplicate_rejected() {
        assert_eq!(
            Topology::new(2, &[(1, 1)]),
            Err(GraphError::SelfLoop(1))
        );
        assert_eq!(
            Topology::new(2, &[(1, 2), (2, 1)]),
            Err(GraphError::DuplicateEdge(1, 2))
        );
        assert_eq!(
            Topology::new(2, &[(1, 3)]),
            Err(GraphError::IndexOutOfRange(3, 2))
        );
    }

    #[test]
    fn graph_file_round_trip() {
        let text = "10\n1 4\n1 5\n2 3\n3 6\n4 10\n2 8\n6 7\n9 10\n4 8\n6 10\n";
        let t = Topology::from_graph_file(text).unwrap();
        assert_eq!(t, fig1());
    }

    #[test]
    fn path_laplacian_entries() {
        let l = laplacian(&Topology::new(2, &[(1, 2)]).unwrap());
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(l.entries(), &expected);
    }

    #[test]
    fn complete_graph_laplacian() {
        let l = laplacian(&Topology::new(3, &[(1, 2), (1, 3), (2, 3)]).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { -1.0 };
                assert_eq!(l.entries()[(i, j)], want);
            }
        }
    }

    #[test]
    fn laplacian_invariants_fig1() {
        let l = laplacian(&fig1());
        // symmetry + row sums
        for i in 0..10 {
            let row_sum: f64 = l.entries().row(i).iter().sum();
            assert_eq!(row_sum, 0.0);
            for j in 0..10 {
                assert_eq!(l.entries()[(i, j)], l.entries()[(j, i)]);
            }
            assert_eq!(l.entries()[(i, i)], fig1().degrees()[i] as f64);
        }
        let s = spectrum(&l).unwrap();
        assert!(s.eigenvalues()[0].abs() <= 1e-9);
        assert!(s.lambda2() > 0.0);
    }

    #[test]
    fn spectrum_closed_forms() {
        let path = spectrum(&laplacian(&Topology::new(2, &[(1, 2)]).unwrap())).unwrap();
        assert!((path.eigenvalues()[0]).abs() < 1e-12);
        assert!((path.eigenvalues()[1] - 2.0).abs() < 1e-12);

        let complete =
            spectrum(&laplacian(&Topology::new(3, &[(1, 2), (1, 3), (2, 3)]).unwrap())).unwrap();
        assert!((complete.eigenvalues()[1] - 3.0).abs() < 1e-12);
        assert!((complete.eigenvalues()[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn centering_small_cases() {
        let c = centering(2);
        assert_eq!(
            c.entries(),
            &DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])
        );
        // idempotence and absorption for Fig. 1
        let c10 = centering(10);
        let l = laplacian(&fig1());
        let c2 = c10.entries() * c10.entries();
        assert!((&c2 - c10.entries()).amax() < 1e-12);
        let llc = l.entries() * c10.entries();
        let lcl = c10.entries() * l.entries();
        assert!((&llc - l.entries()).amax() < 1e-12);
        assert!((&lcl - l.entries()).amax() < 1e-12);
        let ones = DVector::from_element(10, 1.0);
        assert!((c10.entries() * ones).amax() < 1e-12);
    }

    #[test]
    fn lemma2_zero_vector() {
        let l = laplacian(&fig1());
        let s = spectrum(&l).unwrap();
        let r = lemma2_residuals(&l, &s, &DVector::zeros(10)).unwrap();
        for v in r.as_array() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn lemma2_path_equality_case() {
        let t = Topology::new(2, &[(1, 2)]).unwrap();
        let l = laplacian(&t);
        let s = spectrum(&l).unwrap();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        let r = lemma2_residuals(&l, &s, &x).unwrap();
        // x^T L x = 4 = lambda_2 ||x||^2 exactly
        assert!(r.quad_lower.abs() < 1e-12);
        assert!(r.min() >= -1e-12);
    }

    #[test]
    fn lemma2_rejects_nonzero_sum() {
        let l = laplacian(&fig1());
        let s = spectrum(&l).unwrap();
        let x = DVector::from_element(10, 1.0);
        assert!(matches!(
            lemma2_residuals(&l, &s, &x),
            Err(GraphError::NotZeroSum(_, _))
        ));
    }

    #[test]
    fn fig1_spectrum_matches_independent_oracle() {
        // characteristic-polynomial-free cross-check: power iteration on the
        // deflated matrix is fiddly, so the oracle here is bisection on the
        // number of negative pivots of L - mu*I (Sylvester inertia).
        let l = laplacian(&fig1());
        let s = spectrum(&l).unwrap();
        for (idx, &ev) in s.eigenvalues().iter().enumerate() {
            let below = count_eigenvalues_below(l.entries(), ev - 1e-7);
            let below_hi = count_eigenvalues_below(l.entries(), ev + 1e-7);
            assert!(below <= idx, "eigenvalue {idx} misplaced low");
            assert!(below_hi > idx, "eigenvalue {idx} misplaced high");
        }
    }

    /// Counts eigenvalues of the symmetric matrix strictly below `mu` via
    /// LDL^T inertia with partial pivot fallback on tiny pivots.
    fn count_eigenvalues_below(m: &DMatrix<f64>, mu: f64) -> usize {
        let n = m.nrows();
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= mu;
        }
        let mut negatives = 0;
        for k in 0..n {
            let pivot = a[(k, k)];
            if pivot < 0.0 {
                negatives += 1;
            }
            if pivot.abs() < 1e-300 {
                continue;
            }
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                for j in k..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        negatives
    }
}
