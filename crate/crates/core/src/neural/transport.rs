//! Discrete optimal transport between two mass vectors.
//!
//! [`emd_exact`] is a transportation simplex over a spanning-tree basis;
//! [`sinkhorn`] is a log-domain entropic solver with epsilon scaling.

use crate::error::Error;

const MASS_TOL: f64 = 1e-9;

/// Balanced transport problem with a dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    source: Vec<f64>,
    target: Vec<f64>,
    cost: Vec<f64>,
}

impl TransportProblem {
    /// Masses must be nonnegative and each sum to 1 within 1e-9; costs must
    /// be finite and nonnegative.
    pub fn new(source: Vec<f64>, target: Vec<f64>, cost: Vec<f64>) -> Result<Self, Error> {
        check_masses(&source, "source")?;
        check_masses(&target, "target")?;
        for (name, masses) in [("source", &source), ("target", &target)] {
            let total: f64 = masses.iter().sum();
            if (total - 1.0).abs() > MASS_TOL {
                return Err(Error::invalid(format!("{name} masses sum to {total}, expected 1")));
            }
        }
        if cost.len() != source.len() * target.len() {
            return Err(Error::invalid(format!(
                "cost has {} entries, expected {}x{}",
                cost.len(),
                source.len(),
                target.len()
            )));
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite cost entry"));
        }
        if cost.iter().any(|&c| c < 0.0) {
            return Err(Error::invalid("negative cost entry"));
        }
        Ok(TransportProblem { source, target, cost })
    }

    /// Rescales both mass vectors to sum to 1 before validating.
    pub fn normalized(source: Vec<f64>, target: Vec<f64>, cost: Vec<f64>) -> Result<Self, Error> {
        let scale = |masses: Vec<f64>, name: &str| -> Result<Vec<f64>, Error> {
            check_masses(&masses, name)?;
            let total: f64 = masses.iter().sum();
            if total <= 0.0 {
                return Err(Error::invalid(format!("{name} masses cannot be normalized (sum {total})")));
            }
            Ok(masses.into_iter().map(|m| m / total).collect())
        };
        let source = scale(source, "source")?;
        let target = scale(target, "target")?;
        TransportProblem::new(source, target, cost)
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn rows(&self) -> usize {
        self.source.len()
    }

    pub fn cols(&self) -> usize {
        self.target.len()
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.target.len() + j]
    }

    /// Same problem with source and target swapped.
    pub fn transposed(&self) -> TransportProblem {
        let (n, m) = (self.rows(), self.cols());
        let mut cost = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                cost[j * n + i] = self.cost(i, j);
            }
        }
        TransportProblem {
            source: self.target.clone(),
            target: self.source.clone(),
            cost,
        }
    }
}

fn check_masses(masses: &[f64], name: &str) -> Result<(), Error> {
    if masses.is_empty() {
        return Err(Error::invalid(format!("{name} has no points")));
    }
    if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::invalid(format!("{name} masses must be finite and nonnegative")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub distance: f64,
    /// Row-major `rows x cols` flow.
    pub flow: Vec<f64>,
}

/// A basic cell of the spanning-tree basis.
#[derive(Debug, Clone, Copy)]
struct Basic {
    row: usize,
    col: usize,
    flow: f64,
}

/// Exact earth mover's distance.
pub fn emd_exact(problem: &TransportProblem) -> Result<TransportPlan, Error> {
    let (n, m) = (problem.rows(), problem.cols());
    let mut basis = northwest_corner(&problem.source, &problem.target);
    let scale = problem.cost.iter().fold(1.0f64, |a, &c| a.max(c));
    let tol = 1e-12 * scale;

    let nodes = n + m;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut degenerate_run = 0usize;
    let max_iter = 50 * (n * m + nodes) + 1000;

    for _ in 0..max_iter {
        let adjacency = tree_adjacency(&basis, n, nodes);
        potentials(problem, &basis, &adjacency, &mut u, &mut v);

        // Dantzig's rule normally; Bland's rule after a long degenerate
        // streak to rule out cycling.
        let use_bland = degenerate_run > nodes;
        let mut entering = None;
        let mut most_negative = -tol;
        'scan: for i in 0..n {
            for j in 0..m {
                let reduced = problem.cost(i, j) - u[i] - v[j];
                if reduced < most_negative {
                    entering = Some((i, j));
                    if use_bland {
                        break 'scan;
                    }
                    most_negative = reduced;
                }
            }
        }
        let Some((row, col)) = entering else {
            return Ok(plan_from_basis(problem, &basis));
        };

        // Tree path from the entering column node back to its row node.
        let path = tree_path(&basis, &adjacency, n, n + col, row);
        // Edges alternate -, +, -, ... starting from the column end.
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &edge) in path.iter().enumerate() {
            if k % 2 == 0 {
                let flow = basis[edge].flow;
                let better = flow < theta || (use_bland && flow == theta && edge < leaving);
                if better {
                    theta = flow;
                    leaving = edge;
                }
            }
        }
        let theta = theta.max(0.0);
        for (k, &edge) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[edge].flow -= theta;
            } else {
                basis[edge].flow += theta;
            }
        }
        basis[leaving] = Basic {
            row,
            col,
            flow: theta,
        };
        if theta == 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    Err(Error::invalid("transportation simplex did not converge"))
}

fn northwest_corner(source: &[f64], target: &[f64]) -> Vec<Basic> {
    let (n, m) = (source.len(), target.len());
    let mut supply = source.to_vec();
    let mut demand = target.to_vec();
    let mut basis = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let flow = supply[i].min(demand[j]).max(0.0);
        supply[i] -= flow;
        demand[j] -= flow;
        basis.push(Basic { row: i, col: j, flow });
        if i == n - 1 && j == m - 1 {
            break;
        }
        if i == n - 1 {
            j += 1;
        } else if j == m - 1 || supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Incident basic cells per node; rows are nodes `0..n`, columns `n..n+m`.
fn tree_adjacency(basis: &[Basic], n: usize, nodes: usize) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); nodes];
    for (idx, b) in basis.iter().enumerate() {
        adjacency[b.row].push(idx);
        adjacency[n + b.col].push(idx);
    }
    adjacency
}

fn potentials(problem: &TransportProblem, basis: &[Basic], adjacency: &[Vec<usize>], u: &mut [f64], v: &mut [f64]) {
    let n = u.len();
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = stack.pop() {
        for &edge in &adjacency[node] {
            let b = basis[edge];
            let c = problem.cost(b.row, b.col);
            if node < n {
                let other = n + b.col;
                if !seen[other] {
                    v[b.col] = c - u[b.row];
                    seen[other] = true;
                    stack.push(other);
                }
            } else if !seen[b.row] {
                u[b.row] = c - v[b.col];
                seen[b.row] = true;
                stack.push(b.row);
            }
        }
    }
}

/// Basis edges on the tree path from node `from` to row node `to`, in order.
fn tree_path(basis: &[Basic], adjacency: &[Vec<usize>], n: usize, from: usize, to: usize) -> Vec<usize> {
    let other_end = |edge: usize, node: usize| {
        let b = basis[edge];
        if node < n {
            n + b.col
        } else {
            b.row
        }
    };
    let mut parent_edge = vec![usize::MAX; adjacency.len()];
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(node) = stack.pop() {
        if node == to {
            break;
        }
        for &edge in &adjacency[node] {
            let next = other_end(edge, node);
            if !seen[next] {
                seen[next] = true;
                parent_edge[next] = edge;
                stack.push(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let edge = parent_edge[node];
        path.push(edge);
        node = other_end(edge, node);
    }
    path.reverse();
    path
}

fn plan_from_basis(problem: &TransportProblem, basis: &[Basic]) -> TransportPlan {
    let m = problem.cols();
    let mut flow = vec![0.0; problem.rows() * m];
    for b in basis {
        flow[b.row * m + b.col] += b.flow.max(0.0);
    }
    let distance = flow.iter().zip(&problem.cost).map(|(f, c)| f * c).sum();
    TransportPlan { distance, flow }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Convergence threshold on the L1 violation of the source marginal.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            epsilon: 0.01,
            max_iter: 100_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    /// Transport cost `<P, C>` of the regularized plan.
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_error: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic-regularized transport. Epsilon is annealed geometrically from the
/// cost scale down to `params.epsilon`, warm-starting the dual potentials.
pub fn sinkhorn(problem: &TransportProblem, params: &SinkhornParams) -> Result<SinkhornOutput, Error> {
    if !(params.epsilon > 0.0 && params.epsilon.is_finite()) {
        return Err(Error::invalid("sinkhorn epsilon must be positive and finite"));
    }
    if params.max_iter == 0 {
        return Err(Error::invalid("sinkhorn max_iter must be positive"));
    }
    if problem.cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite cost entry"));
    }
    let (n, m) = (problem.rows(), problem.cols());
    let log_a: Vec<f64> = problem.source.iter().map(|a| a.ln()).collect();
    let log_b: Vec<f64> = problem.target.iter().map(|b| b.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    let cost_scale = problem.cost.iter().fold(0.0f64, |a, &c| a.max(c));
    let mut eps = cost_scale.max(params.epsilon);
    let mut iterations = 0;
    let mut error;

    loop {
        let last_stage = eps <= params.epsilon;
        let stage_tol = if last_stage { params.tol } else { params.tol.max(1e-3) };
        loop {
            for i in 0..n {
                let lse = log_sum_exp((0..m).map(|j| (g[j] - problem.cost(i, j)) / eps));
                f[i] = if log_a[i].is_finite() { eps * (log_a[i] - lse) } else { f64::NEG_INFINITY };
            }
            for j in 0..m {
                let lse = log_sum_exp((0..n).map(|i| (f[i] - problem.cost(i, j)) / eps));
                g[j] = if log_b[j].is_finite() { eps * (log_b[j] - lse) } else { f64::NEG_INFINITY };
            }
            iterations += 1;
            // Columns are exact after the g update; measure the rows.
            error = (0..n)
                .map(|i| {
                    let row: f64 = (0..m).map(|j| plan_entry(&f, &g, problem, i, j, eps)).sum();
                    (row - problem.source[i]).abs()
                })
                .sum();
            if error < stage_tol || iterations >= params.max_iter {
                break;
            }
        }
        if last_stage || iterations >= params.max_iter {
            break;
        }
        eps = (eps * 0.5).max(params.epsilon);
    }

    let mut distance = 0.0;
    for i in 0..n {
        for j in 0..m {
            distance += plan_entry(&f, &g, problem, i, j, eps) * problem.cost(i, j);
        }
    }
    Ok(SinkhornOutput {
        distance,
        iterations,
        converged: error < params.tol && eps <= params.epsilon,
        marginal_error: error,
    })
}

fn plan_entry(f: &[f64], g: &[f64], problem: &TransportProblem, i: usize, j: usize, eps: f64) -> f64 {
    if f[i] == f64::NEG_INFINITY || g[j] == f64::NEG_INFINITY {
        return 0.0;
    }
    ((f[i] + g[j] - problem.cost(i, j)) / eps).exp()
}
