//! Minimum-cost maximum-cardinality bipartite matching by successive
//! shortest augmenting paths with Johnson potentials.

use super::{Assignment, CostMatrix};

/// Per-call restrictions layered on top of a matrix's own gating.
#[derive(Debug, Clone, Default)]
pub(crate) struct Constraints {
    /// Pairs that must appear in the matching.
    pub fixed: Vec<(usize, usize)>,
    /// Extra forbidden cells, indexed `row * cols + col`.
    pub excluded: Vec<bool>,
}

impl Constraints {
    pub fn new(matrix: &CostMatrix) -> Self {
        Self {
            fixed: Vec::new(),
            excluded: vec![false; matrix.rows * matrix.cols],
        }
    }

    pub fn exclude(&mut self, matrix: &CostMatrix, row: usize, col: usize) {
        self.excluded[row * matrix.cols + col] = true;
    }

    fn allows(&self, matrix: &CostMatrix, row: usize, col: usize) -> bool {
        matrix.is_allowed(row, col) && !self.excluded[row * matrix.cols + col]
    }
}

struct Edge {
    to: usize,
    rev: usize,
    cap: u8,
    cost: f64,
}

struct Graph {
    adj: Vec<Vec<Edge>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Self {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge {
            to,
            rev: rev_from,
            cap: 1,
            cost,
        });
        self.adj[to].push(Edge {
            to: from,
            rev: rev_to,
            cap: 0,
            cost: -cost,
        });
    }
}

/// Solves the constrained problem. Returns `None` when a fixed pair is not
/// an allowed cell or fixed pairs collide.
pub(crate) fn solve(matrix: &CostMatrix, constraints: &Constraints) -> Option<Assignment> {
    let mut row_taken = vec![false; matrix.rows];
    let mut col_taken = vec![false; matrix.cols];
    for &(r, c) in &constraints.fixed {
        if row_taken[r] || col_taken[c] || !constraints.allows(matrix, r, c) {
            return None;
        }
        row_taken[r] = true;
        col_taken[c] = true;
    }

    let free_rows: Vec<usize> = (0..matrix.rows).filter(|&r| !row_taken[r]).collect();
    let free_cols: Vec<usize> = (0..matrix.cols).filter(|&c| !col_taken[c]).collect();
    let nr = free_rows.len();
    let nc = free_cols.len();
    // source 0, rows 1..=nr, cols nr+1..=nr+nc, sink nr+nc+1
    let source = 0;
    let sink = nr + nc + 1;
    let mut graph = Graph::new(nr + nc + 2);
    let mut potential = vec![0.0f64; nr + nc + 2];
    let mut col_reachable = vec![false; nc];
    for (i, &r) in free_rows.iter().enumerate() {
        graph.add_edge(source, 1 + i, 0.0);
        for (j, &c) in free_cols.iter().enumerate() {
            if constraints.allows(matrix, r, c) {
                let cost = matrix.cost_unchecked(r, c);
                graph.add_edge(1 + i, 1 + nr + j, cost);
                let node = 1 + nr + j;
                if !col_reachable[j] || cost < potential[node] {
                    potential[node] = cost;
                }
                col_reachable[j] = true;
            }
        }
    }
    let mut sink_potential: Option<f64> = None;
    for j in 0..nc {
        graph.add_edge(1 + nr + j, sink, 0.0);
        if col_reachable[j] {
            let p = potential[1 + nr + j];
            sink_potential = Some(sink_potential.map_or(p, |s: f64| s.min(p)));
        }
    }
    potential[sink] = sink_potential.unwrap_or(0.0);

    let n = graph.adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    loop {
        dist.fill(f64::INFINITY);
        done.fill(false);
        prev.fill(None);
        dist[source] = 0.0;
        loop {
            let mut best: Option<usize> = None;
            for v in 0..n {
                if !done[v] && dist[v].is_finite() && best.is_none_or(|b| dist[v] < dist[b]) {
                    best = Some(v);
                }
            }
            let Some(u) = best else { break };
            done[u] = true;
            if u == sink {
                break;
            }
            for (ei, e) in graph.adj[u].iter().enumerate() {
                if e.cap == 0 || done[e.to] {
                    continue;
                }
                let reduced = (e.cost + potential[u] - potential[e.to]).max(0.0);
                let nd = dist[u] + reduced;
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    prev[e.to] = Some((u, ei));
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let reach = dist[sink];
        for v in 0..n {
            potential[v] += dist[v].min(reach);
        }
        let mut v = sink;
        while let Some((u, ei)) = prev[v] {
            let rev = graph.adj[u][ei].rev;
            graph.adj[u][ei].cap -= 1;
            graph.adj[v][rev].cap += 1;
            v = u;
        }
    }

    let mut matches = constraints.fixed.clone();
    for (i, &r) in free_rows.iter().enumerate() {
        for e in &graph.adj[1 + i] {
            if e.cap == 0 && e.to > nr && e.to <= nr + nc {
                matches.push((r, free_cols[e.to - 1 - nr]));
            }
        }
    }
    Some(Assignment::from_matches(matrix, matches))
}

/// Optimal assignment: maximum cardinality over allowed cells, minimum total
/// cost among those, and the lexicographically smallest match set among
/// equal-cost optima.
pub fn hungarian(matrix: &CostMatrix) -> Assignment {
    let mut constraints = Constraints::new(matrix);
    let mut current = solve(matrix, &constraints).expect("unconstrained problem is feasible");
    let cardinality = current.cardinality();
    let optimum = current.total_cost;
    let tolerance = 1e-9 * optimum.abs().max(1.0);

    for row in 0..matrix.rows {
        let current_col = current.col_of(row);
        let upper = current_col.unwrap_or(matrix.cols);
        for col in 0..upper {
            if !constraints.allows(matrix, row, col) || constraints.fixed.iter().any(|&(_, c)| c == col) {
                continue;
            }
            constraints.fixed.push((row, col));
            let candidate = solve(matrix, &constraints);
            constraints.fixed.pop();
            if let Some(candidate) = candidate {
                if candidate.cardinality() == cardinality && candidate.total_cost <= optimum + tolerance {
                    current = candidate;
                    break;
                }
            }
        }
        match current.col_of(row) {
            Some(col) => constraints.fixed.push((row, col)),
            None => {
                for col in 0..matrix.cols {
                    constraints.exclude(matrix, row, col);
                }
            }
        }
    }
    current
}
