//! Real-valued maximum flow (Dinic) and the bipartite transportation
//! feasibility problem built on it.
//!
//! Capacities are `f64`. Residual capacities at or below [`EPS`] are treated
//! as saturated so that rounding noise never opens a phantom augmenting path.

use std::collections::VecDeque;

/// Residual threshold below which an edge counts as saturated.
pub const EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: f64,
}

#[derive(Debug, Clone)]
pub struct MaxFlow {
    graph: Vec<Vec<Edge>>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

/// Handle to an edge returned by [`MaxFlow::add_edge`].
#[derive(Debug, Clone, Copy)]
pub struct EdgeId {
    from: usize,
    index: usize,
}

impl MaxFlow {
    pub fn new(nodes: usize) -> Self {
        Self { graph: vec![Vec::new(); nodes], level: vec![0; nodes], iter: vec![0; nodes] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> EdgeId {
        let index = self.graph[from].len();
        let rev = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, rev, cap });
        self.graph[to].push(Edge { to: from, rev: index, cap: 0.0 });
        EdgeId { from, index }
    }

    /// Flow currently routed through `edge`.
    pub fn flow(&self, edge: EdgeId) -> f64 {
        let e = &self.graph[edge.from][edge.index];
        self.graph[e.to][e.rev].cap.max(0.0)
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > EPS && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: f64) -> f64 {
        if v == t {
            return pushed;
        }
        while self.iter[v] < self.graph[v].len() {
            let i = self.iter[v];
            let (to, cap) = (self.graph[v][i].to, self.graph[v][i].cap);
            if cap > EPS && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > 0.0 {
                    self.graph[v][i].cap -= d;
                    let rev = self.graph[v][i].rev;
                    self.graph[to][rev].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Result of a transportation feasibility solve.
#[derive(Debug, Clone)]
pub struct Transport {
    /// Total mass routed from supplies to demands.
    pub routed: f64,
    /// Mass on each admissible edge, in the order the edges were given.
    pub flows: Vec<f64>,
}

/// Routes as much of `supply` onto `demand` as the admissible edges allow.
///
/// `edges` holds `(row, col, capacity)`; use `f64::INFINITY` for an
/// uncapacitated edge.
pub fn transport(supply: &[f64], demand: &[f64], edges: &[(usize, usize, f64)]) -> Transport {
    let rows = supply.len();
    let cols = demand.len();
    let source = rows + cols;
    let sink = source + 1;
    let mut net = MaxFlow::new(rows + cols + 2);
    for (r, &s) in supply.iter().enumerate() {
        net.add_edge(source, r, s);
    }
    for (c, &d) in demand.iter().enumerate() {
        net.add_edge(rows + c, sink, d);
    }
    let ids: Vec<EdgeId> = edges.iter().map(|&(r, c, cap)| net.add_edge(r, rows + c, cap)).collect();
    let routed = net.max_flow(source, sink);
    let flows = ids.iter().map(|&id| net.flow(id)).collect();
    Transport { routed, flows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_network() {
        // CLRS figure 26.1, max flow 23.
        let mut g = MaxFlow::new(6);
        for &(u, v, c) in &[
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 3, 12.0),
            (2, 1, 4.0),
            (2, 4, 14.0),
            (3, 2, 9.0),
            (3, 5, 20.0),
            (4, 3, 7.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c);
        }
        assert!((g.max_flow(0, 5) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_transport_is_exact() {
        let supply = [0.3, 0.7];
        let demand = [0.5, 0.5];
        let edges = [(0, 0, f64::INFINITY), (1, 0, f64::INFINITY), (1, 1, f64::INFINITY)];
        let t = transport(&supply, &demand, &edges);
        assert!((t.routed - 1.0).abs() < 1e-15);
        assert!((t.flows[0] - 0.3).abs() < 1e-15);
        assert!((t.flows[1] - 0.2).abs() < 1e-15);
        assert!((t.flows[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn infeasible_transport_reports_deficit() {
        let t = transport(&[1.0, 0.0], &[0.0, 1.0], &[(0, 0, f64::INFINITY)]);
        assert_eq!(t.routed, 0.0);
    }
}
