//! Minimum-cost flow on small real-valued networks.
//!
//! Successive shortest paths with Bellman-Ford (queue based) searches, so
//! negative arc costs are allowed as long as no negative cycle has infinite
//! capacity. Used for flat norms, boundary patching and separable cell
//! problems.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

/// A flow network with node supplies (positive = source).
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    supply: Vec<f64>,
    // Arc 2i is the forward arc i, arc 2i+1 its residual twin.
    arcs: Vec<Arc>,
    from: Vec<usize>,
}

/// Optimal flow on every arc, its cost, and node potentials certifying
/// optimality (reduced costs are nonnegative on every residual arc).
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub flows: Vec<f64>,
    pub cost: f64,
    pub potentials: Vec<f64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            supply: vec![0.0; nodes],
            arcs: Vec::new(),
            from: Vec::new(),
        }
    }

    pub fn add_node(&mut self) -> usize {
        self.supply.push(0.0);
        self.supply.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.supply.len()
    }

    pub fn add_supply(&mut self, v: usize, s: f64) {
        self.supply[v] += s;
    }

    /// Adds an arc and returns its id; `cap` may be infinite.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let id = self.arcs.len() / 2;
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
        self.from.push(from);
        self.from.push(to);
        id
    }

    pub fn solve(mut self) -> Result<FlowSolution> {
        let nn = self.supply.len();
        let narcs = self.arcs.len() / 2;
        let mut flow = vec![0.0; narcs];
        let mut excess = self.supply.clone();
        let total: f64 = excess.iter().sum();
        if total.abs() > 1e-9 * (1.0 + excess.iter().map(|x| x.abs()).sum::<f64>()) {
            return Err(Error::Infeasible(format!(
                "supplies do not balance (sum {total:e})"
            )));
        }
        for i in 0..narcs {
            let a = self.arcs[2 * i];
            if a.cost < 0.0 {
                if !a.cap.is_finite() {
                    return Err(Error::Infeasible(
                        "negative-cost arc with unbounded capacity".into(),
                    ));
                }
                flow[i] = a.cap;
                self.arcs[2 * i].cap = 0.0;
                self.arcs[2 * i + 1].cap = a.cap;
                excess[self.from[2 * i]] -= a.cap;
                excess[a.to] += a.cap;
            }
        }

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
        for (k, &f) in self.from.iter().enumerate() {
            adj[f].push(k);
        }

        loop {
            let sources: Vec<usize> = (0..nn).filter(|&v| excess[v] > EPS).collect();
            if sources.is_empty() {
                break;
            }
            let (dist, pred) = self.shortest_paths(&adj, &sources);
            let target = (0..nn)
                .filter(|&v| excess[v] < -EPS && dist[v].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
            let Some(target) = target else {
                return Err(Error::Infeasible("excess cannot reach any deficit".into()));
            };
            let mut bottleneck = -excess[target];
            let mut v = target;
            while let Some(k) = pred[v] {
                bottleneck = bottleneck.min(self.arcs[k].cap);
                v = self.from[k];
            }
            bottleneck = bottleneck.min(excess[v]);
            let mut v = target;
            while let Some(k) = pred[v] {
                self.arcs[k].cap -= bottleneck;
                self.arcs[k ^ 1].cap += bottleneck;
                if k % 2 == 0 {
                    flow[k / 2] += bottleneck;
                } else {
                    flow[k / 2] -= bottleneck;
                }
                v = self.from[k];
            }
            excess[v] -= bottleneck;
            excess[target] += bottleneck;
        }

        let cost = (0..narcs).map(|i| flow[i] * self.arcs[2 * i].cost).sum();
        let all: Vec<usize> = (0..nn).collect();
        let (potentials, _) = self.shortest_paths(&adj, &all);
        Ok(FlowSolution {
            flows: flow,
            cost,
            potentials,
        })
    }

    fn shortest_paths(
        &self,
        adj: &[Vec<usize>],
        roots: &[usize],
    ) -> (Vec<f64>, Vec<Option<usize>>) {
        let nn = self.supply.len();
        let mut dist = vec![f64::INFINITY; nn];
        let mut pred = vec![None; nn];
        let mut queued = vec![false; nn];
        let mut queue = VecDeque::new();
        for &r in roots {
            dist[r] = 0.0;
            queued[r] = true;
            queue.push_back(r);
        }
        let mut pops = 0usize;
        let limit = nn.saturating_mul(self.arcs.len().max(1)).saturating_add(nn);
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            pops += 1;
            if pops > limit {
                break;
            }
            for &k in &adj[u] {
                let a = self.arcs[k];
                if a.cap <= EPS {
                    continue;
                }
                let nd = dist[u] + a.cost;
                if nd < dist[a.to] - 1e-13 * (1.0 + nd.abs()) {
                    dist[a.to] = nd;
                    pred[a.to] = Some(k);
                    if !queued[a.to] {
                        queued[a.to] = true;
                        queue.push_back(a.to);
                    }
                }
            }
        }
        (dist, pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_cheaper_route() {
        let mut g = FlowNetwork::new(3);
        g.add_supply(0, 2.0);
        g.add_supply(2, -2.0);
        let direct = g.add_arc(0, 2, f64::INFINITY, 5.0);
        let a = g.add_arc(0, 1, 1.0, 1.0);
        let b = g.add_arc(1, 2, f64::INFINITY, 1.0);
        let s = g.solve().unwrap();
        assert!((s.flows[a] - 1.0).abs() < 1e-12);
        assert!((s.flows[b] - 1.0).abs() < 1e-12);
        assert!((s.flows[direct] - 1.0).abs() < 1e-12);
        assert!((s.cost - 7.0).abs() < 1e-12);
    }

    #[test]
    fn negative_cycle_is_saturated() {
        let mut g = FlowNetwork::new(2);
        let a = g.add_arc(0, 1, 3.0, -2.0);
        let b = g.add_arc(1, 0, f64::INFINITY, 1.0);
        let s = g.solve().unwrap();
        assert!((s.flows[a] - 3.0).abs() < 1e-12);
        assert!((s.flows[b] - 3.0).abs() < 1e-12);
        assert!((s.cost + 3.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_deficit_is_infeasible() {
        let mut g = FlowNetwork::new(2);
        g.add_supply(0, 1.0);
        g.add_supply(1, -1.0);
        g.add_arc(1, 0, 1.0, 1.0);
        assert!(matches!(g.solve(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn potentials_certify_optimality() {
        let mut g = FlowNetwork::new(4);
        g.add_supply(0, 1.0);
        g.add_supply(3, -1.0);
        g.add_arc(0, 1, 1.0, 1.0);
        g.add_arc(0, 2, 1.0, 2.0);
        g.add_arc(1, 3, 1.0, 1.0);
        g.add_arc(2, 3, 1.0, 0.5);
        let s = g.solve().unwrap();
        assert!((s.cost - 2.0).abs() < 1e-12);
        assert!(s.potentials.iter().all(|p| p.is_finite()));
    }
}
