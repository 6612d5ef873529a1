//! Exhaustive reference search over arc-level flows. Independent of the
//! simplex and branch-and-bound code paths on purpose: it agrees with them
//! only if both are right.

use crate::feasibility::{vehicle_usable, ExecutorClass};
use crate::milp::ModelKind;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleOutcome {
    Optimal(f64),
    Infeasible,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("expected {expected} level caps, got {got}")]
    CapsMismatch { expected: usize, got: usize },
}

const NODE_BUDGET: u64 = 50_000_000;
const EPS: f64 = 1e-9;

struct Arc {
    from: usize,
    to: usize,
    level: usize,
    cost: f64,
    usable: Vec<usize>,
}

struct Search<'a> {
    s: &'a Scenario,
    arcs: Vec<Arc>,
    n: usize,
    level_caps: Vec<u32>,
    stocks: Vec<u32>,
    n_min: Vec<u32>,
    n_max: Vec<u32>,
    /// Cheapest future arc into / out of each station, by arc index suffix.
    min_in_cost: Vec<Vec<f64>>,
    min_out_cost: Vec<Vec<f64>>,
    /// Remaining usable-vehicle capacity into / out of each station.
    cap_in: Vec<Vec<u32>>,
    cap_out: Vec<Vec<u32>>,
    flows: Vec<u32>,
    inflow: Vec<u32>,
    outflow: Vec<u32>,
    level_used: Vec<u32>,
    best: f64,
    nodes: u64,
    exhausted: bool,
}

/// Exact objective value by depth-first enumeration of arc flows with
/// admissible lower-bound pruning and per-station matching checks.
///
/// Intended for desk-scale instances: at most 6 stations and small
/// stock imbalances. Larger inputs are refused rather than left running.
pub fn brute_force(
    s: &Scenario,
    kind: ModelKind,
    caps: &[u32],
) -> Result<OracleOutcome, OracleError> {
    let n = s.station_count();
    if n > 6 {
        return Err(OracleError::TooLarge(format!("{n} stations")));
    }
    let stocks = s.stock_counts();
    let deficit: u32 = (0..n)
        .map(|j| s.bounds(j).n_min.saturating_sub(stocks[j]))
        .sum();
    let surplus: u32 = (0..n)
        .map(|j| stocks[j].saturating_sub(s.bounds(j).n_max))
        .sum();
    if deficit > 6 || surplus > 6 {
        return Err(OracleError::TooLarge(format!(
            "stock imbalance of {} below minimum and {} above maximum",
            deficit, surplus
        )));
    }

    let levels: Vec<(f64, u32, ExecutorClass)> = match kind {
        ModelKind::Ilp1 => vec![(1.0, s.vehicle_count() as u32, ExecutorClass::Staff)],
        ModelKind::Ilp2 => {
            if caps.len() != s.levels.len() {
                return Err(OracleError::CapsMismatch {
                    expected: s.levels.len(),
                    got: caps.len(),
                });
            }
            let mut v: Vec<(f64, u32, ExecutorClass)> = s
                .levels
                .iter()
                .zip(caps)
                .map(|(l, &cap)| (l.rate, cap, ExecutorClass::User))
                .collect();
            v.push((1.0, s.vehicle_count() as u32, ExecutorClass::Staff));
            v
        }
    };

    let homes = s.vehicle_stations();
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for (u, &(rate, _, executor)) in levels.iter().enumerate() {
                let usable: Vec<usize> = (0..s.vehicle_count())
                    .filter(|&k| homes[k] == i && vehicle_usable(s, k, i, j, executor))
                    .collect();
                if usable.is_empty() {
                    continue;
                }
                arcs.push(Arc {
                    from: i,
                    to: j,
                    level: u,
                    cost: rate * s.cost_per_km * s.distance(i, j),
                    usable,
                });
            }
        }
    }

    let p_max = arcs.len() + 1;
    let mut min_in_cost = vec![vec![f64::INFINITY; n]; p_max];
    let mut min_out_cost = vec![vec![f64::INFINITY; n]; p_max];
    let mut cap_in = vec![vec![0u32; n]; p_max];
    let mut cap_out = vec![vec![0u32; n]; p_max];
    for p in (0..arcs.len()).rev() {
        for j in 0..n {
            min_in_cost[p][j] = min_in_cost[p + 1][j];
            min_out_cost[p][j] = min_out_cost[p + 1][j];
            cap_in[p][j] = cap_in[p + 1][j];
            cap_out[p][j] = cap_out[p + 1][j];
        }
        let a = &arcs[p];
        min_in_cost[p][a.to] = min_in_cost[p][a.to].min(a.cost);
        min_out_cost[p][a.from] = min_out_cost[p][a.from].min(a.cost);
        cap_in[p][a.to] += a.usable.len() as u32;
        cap_out[p][a.from] += a.usable.len() as u32;
    }

    let n_min: Vec<u32> = (0..n).map(|j| s.bounds(j).n_min).collect();
    let n_max: Vec<u32> = (0..n).map(|j| s.bounds(j).n_max).collect();
    let mut search = Search {
        s,
        n,
        level_caps: levels.iter().map(|&(_, cap, _)| cap).collect(),
        stocks,
        n_min,
        n_max,
        min_in_cost,
        min_out_cost,
        cap_in,
        cap_out,
        flows: vec![0; arcs.len()],
        inflow: vec![0; n],
        outflow: vec![0; n],
        level_used: vec![0; levels.len()],
        best: f64::INFINITY,
        nodes: 0,
        exhausted: false,
        arcs,
    };
    search.best = search.greedy_incumbent().unwrap_or(f64::INFINITY);
    search.dfs(0, 0.0);
    if search.exhausted {
        return Err(OracleError::TooLarge(format!(
            "search abandoned after {NODE_BUDGET} nodes"
        )));
    }
    if search.best.is_finite() {
        Ok(OracleOutcome::Optimal(search.best))
    } else {
        Ok(OracleOutcome::Infeasible)
    }
}

impl Search<'_> {
    fn dfs(&mut self, p: usize, cost: f64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            self.exhausted = true;
            return;
        }
        if !self.promising(p, cost) {
            return;
        }
        if p == self.arcs.len() {
            if self.feasible_leaf() && cost < self.best - EPS {
                self.best = cost;
            }
            return;
        }
        let arc_cost = self.arcs[p].cost;
        let from = self.arcs[p].from;
        let level = self.arcs[p].level;
        let max_flow = (self.arcs[p].usable.len() as u32)
            .min(self.level_caps[level] - self.level_used[level])
            .min(self.stocks[from].saturating_sub(self.outflow[from]));
        let group_ends = p + 1 == self.arcs.len() || self.arcs[p + 1].from != from;
        for y in 0..=max_flow {
            self.flows[p] = y;
            self.outflow[from] += y;
            self.inflow[self.arcs[p].to] += y;
            self.level_used[level] += y;
            if !group_ends || self.origin_matchable(from) {
                self.dfs(p + 1, cost + arc_cost * y as f64);
            }
            self.outflow[from] -= y;
            self.inflow[self.arcs[p].to] -= y;
            self.level_used[level] -= y;
            if self.exhausted {
                break;
            }
        }
        self.flows[p] = 0;
    }

    /// Admissible lower bound on the completion cost; false means prune.
    /// One future move can serve both a deficit and an excess, so the two
    /// per-station sums are combined with max, not added.
    fn promising(&self, p: usize, cost: f64) -> bool {
        let mut lb_in = 0.0;
        let mut lb_out = 0.0;
        for j in 0..self.n {
            let current = self.stocks[j] + self.inflow[j];
            let needed = (self.n_min[j] + self.outflow[j]).saturating_sub(current);
            if needed > 0 {
                if needed > self.cap_in[p][j] {
                    return false;
                }
                lb_in += needed as f64 * self.min_in_cost[p][j];
            }
            let excess = current.saturating_sub(self.n_max[j] + self.outflow[j]);
            if excess > 0 {
                if excess > self.cap_out[p][j] {
                    return false;
                }
                lb_out += excess as f64 * self.min_out_cost[p][j];
            }
        }
        cost + lb_in.max(lb_out) < self.best - EPS
    }

    fn feasible_leaf(&self) -> bool {
        (0..self.n).all(|j| {
            let stock = self.stocks[j] + self.inflow[j] - self.outflow[j];
            stock >= self.n_min[j] && stock <= self.n_max[j]
        })
    }

    /// Can the nonzero flows out of `origin` be served by distinct vehicles.
    fn origin_matchable(&self, origin: usize) -> bool {
        let mut candidates: Vec<&[usize]> = Vec::new();
        for (p, arc) in self.arcs.iter().enumerate() {
            if arc.from == origin {
                for _ in 0..self.flows[p] {
                    candidates.push(&arc.usable);
                }
            }
        }
        let mut owner: std::collections::HashMap<usize, usize> = Default::default();
        fn augment(
            unit: usize,
            candidates: &[&[usize]],
            owner: &mut std::collections::HashMap<usize, usize>,
            visited: &mut Vec<usize>,
        ) -> bool {
            for &k in candidates[unit] {
                if visited.contains(&k) {
                    continue;
                }
                visited.push(k);
                let holder = owner.get(&k).copied();
                match holder {
                    None => {
                        owner.insert(k, unit);
                        return true;
                    }
                    Some(h) => {
                        if augment(h, candidates, owner, visited) {
                            owner.insert(k, unit);
                            return true;
                        }
                    }
                }
            }
            false
        }
        for unit in 0..candidates.len() {
            let mut visited = Vec::new();
            if !augment(unit, &candidates, &mut owner, &mut visited) {
                return false;
            }
        }
        true
    }

    /// A quick feasible repair gives the search a finite starting incumbent.
    fn greedy_incumbent(&self) -> Option<f64> {
        let homes = self.s.vehicle_stations();
        let mut assigned = vec![false; self.s.vehicle_count()];
        let mut stocks = self.stocks.clone();
        let mut level_used = vec![0u32; self.level_caps.len()];
        let mut total = 0.0;
        loop {
            let deficit = (0..self.n).find(|&j| stocks[j] < self.n_min[j]);
            let surplus = (0..self.n).find(|&j| stocks[j] > self.n_max[j]);
            let (target, want_in) = match (deficit, surplus) {
                (Some(j), _) => (j, true),
                (None, Some(j)) => (j, false),
                (None, None) => return Some(total),
            };
            // Cheapest single feasible move that helps the target station.
            let mut pick: Option<(f64, usize, usize)> = None; // cost, arc, vehicle
            for (p, arc) in self.arcs.iter().enumerate() {
                let helps = if want_in {
                    arc.to == target && stocks[arc.from] > self.n_min[arc.from]
                } else {
                    arc.from == target && stocks[arc.to] < self.n_max[arc.to]
                };
                if !helps || level_used[arc.level] >= self.level_caps[arc.level] {
                    continue;
                }
                let vehicle = arc
                    .usable
                    .iter()
                    .copied()
                    .find(|&k| !assigned[k] && homes[k] == arc.from);
                if let Some(k) = vehicle {
                    if pick.as_ref().map_or(true, |&(c, _, _)| arc.cost < c - EPS) {
                        pick = Some((arc.cost, p, k));
                    }
                }
            }
            let (cost, p, k) = pick?;
            assigned[k] = true;
            stocks[self.arcs[p].from] -= 1;
            stocks[self.arcs[p].to] += 1;
            level_used[self.arcs[p].level] += 1;
            total += cost;
        }
    }
}
