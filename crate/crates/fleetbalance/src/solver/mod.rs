//! Exact solving: LP relaxation, branch and bound, the exhaustive
//! reference search, and plan extraction.

pub mod branch_bound;
pub mod brute_force;
pub mod plan;
pub mod simplex;

pub use brute_force::{brute_force, OracleError, OracleOutcome};
pub use plan::{extract_plan, verify_plan, Executor, Move, Plan, PlanError};

use crate::milp::{BuildMode, MilpModel};
use branch_bound::{solve_milp, MilpStatus};
use serde::Serialize;
use simplex::{LpProblem, LpStatus};

pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    /// Values for every variable of the model that was solved, in
    /// declaration order. Empty unless the status is optimal.
    pub assignment: Vec<f64>,
    pub nodes_explored: usize,
    pub proof_gap: f64,
}

/// Solve a model exactly with the default node budget.
pub fn solve(m: &MilpModel) -> SolveResult {
    solve_with_limit(m, DEFAULT_NODE_LIMIT)
}

/// Solve a model exactly. When the model carries an aggregation, branch
/// and bound runs on the reduced arc-flow formulation and the result is
/// lifted back to the per-vehicle variables.
pub fn solve_with_limit(m: &MilpModel, node_limit: usize) -> SolveResult {
    let outcome = match &m.metadata.aggregation {
        Some(agg) => solve_milp(&agg.variables, &agg.constraints, node_limit),
        None => solve_milp(&m.variables, &m.constraints, node_limit),
    };
    let status = match outcome.status {
        MilpStatus::Optimal => SolveStatus::Optimal,
        MilpStatus::Infeasible => SolveStatus::Infeasible,
        MilpStatus::IterationLimit => SolveStatus::IterationLimit,
    };
    let assignment = if status == SolveStatus::Optimal {
        match &m.metadata.aggregation {
            Some(_) => lift(m, &outcome.values),
            None => outcome.values,
        }
    } else {
        Vec::new()
    };
    SolveResult {
        status,
        objective: outcome.objective,
        assignment,
        nodes_explored: outcome.nodes_explored,
        proof_gap: outcome.proof_gap,
    }
}

/// Expand a reduced arc-flow solution into per-vehicle variables.
fn lift(m: &MilpModel, reduced: &[f64]) -> Vec<f64> {
    let meta = &m.metadata;
    let agg = meta.aggregation.as_ref().unwrap();
    let mut assignment = vec![0.0; m.variables.len()];
    for j in 0..meta.n_stations {
        assignment[meta.stock_col(j)] = reduced[agg.stock_offset + j].round();
    }
    match meta.mode {
        BuildMode::Faithful => {
            // Any members of the group will do; take the first ones.
            for (g, group) in agg.groups.iter().enumerate() {
                let y = reduced[g].round() as usize;
                for &col in group.original_cols.iter().take(y) {
                    assignment[col] = 1.0;
                }
            }
        }
        BuildMode::Physical => {
            // Distinct vehicles per station. Candidate vehicles per unit of
            // flow come straight from the group; the matching rows of the
            // reduced model guarantee an assignment exists.
            for origin in 0..meta.n_stations {
                let mut unit_groups = Vec::new();
                for (g, group) in agg.groups.iter().enumerate() {
                    if group.from != origin {
                        continue;
                    }
                    let y = reduced[g].round() as usize;
                    unit_groups.extend(std::iter::repeat(g).take(y));
                }
                if unit_groups.is_empty() {
                    continue;
                }
                let candidates: Vec<&[usize]> = unit_groups
                    .iter()
                    .map(|&g| agg.groups[g].usable_vehicles.as_slice())
                    .collect();
                let matched = match_units(&candidates)
                    .expect("matching rows guarantee a station assignment");
                for (unit, &k) in matched.iter().enumerate() {
                    let group = &agg.groups[unit_groups[unit]];
                    assignment[meta.x_col(origin, group.to, k, group.level)] = 1.0;
                }
            }
        }
    }
    assignment
}

/// Bipartite matching of units to candidate vehicles by augmenting paths.
fn match_units(candidates: &[&[usize]]) -> Option<Vec<usize>> {
    use std::collections::HashMap;
    fn augment(
        unit: usize,
        candidates: &[&[usize]],
        owner: &mut HashMap<usize, usize>,
        visited: &mut Vec<usize>,
    ) -> bool {
        for &k in candidates[unit] {
            if visited.contains(&k) {
                continue;
            }
            visited.push(k);
            match owner.get(&k).copied() {
                None => {
                    owner.insert(k, unit);
                    return true;
                }
                Some(holder) => {
                    if augment(holder, candidates, owner, visited) {
                        owner.insert(k, unit);
                        return true;
                    }
                }
            }
        }
        false
    }
    let mut owner = HashMap::new();
    for unit in 0..candidates.len() {
        let mut visited = Vec::new();
        if !augment(unit, candidates, &mut owner, &mut visited) {
            return None;
        }
    }
    let mut result = vec![usize::MAX; candidates.len()];
    for (k, unit) in owner {
        result[unit] = k;
    }
    Some(result)
}

#[derive(Debug, Clone)]
pub struct Relaxed {
    pub status: SolveStatus,
    pub objective: f64,
    pub assignment: Vec<f64>,
}

/// Solve the continuous relaxation of the model, optionally overriding
/// variable bounds with `fixings` of `(column, lower, upper)`.
pub fn solve_lp_relaxation(m: &MilpModel, fixings: &[(usize, f64, f64)]) -> Relaxed {
    let n = m.variables.len();
    let obj: Vec<f64> = m.variables.iter().map(|v| v.objective).collect();
    let mut lower: Vec<f64> = m.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = m.variables.iter().map(|v| v.upper).collect();
    for &(col, lo, hi) in fixings {
        lower[col] = lo;
        upper[col] = hi;
    }
    let lp = LpProblem::new(n, obj, lower, upper, &m.constraints);
    match lp.solve() {
        Ok(sol) => Relaxed {
            status: match sol.status {
                LpStatus::Optimal => SolveStatus::Optimal,
                LpStatus::Infeasible => SolveStatus::Infeasible,
            },
            objective: sol.objective,
            assignment: sol.values,
        },
        Err(_) => Relaxed {
            status: SolveStatus::IterationLimit,
            objective: f64::NEG_INFINITY,
            assignment: Vec::new(),
        },
    }
}

/// Explain why no staff-only rebalancing can exist, in terms of station
/// stocks and per-arc feasible counts. Empty when no certificate is found.
pub fn infeasibility_notes(s: &crate::scenario::Scenario) -> Vec<String> {
    let n = s.station_count();
    let stocks = s.stock_counts();
    let staff = crate::feasibility::feasibility_matrix(s).staff;
    let mut notes = Vec::new();
    for j in 0..n {
        let b = s.bounds(j);
        let max_in: u32 = (0..n).filter(|&i| i != j).map(|i| staff.per_arc[i][j]).sum();
        if stocks[j] + max_in < b.n_min {
            notes.push(format!(
                "station {}: stock {} plus at most {} feasible inbound vehicles cannot reach the minimum of {}",
                s.stations[j].id, stocks[j], max_in, b.n_min
            ));
        }
        let max_out: u32 = (0..n).filter(|&i| i != j).map(|i| staff.per_arc[j][i]).sum();
        if stocks[j] > b.n_max && stocks[j] - b.n_max > max_out {
            notes.push(format!(
                "station {}: stock {} exceeds the maximum of {} and only {} vehicles can feasibly leave",
                s.stations[j].id, stocks[j], b.n_max, max_out
            ));
        }
    }
    let total: u32 = stocks.iter().sum();
    let min_sum: u32 = (0..n).map(|j| s.bounds(j).n_min).sum();
    let max_sum: u32 = (0..n).map(|j| s.bounds(j).n_max).sum();
    if total < min_sum {
        notes.push(format!(
            "fleet of {} vehicles cannot satisfy the summed station minimum of {}",
            total, min_sum
        ));
    }
    if total > max_sum {
        notes.push(format!(
            "fleet of {} vehicles exceeds the summed station maximum of {}",
            total, max_sum
        ));
    }
    notes
}
