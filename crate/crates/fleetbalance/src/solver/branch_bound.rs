//! Best-bound branch-and-bound over the bounded-variable simplex.

use crate::milp::{Constraint, Variable};
use crate::solver::simplex::{LpProblem, LpStatus};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub nodes_explored: usize,
    pub proof_gap: f64,
}

struct Node {
    bound: f64,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for best-first (lowest bound),
        // breaking ties by insertion order for determinism.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact minimization of an all-integer model. Every variable is branched
/// on; continuous relaxations are solved by the bounded simplex.
pub fn solve_milp(
    variables: &[Variable],
    constraints: &[Constraint],
    node_limit: usize,
) -> MilpOutcome {
    let n = variables.len();
    let obj: Vec<f64> = variables.iter().map(|v| v.objective).collect();
    let lower: Vec<f64> = variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = variables.iter().map(|v| v.upper).collect();
    let lp = LpProblem::new(n, obj, lower.clone(), upper.clone(), constraints);

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: next_id,
        lower,
        upper,
    });
    next_id += 1;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes_explored = 0usize;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - gap_eps(*best) {
                continue;
            }
        }
        if nodes_explored >= node_limit {
            hit_limit = true;
            // Put the node back so the remaining bound is reported honestly.
            heap.push(node);
            break;
        }
        nodes_explored += 1;
        if node.lower.iter().zip(&node.upper).any(|(l, u)| l > u) {
            continue;
        }
        let sol = match lp.solve_with_bounds(&node.lower, &node.upper) {
            Ok(sol) => sol,
            Err(_) => {
                // Numerical trouble on a subproblem: treat as unexplored.
                hit_limit = true;
                break;
            }
        };
        if sol.status == LpStatus::Infeasible {
            continue;
        }
        if let Some((best, _)) = &incumbent {
            if sol.objective >= best - gap_eps(*best) {
                continue;
            }
        }
        // Branching variable: most fractional, ties by lowest column.
        let mut branch: Option<(usize, f64)> = None;
        for (col, &v) in sol.values.iter().enumerate() {
            let frac = (v - v.round()).abs();
            if frac > INT_TOL {
                let score = frac.min(1.0 - frac);
                match branch {
                    Some((_, best_score)) if best_score >= score => {}
                    _ => branch = Some((col, score)),
                }
            }
        }
        match branch {
            None => {
                let snapped: Vec<f64> = sol.values.iter().map(|v| v.round()).collect();
                let objective: f64 = variables
                    .iter()
                    .zip(&snapped)
                    .map(|(v, x)| v.objective * x)
                    .sum();
                match &incumbent {
                    Some((best, _)) if *best <= objective => {}
                    _ => incumbent = Some((objective, snapped)),
                }
            }
            Some((col, _)) => {
                let v = sol.values[col];
                let mut down = Node {
                    bound: sol.objective,
                    id: next_id,
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                };
                next_id += 1;
                down.upper[col] = v.floor();
                heap.push(down);
                let mut up = Node {
                    bound: sol.objective,
                    id: next_id,
                    lower: node.lower,
                    upper: node.upper,
                };
                next_id += 1;
                up.lower[col] = v.ceil();
                heap.push(up);
            }
        }
    }

    let best_open_bound = heap
        .peek()
        .map(|n| n.bound)
        .unwrap_or(f64::INFINITY);
    match incumbent {
        Some((objective, values)) => {
            let proof_gap = (objective - best_open_bound).max(0.0);
            let proof_gap = if proof_gap.is_finite() { proof_gap } else { 0.0 };
            MilpOutcome {
                status: if hit_limit {
                    MilpStatus::IterationLimit
                } else {
                    MilpStatus::Optimal
                },
                objective,
                values,
                nodes_explored,
                proof_gap,
            }
        }
        None => MilpOutcome {
            status: if hit_limit {
                MilpStatus::IterationLimit
            } else {
                MilpStatus::Infeasible
            },
            objective: f64::INFINITY,
            values: Vec::new(),
            nodes_explored,
            proof_gap: f64::INFINITY,
        },
    }
}

fn gap_eps(best: f64) -> f64 {
    1e-9 * best.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Constraint, Sense, VarKind, Variable};

    fn binary(name: &str, objective: f64) -> Variable {
        Variable { name: name.into(), kind: VarKind::Binary, lower: 0.0, upper: 1.0, objective }
    }

    #[test]
    fn rounds_a_fractional_relaxation() {
        // min -3x - 2y subject to x + y <= 1.5; LP optimum is fractional.
        let vars = [binary("x", -3.0), binary("y", -2.0)];
        let cons = [Constraint {
            name: "cap".into(),
            terms: vec![(0, 1.0), (1, 1.0)],
            sense: Sense::Le,
            rhs: 1.5,
        }];
        let out = solve_milp(&vars, &cons, 1000);
        assert_eq!(out.status, MilpStatus::Optimal);
        assert!((out.objective + 3.0).abs() < 1e-9);
        assert_eq!(out.values, vec![1.0, 0.0]);
        assert!(out.proof_gap <= 1e-9);
    }

    #[test]
    fn integer_infeasibility_is_proven() {
        // 2x = 1 has no binary solution.
        let vars = [binary("x", 1.0)];
        let cons = [Constraint {
            name: "odd".into(),
            terms: vec![(0, 2.0)],
            sense: Sense::Eq,
            rhs: 1.0,
        }];
        let out = solve_milp(&vars, &cons, 1000);
        assert_eq!(out.status, MilpStatus::Infeasible);
    }

    #[test]
    fn zero_node_budget_reports_the_limit() {
        let vars = [binary("x", -1.0)];
        let out = solve_milp(&vars, &[], 0);
        assert_eq!(out.status, MilpStatus::IterationLimit);
    }

    #[test]
    fn general_integers_branch_too() {
        // min x subject to 3x >= 7, x integer in [0, 10] -> x = 3.
        let vars = [Variable {
            name: "x".into(),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: 10.0,
            objective: 1.0,
        }];
        let cons = [Constraint {
            name: "ge".into(),
            terms: vec![(0, 3.0)],
            sense: Sense::Ge,
            rhs: 7.0,
        }];
        let out = solve_milp(&vars, &cons, 1000);
        assert_eq!(out.status, MilpStatus::Optimal);
        assert_eq!(out.values, vec![3.0]);
    }
}
