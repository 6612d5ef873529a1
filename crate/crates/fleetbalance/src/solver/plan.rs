//! Turning an optimal assignment into a physical relocation plan:
//! concrete vehicles, per-move costs and the post-relocation stocks.

use crate::feasibility::ExecutorClass;
use crate::milp::{BuildMode, MilpModel, ModelKind};
use crate::scenario::{Relaxation, Scenario};
use crate::solver::{SolveResult, SolveStatus};
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Executor {
    /// 1-based user incentive level.
    Level(u32),
    Staff,
}

impl fmt::Display for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Executor::Staff => f.write_str("staff"),
            Executor::Level(u) => write!(f, "level-{u}"),
        }
    }
}

impl Serialize for Executor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Move {
    pub vehicle: u32,
    pub from: u32,
    pub to: u32,
    pub executor: Executor,
    pub km: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Plan {
    pub moves: Vec<Move>,
    pub total_cost: f64,
    pub incentive_paid: f64,
    pub staff_cost: f64,
    pub final_stocks: Vec<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("no optimal solution to extract a plan from (status {0:?})")]
    NotOptimal(SolveStatus),
    #[error("no vehicle matching exists at station {station}")]
    Matching { station: u32 },
    #[error("extracted plan violates an invariant: {0}")]
    Inconsistent(String),
}

/// One unit of flow waiting for a concrete vehicle.
#[derive(Debug, Clone)]
pub(crate) struct Unit {
    pub to: usize,
    pub level: usize,
    pub executor: ExecutorClass,
    pub dist: f64,
}

/// Order units for matching: range-constrained units first, hardest
/// (longest) moves first, then van-relaxed staff units. Within a tier the
/// order is deterministic.
pub(crate) fn sort_units(units: &mut [Unit], relaxed: bool) {
    units.sort_by(|a, b| {
        let battery_a = a.executor == ExecutorClass::User || !relaxed;
        let battery_b = b.executor == ExecutorClass::User || !relaxed;
        battery_b
            .cmp(&battery_a)
            .then(b.dist.total_cmp(&a.dist))
            .then(a.level.cmp(&b.level))
            .then(a.to.cmp(&b.to))
    });
}

/// Match every unit at `origin` to a distinct vehicle stationed there.
///
/// Preference per unit: smallest sufficient autonomy (best fit), ties by
/// lowest vehicle id; van-relaxed staff units prefer vehicles that cannot
/// drive the arc themselves. When greedy choice dead-ends, assignments are
/// repaired along augmenting paths, so the matching is found whenever one
/// exists.
pub(crate) fn assign_station_units(
    s: &Scenario,
    origin: usize,
    units: &[Unit],
) -> Option<Vec<usize>> {
    let vehicles: Vec<usize> = s
        .vehicle_stations()
        .iter()
        .enumerate()
        .filter(|&(_, &home)| home == origin)
        .map(|(k, _)| k)
        .collect();
    let relaxed = s.relaxation == Relaxation::StaffVan;

    // Candidate vehicles per unit, in preference order.
    let candidates: Vec<Vec<usize>> = units
        .iter()
        .map(|unit| {
            let mut c: Vec<usize> = vehicles
                .iter()
                .copied()
                .filter(|&k| {
                    crate::feasibility::vehicle_usable(s, k, origin, unit.to, unit.executor)
                })
                .collect();
            let staff_van = unit.executor == ExecutorClass::Staff && relaxed;
            c.sort_by(|&a, &b| {
                if staff_van {
                    let drivable_a = s.vehicles[a].autonomy_km >= unit.dist;
                    let drivable_b = s.vehicles[b].autonomy_km >= unit.dist;
                    if drivable_a != drivable_b {
                        // Undrivable vehicles first: keep drivable ones home.
                        return drivable_a.cmp(&drivable_b);
                    }
                }
                s.vehicles[a]
                    .autonomy_km
                    .total_cmp(&s.vehicles[b].autonomy_km)
                    .then(s.vehicles[a].id.cmp(&s.vehicles[b].id))
            });
            c
        })
        .collect();

    let mut owner: HashMap<usize, usize> = HashMap::new(); // vehicle -> unit
    fn augment(
        unit: usize,
        candidates: &[Vec<usize>],
        owner: &mut HashMap<usize, usize>,
        visited: &mut Vec<usize>,
    ) -> bool {
        // Free candidates first, in preference order; only displace an
        // earlier assignment when no free vehicle remains.
        for &k in &candidates[unit] {
            if !visited.contains(&k) && !owner.contains_key(&k) {
                visited.push(k);
                owner.insert(k, unit);
                return true;
            }
        }
        for &k in &candidates[unit] {
            if visited.contains(&k) {
                continue;
            }
            visited.push(k);
            if let Some(holder) = owner.get(&k).copied() {
                if augment(holder, candidates, owner, visited) {
                    owner.insert(k, unit);
                    return true;
                }
            }
        }
        false
    }

    for unit in 0..units.len() {
        let mut visited = Vec::new();
        if !augment(unit, &candidates, &mut owner, &mut visited) {
            return None;
        }
    }
    let mut result = vec![usize::MAX; units.len()];
    for (k, unit) in owner {
        result[unit] = k;
    }
    Some(result)
}

/// Aggregate arc-level counts from a disaggregated assignment.
pub(crate) fn arc_counts(m: &MilpModel, assignment: &[f64]) -> Vec<((usize, usize, usize), u32)> {
    let meta = &m.metadata;
    let mut out = Vec::new();
    for i in 0..meta.n_stations {
        for j in 0..meta.n_stations {
            if i == j {
                continue;
            }
            for u in 0..meta.levels.len() {
                let total: f64 = (0..meta.n_vehicles)
                    .map(|k| assignment[meta.x_col(i, j, k, u)])
                    .sum();
                let count = total.round();
                if count > 0.0 {
                    out.push(((i, j, u), count as u32));
                }
            }
        }
    }
    out
}

/// Extract a physical relocation plan from an optimal solve.
pub fn extract_plan(r: &SolveResult, m: &MilpModel, s: &Scenario) -> Result<Plan, PlanError> {
    if r.status != SolveStatus::Optimal {
        return Err(PlanError::NotOptimal(r.status));
    }
    let meta = &m.metadata;
    let counts = arc_counts(m, &r.assignment);
    let relaxed = s.relaxation == Relaxation::StaffVan;

    let mut moves = Vec::new();
    for origin in 0..meta.n_stations {
        let mut units = Vec::new();
        for &((i, j, u), count) in &counts {
            if i != origin {
                continue;
            }
            for _ in 0..count {
                units.push(Unit {
                    to: j,
                    level: u,
                    executor: meta.levels[u].executor,
                    dist: s.distance(i, j),
                });
            }
        }
        if units.is_empty() {
            continue;
        }
        sort_units(&mut units, relaxed);
        let matched = assign_station_units(s, origin, &units).ok_or(PlanError::Matching {
            station: s.stations[origin].id,
        })?;
        for (unit, &k) in units.iter().zip(&matched) {
            let level = &meta.levels[unit.level];
            let executor = match level.executor {
                ExecutorClass::Staff => Executor::Staff,
                ExecutorClass::User => Executor::Level(unit.level as u32 + 1),
            };
            moves.push(Move {
                vehicle: s.vehicles[k].id,
                from: s.stations[origin].id,
                to: s.stations[unit.to].id,
                executor,
                km: unit.dist,
                cost: level.rate * s.cost_per_km * unit.dist,
            });
        }
    }
    moves.sort_by(|a, b| {
        (a.from, a.to, a.executor, a.vehicle).cmp(&(b.from, b.to, b.executor, b.vehicle))
    });

    let incentive_paid: f64 = moves
        .iter()
        .filter(|mv| mv.executor != Executor::Staff)
        .map(|mv| mv.cost)
        .sum();
    let staff_cost: f64 = moves
        .iter()
        .filter(|mv| mv.executor == Executor::Staff)
        .map(|mv| mv.cost)
        .sum();
    let final_stocks: Vec<u32> = (0..meta.n_stations)
        .map(|j| r.assignment[meta.stock_col(j)].round() as u32)
        .collect();

    let plan = Plan {
        moves,
        total_cost: incentive_paid + staff_cost,
        incentive_paid,
        staff_cost,
        final_stocks,
    };
    verify_plan(&plan, s, meta.mode == BuildMode::Physical || meta.kind == ModelKind::Ilp1)
        .map_err(PlanError::Inconsistent)?;
    Ok(plan)
}

/// Check every plan invariant; returns a description of the first failure.
pub fn verify_plan(plan: &Plan, s: &Scenario, _physical: bool) -> Result<(), String> {
    let n = s.station_count();
    let stocks = s.stock_counts();
    let mut inflow = vec![0u32; n];
    let mut outflow = vec![0u32; n];
    let mut seen_vehicles = std::collections::HashSet::new();
    for mv in &plan.moves {
        let from = s
            .station_index(mv.from)
            .ok_or_else(|| format!("move references unknown station {}", mv.from))?;
        let to = s
            .station_index(mv.to)
            .ok_or_else(|| format!("move references unknown station {}", mv.to))?;
        let k = s
            .vehicle_index(mv.vehicle)
            .ok_or_else(|| format!("move references unknown vehicle {}", mv.vehicle))?;
        if !seen_vehicles.insert(mv.vehicle) {
            return Err(format!("vehicle {} moves more than once", mv.vehicle));
        }
        if s.vehicles[k].station != mv.from {
            return Err(format!(
                "vehicle {} does not start at station {}",
                mv.vehicle, mv.from
            ));
        }
        let executor_class = match mv.executor {
            Executor::Staff => ExecutorClass::Staff,
            Executor::Level(_) => ExecutorClass::User,
        };
        if !crate::feasibility::vehicle_usable(s, k, from, to, executor_class) {
            return Err(format!(
                "vehicle {} cannot execute move {} -> {} as {}",
                mv.vehicle, mv.from, mv.to, mv.executor
            ));
        }
        inflow[to] += 1;
        outflow[from] += 1;
    }
    for j in 0..n {
        let expected = stocks[j] + inflow[j] - outflow[j].min(stocks[j] + inflow[j]);
        if stocks[j] + inflow[j] < outflow[j] {
            return Err(format!("station {} outflow exceeds its stock", j + 1));
        }
        if plan.final_stocks[j] != expected {
            return Err(format!(
                "station {} stock {} does not match flows (expected {})",
                j + 1,
                plan.final_stocks[j],
                expected
            ));
        }
        let b = s.bounds(j);
        if plan.final_stocks[j] < b.n_min || plan.final_stocks[j] > b.n_max {
            return Err(format!(
                "station {} stock {} outside [{}, {}]",
                j + 1,
                plan.final_stocks[j],
                b.n_min,
                b.n_max
            ));
        }
    }
    let sum: f64 = plan.incentive_paid + plan.staff_cost;
    if (plan.total_cost - sum).abs() > 1e-9 * sum.abs().max(1.0) {
        return Err("cost accounting identity violated".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{build_ilp1, BuildMode};
    use crate::scenario::load_scenario;
    use crate::solver::solve;
    use std::path::Path;

    fn scenario1() -> Scenario {
        load_scenario(Path::new("../../scenarios/scenario1.json")).unwrap()
    }

    #[test]
    fn staff_plan_picks_the_only_feasible_vehicles() {
        let s = scenario1();
        let m = build_ilp1(&s, BuildMode::Physical);
        let plan = extract_plan(&solve(&m), &m, &s).unwrap();
        let s6 = plan.moves.iter().find(|mv| mv.from == 6).unwrap();
        assert_eq!((s6.vehicle, s6.to), (60, 4));
        let s1 = plan.moves.iter().find(|mv| mv.from == 1).unwrap();
        assert_eq!((s1.vehicle, s1.to), (1, 5));
        assert_eq!(plan.final_stocks, vec![17, 10, 5, 5, 5, 18]);
        assert!((plan.total_cost - 34.0).abs() < 1e-9);
        assert!(plan.incentive_paid == 0.0);
    }

    #[test]
    fn verification_rejects_a_reused_vehicle() {
        let s = scenario1();
        let m = build_ilp1(&s, BuildMode::Physical);
        let mut plan = extract_plan(&solve(&m), &m, &s).unwrap();
        let copy = plan.moves[0].clone();
        plan.moves.push(copy);
        assert!(verify_plan(&plan, &s, true)
            .unwrap_err()
            .contains("more than once"));
    }

    #[test]
    fn verification_rejects_a_misplaced_vehicle() {
        let s = scenario1();
        let m = build_ilp1(&s, BuildMode::Physical);
        let mut plan = extract_plan(&solve(&m), &m, &s).unwrap();
        plan.moves[0].vehicle = 33; // lives at S3, not at this move's origin
        assert!(verify_plan(&plan, &s, true)
            .unwrap_err()
            .contains("does not start"));
    }

    #[test]
    fn executor_serialization() {
        assert_eq!(serde_json::to_string(&Executor::Staff).unwrap(), "\"staff\"");
        assert_eq!(serde_json::to_string(&Executor::Level(2)).unwrap(), "\"level-2\"");
    }
}
