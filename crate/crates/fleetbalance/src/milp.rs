//! Integer-linear model representation and the builders for the two
//! relocation models.
//!
//! ILP1 plans staff-only relocation; ILP2 adds incentive levels with an
//! implicit staff fallback level at full cost. Each builder supports two
//! fidelity modes:
//!
//! * `Faithful` declares a binary per (origin, destination, vehicle
//!   [, level]) triple, including the diagonal, and constrains only
//!   aggregate arc counts. This reproduces the published dimension
//!   formulas but can ask more of a station than its vehicles can drive.
//! * `Physical` additionally pins to zero every variable whose vehicle
//!   is not at the origin or cannot execute the move, and limits each
//!   vehicle to at most one move. Plans extracted from this mode are
//!   always executable.
//!
//! Builders also attach an exact aggregation (arc-level integer flows plus
//! per-station matching constraints) that the solver uses to avoid the
//! vehicle-symmetry blowup of the disaggregated formulation.

use crate::feasibility::{vehicle_usable, ExecutorClass};
use crate::scenario::Scenario;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuildMode {
    Faithful,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ilp1,
    Ilp2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// (column, coefficient) pairs; columns are unique within a row.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// One executor rung of the model: the user levels in escalation order,
/// then the staff fallback at full cost.
#[derive(Debug, Clone, Copy)]
pub struct LevelSpec {
    pub rate: f64,
    pub cap: u32,
    pub executor: ExecutorClass,
}

/// Arc-level flow group used by the solver's exact aggregation.
#[derive(Debug, Clone)]
pub struct ArcGroup {
    pub from: usize,
    pub to: usize,
    /// Index into [`ModelMeta::levels`].
    pub level: usize,
    /// Columns of the disaggregated model this group sums.
    pub original_cols: Vec<usize>,
    /// Vehicles stationed at `from` that this level's executor can move
    /// along the arc.
    pub usable_vehicles: Vec<usize>,
}

/// Aggregated counterpart of the model: one integer flow per arc group,
/// plus the stock variables. Solving it is exactly equivalent to solving
/// the disaggregated model in the same mode.
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub groups: Vec<ArcGroup>,
    /// Reduced column of the first stock variable; group g lives at
    /// column g, stock j at `stock_offset + j`.
    pub stock_offset: usize,
}

#[derive(Debug, Clone)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub mode: BuildMode,
    pub scenario_digest: String,
    pub n_stations: usize,
    pub n_vehicles: usize,
    pub levels: Vec<LevelSpec>,
    pub aggregation: Option<Aggregation>,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub metadata: ModelMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dimensions {
    pub variables: usize,
    pub constraints: usize,
    pub binaries: usize,
    pub integers: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("caps vector has {got} entries but the scenario defines {expected} user levels")]
    CapsMismatch { got: usize, expected: usize },
}

impl ModelMeta {
    /// Column of x_{i,j,k[,u]} (all indices 0-based).
    pub fn x_col(&self, i: usize, j: usize, k: usize, u: usize) -> usize {
        let n_u = self.levels.len();
        ((i * self.n_stations + j) * self.n_vehicles + k) * n_u + u
    }

    /// Column of the post-relocation stock variable for station j.
    pub fn stock_col(&self, j: usize) -> usize {
        self.n_stations * self.n_stations * self.n_vehicles * self.levels.len() + j
    }
}

impl MilpModel {
    pub fn dimensions(&self) -> Dimensions {
        let binaries = self
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count();
        Dimensions {
            variables: self.variables.len(),
            constraints: self.constraints.len(),
            binaries,
            integers: self.variables.len() - binaries,
        }
    }

    /// Objective value of an assignment (one value per variable).
    pub fn objective_value(&self, assignment: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(assignment)
            .map(|(v, x)| v.objective * x)
            .sum()
    }

    /// Violation of each constraint by the assignment (0 when satisfied).
    pub fn constraint_violations(&self, assignment: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.terms.iter().map(|&(col, a)| a * assignment[col]).sum();
                match c.sense {
                    Sense::Le => (lhs - c.rhs).max(0.0),
                    Sense::Ge => (c.rhs - lhs).max(0.0),
                    Sense::Eq => (lhs - c.rhs).abs(),
                }
            })
            .collect()
    }
}

/// Build ILP1: staff-only relocation at full cost.
pub fn build_ilp1(s: &Scenario, mode: BuildMode) -> MilpModel {
    let levels = vec![LevelSpec {
        rate: 1.0,
        cap: s.vehicle_count() as u32,
        executor: ExecutorClass::Staff,
    }];
    build_model(s, ModelKind::Ilp1, levels, mode)
}

/// Build ILP2: user incentive levels capped by `caps` (one entry per user
/// level), with the staff fallback appended at full cost.
pub fn build_ilp2(s: &Scenario, caps: &[u32], mode: BuildMode) -> Result<MilpModel, BuildError> {
    if caps.len() != s.levels.len() {
        return Err(BuildError::CapsMismatch {
            got: caps.len(),
            expected: s.levels.len(),
        });
    }
    let mut levels: Vec<LevelSpec> = s
        .levels
        .iter()
        .zip(caps)
        .map(|(level, &cap)| LevelSpec {
            rate: level.rate,
            cap,
            executor: ExecutorClass::User,
        })
        .collect();
    levels.push(LevelSpec {
        rate: 1.0,
        cap: s.vehicle_count() as u32,
        executor: ExecutorClass::Staff,
    });
    Ok(build_model(s, ModelKind::Ilp2, levels, mode))
}

fn build_model(s: &Scenario, kind: ModelKind, levels: Vec<LevelSpec>, mode: BuildMode) -> MilpModel {
    let n = s.station_count();
    let n_k = s.vehicle_count();
    let n_u = levels.len();
    let homes = s.vehicle_stations();
    let stocks = s.stock_counts();

    let meta = ModelMeta {
        kind,
        mode,
        scenario_digest: s.digest(),
        n_stations: n,
        n_vehicles: n_k,
        levels: levels.clone(),
        aggregation: None,
    };

    let mut variables = Vec::with_capacity(n * n * n_k * n_u + n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n_k {
                for (u, level) in levels.iter().enumerate() {
                    let objective = if i == j {
                        0.0
                    } else {
                        level.rate * s.cost_per_km * s.distance(i, j)
                    };
                    let movable = i != j
                        && homes[k] == i
                        && vehicle_usable(s, k, i, j, level.executor);
                    let upper = match mode {
                        BuildMode::Faithful => 1.0,
                        BuildMode::Physical => {
                            if movable {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    let name = if kind == ModelKind::Ilp2 {
                        format!(
                            "x_{}_{}_{}_u{}",
                            i + 1,
                            j + 1,
                            s.vehicles[k].id,
                            u + 1
                        )
                    } else {
                        format!("x_{}_{}_{}", i + 1, j + 1, s.vehicles[k].id)
                    };
                    variables.push(Variable {
                        name,
                        kind: VarKind::Binary,
                        lower: 0.0,
                        upper,
                        objective,
                    });
                }
            }
        }
    }
    for j in 0..n {
        variables.push(Variable {
            name: format!("s_{}", j + 1),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: n_k as f64,
            objective: 0.0,
        });
    }

    let mut constraints = Vec::new();
    // Stock balance: s_j - inflow + outflow = s_hat_j. Diagonal variables
    // appear in both sums and cancel.
    for j in 0..n {
        let mut terms = vec![(meta.stock_col(j), 1.0)];
        for i in 0..n {
            if i == j {
                continue;
            }
            for k in 0..n_k {
                for u in 0..n_u {
                    terms.push((meta.x_col(i, j, k, u), -1.0));
                    terms.push((meta.x_col(j, i, k, u), 1.0));
                }
            }
        }
        constraints.push(Constraint {
            name: format!("balance_{}", j + 1),
            terms,
            sense: Sense::Eq,
            rhs: stocks[j] as f64,
        });
    }
    for j in 0..n {
        constraints.push(Constraint {
            name: format!("stock_max_{}", j + 1),
            terms: vec![(meta.stock_col(j), 1.0)],
            sense: Sense::Le,
            rhs: s.bounds(j).n_max as f64,
        });
    }
    for j in 0..n {
        constraints.push(Constraint {
            name: format!("stock_min_{}", j + 1),
            terms: vec![(meta.stock_col(j), 1.0)],
            sense: Sense::Ge,
            rhs: s.bounds(j).n_min as f64,
        });
    }
    // Per-arc (and per-level) feasible-vehicle caps.
    if n_k > 0 {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for (u, level) in levels.iter().enumerate() {
                    let cap = arc_feasible_count(s, &homes, i, j, level.executor);
                    let terms = (0..n_k).map(|k| (meta.x_col(i, j, k, u), 1.0)).collect();
                    let name = if kind == ModelKind::Ilp2 {
                        format!("arc_cap_{}_{}_u{}", i + 1, j + 1, u + 1)
                    } else {
                        format!("arc_cap_{}_{}", i + 1, j + 1)
                    };
                    constraints.push(Constraint {
                        name,
                        terms,
                        sense: Sense::Le,
                        rhs: cap as f64,
                    });
                }
            }
        }
    }
    // Global per-level caps (ILP2 only; vacuous for the staff level).
    if kind == ModelKind::Ilp2 {
        for (u, level) in levels.iter().enumerate() {
            let mut terms = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for k in 0..n_k {
                        terms.push((meta.x_col(i, j, k, u), 1.0));
                    }
                }
            }
            constraints.push(Constraint {
                name: format!("level_cap_u{}", u + 1),
                terms,
                sense: Sense::Le,
                rhs: level.cap as f64,
            });
        }
    }
    // One move per vehicle, from its own station.
    if mode == BuildMode::Physical {
        for k in 0..n_k {
            let i = homes[k];
            let mut terms = Vec::new();
            for j in 0..n {
                if j == i {
                    continue;
                }
                for u in 0..n_u {
                    terms.push((meta.x_col(i, j, k, u), 1.0));
                }
            }
            constraints.push(Constraint {
                name: format!("move_once_{}", s.vehicles[k].id),
                terms,
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }

    let mut model = MilpModel {
        variables,
        constraints,
        metadata: meta,
    };
    model.metadata.aggregation = Some(build_aggregation(s, &model, &homes, &stocks));
    model
}

fn arc_feasible_count(
    s: &Scenario,
    homes: &[usize],
    i: usize,
    j: usize,
    executor: ExecutorClass,
) -> u32 {
    homes
        .iter()
        .enumerate()
        .filter(|&(k, &home)| home == i && vehicle_usable(s, k, i, j, executor))
        .count() as u32
}

/// Build the arc-flow aggregation of the model.
///
/// Faithful mode: grouping binaries with identical columns is exact as is.
/// Physical mode: the per-vehicle structure is replaced by per-station
/// matching constraints in Hall form, which is exact because every
/// vehicle's reachable-destination set is an autonomy threshold set,
/// optionally unioned with the van-portable set.
fn build_aggregation(
    s: &Scenario,
    model: &MilpModel,
    homes: &[usize],
    stocks: &[u32],
) -> Aggregation {
    let meta = &model.metadata;
    let n = meta.n_stations;
    let n_k = meta.n_vehicles;
    let n_u = meta.levels.len();
    let mode = meta.mode;

    let mut groups = Vec::new();
    let mut variables = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for (u, level) in meta.levels.iter().enumerate() {
                let usable: Vec<usize> = (0..n_k)
                    .filter(|&k| homes[k] == i && vehicle_usable(s, k, i, j, level.executor))
                    .collect();
                let bound = match mode {
                    BuildMode::Faithful => n_k,
                    BuildMode::Physical => usable.len(),
                };
                let name = format!("y_{}_{}_u{}", i + 1, j + 1, u + 1);
                variables.push(Variable {
                    name,
                    kind: VarKind::Integer,
                    lower: 0.0,
                    upper: bound as f64,
                    objective: level.rate * s.cost_per_km * s.distance(i, j),
                });
                groups.push(ArcGroup {
                    from: i,
                    to: j,
                    level: u,
                    original_cols: (0..n_k).map(|k| meta.x_col(i, j, k, u)).collect(),
                    usable_vehicles: usable,
                });
            }
        }
    }
    let stock_offset = groups.len();
    for j in 0..n {
        variables.push(Variable {
            name: format!("s_{}", j + 1),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: n_k as f64,
            objective: 0.0,
        });
    }

    let group_col = |i: usize, j: usize, u: usize| -> usize {
        // Same lexicographic (i, j, u) order as the construction above.
        let arc = i * (n - 1) + if j > i { j - 1 } else { j };
        arc * n_u + u
    };

    let mut constraints = Vec::new();
    for j in 0..n {
        let mut terms = vec![(stock_offset + j, 1.0)];
        for i in 0..n {
            if i == j {
                continue;
            }
            for u in 0..n_u {
                terms.push((group_col(i, j, u), -1.0));
                terms.push((group_col(j, i, u), 1.0));
            }
        }
        constraints.push(Constraint {
            name: format!("balance_{}", j + 1),
            terms,
            sense: Sense::Eq,
            rhs: stocks[j] as f64,
        });
    }
    for j in 0..n {
        constraints.push(Constraint {
            name: format!("stock_max_{}", j + 1),
            terms: vec![(stock_offset + j, 1.0)],
            sense: Sense::Le,
            rhs: s.bounds(j).n_max as f64,
        });
        constraints.push(Constraint {
            name: format!("stock_min_{}", j + 1),
            terms: vec![(stock_offset + j, 1.0)],
            sense: Sense::Ge,
            rhs: s.bounds(j).n_min as f64,
        });
    }
    for (g, group) in groups.iter().enumerate() {
        let cap = arc_feasible_count(
            s,
            homes,
            group.from,
            group.to,
            meta.levels[group.level].executor,
        );
        constraints.push(Constraint {
            name: format!("arc_cap_{}_{}_u{}", group.from + 1, group.to + 1, group.level + 1),
            terms: vec![(g, 1.0)],
            sense: Sense::Le,
            rhs: cap as f64,
        });
    }
    if meta.kind == ModelKind::Ilp2 {
        for (u, level) in meta.levels.iter().enumerate() {
            let terms: Vec<(usize, f64)> = groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.level == u)
                .map(|(col, _)| (col, 1.0))
                .collect();
            constraints.push(Constraint {
                name: format!("level_cap_u{}", u + 1),
                terms,
                sense: Sense::Le,
                rhs: level.cap as f64,
            });
        }
    }
    if mode == BuildMode::Physical {
        // Per-station matching constraints: for every candidate vehicle set
        // N (an autonomy threshold set, optionally with the van-portable
        // set), the flows whose usable vehicles all lie inside N cannot
        // exceed |N|.
        for i in 0..n {
            let station_vehicles: Vec<usize> = (0..n_k).filter(|&k| homes[k] == i).collect();
            let station_groups: Vec<usize> = (0..groups.len())
                .filter(|&g| groups[g].from == i)
                .collect();
            if station_groups.is_empty() {
                continue;
            }
            let mut thresholds: Vec<f64> = vec![0.0];
            for j in 0..n {
                if j != i {
                    thresholds.push(s.distance(i, j));
                }
            }
            thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            thresholds.dedup();
            let portable: Vec<usize> = station_vehicles
                .iter()
                .copied()
                .filter(|&k| {
                    s.relaxation == crate::scenario::Relaxation::StaffVan
                        && s.vehicles[k].class.van_portable()
                })
                .collect();
            let mut seen_sets: Vec<Vec<usize>> = Vec::new();
            for &d in &thresholds {
                for with_portable in [false, true] {
                    let mut set: Vec<usize> = station_vehicles
                        .iter()
                        .copied()
                        .filter(|&k| {
                            s.vehicles[k].autonomy_km >= d
                                || (with_portable && portable.contains(&k))
                        })
                        .collect();
                    set.sort_unstable();
                    if seen_sets.contains(&set) {
                        continue;
                    }
                    seen_sets.push(set.clone());
                    let covered: Vec<usize> = station_groups
                        .iter()
                        .copied()
                        .filter(|&g| {
                            groups[g]
                                .usable_vehicles
                                .iter()
                                .all(|k| set.binary_search(k).is_ok())
                        })
                        .collect();
                    if covered.is_empty() {
                        continue;
                    }
                    constraints.push(Constraint {
                        name: format!("match_{}_{}", i + 1, seen_sets.len()),
                        terms: covered.into_iter().map(|g| (g, 1.0)).collect(),
                        sense: Sense::Le,
                        rhs: set.len() as f64,
                    });
                }
            }
        }
    }

    Aggregation {
        variables,
        constraints,
        groups,
        stock_offset,
    }
}

/// Render the model in LP text format for cross-checking with external
/// solvers.
pub fn write_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for v in &model.variables {
        if v.objective != 0.0 {
            let _ = write!(out, " {} {} {}", if first { "" } else { "+" }, v.objective, v.name);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        for (idx, &(col, coef)) in c.terms.iter().enumerate() {
            let sign = if coef >= 0.0 {
                if idx == 0 {
                    ""
                } else {
                    "+ "
                }
            } else {
                "- "
            };
            let _ = write!(out, " {}{} {}", sign, coef.abs(), model.variables[col].name);
        }
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {} {}", op, c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
    }
    out.push_str("Binary\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("General\n");
    for v in &model.variables {
        if v.kind == VarKind::Integer {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    out
}
