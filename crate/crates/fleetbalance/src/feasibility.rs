//! Battery feasibility: which vehicles can physically reach which stations,
//! and per-arc counts of usable vehicles for each executor class.
//!
//! A vehicle at station `i` can drive to `j` iff its remaining range covers
//! the distance, boundary included. Under the staff-van relaxation, staff
//! may additionally move van-portable vehicles with no range requirement.

use crate::scenario::{Relaxation, Scenario};
use serde::Serialize;

/// Who performs a move. User moves always require battery feasibility;
/// staff moves honor the scenario's relaxation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorClass {
    Staff,
    User,
}

/// Per-vehicle and per-arc feasibility for one executor class.
#[derive(Debug, Clone, Serialize)]
pub struct ExecutorTable {
    /// `per_vehicle[k][j]`: can vehicle `k` (list index) be moved to
    /// station `j` (list index) by this executor.
    pub per_vehicle: Vec<Vec<bool>>,
    /// `per_arc[i][j]`: count of vehicles at `i` usable for the arc
    /// `(i, j)`. Diagonal entries are zero.
    pub per_arc: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityTable {
    pub policy: Relaxation,
    pub staff: ExecutorTable,
    pub user: ExecutorTable,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FeasibilityError {
    #[error("unknown vehicle id {0}")]
    UnknownVehicle(u32),
    #[error("unknown station id {0}")]
    UnknownStation(u32),
    #[error("arc from station {0} to itself is not a relocation")]
    SelfArc(u32),
}

/// Can vehicle `vehicle_id` reach station `station_id` on battery alone.
pub fn battery_feasible(
    vehicle_id: u32,
    station_id: u32,
    s: &Scenario,
) -> Result<bool, FeasibilityError> {
    let k = s
        .vehicle_index(vehicle_id)
        .ok_or(FeasibilityError::UnknownVehicle(vehicle_id))?;
    let j = s
        .station_index(station_id)
        .ok_or(FeasibilityError::UnknownStation(station_id))?;
    let i = s
        .station_index(s.vehicles[k].station)
        .ok_or(FeasibilityError::UnknownStation(s.vehicles[k].station))?;
    Ok(s.vehicles[k].autonomy_km - s.distance(i, j) >= 0.0)
}

/// Whether the executor can move the vehicle at `from_idx` to `to_idx`,
/// by station/vehicle list indices.
pub fn vehicle_usable(
    s: &Scenario,
    vehicle_idx: usize,
    from_idx: usize,
    to_idx: usize,
    executor: ExecutorClass,
) -> bool {
    let v = &s.vehicles[vehicle_idx];
    let on_battery = v.autonomy_km - s.distance(from_idx, to_idx) >= 0.0;
    match executor {
        ExecutorClass::User => on_battery,
        ExecutorClass::Staff => {
            on_battery || (s.relaxation == Relaxation::StaffVan && v.class.van_portable())
        }
    }
}

/// Count of vehicles at station `from_id` the executor can move to `to_id`.
pub fn feasible_count(
    from_id: u32,
    to_id: u32,
    executor: ExecutorClass,
    s: &Scenario,
) -> Result<u32, FeasibilityError> {
    if from_id == to_id {
        return Err(FeasibilityError::SelfArc(from_id));
    }
    let i = s
        .station_index(from_id)
        .ok_or(FeasibilityError::UnknownStation(from_id))?;
    let j = s
        .station_index(to_id)
        .ok_or(FeasibilityError::UnknownStation(to_id))?;
    let count = s
        .vehicles
        .iter()
        .enumerate()
        .filter(|(k, v)| {
            s.station_index(v.station) == Some(i) && vehicle_usable(s, *k, i, j, executor)
        })
        .count();
    Ok(count as u32)
}

fn executor_table(s: &Scenario, executor: ExecutorClass) -> ExecutorTable {
    let n = s.station_count();
    let homes = s.vehicle_stations();
    let per_vehicle: Vec<Vec<bool>> = (0..s.vehicle_count())
        .map(|k| {
            (0..n)
                .map(|j| vehicle_usable(s, k, homes[k], j, executor))
                .collect()
        })
        .collect();
    let mut per_arc = vec![vec![0u32; n]; n];
    for (k, home) in homes.iter().enumerate() {
        for j in 0..n {
            if j != *home && per_vehicle[k][j] {
                per_arc[*home][j] += 1;
            }
        }
    }
    ExecutorTable {
        per_vehicle,
        per_arc,
    }
}

/// Build complete feasibility tables for both executor classes.
pub fn feasibility_matrix(s: &Scenario) -> FeasibilityTable {
    FeasibilityTable {
        policy: s.relaxation,
        staff: executor_table(s, ExecutorClass::Staff),
        user: executor_table(s, ExecutorClass::User),
    }
}
