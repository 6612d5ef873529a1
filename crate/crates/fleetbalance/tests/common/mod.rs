//! Shared helpers for the integration suite: bundled scenario loading and
//! a small random instance generator kept inside the oracle's size limits.

#![allow(dead_code)]

use fleetbalance::scenario::{
    load_scenario, Bounds, IncentiveLevel, Relaxation, Scenario, Station, Vehicle, VehicleClass,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub fn scenario1() -> Scenario {
    load_scenario(Path::new("../../scenarios/scenario1.json")).unwrap()
}

pub fn scenario2() -> Scenario {
    load_scenario(Path::new("../../scenarios/scenario2.json")).unwrap()
}

/// Random scenario with at most 4 stations and 12 vehicles, bounds chosen
/// so total deficit and surplus stay within the exhaustive oracle's limits.
/// Instances are not guaranteed feasible.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4usize);
    let k = rng.gen_range(1..=12usize);

    let mut distances = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                distances[i][j] = rng.gen_range(1..=9) as f64;
            }
        }
    }

    let class = if rng.gen_bool(0.5) {
        VehicleClass::Car
    } else {
        VehicleClass::EBike
    };
    let relaxation = if class == VehicleClass::EBike && rng.gen_bool(0.5) {
        Relaxation::StaffVan
    } else {
        Relaxation::None
    };

    let vehicles: Vec<Vehicle> = (0..k)
        .map(|v| Vehicle {
            id: v as u32 + 1,
            station: rng.gen_range(1..=n) as u32,
            autonomy_km: rng.gen_range(0..=10) as f64,
            class,
        })
        .collect();

    let mut stocks = vec![0u32; n];
    for v in &vehicles {
        stocks[v.station as usize - 1] += 1;
    }

    // Per-station bounds are a window around the current stock, shifted a
    // little so some instances need moves. Deficits stay small by bounding
    // each station's shortfall at 2.
    let stations = (0..n)
        .map(|j| {
            let want = rng.gen_range(0..=2i64);
            let n_min = (stocks[j] as i64 + want - rng.gen_range(0..=2i64)).max(0) as u32;
            let n_max = n_min + rng.gen_range(0..=3u32);
            Station {
                id: j as u32 + 1,
                n_min: Some(n_min.min(k as u32)),
                n_max: Some(n_max.min(k as u32)),
            }
        })
        .collect();

    let levels = vec![
        IncentiveLevel { rate: 0.5, acceptance_rate: 0.01 },
        IncentiveLevel { rate: 0.8, acceptance_rate: 0.02 },
    ];

    Scenario {
        name: Some(format!("random-{seed}")),
        stations,
        defaults: Bounds { n_min: 0, n_max: k as u32 },
        vehicles,
        distances,
        cost_per_km: 1.0,
        user_population: 100,
        levels,
        relaxation,
        published: None,
    }
}

pub fn random_caps(seed: u64, n_levels: usize, max_cap: u32) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    (0..n_levels).map(|_| rng.gen_range(0..=max_cap)).collect()
}
