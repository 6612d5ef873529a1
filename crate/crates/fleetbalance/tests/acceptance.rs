//! End-to-end acceptance checks over the two bundled scenarios plus
//! randomized cross-validation. Each test prints one PASS line.

mod common;

use common::{random_caps, random_scenario, scenario1, scenario2};
use fleetbalance::incentive::{derive_caps, run_rounds, AcceptanceKind, AcceptanceModel};
use fleetbalance::milp::{build_ilp1, build_ilp2, BuildMode, ModelKind};
use fleetbalance::report::build_report;
use fleetbalance::solver::{
    brute_force, extract_plan, solve, verify_plan, OracleOutcome, Plan, SolveStatus,
};

const EPS: f64 = 1e-6;

fn plan_for(s: &fleetbalance::scenario::Scenario, caps: Option<&[u32]>) -> (f64, Plan) {
    let m = match caps {
        None => build_ilp1(s, BuildMode::Physical),
        Some(c) => build_ilp2(s, c, BuildMode::Physical).unwrap(),
    };
    let r = solve(&m);
    assert_eq!(r.status, SolveStatus::Optimal);
    (r.objective, extract_plan(&r, &m, s).unwrap())
}

fn arc_multiset(plan: &Plan) -> Vec<(u32, u32)> {
    let mut arcs: Vec<(u32, u32)> = plan.moves.iter().map(|mv| (mv.from, mv.to)).collect();
    arcs.sort();
    arcs
}

#[test]
fn criterion_01_staff_only_baseline() {
    let s = scenario1();
    let (rc, plan) = plan_for(&s, None);
    assert!((rc - 34.0).abs() < EPS);
    assert_eq!(plan.final_stocks, vec![17, 10, 5, 5, 5, 18]);
    assert_eq!(plan.moves.len(), 6);
    println!("criterion 01: PASS staff-only cost 34.0 with stocks 17 10 5 5 5 18");
}

#[test]
fn criterion_02_incentive_augmented_cost() {
    let s = scenario1();
    let caps = derive_caps(s.user_population, &s.levels);
    assert_eq!(caps, vec![1, 1, 2]);
    let (rci, plan) = plan_for(&s, Some(&caps));
    assert!((rci - 26.0).abs() < EPS);
    assert!((plan.incentive_paid - 20.0).abs() < EPS);
    assert!((plan.staff_cost - 6.0).abs() < EPS);
    let reduction = 100.0 * (34.0 - rci) / 34.0;
    assert!((reduction - 23.5).abs() < 0.05);
    println!("criterion 02: PASS incentive-augmented cost 26.0 (20.0 incentives + 6.0 staff, 23.5% down)");
}

#[test]
fn criterion_03_same_relocation_arcs() {
    let s = scenario1();
    let (_, p1) = plan_for(&s, None);
    let (_, p2) = plan_for(&s, Some(&[1, 1, 2]));
    let arcs = arc_multiset(&p1);
    assert_eq!(arcs, arc_multiset(&p2));
    assert_eq!(arcs, vec![(1, 5), (2, 3), (2, 3), (2, 3), (2, 5), (6, 4)]);
    println!("criterion 03: PASS both models pick the same six arcs");
}

#[test]
fn criterion_04_second_scenario_staff_cost() {
    let s = scenario2();
    let (rc, plan) = plan_for(&s, None);
    assert!((rc - 25.0).abs() < EPS);
    verify_plan(&plan, &s, true).unwrap();
    println!("criterion 04: PASS staff-only cost 25.0 under the van relaxation");
}

#[test]
fn criterion_05_second_scenario_incentives() {
    let s = scenario2();
    let caps = derive_caps(s.user_population, &s.levels);
    let (rci, plan) = plan_for(&s, Some(&caps));
    assert!(rci <= 25.0 + EPS);
    match brute_force(&s, ModelKind::Ilp2, &caps).unwrap() {
        OracleOutcome::Optimal(v) => assert!((rci - v).abs() < EPS),
        other => panic!("oracle disagreed: {other:?}"),
    }
    assert!((rci - (plan.incentive_paid + plan.staff_cost)).abs() < EPS);
    let report = build_report(&s, BuildMode::Physical).unwrap();
    assert!(report.notes.iter().any(|n| n.contains("RCI")));
    println!(
        "criterion 05: PASS incentive-augmented cost {rci:.1} verified by enumeration; report flags the reference-table mismatch"
    );
}

#[test]
fn criterion_06_model_dimensions() {
    let s = scenario1();
    let d = build_ilp1(&s, BuildMode::Faithful).dimensions();
    assert_eq!(d.variables, 2166);
    assert_eq!(d.constraints, 48);
    assert_eq!(d.binaries, 2160);
    assert_eq!(d.integers, 6);
    println!("criterion 06: PASS per-vehicle build has 2166 variables and 48 constraints");
}

#[test]
fn criterion_07_oracle_equivalence() {
    let s = scenario1();
    assert_eq!(brute_force(&s, ModelKind::Ilp1, &[]).unwrap(), OracleOutcome::Optimal(34.0));
    assert_eq!(
        brute_force(&s, ModelKind::Ilp2, &[1, 1, 2]).unwrap(),
        OracleOutcome::Optimal(26.0)
    );
    let mut checked = 0;
    for seed in 0..260u64 {
        let s = random_scenario(seed);
        let caps = random_caps(seed, 2, 3);
        for (kind, caps) in [(ModelKind::Ilp1, &[][..]), (ModelKind::Ilp2, &caps[..])] {
            let m = match kind {
                ModelKind::Ilp1 => build_ilp1(&s, BuildMode::Physical),
                ModelKind::Ilp2 => build_ilp2(&s, caps, BuildMode::Physical).unwrap(),
            };
            let r = solve(&m);
            match brute_force(&s, kind, caps).unwrap() {
                OracleOutcome::Optimal(v) => {
                    assert_eq!(r.status, SolveStatus::Optimal, "seed {seed} {kind:?}");
                    assert!((r.objective - v).abs() < EPS, "seed {seed} {kind:?}: {} vs {v}", r.objective);
                }
                OracleOutcome::Infeasible => {
                    assert_eq!(r.status, SolveStatus::Infeasible, "seed {seed} {kind:?}")
                }
            }
            checked += 1;
        }
    }
    assert!(checked >= 200);
    println!("criterion 07: PASS solver matches exhaustive enumeration on {checked} random instances");
}

#[test]
fn criterion_08_order_properties() {
    for seed in 1000..1050u64 {
        let s = random_scenario(seed);
        let caps = random_caps(seed, 2, 3);
        let r1 = solve(&build_ilp1(&s, BuildMode::Physical));
        let r2 = solve(&build_ilp2(&s, &caps, BuildMode::Physical).unwrap());
        assert_eq!(r1.status, r2.status, "seed {seed}");
        if r1.status != SolveStatus::Optimal {
            continue;
        }
        assert!(r2.objective <= r1.objective + EPS, "seed {seed}");
        let mut bigger = caps.clone();
        for c in &mut bigger {
            *c += 1;
        }
        let r3 = solve(&build_ilp2(&s, &bigger, BuildMode::Physical).unwrap());
        assert!(r3.objective <= r2.objective + EPS, "seed {seed}");
        let mut scaled = s.clone();
        scaled.cost_per_km *= 3.0;
        let r4 = solve(&build_ilp1(&scaled, BuildMode::Physical));
        assert!((r4.objective - 3.0 * r1.objective).abs() <= 1e-9 * r4.objective.abs().max(1.0));
    }
    println!("criterion 08: PASS incentive dominance, cap monotonicity and cost-rate scaling on 50 instances");
}

#[test]
fn criterion_09_process_consistency() {
    let s = scenario1();
    let det = AcceptanceModel {
        kind: AcceptanceKind::DeterministicCaps,
        probabilities: Vec::new(),
        defection_probability: 0.0,
        seed: 0,
    };
    let (log, _) = run_rounds(&s, &det, BuildMode::Physical).unwrap();
    assert!((log.realized_cost - 26.0).abs() < EPS);
    let none = AcceptanceModel {
        kind: AcceptanceKind::Bernoulli,
        probabilities: vec![0.0, 0.0, 0.0],
        defection_probability: 0.0,
        seed: 0,
    };
    let (log0, _) = run_rounds(&s, &none, BuildMode::Physical).unwrap();
    assert!((log0.realized_cost - 34.0).abs() < EPS);
    assert_eq!(log0.staff_fallback, 6);
    println!("criterion 09: PASS bid process reproduces 26.0 at the derived caps and 34.0 with no takers");
}

#[test]
fn criterion_10_plan_physicality() {
    for (s, caps) in [
        (scenario1(), vec![1, 1, 2]),
        (scenario2(), derive_caps(scenario2().user_population, &scenario2().levels)),
    ] {
        for caps in [None, Some(&caps[..])] {
            let (obj, plan) = plan_for(&s, caps);
            verify_plan(&plan, &s, true).unwrap();
            assert!((plan.total_cost - obj).abs() < EPS);
            let mut seen = std::collections::HashSet::new();
            for mv in &plan.moves {
                assert!(seen.insert(mv.vehicle), "vehicle moved twice");
                let k = s.vehicle_index(mv.vehicle).unwrap();
                assert_eq!(s.vehicles[k].station, mv.from);
            }
        }
    }
    println!("criterion 10: PASS every plan is executable move for move");
}
