//! The escalating incentive-bid process: cap derivation, deterministic
//! round simulation and stochastic acceptance with defections.

use crate::milp::{build_ilp1, build_ilp2, BuildMode};
use crate::scenario::{IncentiveLevel, Scenario};
use crate::solver::{extract_plan, solve, Executor, Plan, SolveStatus};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Binomial, Distribution};
use serde::Serialize;

/// Per-level ceiling on user-relocatable vehicles: floor(N_c * r_u).
pub fn derive_caps(n_c: u32, levels: &[IncentiveLevel]) -> Vec<u32> {
    levels
        .iter()
        .map(|l| (n_c as f64 * l.acceptance_rate).floor() as u32)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptanceKind {
    DeterministicCaps,
    Bernoulli,
}

#[derive(Debug, Clone)]
pub struct AcceptanceModel {
    pub kind: AcceptanceKind,
    /// Per-level acceptance probability, bernoulli kind only.
    pub probabilities: Vec<f64>,
    /// Probability an accepting user delivers to a wrong station.
    pub defection_probability: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Round {
    pub level: u32,
    pub offered: u32,
    pub acceptances: u32,
    pub defections: u32,
    pub filled: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundLog {
    pub rounds: Vec<Round>,
    /// Moves executed by staff after the last user level.
    pub staff_fallback: u32,
    pub realized_cost: f64,
    pub realized_incentives: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ProcessError {
    #[error("staff-only model is infeasible, no required-move set exists")]
    Infeasible,
    #[error("incentive rates must strictly increase across levels")]
    NonIncreasingRates,
    #[error("probability out of [0, 1]: {0}")]
    BadProbability(f64),
    #[error("expected {expected} per-level probabilities, got {got}")]
    ProbabilityCount { expected: usize, got: usize },
    #[error("plan extraction failed: {0}")]
    Plan(#[from] crate::solver::PlanError),
}

fn check(s: &Scenario, acc: &AcceptanceModel) -> Result<(), ProcessError> {
    for pair in s.levels.windows(2) {
        if pair[1].rate <= pair[0].rate {
            return Err(ProcessError::NonIncreasingRates);
        }
    }
    if acc.kind == AcceptanceKind::Bernoulli {
        if acc.probabilities.len() != s.levels.len() {
            return Err(ProcessError::ProbabilityCount {
                expected: s.levels.len(),
                got: acc.probabilities.len(),
            });
        }
        for &p in &acc.probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(ProcessError::BadProbability(p));
            }
        }
    }
    if !(0.0..=1.0).contains(&acc.defection_probability) {
        return Err(ProcessError::BadProbability(acc.defection_probability));
    }
    Ok(())
}

/// Simulate the bid process. Deterministic-caps delegates to the
/// incentive-augmented optimization, so process and optimizer agree by
/// construction; bernoulli draws per-round acceptance counts instead.
pub fn run_rounds(
    s: &Scenario,
    acc: &AcceptanceModel,
    mode: BuildMode,
) -> Result<(RoundLog, Plan), ProcessError> {
    check(s, acc)?;
    match acc.kind {
        AcceptanceKind::DeterministicCaps => run_deterministic(s, mode),
        AcceptanceKind::Bernoulli => run_bernoulli(s, acc, mode),
    }
}

fn run_deterministic(s: &Scenario, mode: BuildMode) -> Result<(RoundLog, Plan), ProcessError> {
    let caps = derive_caps(s.user_population, &s.levels);
    let m = build_ilp2(s, &caps, mode).expect("caps derived from the scenario's own levels");
    let r = solve(&m);
    if r.status != SolveStatus::Optimal {
        return Err(ProcessError::Infeasible);
    }
    let plan = extract_plan(&r, &m, s)?;
    let total = plan.moves.len() as u32;
    let mut remaining = total;
    let mut rounds = Vec::new();
    for u in 0..s.levels.len() as u32 {
        let filled = plan
            .moves
            .iter()
            .filter(|mv| mv.executor == Executor::Level(u + 1))
            .count() as u32;
        rounds.push(Round {
            level: u + 1,
            offered: remaining,
            acceptances: filled,
            defections: 0,
            filled,
        });
        remaining -= filled;
    }
    let log = RoundLog {
        rounds,
        staff_fallback: remaining,
        realized_cost: plan.total_cost,
        realized_incentives: plan.incentive_paid,
    };
    Ok((log, plan))
}

fn run_bernoulli(
    s: &Scenario,
    acc: &AcceptanceModel,
    mode: BuildMode,
) -> Result<(RoundLog, Plan), ProcessError> {
    let m = build_ilp1(s, mode);
    let r = solve(&m);
    if r.status != SolveStatus::Optimal {
        return Err(ProcessError::Infeasible);
    }
    let staff_plan = extract_plan(&r, &m, s)?;

    let mut rng = ChaCha8Rng::seed_from_u64(acc.seed);
    let defect = Bernoulli::new(acc.defection_probability).expect("validated");

    // Unfilled pool, kept sorted by descending staff cost so accepted users
    // always take the most expensive remaining move.
    let mut pool: Vec<usize> = (0..staff_plan.moves.len()).collect();
    pool.sort_by(|&a, &b| {
        staff_plan.moves[b]
            .cost
            .total_cmp(&staff_plan.moves[a].cost)
            .then(a.cmp(&b))
    });

    let mut moves = Vec::new();
    let mut rounds = Vec::new();
    let mut realized_incentives = 0.0;
    for (u, level) in s.levels.iter().enumerate() {
        let offered = pool.len() as u32;
        let accepted = Binomial::new(s.user_population as u64, acc.probabilities[u])
            .expect("validated")
            .sample(&mut rng)
            .min(pool.len() as u64) as u32;
        let mut defections = 0;
        let mut filled = 0;
        let mut defected_back = Vec::new();
        for _ in 0..accepted {
            if pool.is_empty() {
                break;
            }
            let idx = pool.remove(0);
            if defect.sample(&mut rng) {
                // Wrong station: no incentive paid, the move goes back to
                // pending for a later level or the staff fallback.
                defections += 1;
                defected_back.push(idx);
                continue;
            }
            filled += 1;
            let staff_mv = &staff_plan.moves[idx];
            let cost = level.rate * s.cost_per_km * staff_mv.km;
            realized_incentives += cost;
            moves.push(crate::solver::Move {
                executor: Executor::Level(u as u32 + 1),
                cost,
                ..staff_mv.clone()
            });
        }
        pool.extend(defected_back);
        pool.sort_by(|&a, &b| {
            staff_plan.moves[b]
                .cost
                .total_cmp(&staff_plan.moves[a].cost)
                .then(a.cmp(&b))
        });
        rounds.push(Round {
            level: u as u32 + 1,
            offered,
            acceptances: accepted,
            defections,
            filled,
        });
    }
    let staff_fallback = pool.len() as u32;
    let mut staff_cost = 0.0;
    for &idx in &pool {
        staff_cost += staff_plan.moves[idx].cost;
        moves.push(staff_plan.moves[idx].clone());
    }
    moves.sort_by(|a, b| {
        (a.from, a.to, a.executor, a.vehicle).cmp(&(b.from, b.to, b.executor, b.vehicle))
    });
    let plan = Plan {
        moves,
        total_cost: realized_incentives + staff_cost,
        incentive_paid: realized_incentives,
        staff_cost,
        final_stocks: staff_plan.final_stocks.clone(),
    };
    let log = RoundLog {
        rounds,
        staff_fallback,
        realized_cost: plan.total_cost,
        realized_incentives,
    };
    Ok((log, plan))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialStats {
    pub trials: u32,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    /// Average share of the required moves each level filled.
    pub fill_rates: Vec<f64>,
}

/// Independent seeded replications of the bid process.
pub fn monte_carlo(
    s: &Scenario,
    acc: &AcceptanceModel,
    trials: u32,
    mode: BuildMode,
) -> Result<TrialStats, ProcessError> {
    assert!(trials >= 1, "at least one trial");
    let mut seeder = ChaCha8Rng::seed_from_u64(acc.seed);
    let mut costs = Vec::with_capacity(trials as usize);
    let mut fill_rates = vec![0.0; s.levels.len()];
    for _ in 0..trials {
        let trial_acc = AcceptanceModel {
            seed: seeder.gen(),
            ..acc.clone()
        };
        let (log, _) = run_rounds(s, &trial_acc, mode)?;
        costs.push(log.realized_cost);
        let required: u32 =
            log.rounds.iter().map(|r| r.filled).sum::<u32>() + log.staff_fallback;
        if required > 0 {
            for (u, round) in log.rounds.iter().enumerate() {
                fill_rates[u] += round.filled as f64 / required as f64;
            }
        }
    }
    for rate in &mut fill_rates {
        *rate /= trials as f64;
    }
    let mean = costs.iter().sum::<f64>() / trials as f64;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / trials as f64;
    Ok(TrialStats {
        trials,
        mean,
        stddev: var.sqrt(),
        min: costs.iter().copied().fold(f64::INFINITY, f64::min),
        max: costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        fill_rates,
    })
}
