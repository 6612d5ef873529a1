use clap::{Parser, Subcommand, ValueEnum};
use fleetbalance::incentive::{
    derive_caps, monte_carlo, run_rounds, AcceptanceKind, AcceptanceModel, ProcessError,
};
use fleetbalance::milp::{build_ilp1, build_ilp2, write_lp, BuildMode, MilpModel};
use fleetbalance::report::{build_report, round1, ReportError};
use fleetbalance::scenario::{load_scenario, Scenario};
use fleetbalance::dot::render_dot;
use fleetbalance::solver::{
    extract_plan, infeasibility_notes, solve_with_limit, Plan, SolveResult, SolveStatus,
    DEFAULT_NODE_LIMIT,
};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fleetbalance", version, about = "Relocation planning for shared EV fleets")]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Table)]
    out: OutFormat,
    /// Model building mode.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Physical)]
    mode: ModeArg,
    /// Suppress informational notes on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OutFormat {
    Json,
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Physical,
    Faithful,
}

impl From<ModeArg> for BuildMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Physical => BuildMode::Physical,
            ModeArg::Faithful => BuildMode::Faithful,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ilp1,
    Ilp2,
}

#[derive(Clone, Copy, ValueEnum)]
enum AcceptanceArg {
    Deterministic,
    Bernoulli,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a model and print the relocation plan.
    Plan {
        #[arg(long, value_enum, default_value_t = ModelArg::Ilp2)]
        model: ModelArg,
        /// Per-level move caps; derived from the scenario when omitted.
        #[arg(long, value_delimiter = ',')]
        caps: Option<Vec<u32>>,
        /// Branch-and-bound node budget.
        #[arg(long)]
        seednodes: Option<usize>,
        /// On infeasibility, relax stock bounds step by step until a plan
        /// exists instead of failing.
        #[arg(long)]
        auto_relax_bounds: bool,
    },
    /// Simulate the escalating incentive-bid process.
    Simulate {
        #[arg(long, value_enum)]
        acceptance: AcceptanceArg,
        /// Per-level acceptance probabilities (bernoulli).
        #[arg(long, value_delimiter = ',')]
        probs: Option<Vec<f64>>,
        /// Defection probability.
        #[arg(long, default_value_t = 0.0)]
        defect: f64,
        /// Monte Carlo replications; a single run prints the round log.
        #[arg(long)]
        trials: Option<u32>,
        /// RNG seed; overrides FLEETBALANCE_SEED.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Staff-only versus incentive-augmented comparison.
    Report,
    /// Battery-feasibility tables per executor class.
    Feasibility {
        /// Shorthand for --out json.
        #[arg(long)]
        json: bool,
    },
    /// Build a model and emit it in LP text format.
    Build {
        #[arg(long, value_enum, default_value_t = ModelArg::Ilp1)]
        model: ModelArg,
        #[arg(long, value_delimiter = ',')]
        caps: Option<Vec<u32>>,
        /// Write the LP text here instead of stdout.
        #[arg(long)]
        lp_out: Option<PathBuf>,
    },
    /// Relocation map of the optimal plan as a DOT graph.
    ExportDot {
        #[arg(long, value_enum, default_value_t = ModelArg::Ilp2)]
        model: ModelArg,
        #[arg(long, value_delimiter = ',')]
        caps: Option<Vec<u32>>,
    },
}

enum CliError {
    Validation(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Infeasible(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        match e {
            ProcessError::Infeasible => CliError::Infeasible(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load(cli: &Cli) -> Result<Scenario, CliError> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Validation("--scenario is required".into()))?;
    let s = load_scenario(path).map_err(|e| match e {
        fleetbalance::scenario::ScenarioError::Io { .. } => CliError::Io(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    })?;
    let violations = s.validate();
    if !violations.is_empty() {
        let lines: Vec<String> = violations
            .iter()
            .map(|v| format!("{}: {}", v.code, v.detail))
            .collect();
        return Err(CliError::Validation(format!(
            "scenario failed validation\n{}",
            lines.join("\n")
        )));
    }
    Ok(s)
}

fn effective_caps(s: &Scenario, caps: &Option<Vec<u32>>) -> Result<Vec<u32>, CliError> {
    match caps {
        None => Ok(derive_caps(s.user_population, &s.levels)),
        Some(c) if c.len() == s.levels.len() => Ok(c.clone()),
        Some(c) => Err(CliError::Validation(format!(
            "expected {} caps, got {}",
            s.levels.len(),
            c.len()
        ))),
    }
}

fn build_model(s: &Scenario, model: ModelArg, caps: &Option<Vec<u32>>, mode: BuildMode) -> Result<MilpModel, CliError> {
    match model {
        ModelArg::Ilp1 => Ok(build_ilp1(s, mode)),
        ModelArg::Ilp2 => {
            let caps = effective_caps(s, caps)?;
            build_ilp2(s, &caps, mode).map_err(|e| CliError::Validation(e.to_string()))
        }
    }
}

#[derive(Serialize)]
struct PlanDoc {
    objective: f64,
    status: SolveStatus,
    moves: Vec<fleetbalance::solver::Move>,
    incentive_paid: f64,
    staff_cost: f64,
    final_stocks: Vec<u32>,
}

fn plan_doc(r: &SolveResult, plan: &Plan) -> PlanDoc {
    PlanDoc {
        objective: r.objective,
        status: r.status,
        moves: plan.moves.clone(),
        incentive_paid: plan.incentive_paid,
        staff_cost: plan.staff_cost,
        final_stocks: plan.final_stocks.clone(),
    }
}

fn render_plan(doc: &PlanDoc, out: OutFormat) -> String {
    match out {
        OutFormat::Json => serde_json::to_string_pretty(doc).expect("plan serializes"),
        OutFormat::Table => {
            let mut text = format!(
                "objective {:.1}\nincentive paid {:.1}\nstaff cost {:.1}\nfinal stocks {}\n",
                doc.objective,
                doc.incentive_paid,
                doc.staff_cost,
                doc.final_stocks
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            for mv in &doc.moves {
                text.push_str(&format!(
                    "EV{:<4} S{} -> S{}  {:<8} {:>5.1} km {:>6.1} eur\n",
                    mv.vehicle,
                    mv.from,
                    mv.to,
                    mv.executor.to_string(),
                    mv.km,
                    mv.cost
                ));
            }
            text
        }
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["vehicle", "from", "to", "executor", "km", "cost"])
                .expect("csv write");
            for mv in &doc.moves {
                w.write_record([
                    mv.vehicle.to_string(),
                    mv.from.to_string(),
                    mv.to.to_string(),
                    mv.executor.to_string(),
                    format!("{:.1}", mv.km),
                    format!("{:.1}", mv.cost),
                ])
                .expect("csv write");
            }
            String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
        }
    }
}

/// Widen stock bounds one step at a time until the staff-only model turns
/// feasible. Returns the adjusted scenario and a description of what moved.
fn relax_bounds(s: &Scenario, mode: BuildMode, node_limit: usize) -> Result<(Scenario, Vec<String>), CliError> {
    let mut relaxed = s.clone();
    let mut notes = Vec::new();
    let fleet = s.vehicle_count() as u32;
    for _ in 0..=fleet {
        let r = solve_with_limit(&build_ilp1(&relaxed, mode), node_limit);
        match r.status {
            SolveStatus::Optimal => return Ok((relaxed, notes)),
            SolveStatus::IterationLimit => {
                return Err(CliError::Infeasible("node budget exhausted".into()))
            }
            SolveStatus::Infeasible => {
                for (j, st) in relaxed.stations.iter_mut().enumerate() {
                    let b = s.bounds(j);
                    let cur_min = st.n_min.unwrap_or(b.n_min);
                    let cur_max = st.n_max.unwrap_or(b.n_max);
                    if cur_min > 0 {
                        st.n_min = Some(cur_min - 1);
                    }
                    if cur_max < fleet {
                        st.n_max = Some(cur_max + 1);
                    }
                }
                notes.push("relaxed stock bounds by one vehicle at every station".into());
            }
        }
    }
    Err(CliError::Infeasible(
        "no feasible plan even with fully relaxed bounds".into(),
    ))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let s = load(cli)?;
    let mode: BuildMode = cli.mode.into();
    match &cli.cmd {
        Cmd::Plan {
            model,
            caps,
            seednodes,
            auto_relax_bounds,
        } => {
            let node_limit = seednodes.unwrap_or(DEFAULT_NODE_LIMIT);
            let mut scenario = s;
            let mut m = build_model(&scenario, *model, caps, mode)?;
            let mut r = solve_with_limit(&m, node_limit);
            if r.status == SolveStatus::Infeasible && *auto_relax_bounds {
                let (adjusted, notes) = relax_bounds(&scenario, mode, node_limit)?;
                scenario = adjusted;
                if !cli.quiet {
                    for note in notes {
                        eprintln!("note: {note}");
                    }
                }
                m = build_model(&scenario, *model, caps, mode)?;
                r = solve_with_limit(&m, node_limit);
            }
            match r.status {
                SolveStatus::Optimal => {}
                SolveStatus::Infeasible => {
                    let notes = infeasibility_notes(&scenario);
                    let mut msg = String::from("model is infeasible");
                    if !notes.is_empty() {
                        msg.push_str(": ");
                        msg.push_str(&notes.join("; "));
                    }
                    return Err(CliError::Infeasible(msg));
                }
                SolveStatus::IterationLimit => {
                    return Err(CliError::Infeasible("node budget exhausted".into()))
                }
            }
            let plan = extract_plan(&r, &m, &scenario)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            println!("{}", render_plan(&plan_doc(&r, &plan), cli.out));
            Ok(())
        }
        Cmd::Simulate {
            acceptance,
            probs,
            defect,
            trials,
            seed,
        } => {
            let env_seed = std::env::var("FLEETBALANCE_SEED")
                .ok()
                .and_then(|v| v.parse().ok());
            let acc = AcceptanceModel {
                kind: match acceptance {
                    AcceptanceArg::Deterministic => AcceptanceKind::DeterministicCaps,
                    AcceptanceArg::Bernoulli => AcceptanceKind::Bernoulli,
                },
                probabilities: probs.clone().unwrap_or_default(),
                defection_probability: *defect,
                seed: seed.or(env_seed).unwrap_or(0),
            };
            match trials {
                Some(n) if *n > 1 => {
                    let stats = monte_carlo(&s, &acc, *n, mode)?;
                    match cli.out {
                        OutFormat::Json => println!(
                            "{}",
                            serde_json::to_string_pretty(&stats).expect("stats serialize")
                        ),
                        _ => {
                            println!("trials   {}", stats.trials);
                            println!("mean     {:.2}", stats.mean);
                            println!("stddev   {:.2}", stats.stddev);
                            println!("min      {:.1}", stats.min);
                            println!("max      {:.1}", stats.max);
                            for (u, rate) in stats.fill_rates.iter().enumerate() {
                                println!("fill L{}  {:.3}", u + 1, rate);
                            }
                        }
                    }
                }
                _ => {
                    let (log, plan) = run_rounds(&s, &acc, mode)?;
                    match cli.out {
                        OutFormat::Json => {
                            #[derive(Serialize)]
                            struct SimDoc<'a> {
                                log: &'a fleetbalance::incentive::RoundLog,
                                plan: PlanDoc,
                            }
                            let r = SolveResult {
                                status: SolveStatus::Optimal,
                                objective: plan.total_cost,
                                assignment: Vec::new(),
                                nodes_explored: 0,
                                proof_gap: 0.0,
                            };
                            let doc = SimDoc {
                                log: &log,
                                plan: plan_doc(&r, &plan),
                            };
                            println!(
                                "{}",
                                serde_json::to_string_pretty(&doc).expect("log serializes")
                            );
                        }
                        _ => {
                            for round in &log.rounds {
                                println!(
                                    "level {}  offered {:>3}  accepted {:>3}  defected {:>3}  filled {:>3}",
                                    round.level,
                                    round.offered,
                                    round.acceptances,
                                    round.defections,
                                    round.filled
                                );
                            }
                            println!("staff fallback      {}", log.staff_fallback);
                            println!("realized cost       {:.1}", round1(log.realized_cost));
                            println!("realized incentives {:.1}", round1(log.realized_incentives));
                        }
                    }
                }
            }
            Ok(())
        }
        Cmd::Report => {
            let report = build_report(&s, mode)?;
            let text = match cli.out {
                OutFormat::Json => report.to_json(),
                OutFormat::Table => report.to_table(),
                OutFormat::Csv => report.to_csv(),
            };
            println!("{text}");
            Ok(())
        }
        Cmd::Feasibility { json } => {
            let table = fleetbalance::feasibility::feasibility_matrix(&s);
            if *json || cli.out == OutFormat::Json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&table).expect("table serializes")
                );
            } else {
                let ids: Vec<String> =
                    s.stations.iter().map(|st| format!("S{}", st.id)).collect();
                for (label, t) in [("staff", &table.staff), ("user", &table.user)] {
                    println!("{label} feasible counts per arc:");
                    println!("      {}", ids.join("   "));
                    for (i, row) in t.per_arc.iter().enumerate() {
                        let cells: Vec<String> =
                            row.iter().map(|c| format!("{c:>2}")).collect();
                        println!("{:>4}  {}", ids[i], cells.join("   "));
                    }
                }
            }
            Ok(())
        }
        Cmd::Build {
            model,
            caps,
            lp_out,
        } => {
            let m = build_model(&s, *model, caps, mode)?;
            let d = m.dimensions();
            if !cli.quiet {
                eprintln!(
                    "{} variables ({} binary, {} integer), {} constraints",
                    d.variables, d.binaries, d.integers, d.constraints
                );
            }
            let lp = write_lp(&m);
            match lp_out {
                Some(path) => std::fs::write(path, lp)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => print!("{lp}"),
            }
            Ok(())
        }
        Cmd::ExportDot { model, caps } => {
            let m = build_model(&s, *model, caps, mode)?;
            let r = solve_with_limit(&m, DEFAULT_NODE_LIMIT);
            if r.status != SolveStatus::Optimal {
                return Err(CliError::Infeasible("no optimal plan to draw".into()));
            }
            let plan = extract_plan(&r, &m, &s)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            print!("{}", render_dot(&s, &plan));
            Ok(())
        }
    }
}
