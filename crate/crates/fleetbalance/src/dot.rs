//! Relocation-map export in DOT format: stations as nodes, moves as
//! edges, red for staff and green for user-executed moves.

use crate::scenario::Scenario;
use crate::solver::{Executor, Plan};
use std::fmt::Write;

pub fn render_dot(s: &Scenario, plan: &Plan) -> String {
    let stocks = s.stock_counts();
    let mut out = String::from("digraph relocation {\n");
    out.push_str("  rankdir=LR;\n  node [shape=circle];\n");
    for (j, st) in s.stations.iter().enumerate() {
        writeln!(
            out,
            "  S{} [label=\"S{}\\n{} -> {}\"];",
            st.id, st.id, stocks[j], plan.final_stocks[j]
        )
        .unwrap();
    }
    for mv in &plan.moves {
        let (color, label) = match mv.executor {
            Executor::Staff => ("red".to_string(), format!("EV{} {}km", mv.vehicle, mv.km)),
            Executor::Level(u) => (
                "green".to_string(),
                format!("EV{} {}km L{}", mv.vehicle, mv.km, u),
            ),
        };
        writeln!(
            out,
            "  S{} -> S{} [color={}, label=\"{}\"];",
            mv.from, mv.to, color, label
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{build_ilp1, build_ilp2, BuildMode};
    use crate::scenario::load_scenario;
    use crate::solver::{extract_plan, solve};
    use std::path::Path;

    fn plans() -> (Scenario, Plan, Plan) {
        let s = load_scenario(Path::new("../../scenarios/scenario1.json")).unwrap();
        let m1 = build_ilp1(&s, BuildMode::Physical);
        let p1 = extract_plan(&solve(&m1), &m1, &s).unwrap();
        let m2 = build_ilp2(&s, &[1, 1, 2], BuildMode::Physical).unwrap();
        let p2 = extract_plan(&solve(&m2), &m2, &s).unwrap();
        (s, p1, p2)
    }

    #[test]
    fn staff_only_graph_is_all_red() {
        let (s, p1, _) = plans();
        let dot = render_dot(&s, &p1);
        assert_eq!(dot.matches("[label=\"S").count(), 6);
        assert_eq!(dot.matches("color=red").count(), 6);
        assert_eq!(dot.matches("color=green").count(), 0);
        assert!(dot.starts_with("digraph") && dot.trim_end().ends_with('}'));
    }

    #[test]
    fn user_moves_are_green_with_level_labels() {
        let (s, _, p2) = plans();
        let dot = render_dot(&s, &p2);
        assert_eq!(dot.matches("color=green").count(), 4);
        assert_eq!(dot.matches("color=red").count(), 2);
        for label in ["L1", "L2", "L3"] {
            assert!(dot.contains(label));
        }
        assert!(dot.contains("S3\\n2 -> 5"));
    }

    #[test]
    fn empty_plan_has_nodes_but_no_edges() {
        let (s, mut p1, _) = plans();
        p1.moves.clear();
        p1.final_stocks = s.stock_counts();
        let dot = render_dot(&s, &p1);
        assert_eq!(dot.matches("[label=\"S").count(), 6);
        assert!(!dot.contains("color="));
    }
}
