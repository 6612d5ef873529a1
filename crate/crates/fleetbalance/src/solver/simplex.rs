//! Bounded-variable primal simplex with a two-phase start.
//!
//! All variables carry finite bounds, so unboundedness cannot occur for
//! well-formed inputs. Pivoting uses Dantzig pricing with lowest-index tie
//! breaks; a stall counter switches to Bland's rule to break cycles.

use crate::milp::{Constraint, Sense};

const FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Values of the structural variables only.
    pub values: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("simplex iteration limit exceeded ({0} pivots)")]
    IterationLimit(usize),
    #[error("unbounded relaxation; the model violates its bounded-cost contract")]
    Unbounded,
}

/// Continuous relaxation data in bounded standard form.
pub struct LpProblem {
    /// Structural column count.
    pub n_struct: usize,
    pub obj: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Dense rows over structural columns.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    senses: Vec<Sense>,
}

impl LpProblem {
    pub fn new(
        n_struct: usize,
        obj: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        constraints: &[Constraint],
    ) -> Self {
        let mut rows = Vec::with_capacity(constraints.len());
        let mut rhs = Vec::with_capacity(constraints.len());
        let mut senses = Vec::with_capacity(constraints.len());
        for c in constraints {
            let mut row = vec![0.0; n_struct];
            for &(col, coef) in &c.terms {
                row[col] += coef;
            }
            rows.push(row);
            rhs.push(c.rhs);
            senses.push(c.sense);
        }
        LpProblem {
            n_struct,
            obj,
            lower,
            upper,
            rows,
            rhs,
            senses,
        }
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_with_bounds(&self.lower, &self.upper)
    }

    /// Solve with the variable box replaced (same length as the structural
    /// columns); used by branch-and-bound nodes.
    pub fn solve_with_bounds(&self, lower: &[f64], upper: &[f64]) -> Result<LpSolution, LpError> {
        Tableau::build(self, lower, upper).solve()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum VarState {
    AtLower,
    AtUpper,
    Basic(usize),
}

/// Dense working tableau: structural columns, one slack per row, and
/// phase-1 artificials appended at the end.
struct Tableau {
    m: usize,
    n: usize, // total columns
    n_struct: usize,
    cols: Vec<Vec<f64>>, // column-major constraint matrix, m entries each
    rhs: Vec<f64>,
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    binv: Vec<f64>, // m x m row-major basis inverse
    x: Vec<f64>,    // current values of all columns
    artificial_start: usize,
    infeasible_box: bool,
}

impl Tableau {
    fn build(p: &LpProblem, p_lower: &[f64], p_upper: &[f64]) -> Tableau {
        let m = p.rows.len();
        let ns = p.n_struct;
        let mut cols: Vec<Vec<f64>> = (0..ns).map(|j| (0..m).map(|r| p.rows[r][j]).collect()).collect();
        let mut lower = p_lower.to_vec();
        let mut upper = p_upper.to_vec();
        let mut obj = p.obj.clone();

        // Initial nonbasic point: every structural at its lower bound.
        let x0: Vec<f64> = p_lower.to_vec();
        // Slack bounds chosen so the row becomes an equality.
        let mut slack_bounds = Vec::with_capacity(m);
        for r in 0..m {
            let activity: f64 = (0..ns).map(|j| p.rows[r][j] * x0[j]).sum();
            let (lo, hi) = match p.senses[r] {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            // Finite envelope for the slack given the variable box.
            let mut act_min = 0.0;
            let mut act_max = 0.0;
            for j in 0..ns {
                let a = p.rows[r][j];
                if a > 0.0 {
                    act_min += a * p_lower[j];
                    act_max += a * p_upper[j];
                } else if a < 0.0 {
                    act_min += a * p_upper[j];
                    act_max += a * p_lower[j];
                }
            }
            let lo = lo.max(p.rhs[r] - act_max);
            let hi = hi.min(p.rhs[r] - act_min);
            slack_bounds.push((lo, hi));
            let _ = activity;
        }
        let mut infeasible_box = false;
        for (r, &(lo, hi)) in slack_bounds.iter().enumerate() {
            if lo > hi + FEAS_TOL {
                // No point of the variable box satisfies this row.
                infeasible_box = true;
            }
            let mut col = vec![0.0; m];
            col[r] = 1.0;
            cols.push(col);
            lower.push(lo.min(hi));
            upper.push(hi.max(lo));
            obj.push(0.0);
        }
        let artificial_start = cols.len();

        let mut t = Tableau {
            m,
            n: cols.len(),
            n_struct: ns,
            cols,
            rhs: p.rhs.clone(),
            obj,
            lower,
            upper,
            basis: Vec::new(),
            state: Vec::new(),
            binv: identity(m),
            x: Vec::new(),
            artificial_start,
            infeasible_box,
        };

        // Start with the slack basis; add an artificial for every row whose
        // slack value falls outside the slack bounds.
        let mut state = vec![VarState::AtLower; t.n];
        let mut basis = Vec::with_capacity(m);
        let mut x = vec![0.0; t.n];
        for j in 0..ns {
            x[j] = p_lower[j];
        }
        let mut artificials = Vec::new();
        for r in 0..m {
            let slack_col = ns + r;
            let residual = t.rhs[r] - (0..ns).map(|j| t.cols[j][r] * x[j]).sum::<f64>();
            let (lo, hi) = (t.lower[slack_col], t.upper[slack_col]);
            if residual >= lo - FEAS_TOL && residual <= hi + FEAS_TOL {
                basis.push(slack_col);
                state[slack_col] = VarState::Basic(r);
                x[slack_col] = residual;
            } else {
                // Pin the slack to its nearest bound and absorb the rest in
                // an artificial column.
                let pinned = residual.clamp(lo, hi);
                x[slack_col] = pinned;
                state[slack_col] = if pinned == lo {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                let gap = residual - pinned;
                let mut col = vec![0.0; m];
                col[r] = if gap > 0.0 { 1.0 } else { -1.0 };
                artificials.push((col, gap.abs()));
                basis.push(t.n + artificials.len() - 1);
            }
        }
        for (col, value) in artificials {
            t.cols.push(col);
            t.lower.push(0.0);
            t.upper.push(f64::INFINITY);
            t.obj.push(0.0);
            state.push(VarState::AtLower);
            x.push(value);
        }
        t.n = t.cols.len();
        for (r, &b) in basis.iter().enumerate() {
            state[b] = VarState::Basic(r);
        }
        t.basis = basis;
        t.state = state;
        t.x = x;
        t
    }

    fn solve(mut self) -> Result<LpSolution, LpError> {
        if self.infeasible_box {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                values: Vec::new(),
            });
        }
        if self.n > self.artificial_start {
            // Phase 1: drive artificials to zero.
            let phase1: Vec<f64> = (0..self.n)
                .map(|j| if j >= self.artificial_start { 1.0 } else { 0.0 })
                .collect();
            self.run(&phase1)?;
            let infeas: f64 = (self.artificial_start..self.n).map(|j| self.x[j]).sum();
            if infeas > 1e-6 {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    objective: f64::INFINITY,
                    values: Vec::new(),
                });
            }
            // Pin artificials so phase 2 cannot reuse them.
            for j in self.artificial_start..self.n {
                self.upper[j] = 0.0;
                if !matches!(self.state[j], VarState::Basic(_)) {
                    self.x[j] = 0.0;
                }
            }
        }
        let obj = self.obj.clone();
        self.run(&obj)?;
        let objective = (0..self.n_struct).map(|j| obj[j] * self.x[j]).sum();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective,
            values: self.x[..self.n_struct].to_vec(),
        })
    }

    /// Primal simplex loop minimizing `cost` from the current basis.
    fn run(&mut self, cost: &[f64]) -> Result<(), LpError> {
        let max_iters = 2000 + 200 * (self.m + self.n);
        let mut stall = 0usize;
        for iter in 0..max_iters {
            // Simplex multipliers y = c_B * Binv.
            let mut y = vec![0.0; self.m];
            for r in 0..self.m {
                let cb = cost[self.basis[r]];
                if cb != 0.0 {
                    for c in 0..self.m {
                        y[c] += cb * self.binv[r * self.m + c];
                    }
                }
            }
            // Pricing.
            let bland = stall > 200;
            let mut entering: Option<(usize, f64, bool)> = None; // (col, score, increase)
            for j in 0..self.n {
                let (at_lower, at_upper) = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLower => (true, false),
                    VarState::AtUpper => (false, true),
                };
                if self.upper[j] - self.lower[j] < PIVOT_TOL {
                    continue;
                }
                let d = cost[j]
                    - self.cols[j]
                        .iter()
                        .zip(&y)
                        .map(|(a, yy)| a * yy)
                        .sum::<f64>();
                let (eligible, score, increase) = if at_lower && d < -1e-9 {
                    (true, -d, true)
                } else if at_upper && d > 1e-9 {
                    (true, d, false)
                } else {
                    (false, 0.0, true)
                };
                if eligible {
                    if bland {
                        entering = Some((j, score, increase));
                        break;
                    }
                    match entering {
                        Some((_, best, _)) if best >= score => {}
                        _ => entering = Some((j, score, increase)),
                    }
                }
            }
            let Some((e, _, increase)) = entering else {
                return Ok(());
            };
            // Direction alpha = Binv * A_e.
            let mut alpha = vec![0.0; self.m];
            for r in 0..self.m {
                let mut v = 0.0;
                for c in 0..self.m {
                    v += self.binv[r * self.m + c] * self.cols[e][c];
                }
                alpha[r] = v;
            }
            let sigma = if increase { 1.0 } else { -1.0 };
            // Ratio test: basic variables move by -t * sigma * alpha.
            let mut t_max = self.upper[e] - self.lower[e];
            let mut leaving: Option<(usize, bool)> = None; // (row, leaves at upper)
            for r in 0..self.m {
                let delta = -sigma * alpha[r];
                let b = self.basis[r];
                let (t, to_upper) = if delta < -PIVOT_TOL {
                    ((self.x[b] - self.lower[b]).max(0.0) / -delta, false)
                } else if delta > PIVOT_TOL {
                    ((self.upper[b] - self.x[b]).max(0.0) / delta, true)
                } else {
                    continue;
                };
                if t < t_max - PIVOT_TOL {
                    t_max = t;
                    leaving = Some((r, to_upper));
                } else if t < t_max + PIVOT_TOL {
                    // Tie: lowest variable index leaves (Bland).
                    t_max = t_max.min(t);
                    match leaving {
                        Some((r0, _)) if self.basis[r0] <= b => {}
                        _ => leaving = Some((r, to_upper)),
                    }
                }
            }
            if !t_max.is_finite() {
                return Err(LpError::Unbounded);
            }
            let t_step = t_max.max(0.0);
            if t_step < PIVOT_TOL {
                stall += 1;
            } else {
                stall = 0;
            }
            // Apply the step.
            self.x[e] += sigma * t_step;
            for r in 0..self.m {
                let b = self.basis[r];
                self.x[b] -= sigma * t_step * alpha[r];
            }
            match leaving {
                None => {
                    // Bound flip, basis unchanged.
                    self.state[e] = if increase {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[e] = if increase { self.upper[e] } else { self.lower[e] };
                }
                Some((row, to_upper)) => {
                    let out = self.basis[row];
                    self.state[out] = if to_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.basis[row] = e;
                    self.state[e] = VarState::Basic(row);
                    // Pivot Binv on (row, e).
                    let pivot = alpha[row];
                    debug_assert!(pivot.abs() > PIVOT_TOL);
                    for c in 0..self.m {
                        self.binv[row * self.m + c] /= pivot;
                    }
                    for r in 0..self.m {
                        if r != row {
                            let factor = alpha[r];
                            if factor != 0.0 {
                                for c in 0..self.m {
                                    self.binv[r * self.m + c] -=
                                        factor * self.binv[row * self.m + c];
                                }
                            }
                        }
                    }
                }
            }
            let _ = iter;
        }
        Err(LpError::IterationLimit(max_iters))
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Constraint, Sense};

    fn le(terms: Vec<(usize, f64)>, rhs: f64) -> Constraint {
        Constraint { name: "c".into(), terms, sense: Sense::Le, rhs }
    }

    #[test]
    fn unconstrained_box_sits_at_lower_bounds() {
        let p = LpProblem::new(2, vec![1.0, 2.0], vec![0.0, -1.0], vec![5.0, 5.0], &[]);
        let sol = p.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 2.0).abs() < 1e-9);
        assert_eq!(sol.values, vec![0.0, -1.0]);
    }

    #[test]
    fn fractional_optimum_on_a_knapsack_row() {
        // min -3x - 2y subject to x + y <= 1.5, x,y in [0,1]
        let p = LpProblem::new(
            2,
            vec![-3.0, -2.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &[le(vec![(0, 1.0), (1, 1.0)], 1.5)],
        );
        let sol = p.solve().unwrap();
        assert!((sol.objective + 4.0).abs() < 1e-9);
        assert!((sol.values[0] - 1.0).abs() < 1e-9);
        assert!((sol.values[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn equality_row_forces_phase_one() {
        let c = Constraint {
            name: "eq".into(),
            terms: vec![(0, 1.0), (1, 1.0)],
            sense: Sense::Eq,
            rhs: 3.0,
        };
        let p = LpProblem::new(2, vec![2.0, 1.0], vec![0.0, 0.0], vec![2.0, 2.0], &[c]);
        let sol = p.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 4.0).abs() < 1e-9); // x=1, y=2
    }

    #[test]
    fn infeasible_row_is_detected() {
        let c = Constraint {
            name: "ge".into(),
            terms: vec![(0, 1.0)],
            sense: Sense::Ge,
            rhs: 2.0,
        };
        let p = LpProblem::new(1, vec![1.0], vec![0.0], vec![1.0], &[c]);
        let sol = p.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn bound_overrides_shrink_the_feasible_box() {
        let p = LpProblem::new(
            2,
            vec![-3.0, -2.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &[le(vec![(0, 1.0), (1, 1.0)], 1.5)],
        );
        let sol = p
            .solve_with_bounds(&[0.0, 0.0], &[0.0, 1.0])
            .unwrap();
        assert!((sol.objective + 2.0).abs() < 1e-9);
        let sol = p.solve_with_bounds(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }
}
