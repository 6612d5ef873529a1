//! Station-based EV fleet rebalancing: exact relocation planning with
//! staff moves and escalating user incentives.

pub mod dot;
pub mod feasibility;
pub mod incentive;
pub mod milp;
pub mod report;
pub mod scenario;
pub mod solver;
