//! Fuel loading from predicted flight times: the loading policy, its
//! benefits, reserve-fuel risk and fleet-level conversions.

pub mod io;
pub mod plan;
pub mod summary;

pub use io::{save_fleet_summary, save_plan_results, simulate_fleet, FleetSimulation};
pub use plan::{
    benefits, cost_to_carry, current_risk, depletion_risk, estimate_beta, is_incident, mission_fuel, plan_flight,
    propose_loading, solve_loading, FuelPlanResult, FuelPolicy, LoadingProblem, LoadingSolution, LOADING_TOL,
    MAX_ITERATIONS,
};
pub use summary::{direction_group, fleet_summary, fleet_totals, FleetSummary, FleetTotals, FuelConversion, GroupSummary};
