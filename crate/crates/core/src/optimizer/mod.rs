//! Generation plans, their evaluation, and the search for the cheapest plan.

mod nelder_mead;
mod plan;
mod report;
mod search;

pub use plan::{
    evaluate_plan, exhaustive_bleeding_plan, leaf_coefficients, leaf_count, single_pass_reference, solve_leaf,
    GenerationPlan, Method, PlanOutcome, TARGET_TOLERANCE,
};
pub use report::{CostReport, OptimizerMetadata, SweepPoint, SCHEMA_VERSION};
pub use search::{optimize_plan, sweep, OptimizeConfig, T_MARGIN};
