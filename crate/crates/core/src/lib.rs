//! Intergenerational wealth dynamics in the large-population limit.
//!
//! Agents split an endowment share between consumption and investment in a
//! single descendant; a monotone competitiveness function `T` turns
//! investment into the descendant's claim on the next generation's total.
//! The crate computes optimal efforts under arbitrary monotone `T`
//! (including discontinuous ones), steps populations between generations,
//! finds and classifies equilibria (wealth traps, meritocracy ordering, rat
//! races, linear stability), and reconstructs `T` from an observed effort
//! curve.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod inference;
pub mod model;
pub mod optimize;
pub mod report;

pub use error::{AnalysisError, DynamicsError, InferenceError, ModelError};
pub use model::{alpha_to_a, log_utility, Agent, Derivatives, GenerationState, TransferSpec};
pub use optimize::{
    effort_curve, effort_curve_with, optimal_effort, verify_foc, CurveOptions, Discontinuity,
    EffortCurve, OptimumCertificate,
};
pub use dynamics::{
    find_equilibrium, mean_field_map, simulate, step_generation, EquilibriumOptions,
    EquilibriumReport, Trajectory,
};
pub use analysis::{
    check_meritocracy, detect_wealth_trap, effort_sensitivity, jump_identities, rat_race_flags,
    second_derivative_bound, verify_meritocracy_theorem, verify_rat_race_theorem, CurvatureBound,
    EffortSensitivity, JumpDiagnostic, MeritReport, MeritocracyTheoremReport, RatRaceFlag,
    RatRaceTheoremReport, TrapMode, TrapOptions, TrapReport,
};
pub use analysis::stability::{finite_difference_jacobian, linear_stability, StabilityReport};
pub use inference::{
    infer_transfer, round_trip_error, validate_effort_table, EffortTable, InferredTransfer,
    TableDiagnostics,
};
