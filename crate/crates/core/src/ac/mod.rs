//! AC validation of DC-optimized topologies.

mod powerflow;
mod validator;

pub use powerflow::{ac_power_flow, nodal_power, solve_case, AcCaseResult, SolverOptions};
pub use validator::{
    ac_overload, eliminate, AcBaseline, AcChecker, AcConfig, AcOverload, Elimination, Reason,
    ValidationRecord, ValidationStage, Validator, Verdict, WorstKOutcome,
};
