//! The adversarial harness: scenario documents, the runner that plays them on a
//! ledger, the trace format, the invariant checker, the ideal-world oracle and the
//! abort-point sweep.

pub mod ideal;
pub mod invariants;
pub mod runner;
pub mod scenario;
pub mod sweep;
pub mod trace;

pub use ideal::{ideal_outcome, IdealOutcome};
pub use invariants::{check_invariants, Report, Violation};
pub use runner::{run_scenario, RunOptions, SimError};
pub use scenario::{Plan, Protocol, Scenario, ScenarioError, Strategy};
pub use sweep::{run_case, sweep, sweep_cases, CaseResult, SweepCase, SweepSummary};
pub use trace::{Outcome, Settlement, Trace};
