//! Generator construction, Lie transforms and the iterated normal form.

pub mod conditions;
pub mod generator;
pub mod iterate;
pub mod lie;
pub mod schedule;
pub mod step;

pub use conditions::{check_conditions, evaluate_conditions, ConditionInput, ConditionReport, RunMode, TauReading};
pub use generator::{build_generator, cancellation_residual, certify_block, DivisorSummary};
pub use iterate::{nf_iterate, NormalFormAbort, NormalFormReport, NormalFormRun, UpgradeReport};
pub use lie::{lie_series, lie_transform, LieOptions, LieOutput};
pub use schedule::{IterationSchedule, ReshiftWindow};
pub use step::{nf_step, nf_step_report, RoutingTally, StepOutcome, StepReport};
