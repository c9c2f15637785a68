//! Look-Compute-Move robot simulator: geometry, robot models, adversarial
//! schedulers, problem monitors, the algorithms under study and scripted
//! adversaries against them.

pub mod adversaries;
pub mod algorithms;
pub mod engine;
pub mod geometry;
pub mod model;
pub mod problems;
pub mod sim;
pub mod trace;

pub use adversaries::{scripted_adversary, AdversaryError, SCRIPTED_KINDS};
pub use algorithms::{registry, Action, AlgoError, AlgorithmBinding};
pub use engine::{
    builtin_adversaries, run, run_with, validate_schedule, Adversary, Decision, EngineError,
    EngineView, FrameSpec, Op, RunConfig, SchedulerClass, Step, Violation,
};
pub use geometry::{circular_order, Handedness, LocalFrame, Point, Ring};
pub use model::{LightDecl, LightTuple, ModelClass, Scenario, Snapshot};
pub use problems::{
    analyze_quadrilateral, monitor_gcncl, monitor_mlcv, monitor_rdv, monitor_tf, MonitorVerdict,
    QuadrilateralAnalysis, Status,
};
pub use sim::{
    analyze_sim_trace, extract_embedded_execution, mega_cycle_report, sim_wrap, SimConfig,
};
pub use trace::{fairness_windows, CycleEvent, EventKind, Trace, TraceError};
