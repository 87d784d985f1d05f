//! Evaluation scenarios: sweeps over one parameter of a base run config.

pub mod instance;
pub mod run;
pub mod spec;

pub use instance::{instance, InstanceClass, DEFAULT_INSTANCE, INSTANCES};
pub use run::{
    point_seed, prepare, prepare_replay, run_point, run_scenario, run_single, workload_seed,
    Deployment, RunSpec,
};
pub use spec::{
    geo_row, AxisValue, BaseConfig, Point, Preset, ScenarioKind, ScenarioSpec, WanSource, GEO_ROWS,
    SCHEMA_VERSION,
};
