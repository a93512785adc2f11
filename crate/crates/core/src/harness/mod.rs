//! Simulation loop, experiment runner, bound curves, audits and the
//! grid-search oracle.

mod audit;
mod bounds;
mod calibrate;
mod config;
mod episode;
mod experiment;
mod oracle;

pub use audit::{
    adaptivity_check, audit_lemmas, cubic_graph_bound, estimator_tolerance, sign_test,
    sparse_gain_bound, squared_graph_bound, AdaptivityRow, AuditContext, AuditReport, CheckResult,
    SignTest, Violation, CUBIC_RATIO_GRAPH, CUMULATIVE_GAIN_ENTROPY, CUMULATIVE_GAIN_SPARSE,
    SQUARED_RATIO_GRAPH, SQUARED_RATIO_SPARSE,
};
pub use bounds::{
    bound_overlays, compute_metrics, graph_bound, graph_crossover, sparse_bound, BoundMetrics,
    BoundRow, BoundTable, GRAPH_CURVE, SPARSE_CURVE,
};
pub use calibrate::{example2_grid, example2_sweep, SweepCell, EXAMPLE2_GRID};
pub use config::{AgentSpec, BuiltEnv, EnvFamily, EnvSpec, ExperimentConfig, SCHEMA_VERSION};
pub use episode::{
    logged_gain, run_episode, run_episode_from, stream, stream_rng, EpisodeAgent, RoundRecord,
    Trajectory, CSV_COLUMNS,
};
pub use experiment::{
    episode_agents, run_experiment, summarize, trajectory_file_name, write_outputs, Cell,
    ExperimentResult, SummaryRow, TrajectoryMeta,
};
pub use oracle::{
    grid_size, oracle_gridsearch_cir, oracle_gridsearch_mir, OracleResult, GRID_LIMIT,
};
