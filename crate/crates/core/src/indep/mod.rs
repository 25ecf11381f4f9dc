//! Fixed-size independent sets, the residual-graph localization chain, the
//! entropy-conservation experiment, and the down-up walk.

mod catalog;
mod chain;
mod conservation;
mod downup;
mod graph;

pub use catalog::connected_graphs;
pub use chain::{
    alpha_c, alpha_c_exact, chain_step, density_window_check, enumerate_ik, random_trace,
    residual_uniformity_check, uniform_ik, ChainState, DensityParams, DensityReport,
    UniformityReport,
};
pub use conservation::{
    entropy_conservation_experiment, one_step_decomposition_check, ConservationConfig,
    ConservationMode, ConservationReport, DecompositionReport, FunctionSpec, SetFunction,
    EXACT_ORDERING_CAP, MIN_MC_SAMPLES,
};
pub use downup::{down_up_move, down_up_step, down_up_walk, DownUpKernel};
pub use graph::Graph;
