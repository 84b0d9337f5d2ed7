//! Simulation of longest paths in random directed graphs on the integer line
//! and on slabs `ℤ × I`, with regenerative analysis and limit-law checks.

pub mod edgelist;
pub mod error;
pub mod gamma_zero;
pub mod graph_gen;
pub mod limit_process;
pub mod longest_path;
pub mod poset;
pub mod prob_model;
pub mod regen_stats;
pub mod sim_engine;
pub mod skeleton_scan;
pub mod slab_analysis;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
pub use poset::Poset;
pub use prob_model::{Bounded, ConditionReport, EdgeProbabilityModel, ModelKind, SlabProbabilityModel};
pub use stream::{Purpose, SeedTag};
pub use graph_gen::{
    sample_slab_window, sample_window, DenseWindowGraph, LineGraph, Neighbour, SlabGraph, SlabVertex,
    SlabWindowGraph, WindowGraph,
};
pub use longest_path::{PathKind, PathResult};
pub use skeleton_scan::{Cycle, SkeletonReport, SlabSkeletonReport};
pub use gamma_zero::{construct_gamma0, GammaOptions, GammaZeroTrace, RecursionTrace};
pub use regen_stats::RegenEstimate;
pub use slab_analysis::{build_hasse, HasseDiagram};
pub use stats::Estimate;
