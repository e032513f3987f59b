//! Decision-tree interpreters for recorded neural policy rollouts.
//!
//! For each interpreted neuron a regression tree maps world state to the
//! neuron's response; its root-to-leaf routes become conjunctive logic
//! programs over named state dimensions. A second tree inverts the mapping,
//! predicting a route from the response alone. On top of those trees the
//! [`metrics`] module scores how disentangled, accurate and mutually consistent
//! the resulting explanations are.

pub mod data;
pub mod error;
pub mod interpret;
pub mod logic;
pub mod metrics;
pub mod synth;
pub mod tree;

pub use data::{
    load_dataset, DataFormat, DatasetView, Episode, Matrix, NeuronId, TrajectoryDataset,
};
pub use error::{Error, Result};
pub use interpret::{InterpretConfig, NeuronInterpreter, PolicyInterpretation};
pub use logic::{LogicProgram, Notation};
pub use metrics::{Binning, Discretizer, MetricsReport, SweepGrid};
pub use tree::{
    Criterion, DecisionPath, DecisionTree, Op, PathId, Predicate, TreeConfig, TreeKind,
};
