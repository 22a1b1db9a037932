//! Graph collaborative filtering: LightGCN propagation, BPR and contrastive
//! objectives, random and learned edge augmentation, full-ranking evaluation.

pub mod augment;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod losses;
pub mod param;
pub mod rng;
pub mod trainer;

pub use augment::{suggest_edges, EdgeCandidateSet, EdgeOperator};
pub use encoder::{propagate, propagate_backward, EmbeddingMatrix};
pub use error::{Error, Node, Result};
pub use eval::{evaluate, group_analysis, EvalSplit, MetricsReport};
pub use graph::{normalize, BipartiteGraph, DegreeMode, NormalizedAdjacency};
pub use ingest::{InteractionSet, SplitData, TrainBatch, Triple};
pub use losses::{LossReport, LossWeights};
pub use param::{Checkpoint, ParamStore, ParamTensor};
pub use trainer::{ModelKind, TrainConfig, TrainInputs, TrainOutcome};
