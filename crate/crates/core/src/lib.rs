//! Two-stage inference of trip purposes and socio-economic attributes for
//! regular transit users.
//!
//! Stage 1 labels every transit trip with a purpose (Work / Home / Shopping &
//! Entertainment / Medical) by combining anchor-point rules with a
//! gradient-boosted tree classifier. Stage 2 infers each rider's age band,
//! job status, and income band from daily trip-chain features. Both stages
//! train on a small labeled survey dataset and transfer to large unlabeled
//! card data through curriculum-pseudo-labeling self-training.
//!
//! Module map:
//!
//! - [`ingest`]: CSV parsing, validation, transfer merging, spatial grid
//! - [`anchors`]: home/workplace detection from boarding regularity
//! - [`features`]: per-trip and per-day-chain feature vectors
//! - [`gbdt`]: from-scratch multiclass gradient-boosted trees
//! - [`selftrain`]: curriculum pseudo-labeling teacher-student loop
//! - [`metrics`]: classification and clustering evaluation
//! - [`explain`]: exact tree-Shapley attribution and permutation importance
//! - [`synth`]: seedable synthetic-city data generator
//! - [`pipeline`]: end-to-end orchestration and artifact output

pub mod anchors;
pub mod error;
pub mod explain;
pub mod features;
pub mod gbdt;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod selftrain;
pub mod synth;

pub use error::{Error, Result};
