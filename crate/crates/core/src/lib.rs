//! Subpath kernel for unordered trees whose nodes carry numeric features.
//!
//! The kernel sums, over every pair of equal-length downward paths of two
//! trees, the product of an atomic node kernel along the aligned nodes. It is
//! evaluated by a dynamic program in O(|T||T′|) node-pair steps.
//!
//! Around the kernel the crate provides tree ingestion and validation,
//! feature extraction, Gram matrices, synthetic datasets, a one-vs-one SVM
//! on precomputed kernels and a repeated-split evaluation harness.

pub mod atomic;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod gram;
pub mod kernel;
pub mod oracle;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod svm;
pub mod synthetic;
pub mod tree;

pub use atomic::{AtomicKind, KernelConfig};
pub use dataset::{parse_dataset, Dataset, Item};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentReport, Method, Protocol};
pub use features::{FeatureMode, FeatureSpec, ValueRange};
pub use gram::{gram_matrices, gram_matrix, GramMatrix};
pub use kernel::{rooted_kernel, subpath_kernel, KernelKind};
pub use svm::{predict, train, train_binary, SvmModel, SvmParams};
pub use tree::{Node, Tree};
