//! Training pipeline: configuration, synthetic data, optimizers, checkpoints,
//! gradient checking, benchmarking and hyperplane sampling.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod elliptope;
pub mod gradcheck;
pub mod optim;
pub mod trainer;

pub use bench::{bench, bench_metric, BenchResult};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{OptimizerKind, RunConfig};
pub use data::{generate, DatagenConfig, Dataset};
pub use elliptope::{hyperplane_grid, GridPoint};
pub use gradcheck::{gradcheck, gradcheck_model, GradcheckReport};
pub use optim::Optimizer;
pub use trainer::{evaluate, train, EpochLog, Evaluation};
