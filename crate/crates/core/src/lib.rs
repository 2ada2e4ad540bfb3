//! Neural network ensembles trained with a k-means multi-subpopulation
//! particle swarm optimizer.
//!
//! Every particle encodes one three-layer sigmoid network. Each iteration
//! the personal bests are clustered with k-means and particles are steered
//! by the best member of their own cluster, so separate subpopulations
//! converge on different networks. The champion of each final cluster
//! becomes one ensemble component.
//!
//! * [`network`]: forward pass, flat parameter layout, MSE fitness
//! * [`clustering`]: k-means with warm starts and empty-cluster repair
//! * [`swarm`]: the optimizer
//! * [`ensemble`]: combination, classification, error decomposition
//! * [`data`]: CSV loading, imputation, scaling, folds
//! * [`experiment`]: cross-validation runs and reports

pub mod clustering;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
mod kv;
pub mod network;
pub mod swarm;

pub use clustering::{kmeans, ClusterAssignment};
pub use data::{Dataset, FoldPlan, Schema};
pub use ensemble::{build_ensemble, Decomposition, Ensemble};
pub use error::{Error, Result};
pub use experiment::{run_cv_experiment, ExperimentConfig, ResultsSummary};
pub use network::Topology;
pub use swarm::{Mode, Objective, Swarm, SwarmConfig};
