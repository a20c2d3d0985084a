//! Multi-view embeddings (MBFA, IBFA, MCCA) and zero-shot classification
//! over several types of class-level side information.

pub mod data;
pub mod eigen;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod matrix;
pub mod pipeline;

pub use data::{
    generate_synthetic, load_dataset, save_dataset, split_validation, ClassId, ClassPrototypeTable, Manifest, SideInfo,
    Split, SyntheticSpec, ViewSpec, ZslDataset,
};
pub use eigen::{symmetric_eig, EigenResult};
pub use embedding::{build_cross_covariance, fit_ibfa, fit_mbfa, fit_mcca, CrossCovariance, EmbeddingModel, Method};
pub use error::{Error, Result};
pub use evaluation::{aggregate_repeats, benchmark, evaluate, EvaluationReport, Timing};
pub use matrix::Matrix;
pub use pipeline::{
    cosine_similarity, grid_search_weights, infer, sweep_dimension, train, FusionWeights, GridSearchOptions,
    GridSearchResult, Prediction, PrototypeBank, TrainOptions, ZslModel,
};
