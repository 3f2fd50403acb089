//! Daily electricity price driver analysis with bagged regression trees.
//!
//! The crate is organised around the steps of the analysis:
//!
//! * [`pipeline`] ingests daily CSV files, aligns them on a working-day
//!   calendar and builds the design matrix of 12 predictors plus the
//!   22-day price change target.
//! * [`cart`] grows single least-squares regression trees.
//! * [`forest`] bags trees into a forest with out-of-bag evaluation,
//!   impurity importances, error-vs-trees curves and two-feature partial
//!   effect grids.
//! * [`baselines`] fits the AR(1) and OLS benchmarks.
//! * [`synth`] generates synthetic markets with planted driver effects.

pub mod baselines;
pub mod cart;
pub mod conf;
pub mod error;
pub mod forest;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use baselines::{compare, fit_ar1, fit_ols, LinearFit, RatioRow};
pub use cart::{best_split, fit_tree, RegressionTree, SplitDecision, TreeParams};
pub use error::{Error, Result};
pub use forest::{
    ForestModel, GridAxis, Hyperparameters, ImportanceTable, OobPredictions, PartialGrid,
    SamplingMode,
};
pub use matrix::Matrix;
pub use metrics::rmse;
pub use pipeline::{
    build_design, build_design_from_raw, ingest_csv, DailyPanel, DesignMatrix, FeatureSpec,
    FillPolicy, Target, PREDICTOR_NAMES,
};
pub use synth::ScenarioSpec;
