//! Daily panel ingestion and feature construction.

mod features;
mod panel;
mod transform;

pub use features::{
    build_design, build_design_from_raw, build_design_with_floor, prepare_panel, DesignMatrix,
    FeatureSpec, PredictorSpec, Target, Transform, DEFAULT_MIN_ROWS, PREDICTOR_NAMES,
};
pub use panel::{
    convert_to_eur, fill_gaps, fill_gaps_with, ingest_csv, ingest_reader, is_working_day,
    DailyPanel, DailyRecord, FillPolicy, DOLLAR_VARIABLES, FX_VARIABLE, SOURCE_VARIABLES,
};
pub use transform::{change, change_22, lag, rolling_mean, ChangeKind, MONTH};
