//! Daily wearable records: ingestion, cleaning, imputation, normalization and
//! a seeded synthetic cohort generator.

mod clean;
mod csv_io;
mod normalize;
mod record;
mod synthetic;

pub use clean::{clean, impute_mean, mark_sentinels, preprocess, ImputeWarning, Preprocessed, DEFAULT_DROP_FEATURES};
pub use csv_io::{parse_csv, read_csv, write_csv, write_csv_to};
pub use normalize::{Normalizer, TARGET_SCALE};
pub use record::{DailyRecord, SubjectDataset, SubjectId};
pub use synthetic::{generate_synthetic, subject_params, SubjectParams, SyntheticConfig, MIN_DAYS};

/// Default feature registry, in CSV column order.
pub const FEATURE_NAMES: [&str; 24] = [
    "total_kilocalories",
    "total_steps",
    "total_distance",
    "highly_active_seconds",
    "active_seconds",
    "moderate_intensity_minutes",
    "resting_heart_rate",
    "min_avg_heart_rate",
    "max_avg_heart_rate",
    "avg_waking_respiration",
    "highest_respiration",
    "lowest_respiration",
    "stress_average",
    "deep_sleep_seconds",
    "light_sleep_seconds",
    "rem_sleep_seconds",
    "awake_sleep_seconds",
    "awake_count",
    "avg_sleep_stress",
    "restless_moment_count",
    "lowest_respiration_sleep",
    "highest_respiration_sleep",
    "avg_respiration_sleep",
    "is_working_day",
];

pub const WORKING_DAY_FEATURE: &str = "is_working_day";

pub fn default_feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// 1.0 for Monday to Friday, 0.0 otherwise.
pub fn working_day_flag(date: chrono::NaiveDate) -> f64 {
    use chrono::Datelike;
    if date.weekday().num_days_from_monday() < 5 {
        1.0
    } else {
        0.0
    }
}
