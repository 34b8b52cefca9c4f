//! Leave-one-subject-out folds, training with the domain-classification
//! term, evaluation, random search and the window/horizon grid.

mod eval;
mod folds;
mod grid;
mod results;
mod run;
mod search;
mod train;

pub use eval::{evaluate, mean_predictor_rmse, predict, rmse};
pub use folds::{loso_folds, DomainIndex, FoldSpec};
pub use grid::{run_grid, EmptyCell, GridCell, GridResult, GridSpec, SkippedFold, SubjectScore};
pub use results::{GridResults, ResultsFile, TimingEntry, Timings, TrainResults, TrainSummary, RESULTS_VERSION};
pub use run::{prepare_fold, run_fold, run_loso, sorted_datasets, FoldData, FoldPlan, LineageAudit, SeriesPoint, TrialResult};
pub use search::{random_search, SearchResult, SearchTrial};
pub use train::{objective, train, EarlyStopping, EpochRecord, Objective, StepRecord, TrainConfig, TrainOutcome};
