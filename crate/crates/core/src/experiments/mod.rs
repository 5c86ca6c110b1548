//! Training, multi-seed sweeps and the measurement suite: split accuracy,
//! per-suffix scores, wug productions, rank profiles, speaker statistics and
//! rank correlations.

mod metrics;
mod report;
mod speakers;
mod stats;
mod train;
mod wug;

pub use metrics::{accuracy, exact_accuracy, prf_from_labels, prf_from_predictions, suffix_prf, Prf, PrfTable};
pub use report::{Report, SeedAccuracy};
pub use speakers::{
    parse_speaker_csv, rating_stats, solve_rating_counts, speaker_csv, speaker_item_productions,
    speaker_production_stats, survey_table_records, ProductionStats, RatingStats, RatingSummary, SpeakerRecord,
    SPEAKER_HEADER, SURVEY_PARTICIPANTS, SURVEY_TABLE,
};
pub use stats::{average_ranks, compare_model_speaker, pearson, spearman_rho, RhoRow};
pub use train::{
    encode_examples, predict, subsample, sweep, train, Architecture, EpochRecord, Example, ExperimentData,
    GradientNorm, StepDecay, SweepResult, TrainConfig, TrainOutcome,
};
pub use wug::{
    rank_profile, wug_productions, FixedInflector, Inflector, ItemProductions, Prediction, RankProfile,
    TrainedModel, WugReport,
};
