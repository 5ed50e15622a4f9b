//! Experiment orchestration: configuration, seeded multi-run training,
//! learning-curve summaries, charts and learning-rate search.

mod chart;
mod config;
mod gridsearch;
mod run;
mod summary;

pub use chart::{emit_chart, render_chart, ChartSeries};
pub use config::{
    default_episodes, parse_seeds, published_rates, rates, standard_grid, tuned_rates, RateTable, RunConfig,
    DEFAULT_SEED_COUNT, EPISODES_LARGE_TEAM, EPISODES_SMALL_TEAM, MODEL_RATE_GRID, POLICY_RATE_GRID,
};
pub use gridsearch::{gridsearch, GridCell, GridsearchResult, GRIDSEARCH_AGENTS, GRIDSEARCH_SEEDS};
pub use run::{
    final_decile_mean, first_decile_mean, manifest_text, model_bytes, run, train_seed, write_outputs, LearningCurve,
    RunOutcome, SeedFailure, SeedRun,
};
pub use summary::{
    mean_and_half_width, smooth, summarize, write_summary_csv, z_value, SummaryRow, DEFAULT_CONFIDENCE,
    SMOOTHING_WINDOW,
};
