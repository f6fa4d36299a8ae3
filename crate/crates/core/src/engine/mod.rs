//! Scenario configuration, episode and batch orchestration, outputs, and the
//! flat-array environment.

pub mod config;
pub mod env;
pub mod output;
pub mod presets;
pub mod record;
pub mod runner;

pub use config::ScenarioConfig;
pub use env::{FlatEnv, FlatStep};
pub use output::{csv_header, write_episode_csv, write_json, write_outputs};
pub use presets::{scenario_preset, PRESET_NAMES};
pub use record::{BatchResult, EpisodeRecord, EpisodeSummary, PeriodRow, SummaryStats};
pub use runner::{
    policy_rng, run_batch, run_batch_records, run_episode, ActionSource, Episode, JointAction,
    ScriptedAssignment, SeedPair,
};
