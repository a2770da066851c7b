//! Experiment orchestration: single runs, ensembles, merit tables and the
//! residual corpus, plus their file formats.

pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod merit;
pub mod output;
pub mod scenario;

pub use config::{FaultSpec, FtTechnique, PlantKind, ScenarioConfig, TrajectoryKind};
pub use corpus::{evaluate_residuals, generate_corpus, Corpus, CorpusInfo, ResidualEvaluation};
pub use ensemble::{run_ensemble, run_ensemble_with, EnsembleResult};
pub use merit::{merit_table, run_merit, MeritReport, MeritTable, ScenarioSamples, MERIT_TECHNIQUES};
pub use scenario::{build_schedule, calibrate, run_scenario, simulate, RunMetrics, RunOutput, RunTrace, Thresholds};
