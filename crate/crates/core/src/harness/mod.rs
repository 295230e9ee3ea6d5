//! Ensembles, statistics, comparison and persistence.

pub mod config;
pub mod csv_io;
pub mod ensemble;
pub mod experiments;
pub mod oracle;
pub mod seed;
pub mod stats;
pub mod weak;

pub use config::{build_sde, ExperimentSpec, SdeSpec};
pub use csv_io::{read_stats, read_stats_file, write_stats, write_stats_file, write_weak, write_weak_file};
pub use ensemble::{run_ensemble, Engine, Ensemble, EnsembleSpec};
pub use oracle::{compare_to_oracle, OracleCurve, OracleKind, OracleReport, Statistic};
pub use stats::{EngineKind, EnsembleStats, Moments};
pub use weak::{bootstrap_max_gap_confidence, weak_error, Observable, WeakErrorReport};
