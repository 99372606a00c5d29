//! Experiment orchestration over the (algorithm × noise × η²) grid.

mod config;
mod report;
mod run;

pub use config::{AlgorithmSpec, ExperimentConfig, NoiseSource, ReferenceMode, RoomConfig, StepSearch};
pub use report::{
    emit_results, export_spectrograms, read_results_csv, render_text, write_csv, CellStatus, CsvRow, OutputFormat,
    ResultRow, ResultsTable, TableMetadata, RESULTS_CSV, RESULTS_TEXT,
};
pub use run::{build_plant, converge, prepare_noise, run_cell, run_experiment, CellRun, NoiseCase};
