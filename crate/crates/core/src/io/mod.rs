//! Case files, result files, field statistics and the run driver behind the CLI.

pub mod config;
pub mod run;
pub mod stats;
pub mod vtk;

pub use config::{load_case, parse_case, parse_case_str, template, CaseConfig, TEMPLATES};
pub use run::{generate_field, run_case, RunSummary};
pub use stats::{field_metrics, isoline_length, spatial_pdf, BinSpacing, FieldMetrics, Histogram};
pub use vtk::{read_vtk, write_vtk, CellData, VtkData};
