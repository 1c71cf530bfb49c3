//! Data CSV, fit JSON and survival-curve output.

pub mod curves;
pub mod data_csv;
pub mod fit_json;

pub use curves::{emit_curves, km_estimator, parse_grid, write_curves_csv, CurveKind, CurvePoints};
pub use data_csv::{read_csv, read_csv_path, write_csv};
pub use fit_json::{read_fit_json, write_fit_json, SCHEMA_VERSION};
