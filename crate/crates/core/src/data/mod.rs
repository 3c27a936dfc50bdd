//! Dataset files, co-citation ingestion, synthetic generation and result CSVs.

pub mod cocitation;
pub mod dataset;
pub mod results;
pub mod synth;

pub use cocitation::{build_cocitation, ingest_citation_files, Cocitation, IsolatedPolicy};
pub use dataset::{member_mean_features, Dataset, DATASET_EXTENSION};
pub use results::{export_csv, import_csv, parse_csv, plot_script, read_metadata, render_csv, CsvRecord, Metadata};
pub use synth::{synth_planted, Planted, SynthConfig};
