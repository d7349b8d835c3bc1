//! Schemas, CSV ingestion, preprocessing, splits and synthetic data.

mod dataset;
mod preprocess;
mod schema;
mod split;
mod synth;
mod table;

pub use dataset::{Dataset, SubgroupIndex};
pub use preprocess::{fit, preprocess, transform, ColumnStats, FittedStats, MISSING};
pub use schema::{BinaryColumn, BinaryRule, ColumnKind, ColumnSpec, Schema, SensitiveFeature, Side};
pub use split::{split_indices, SplitIndices, Splits};
pub use synth::synth_biased;
pub use table::{load_csv, read_csv, RawColumn, RawTable, RawValues};
