mod encode;
mod schema;
mod table;
mod toy;

pub use encode::{encode, split, split_indices, stratified_subsample, EncodedDataset, FeatureGroup, FeatureMap};
pub use schema::{Attribute, AttributeKind, DecisionSpec, ProtectedSpec, Schema};
pub use table::{load_table, read_table, RawTable, Value};
pub use toy::{sample_toy, scale_toy, toy_schema, unscale_toy, TOY_HIGH, TOY_LOW, TOY_MEAN_S0, TOY_MEAN_S1, TOY_VARIANCE};
