//! Survey microdata: typed loading, sample restrictions, drug-use coding and
//! weighted descriptives.

mod dataset;
mod descriptives;
mod restrict;
mod taxonomy;

pub use dataset::{load_table, Column, ColumnDecl, ColumnKind, Dataset, Provenance, Schema};
pub use descriptives::{weighted_descriptives, Descriptive};
pub use restrict::{apply_restrictions, RestrictionSpec};
pub use taxonomy::{
    class_column, code_drug_use, union_with_missing, DrugTaxonomy, RecallWindow, ANY_CLASS,
};
