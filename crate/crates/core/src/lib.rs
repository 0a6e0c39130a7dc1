//! Profile analysis toolkit: a generic calling-context-tree model, format
//! converters, tree analyses across one or many profiles, derived metrics,
//! and flame-graph layout.

pub mod analysis;
pub mod derive;
pub mod error;
pub mod ingest;
pub mod layout;
pub mod model;
pub mod multi;

pub use error::{Error, Result};
pub use model::{Frame, Meta, MetricDescriptor, NodeId, Profile};
