//! Analyses spanning several profiles: aggregation, differencing and
//! correlation of multi-context monitoring points.

mod aggregate;
mod correlate;
mod diff;
mod unify;

pub use aggregate::{
    aggregate, aggregate_with, AggregateNode, AggregateOptions, AggregateTree, Stats,
};
pub use correlate::{anchors, correlate, project_role, Correlation};
pub use diff::{diff, diff_views, diff_with, DiffNode, DiffOptions, DiffTag, DiffTree};
pub use unify::UnifiedNode;
