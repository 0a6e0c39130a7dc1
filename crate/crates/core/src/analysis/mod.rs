//! Single-profile tree analyses: inclusive/exclusive values, top-down,
//! bottom-up and flat views, traversal with callbacks, recursion
//! collapsing, pruning, depth truncation and search.

mod request;
mod transform;
mod view;

pub use request::{resolve_metric_name, ViewRequest};
pub use transform::{Directive, Visit};
pub use view::{
    compute_view, compute_view_with, BottomUpMode, MatchKey, ViewKind, ViewNode, ViewNodeKind,
    ViewTree, DEEP_LABEL, OTHER_LABEL, UNKNOWN_LABEL,
};
