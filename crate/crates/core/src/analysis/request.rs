use super::view::{compute_view_with, BottomUpMode, ViewKind, ViewTree};
use crate::error::{Error, Result};
use crate::model::Profile;

/// A view plus the transforms to apply to it, in a fixed order:
/// recursion collapsing, depth truncation, then pruning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewRequest {
    pub kind: Option<ViewKind>,
    /// Metric name or index; the profile's default metric when absent.
    pub metric: Option<String>,
    pub mode: BottomUpMode,
    pub collapse_recursion: bool,
    pub max_depth: Option<usize>,
    pub threshold: Option<f64>,
}

/// Resolves a metric key to its name, falling back to the first additive
/// metric, or the first metric of any kind.
pub fn resolve_metric_name(profile: &Profile, key: Option<&str>) -> Result<String> {
    let index = match key {
        Some(k) => profile.resolve_metric(k)?,
        None => profile
            .default_metric()
            .or((!profile.metrics().is_empty()).then_some(0))
            .ok_or_else(|| Error::UnknownMetric("(profile has no metrics)".to_string()))?,
    };
    Ok(profile.metrics()[index].name.clone())
}

impl ViewRequest {
    pub fn apply(&self, profile: &Profile) -> Result<ViewTree> {
        let metric = resolve_metric_name(profile, self.metric.as_deref())?;
        let kind = self.kind.unwrap_or(ViewKind::TopDown);
        let mut view = compute_view_with(profile, &metric, kind, self.mode)?;
        if self.collapse_recursion {
            view = view.collapse_recursion()?;
        }
        if let Some(d) = self.max_depth {
            view = view.truncate_depth(d);
        }
        if let Some(t) = self.threshold {
            view = view.prune(t)?;
        }
        Ok(view)
    }
}
