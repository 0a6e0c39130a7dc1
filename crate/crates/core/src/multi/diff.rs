use super::aggregate::profile_label;
use super::unify::{reorder, unify};
use crate::analysis::{compute_view, MatchKey, ViewKind, ViewTree};
use crate::error::{Error, Result};
use crate::model::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiffTag {
    Added,
    Deleted,
    Increased,
    Decreased,
    Unchanged,
}

impl DiffTag {
    /// Bracketed prefix shown on flame-graph frames; empty when unchanged.
    pub fn label(self) -> &'static str {
        match self {
            DiffTag::Added => "[A]",
            DiffTag::Deleted => "[D]",
            DiffTag::Increased => "[+]",
            DiffTag::Decreased => "[-]",
            DiffTag::Unchanged => "",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DiffTag::Added => "added",
            DiffTag::Deleted => "deleted",
            DiffTag::Increased => "increased",
            DiffTag::Decreased => "decreased",
            DiffTag::Unchanged => "unchanged",
        }
    }

    pub fn code(self) -> i64 {
        self as i64
    }

    /// The tag the same node gets when the two inputs are swapped.
    pub fn swapped(self) -> Self {
        match self {
            DiffTag::Added => DiffTag::Deleted,
            DiffTag::Deleted => DiffTag::Added,
            DiffTag::Increased => DiffTag::Decreased,
            DiffTag::Decreased => DiffTag::Increased,
            DiffTag::Unchanged => DiffTag::Unchanged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffNode {
    pub key: MatchKey,
    pub label: String,
    pub module: String,
    pub source: Option<(String, u32)>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub tag: DiffTag,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    /// `m2 - m1` when both are present.
    pub delta: Option<f64>,
    /// `m2 / m1` when both are present and `m1 != 0`.
    pub ratio: Option<f64>,
    /// Flame width: the two sides' width values added together.
    pub width: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DiffOptions {
    pub kind: Option<ViewKind>,
    /// Rescale the second profile by total(p1) / total(p2).
    pub normalize_by_total: bool,
}

/// Path-matched comparison of two profiles.
#[derive(Debug, Clone)]
pub struct DiffTree {
    metric: String,
    kind: ViewKind,
    scale: f64,
    nodes: Vec<DiffNode>,
}

pub fn diff(p1: &Profile, p2: &Profile, metric: &str) -> Result<DiffTree> {
    diff_with(p1, p2, metric, DiffOptions::default())
}

pub fn diff_with(
    p1: &Profile,
    p2: &Profile,
    metric: &str,
    options: DiffOptions,
) -> Result<DiffTree> {
    let kind = options.kind.unwrap_or(ViewKind::TopDown);
    let view = |p: &Profile, i: usize| match compute_view(p, metric, kind) {
        Err(Error::UnknownMetric(_)) => Err(Error::MetricMismatch {
            metric: metric.to_string(),
            profile: profile_label(p, i),
        }),
        other => other,
    };
    let (v1, v2) = (view(p1, 0)?, view(p2, 1)?);
    Ok(diff_views(&v1, &v2, options.normalize_by_total))
}

/// Compares two already computed views of the same shape.
pub fn diff_views(v1: &ViewTree, v2: &ViewTree, normalize_by_total: bool) -> DiffTree {
    let scale = if normalize_by_total && v2.total() > 0 {
        v1.total() as f64 / v2.total() as f64
    } else {
        1.0
    };
    let nodes: Vec<DiffNode> = unify(&[v1, v2])
        .into_iter()
        .map(|u| {
            let m1 = u.inclusive[0].map(|v| v as f64);
            let m2 = u.inclusive[1].map(|v| v as f64 * scale);
            let (tag, delta, ratio) = match (m1, m2) {
                (Some(a), Some(b)) => {
                    let d = b - a;
                    let tag = if d > 0.0 {
                        DiffTag::Increased
                    } else if d < 0.0 {
                        DiffTag::Decreased
                    } else {
                        DiffTag::Unchanged
                    };
                    (tag, Some(d), (a != 0.0).then(|| b / a))
                }
                (None, Some(_)) => (DiffTag::Added, None, None),
                (Some(_), None) => (DiffTag::Deleted, None, None),
                (None, None) => unreachable!("unified nodes come from at least one side"),
            };
            let width = u.width[0].unwrap_or(0) as f64 + u.width[1].unwrap_or(0) as f64 * scale;
            DiffNode {
                key: u.key,
                label: u.label,
                module: u.module,
                source: u.source,
                parent: u.parent,
                children: u.children,
                tag,
                m1,
                m2,
                delta,
                ratio,
                width,
            }
        })
        .collect();
    let nodes = reorder(
        nodes,
        |n: &DiffNode| &n.children,
        |n, p, c| {
            n.parent = p;
            n.children = c;
        },
        |n| n.parent,
        |a, b| {
            b.width
                .total_cmp(&a.width)
                .then_with(|| a.label.cmp(&b.label))
                .then_with(|| a.key.cmp(&b.key))
        },
    );
    DiffTree {
        metric: v1.metric().to_string(),
        kind: v1.kind(),
        scale,
        nodes,
    }
}

impl DiffTree {
    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn kind(&self) -> ViewKind {
        self.kind
    }

    /// Factor applied to the second profile's values.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn nodes(&self) -> &[DiffNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &DiffNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn find(&self, path: &[&str]) -> Option<usize> {
        let mut cur = 0;
        for label in path {
            cur = *self.nodes[cur]
                .children
                .iter()
                .find(|&&c| self.nodes[c].label == *label)?;
        }
        Some(cur)
    }

    pub fn path_label(&self, id: usize) -> String {
        let mut labels = Vec::new();
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            labels.push(self.nodes[cur].label.as_str());
            cur = p;
        }
        labels.reverse();
        labels.join(";")
    }
}
