use super::unify::{reorder, unify};
use crate::analysis::{compute_view, MatchKey, ViewKind, ViewTree};
use crate::error::{Error, Result};
use crate::model::{Aggregator, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub sum: u64,
    pub min: Option<u64>,
    pub max: Option<u64>,
    /// Over present entries only, unless missing entries count as zero.
    pub mean: Option<f64>,
    /// Number of entries the stats were computed over.
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[Option<u64>], missing_as_zero: bool) -> Self {
        let present: Vec<u64> = values
            .iter()
            .filter_map(|v| v.or(missing_as_zero.then_some(0)))
            .collect();
        let sum = present.iter().sum();
        let count = present.len();
        Stats {
            sum,
            min: present.iter().copied().min(),
            max: present.iter().copied().max(),
            mean: (count > 0).then(|| sum as f64 / count as f64),
            count,
        }
    }

    pub fn get(&self, aggregator: Aggregator) -> Option<f64> {
        match aggregator {
            Aggregator::Sum => Some(self.sum as f64),
            Aggregator::Min => self.min.map(|v| v as f64),
            Aggregator::Max => self.max.map(|v| v as f64),
            Aggregator::Mean => self.mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateNode {
    pub key: MatchKey,
    pub label: String,
    pub module: String,
    pub source: Option<(String, u32)>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Inclusive value per input profile, in input order.
    pub values: Vec<Option<u64>>,
    pub stats: Stats,
}

/// Union of the top-down trees of several profiles with per-profile values.
#[derive(Debug, Clone)]
pub struct AggregateTree {
    metric: String,
    aggregator: Aggregator,
    inputs: Vec<String>,
    missing_as_zero: bool,
    nodes: Vec<AggregateNode>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AggregateOptions {
    /// Count a path missing from a profile as zero in the stats.
    pub missing_as_zero: bool,
}

pub fn aggregate(profiles: &[&Profile], metric: &str) -> Result<AggregateTree> {
    aggregate_with(profiles, metric, AggregateOptions::default())
}

pub fn aggregate_with(
    profiles: &[&Profile],
    metric: &str,
    options: AggregateOptions,
) -> Result<AggregateTree> {
    if profiles.is_empty() {
        return Err(Error::NoProfiles);
    }
    let mut views: Vec<ViewTree> = Vec::with_capacity(profiles.len());
    for (i, p) in profiles.iter().enumerate() {
        match compute_view(p, metric, ViewKind::TopDown) {
            Ok(v) => views.push(v),
            Err(Error::UnknownMetric(_)) => {
                return Err(Error::MetricMismatch {
                    metric: metric.to_string(),
                    profile: profile_label(p, i),
                })
            }
            Err(e) => return Err(e),
        }
    }
    let descriptor = &profiles[0].metrics()[profiles[0].metric_index(metric)?];
    let refs: Vec<&ViewTree> = views.iter().collect();
    let nodes = unify(&refs)
        .into_iter()
        .map(|u| AggregateNode {
            stats: Stats::of(&u.inclusive, options.missing_as_zero),
            key: u.key,
            label: u.label,
            module: u.module,
            source: u.source,
            parent: u.parent,
            children: u.children,
            values: u.inclusive,
        })
        .collect();
    let nodes = reorder(
        nodes,
        |n: &AggregateNode| &n.children,
        |n, p, c| {
            n.parent = p;
            n.children = c;
        },
        |n| n.parent,
        |a, b| {
            b.stats
                .sum
                .cmp(&a.stats.sum)
                .then_with(|| a.label.cmp(&b.label))
                .then_with(|| a.key.cmp(&b.key))
        },
    );
    Ok(AggregateTree {
        metric: metric.to_string(),
        aggregator: descriptor.aggregator,
        inputs: profiles
            .iter()
            .enumerate()
            .map(|(i, p)| profile_label(p, i))
            .collect(),
        missing_as_zero: options.missing_as_zero,
        nodes,
    })
}

pub(crate) fn profile_label(p: &Profile, index: usize) -> String {
    if p.meta().name.is_empty() {
        format!("#{index}")
    } else {
        format!("#{index} ({})", p.meta().name)
    }
}

impl AggregateTree {
    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn aggregator(&self) -> Aggregator {
        self.aggregator
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn missing_as_zero(&self) -> bool {
        self.missing_as_zero
    }

    pub fn nodes(&self) -> &[AggregateNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &AggregateNode {
        &self.nodes[id]
    }

    pub fn get(&self, id: usize) -> Option<&AggregateNode> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Finds a node by the labels along its path below the root.
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

    /// Per-profile values of the node at `path`, in input order.
    pub fn histogram(&self, path: &[&str], metric: &str) -> Result<Vec<Option<u64>>> {
        if metric != self.metric {
            return Err(Error::UnknownMetric(metric.to_string()));
        }
        let id = self
            .find(path)
            .ok_or_else(|| Error::UnknownPath(path.join(";")))?;
        Ok(self.nodes[id].values.clone())
    }

    /// Per-profile values of node `id`.
    pub fn histogram_of(&self, id: usize) -> Result<&[Option<u64>]> {
        self.nodes
            .get(id)
            .map(|n| n.values.as_slice())
            .ok_or_else(|| Error::UnknownPath(format!("node {id}")))
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
