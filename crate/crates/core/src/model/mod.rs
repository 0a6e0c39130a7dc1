//! Generic profile representation.
//!
//! A [`Profile`] is a compact calling context tree: every sampled call path
//! is interned root-first, common prefixes share nodes, and each node carries
//! one raw value per metric. Monitoring points keep the sample-level view,
//! including points that tie several contexts together under role labels
//! (allocation / use / reuse and similar).

mod native;
mod profile;

pub use native::{deserialize, serialize, NATIVE_MAGIC, NATIVE_VERSION};
pub use profile::{Profile, TraversalOrder};

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

/// Role label used for ordinary single-context samples.
pub const ROLE_SELF: &str = "self";

/// Function name of the synthetic root frame.
pub const ROOT_NAME: &str = "«root»";

/// Index into a profile's interned frame table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameId(pub u32);

impl FrameId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index into a profile's node table. The root is always node 0 and every
/// parent has a smaller id than its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Code-mapping record. Two frames are the same frame only if every field
/// matches, so one function sampled at two lines yields two frames.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Frame {
    pub function: String,
    pub module: String,
    pub file: String,
    /// 0 = unknown.
    pub line: u32,
    /// 0 = unknown.
    pub address: u64,
}

impl Frame {
    pub fn function(name: impl Into<String>) -> Self {
        Frame {
            function: name.into(),
            ..Frame::default()
        }
    }

    pub fn with_module(mut self, module: impl Into<String>) -> Self {
        self.module = module.into();
        self
    }

    pub fn with_location(mut self, file: impl Into<String>, line: u32) -> Self {
        self.file = file.into();
        self.line = line;
        self
    }

    pub fn with_address(mut self, address: u64) -> Self {
        self.address = address;
        self
    }

    pub fn is_valid(&self) -> bool {
        !self.function.is_empty() || self.address != 0
    }

    /// Name shown to users: the function, or the hex address when unsymbolized.
    pub fn display_name(&self) -> String {
        self.name().into_owned()
    }

    pub fn name(&self) -> Cow<'_, str> {
        if self.function.is_empty() {
            Cow::Owned(format!("0x{:x}", self.address))
        } else {
            Cow::Borrowed(&self.function)
        }
    }

    /// Source location, when the frame carries one.
    pub fn source(&self) -> Option<(&str, u32)> {
        if self.file.is_empty() {
            None
        } else {
            Some((self.file.as_str(), self.line))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    /// Values sum meaningfully along paths and across samples.
    Additive,
    /// Point-in-time measurement; never summed into exclusive values.
    Snapshot,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Additive => "additive",
            MetricKind::Snapshot => "snapshot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "additive" => Some(MetricKind::Additive),
            "snapshot" => Some(MetricKind::Snapshot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Aggregator {
    #[default]
    Sum,
    Min,
    Max,
    Mean,
}

impl Aggregator {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Sum => "sum",
            Aggregator::Min => "min",
            Aggregator::Max => "max",
            Aggregator::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(Aggregator::Sum),
            "min" => Some(Aggregator::Min),
            "max" => Some(Aggregator::Max),
            "mean" => Some(Aggregator::Mean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricDescriptor {
    pub name: String,
    pub unit: String,
    pub kind: MetricKind,
    pub aggregator: Aggregator,
}

impl MetricDescriptor {
    pub fn additive(name: impl Into<String>, unit: impl Into<String>) -> Self {
        MetricDescriptor {
            name: name.into(),
            unit: unit.into(),
            kind: MetricKind::Additive,
            aggregator: Aggregator::Sum,
        }
    }

    pub fn snapshot(name: impl Into<String>, unit: impl Into<String>) -> Self {
        MetricDescriptor {
            name: name.into(),
            unit: unit.into(),
            kind: MetricKind::Snapshot,
            aggregator: Aggregator::Max,
        }
    }

    pub fn is_additive(&self) -> bool {
        self.kind == MetricKind::Additive
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Meta {
    pub name: String,
    pub collector: String,
    /// Collection time in Unix nanoseconds, when known.
    pub timestamp: Option<i64>,
    pub properties: BTreeMap<String, String>,
}

impl Meta {
    pub fn named(name: impl Into<String>) -> Self {
        Meta {
            name: name.into(),
            ..Meta::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NodeKind {
    #[default]
    Code,
    /// Heap or static object, placed under its allocation path.
    DataObject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextNode {
    pub frame: FrameId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub kind: NodeKind,
    /// Raw per-metric values; `None` is "not measured", distinct from zero.
    pub values: Vec<Option<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitoringPoint {
    /// Role-labelled contexts, e.g. `[("alloc", n1), ("use", n2)]`.
    pub contexts: Vec<(String, NodeId)>,
    pub values: Vec<Option<u64>>,
}

impl MonitoringPoint {
    pub fn is_single(&self) -> bool {
        self.contexts.len() == 1 && self.contexts[0].0 == ROLE_SELF
    }

    pub fn context<'a>(&'a self, role: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.contexts
            .iter()
            .filter(move |(r, _)| r == role)
            .map(|(_, n)| *n)
    }
}

/// A user-derived floating-point metric, one value per node. Derived metrics
/// are never re-summed.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMetric {
    pub name: String,
    pub formula: String,
    pub values: Vec<Option<f64>>,
}
