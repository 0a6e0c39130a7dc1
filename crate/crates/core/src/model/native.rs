//! Native `PCCT` container.
//!
//! Layout: magic `PCCT`, little-endian `u16` version, little-endian `u64`
//! byte length, then a UTF-8 JSON document with the keys `meta`, `metrics`,
//! `frames`, `nodes` and `points`. Nodes are written parents-first, so a
//! node's `parent` index is always smaller than its own. Two optional keys
//! extend the base layout: `kind` on data-object nodes and `derived` for
//! attached formula metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    Aggregator, ContextNode, DerivedMetric, Frame, FrameId, Meta, MetricDescriptor, MetricKind,
    MonitoringPoint, NodeId, NodeKind, Profile,
};
use crate::error::{Error, Result};

pub const NATIVE_MAGIC: &[u8; 4] = b"PCCT";
pub const NATIVE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8;

#[derive(Serialize, Deserialize)]
struct Document {
    meta: MetaDoc,
    metrics: Vec<MetricDoc>,
    frames: Vec<FrameDoc>,
    nodes: Vec<NodeDoc>,
    points: Vec<PointDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    derived: Vec<DerivedDoc>,
}

#[derive(Serialize, Deserialize)]
struct MetaDoc {
    name: String,
    collector: String,
    timestamp: Option<i64>,
    properties: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct MetricDoc {
    name: String,
    unit: String,
    kind: String,
    aggregator: String,
}

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    #[serde(rename = "fn")]
    function: String,
    #[serde(rename = "mod")]
    module: String,
    file: String,
    line: u32,
    addr: u64,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    frame: usize,
    parent: i64,
    values: Vec<Option<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct PointDoc {
    ctx: Vec<(String, usize)>,
    values: Vec<Option<u64>>,
}

#[derive(Serialize, Deserialize)]
struct DerivedDoc {
    name: String,
    formula: String,
    values: Vec<Option<f64>>,
}

/// Encodes a profile. Frames nobody references are dropped on the way out.
pub fn serialize(profile: &Profile) -> Vec<u8> {
    let mut remap = vec![usize::MAX; profile.frames().len()];
    let mut frames = Vec::new();
    let mut nodes = Vec::with_capacity(profile.node_count());
    for node in profile.nodes() {
        let old = node.frame.index();
        if remap[old] == usize::MAX {
            remap[old] = frames.len();
            let f = &profile.frames()[old];
            frames.push(FrameDoc {
                function: f.function.clone(),
                module: f.module.clone(),
                file: f.file.clone(),
                line: f.line,
                addr: f.address,
            });
        }
        nodes.push(NodeDoc {
            frame: remap[old],
            parent: node.parent.map_or(-1, |p| p.0 as i64),
            values: node.values.clone(),
            kind: match node.kind {
                NodeKind::Code => None,
                NodeKind::DataObject => Some("data".to_string()),
            },
        });
    }
    let meta = profile.meta();
    let doc = Document {
        meta: MetaDoc {
            name: meta.name.clone(),
            collector: meta.collector.clone(),
            timestamp: meta.timestamp,
            properties: meta.properties.clone(),
        },
        metrics: profile
            .metrics()
            .iter()
            .map(|m| MetricDoc {
                name: m.name.clone(),
                unit: m.unit.clone(),
                kind: m.kind.as_str().to_string(),
                aggregator: m.aggregator.as_str().to_string(),
            })
            .collect(),
        frames,
        nodes,
        points: profile
            .points()
            .iter()
            .map(|p| PointDoc {
                ctx: p
                    .contexts
                    .iter()
                    .map(|(r, n)| (r.clone(), n.index()))
                    .collect(),
                values: p.values.clone(),
            })
            .collect(),
        derived: profile
            .derived()
            .iter()
            .map(|d| DerivedDoc {
                name: d.name.clone(),
                formula: d.formula.clone(),
                values: d.values.clone(),
            })
            .collect(),
    };
    let body = serde_json::to_vec(&doc).expect("profile documents always serialize");
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(NATIVE_MAGIC);
    out.extend_from_slice(&NATIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Decodes a native container, validating every cross reference.
pub fn deserialize(bytes: &[u8]) -> Result<Profile> {
    if bytes.len() < 4 {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != NATIVE_MAGIC {
        return Err(format_err(0, "missing PCCT magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != NATIVE_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if body.len() as u64 != len {
        return Err(format_err(
            6,
            format!(
                "document length {len} does not match {} remaining bytes",
                body.len()
            ),
        ));
    }
    let doc: Document = serde_json::from_slice(body).map_err(|e| {
        let offset = HEADER_LEN + byte_offset(body, e.line(), e.column());
        format_err(offset, e.to_string())
    })?;
    let invalid = |m: String| format_err(HEADER_LEN, m);

    let metrics = doc
        .metrics
        .into_iter()
        .map(|m| {
            let kind = MetricKind::parse(&m.kind)
                .ok_or_else(|| invalid(format!("unknown metric kind `{}`", m.kind)))?;
            let aggregator = Aggregator::parse(&m.aggregator)
                .ok_or_else(|| invalid(format!("unknown aggregator `{}`", m.aggregator)))?;
            Ok(MetricDescriptor {
                name: m.name,
                unit: m.unit,
                kind,
                aggregator,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let frames = doc
        .frames
        .into_iter()
        .map(|f| Frame {
            function: f.function,
            module: f.module,
            file: f.file,
            line: f.line,
            address: f.addr,
        })
        .collect();
    let nodes = doc
        .nodes
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let parent = match n.parent {
                -1 => None,
                p if p >= 0 && p <= u32::MAX as i64 => Some(NodeId(p as u32)),
                p => return Err(invalid(format!("node {i} has invalid parent {p}"))),
            };
            let kind = match n.kind.as_deref() {
                None | Some("code") => NodeKind::Code,
                Some("data") => NodeKind::DataObject,
                Some(k) => return Err(invalid(format!("node {i} has unknown kind `{k}`"))),
            };
            Ok(ContextNode {
                frame: FrameId(n.frame as u32),
                parent,
                children: Vec::new(),
                kind,
                values: n.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points = doc
        .points
        .into_iter()
        .map(|p| MonitoringPoint {
            contexts: p
                .ctx
                .into_iter()
                .map(|(r, n)| (r, NodeId(n.min(u32::MAX as usize) as u32)))
                .collect(),
            values: p.values,
        })
        .collect();
    let derived = doc
        .derived
        .into_iter()
        .map(|d| DerivedMetric {
            name: d.name,
            formula: d.formula,
            values: d.values,
        })
        .collect();
    let meta = Meta {
        name: doc.meta.name,
        collector: doc.meta.collector,
        timestamp: doc.meta.timestamp,
        properties: doc.meta.properties,
    };
    Profile::from_parts(meta, metrics, frames, nodes, points, derived).map_err(invalid)
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(body: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = body
        .split_inclusive(|&b| b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(body.len())
}
