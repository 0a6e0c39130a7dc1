use std::collections::{BTreeMap, HashMap};

use serde_json::{json, Map, Value};

use super::{layout_flame, table_row, ColorBasis, FlameRect, FlameSource, DEFAULT_MIN_WIDTH};
use crate::error::{Error, Result};
use crate::model::MetricDescriptor;
use crate::multi::DiffTag;

pub const EXPORT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ExportOptions {
    pub min_width: f64,
    /// Defaults to the tree's own basis (diff tags for diffs, modules otherwise).
    pub color: Option<ColorBasis>,
    /// Metric descriptors of the source profile, copied into the document.
    pub metrics: Vec<MetricDescriptor>,
    /// Include the full tree-table rows.
    pub rows: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions {
            min_width: DEFAULT_MIN_WIDTH,
            color: None,
            metrics: Vec::new(),
            rows: true,
        }
    }
}

/// Rounds to 9 significant digits so that exports are stable across
/// platforms and summation orders.
pub fn round9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn num(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        json!(v as i64)
    } else {
        serde_json::Number::from_f64(round9(v)).map_or(Value::Null, Value::Number)
    }
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

struct Interner {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn new() -> Self {
        Interner {
            items: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn get(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.items.len();
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

/// Serializes a tree and its flame layout as a self-describing JSON
/// document with sorted keys.
pub fn export<S: FlameSource + ?Sized>(tree: &S, options: &ExportOptions) -> String {
    serde_json::to_string(&export_value(tree, options))
        .expect("export values are always serializable")
}

pub fn export_value<S: FlameSource + ?Sized>(tree: &S, options: &ExportOptions) -> Value {
    let color = options.color.unwrap_or_else(|| tree.default_color());
    let rects = layout_flame(tree, options.min_width, color);
    let mut labels = Interner::new();
    let mut sources: Vec<(String, u32)> = Vec::new();
    let mut source_index: HashMap<(String, u32), usize> = HashMap::new();
    let mut source_id = |s: &Option<(String, u32)>| -> i64 {
        match s {
            None => -1,
            Some(s) => *source_index.entry(s.clone()).or_insert_with(|| {
                sources.push(s.clone());
                sources.len() - 1
            }) as i64,
        }
    };
    let is_diff = tree.kind_name() == "diff";
    let mut rect_rows = Vec::with_capacity(rects.len());
    let mut tags = Vec::new();
    for r in &rects {
        rect_rows.push(json!([
            r.node.map_or(-1, |n| n as i64),
            r.depth,
            num(r.x0),
            num(r.x1),
            labels.get(&r.label),
            r.color_key,
            r.tag.map_or(-1, DiffTag::code),
            source_id(&r.source),
        ]));
        if is_diff {
            tags.push(Value::String(r.tag.map_or("", |t| t.label()).to_string()));
        }
    }
    let mut doc = Map::new();
    if options.rows {
        let mut rows = Vec::with_capacity(tree.len());
        for id in 0..tree.len() {
            let row = table_row(tree, id);
            let mut cells = vec![
                json!(row.node),
                row.parent.map_or(json!(-1), |p| json!(p)),
                json!(row.depth),
                json!(labels.get(&row.label)),
                num(row.percent_of_root),
                json!(row.expandable as u8),
                row.context.map_or(json!(-1), |c| json!(c)),
            ];
            cells.extend(row.values.into_iter().map(opt));
            rows.push(Value::Array(cells));
        }
        let mut columns: Vec<&str> = vec![
            "node",
            "parent",
            "depth",
            "labelIdx",
            "percent",
            "expandable",
            "ctx",
        ];
        columns.extend(tree.columns());
        doc.insert("rowColumns".into(), json!(columns));
        doc.insert("rows".into(), Value::Array(rows));
    }
    let mut search: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for id in 0..tree.len() {
        if let Some(name) = tree.search_name(id) {
            search.entry(name).or_default().push(id);
        }
    }
    let metrics: Vec<Value> = options
        .metrics
        .iter()
        .map(|m| {
            json!({
                "name": m.name,
                "unit": m.unit,
                "kind": m.kind.as_str(),
                "aggregator": m.aggregator.as_str(),
            })
        })
        .collect();
    doc.insert("version".into(), json!(EXPORT_VERSION));
    doc.insert("kind".into(), json!(tree.kind_name()));
    doc.insert("metric".into(), json!(tree.metric()));
    doc.insert("metrics".into(), Value::Array(metrics));
    doc.insert("total".into(), num(tree.width(0)));
    doc.insert("colorBasis".into(), json!(color.as_str()));
    doc.insert("minWidth".into(), num(options.min_width));
    doc.insert("rects".into(), Value::Array(rect_rows));
    doc.insert("labels".into(), json!(labels.items));
    doc.insert("tags".into(), Value::Array(tags));
    doc.insert(
        "sources".into(),
        Value::Array(sources.iter().map(|(f, l)| json!([f, l])).collect()),
    );
    doc.insert("searchIndex".into(), json!(search));
    if let Some(vectors) = tree.vectors() {
        doc.insert("vectors".into(), json!(vectors));
    }
    Value::Object(doc)
}

fn bad(message: impl Into<String>) -> Error {
    Error::Format {
        offset: 0,
        message: message.into(),
    }
}

/// Reads the flame rects back out of an export document.
pub fn import_rects(text: &str) -> Result<Vec<FlameRect>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let strings = |key: &str| -> Result<Vec<String>> {
        doc.get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| bad(format!("missing `{key}`")))?
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| bad(format!("bad `{key}` entry")))
            })
            .collect()
    };
    let labels = strings("labels")?;
    let sources: Vec<(String, u32)> = doc
        .get("sources")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `sources`"))?
        .iter()
        .map(|s| {
            let file = s.get(0).and_then(Value::as_str);
            let line = s.get(1).and_then(Value::as_u64);
            match (file, line) {
                (Some(f), Some(l)) => Ok((f.to_string(), l as u32)),
                _ => Err(bad("bad `sources` entry")),
            }
        })
        .collect::<Result<_>>()?;
    let tags = [
        DiffTag::Added,
        DiffTag::Deleted,
        DiffTag::Increased,
        DiffTag::Decreased,
        DiffTag::Unchanged,
    ];
    doc.get("rects")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `rects`"))?
        .iter()
        .map(|r| {
            let cell = |i: usize| r.get(i).ok_or_else(|| bad("short rect"));
            let int =
                |i: usize| cell(i).and_then(|v| v.as_i64().ok_or_else(|| bad("bad rect field")));
            let float =
                |i: usize| cell(i).and_then(|v| v.as_f64().ok_or_else(|| bad("bad rect field")));
            let node = int(0)?;
            let label = labels
                .get(int(4)? as usize)
                .ok_or_else(|| bad("label index out of range"))?;
            let tag = int(6)?;
            let src = int(7)?;
            Ok(FlameRect {
                node: (node >= 0).then_some(node as usize),
                depth: int(1)? as usize,
                x0: float(2)?,
                x1: float(3)?,
                label: label.clone(),
                color_key: cell(5)?
                    .as_str()
                    .ok_or_else(|| bad("bad color key"))?
                    .to_string(),
                tag: (tag >= 0)
                    .then(|| tags.get(tag as usize).copied())
                    .flatten(),
                source: (src >= 0)
                    .then(|| sources.get(src as usize).cloned())
                    .flatten(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{compute_view, ViewKind};
    use crate::ingest::parse_folded;
    use crate::multi::{aggregate, diff};

    const P1: &str = "main;a;b 3\nmain;a;c 2\nmain;d 5\n";

    #[test]
    fn round9_digits() {
        assert_eq!(round9(1.0 / 3.0), 0.333333333);
        assert_eq!(round9(2.0 / 3.0 * 1e6), 666666.667);
        assert_eq!(round9(0.3), 0.3);
    }

    #[test]
    fn view_document() {
        let p = parse_folded(P1, "s", "s").unwrap();
        let v = compute_view(&p, "s", ViewKind::TopDown).unwrap();
        let opts = ExportOptions {
            min_width: 0.0,
            metrics: p.metrics().to_vec(),
            ..Default::default()
        };
        let text = export(&v, &opts);
        assert_eq!(text, export(&v, &opts));
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["version"], 1);
        assert_eq!(doc["kind"], "topdown");
        assert_eq!(doc["total"], 10);
        assert_eq!(doc["rects"].as_array().unwrap().len(), 6);
        assert_eq!(doc["rows"].as_array().unwrap().len(), 6);
        assert_eq!(doc["searchIndex"]["b"], json!([3]));
        assert!(doc.get("vectors").is_none());
        let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let back = import_rects(&text).unwrap();
        assert_eq!(back, layout_flame(&v, 0.0, ColorBasis::ByModule));
    }

    #[test]
    fn diff_document_has_parallel_tags() {
        let p1 = parse_folded(P1, "s", "s").unwrap();
        let p2 = parse_folded("main;a;b 5\nmain;d 5\nmain;e 1\n", "s", "s").unwrap();
        let d = diff(&p1, &p2, "s").unwrap();
        let doc: Value = serde_json::from_str(&export(&d, &ExportOptions::default())).unwrap();
        let rects = doc["rects"].as_array().unwrap();
        let tags = doc["tags"].as_array().unwrap();
        assert_eq!(rects.len(), tags.len());
        assert_eq!(doc["kind"], "diff");
        assert!(tags.contains(&json!("[A]")) && tags.contains(&json!("[D]")));
    }

    #[test]
    fn aggregate_document_has_vectors() {
        let p1 = parse_folded(P1, "s", "s").unwrap();
        let p2 = parse_folded("main;z 4\n", "s", "s").unwrap();
        let a = aggregate(&[&p1, &p2], "s").unwrap();
        let doc: Value = serde_json::from_str(&export(&a, &ExportOptions::default())).unwrap();
        let vectors = doc["vectors"].as_array().unwrap();
        assert_eq!(vectors.len(), a.len());
        let z = a.find(&["main", "z"]).unwrap();
        assert_eq!(vectors[z], json!([null, 4]));
    }
}
