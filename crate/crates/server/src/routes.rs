use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use profcct_core::analysis::{resolve_metric_name, BottomUpMode, ViewKind, ViewRequest};
use profcct_core::layout::{child_rows, export_value, ColorBasis, ExportOptions, FlameSource};
use profcct_core::multi::{aggregate_with, correlate, diff_with, AggregateOptions, DiffOptions};
use profcct_core::{Error, NodeId, Profile};
use serde_json::{json, Value};

use crate::session::{Entry, Session};
use crate::{Response, INDEX_HTML};

/// An HTTP error with a JSON body.
#[derive(Debug)]
struct ApiError {
    status: u16,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: 400,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: 404,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownNode(_) | Error::UnknownPath(_) | Error::UnknownHandle(_) => 404,
            _ => 400,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, ApiError>;

struct Query(BTreeMap<String, String>);

impl Query {
    fn parse(raw: &str) -> Self {
        Query(
            form_urlencoded::parse(raw.as_bytes())
                .into_owned()
                .collect(),
        )
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{key}`")))
    }

    fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| ApiError::bad_request(format!("malformed `{key}`: {v:?}")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> bool {
        matches!(self.get(key), Some("1" | "true" | "yes"))
    }
}

/// Routes one request. Only `GET` is served.
pub fn handle(session: &Session, method: &str, url: &str) -> Response {
    let (path, query) = url.split_once('?').unwrap_or((url, ""));
    if method != "GET" && method != "HEAD" {
        return error_response(405, format!("method {method} not allowed"));
    }
    let query = Query::parse(query);
    match route(session, path, &query) {
        Ok(r) => r,
        Err(e) => error_response(e.status, e.message),
    }
}

fn error_response(status: u16, message: String) -> Response {
    Response::json(status, &json!({ "error": message, "status": status }))
}

fn route(session: &Session, path: &str, q: &Query) -> Result<Response> {
    let segments: Vec<&str> = path.trim_start_matches('/').split('/').collect();
    let ok = |v: Value| Ok(Response::json(200, &v));
    match segments.as_slice() {
        ["api", "profiles"] => ok(profiles(session)),
        ["api", "view"] => ok(view(session, q)?),
        ["api", "rows"] => ok(rows(session, q)?),
        ["api", "diff"] => ok(diff(session, q)?),
        ["api", "aggregate"] => ok(aggregate(session, q)?),
        ["api", "node", id, "histogram"] => ok(histogram(session, parse_id(id)?, q)?),
        ["api", "node", id, "hover"] => ok(hover(session, parse_id(id)?, q)?),
        ["api", "correlate"] => ok(correlation(session, q)?),
        ["api", "search"] => ok(search(session, q)?),
        ["api", "source"] => source(session, q),
        ["api", ..] => Err(ApiError::not_found(format!("no endpoint at {path}"))),
        _ => static_asset(session, path),
    }
}

fn parse_id(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| ApiError::bad_request(format!("malformed node id {s:?}")))
}

fn entry(session: &Session, raw: &str) -> Result<std::sync::Arc<Entry>> {
    let handle: usize = raw
        .parse()
        .map_err(|_| ApiError::bad_request(format!("malformed profile handle {raw:?}")))?;
    session
        .get(handle)
        .ok_or_else(|| ApiError::not_found(format!("unknown profile handle {handle}")))
}

fn profiles(session: &Session) -> Value {
    let list: Vec<Value> = session
        .snapshot()
        .iter()
        .map(|e| {
            let p = &e.profile;
            let totals: BTreeMap<&str, u64> = p
                .metrics()
                .iter()
                .enumerate()
                .map(|(i, m)| (m.name.as_str(), p.total(i)))
                .collect();
            json!({
                "handle": e.handle,
                "origin": e.origin,
                "name": p.meta().name,
                "collector": p.meta().collector,
                "timestamp": p.meta().timestamp,
                "properties": p.meta().properties,
                "metrics": metrics_json(p),
                "derived": p.derived().iter().map(|d| json!({"name": d.name, "formula": d.formula})).collect::<Vec<_>>(),
                "nodes": p.node_count(),
                "points": p.points().len(),
                "totals": totals,
            })
        })
        .collect();
    json!({ "profiles": list })
}

fn metrics_json(p: &Profile) -> Value {
    p.metrics()
        .iter()
        .map(|m| {
            json!({
                "name": m.name,
                "unit": m.unit,
                "kind": m.kind.as_str(),
                "aggregator": m.aggregator.as_str(),
            })
        })
        .collect()
}

fn view_kind(q: &Query) -> Result<Option<ViewKind>> {
    q.get("kind")
        .map(|k| {
            ViewKind::parse(k)
                .ok_or_else(|| ApiError::bad_request(format!("unknown view kind {k:?}")))
        })
        .transpose()
}

fn view_request(q: &Query) -> Result<ViewRequest> {
    let mode = match q.get("mode") {
        None | Some("exclusive") => BottomUpMode::Exclusive,
        Some("inclusive") => BottomUpMode::Inclusive,
        Some(m) => {
            return Err(ApiError::bad_request(format!(
                "unknown bottom-up mode {m:?}"
            )))
        }
    };
    Ok(ViewRequest {
        kind: view_kind(q)?,
        metric: q.get("metric").map(str::to_string),
        mode,
        collapse_recursion: q.flag("collapse"),
        max_depth: q.parse_opt("maxDepth")?,
        threshold: q.parse_opt("threshold")?,
    })
}

fn export_options(q: &Query, p: Option<&Profile>) -> Result<ExportOptions> {
    let mut o = ExportOptions::default();
    if let Some(w) = q.parse_opt::<f64>("minWidth")? {
        if !(0.0..=0.5).contains(&w) {
            return Err(ApiError::bad_request("minWidth must lie in [0, 0.5]"));
        }
        o.min_width = w;
    }
    if let Some(c) = q.get("color") {
        o.color = Some(
            ColorBasis::parse(c)
                .ok_or_else(|| ApiError::bad_request(format!("unknown color basis {c:?}")))?,
        );
    }
    o.rows = !matches!(q.get("rows"), Some("0" | "false"));
    if let Some(p) = p {
        o.metrics = p.metrics().to_vec();
    }
    Ok(o)
}

fn view(session: &Session, q: &Query) -> Result<Value> {
    let e = entry(session, q.require("p")?)?;
    let v = view_request(q)?.apply(&e.profile)?;
    Ok(export_value(&v, &export_options(q, Some(&e.profile))?))
}

fn rows(session: &Session, q: &Query) -> Result<Value> {
    let e = entry(session, q.require("p")?)?;
    let v = view_request(q)?.apply(&e.profile)?;
    let node = q.parse_opt::<usize>("node")?.unwrap_or(0);
    if node >= v.len() {
        return Err(ApiError::not_found(format!("unknown view node {node}")));
    }
    let offset = q.parse_opt("offset")?.unwrap_or(0);
    let limit = q.parse_opt("limit")?.unwrap_or(200);
    let rows: Vec<Value> = child_rows(&v, node, offset, limit)
        .into_iter()
        .map(|r| {
            json!({
                "node": r.node,
                "depth": r.depth,
                "label": r.label,
                "values": r.values,
                "percent": r.percent_of_root,
                "expandable": r.expandable,
                "ctx": r.context,
            })
        })
        .collect();
    Ok(json!({
        "parent": node,
        "columns": v.columns(),
        "offset": offset,
        "count": v.node(node).children.len(),
        "rows": rows,
    }))
}

fn diff(session: &Session, q: &Query) -> Result<Value> {
    let a = entry(session, q.require("p1")?)?;
    let b = entry(session, q.require("p2")?)?;
    let metric = resolve_metric_name(&a.profile, q.get("metric"))?;
    let options = DiffOptions {
        kind: view_kind(q)?,
        normalize_by_total: q.flag("normalize"),
    };
    let d = diff_with(&a.profile, &b.profile, &metric, options)?;
    let mut doc = export_value(&d, &export_options(q, Some(&a.profile))?);
    doc["scale"] = json!(d.scale());
    Ok(doc)
}

fn handles(session: &Session, raw: &str) -> Result<Vec<std::sync::Arc<Entry>>> {
    raw.split(',').map(|h| entry(session, h.trim())).collect()
}

/// The aggregate over the listed handles, plus each input's origin.
fn aggregate_tree(
    session: &Session,
    raw: &str,
    q: &Query,
) -> Result<(profcct_core::multi::AggregateTree, Vec<String>)> {
    let entries = handles(session, raw)?;
    let origins = entries.iter().map(|e| e.origin.clone()).collect();
    let refs: Vec<&Profile> = entries.iter().map(|e| &e.profile).collect();
    let metric = resolve_metric_name(refs[0], q.get("metric"))?;
    let tree = aggregate_with(
        &refs,
        &metric,
        AggregateOptions {
            missing_as_zero: q.flag("missingAsZero"),
        },
    )?;
    Ok((tree, origins))
}

fn aggregate(session: &Session, q: &Query) -> Result<Value> {
    let (tree, origins) = aggregate_tree(session, q.require("p")?, q)?;
    let first = entry(session, q.require("p")?.split(',').next().unwrap_or(""))?;
    let mut doc = export_value(&tree, &export_options(q, Some(&first.profile))?);
    doc["inputs"] = json!(origins);
    Ok(doc)
}

fn histogram(session: &Session, id: usize, q: &Query) -> Result<Value> {
    let (tree, origins) = aggregate_tree(session, q.require("agg")?, q)?;
    let values = tree
        .histogram_of(id)
        .map_err(|_| ApiError::not_found(format!("unknown aggregate node {id}")))?;
    Ok(json!({
        "node": id,
        "label": tree.node(id).label,
        "path": tree.path_label(id),
        "metric": tree.metric(),
        "inputs": origins,
        "values": values,
    }))
}

fn hover(session: &Session, id: usize, q: &Query) -> Result<Value> {
    let e = entry(session, q.require("p")?)?;
    let p = &e.profile;
    let node =
        NodeId(u32::try_from(id).map_err(|_| ApiError::not_found(format!("unknown node {id}")))?);
    if p.get_node(node).is_none() {
        return Err(ApiError::not_found(format!("unknown node {id}")));
    }
    let frame = p.node_frame(node);
    let inclusive: Vec<Option<u64>> = (0..p.metrics().len())
        .map(|m| {
            p.metrics()[m]
                .is_additive()
                .then(|| p.inclusive_values(m)[id])
        })
        .collect();
    let source = if id == 0 { None } else { frame.source() };
    // Every node mapped to the same line contributes to the line totals.
    let line_totals: Option<Vec<u64>> = source.map(|(file, line)| {
        (0..p.metrics().len())
            .map(|m| {
                p.nodes()
                    .iter()
                    .filter(|n| {
                        let f = p.frame(n.frame);
                        f.file == file && f.line == line
                    })
                    .filter_map(|n| n.values[m])
                    .sum()
            })
            .collect()
    });
    let derived: BTreeMap<&str, Option<f64>> = p
        .derived()
        .iter()
        .map(|d| (d.name.as_str(), d.values[id]))
        .collect();
    Ok(json!({
        "node": id,
        "path": p.path_label(node),
        "function": frame.display_name(),
        "module": frame.module,
        "file": source.map(|s| s.0),
        "line": source.map(|s| s.1),
        "metrics": p.metrics().iter().map(|m| m.name.as_str()).collect::<Vec<_>>(),
        "exclusive": p.node(node).values,
        "inclusive": inclusive,
        "lineTotals": line_totals,
        "derived": derived,
    }))
}

fn correlation(session: &Session, q: &Query) -> Result<Value> {
    let e = entry(session, q.require("p")?)?;
    let anchor: u32 = q
        .require("anchor")?
        .parse()
        .map_err(|_| ApiError::bad_request("malformed `anchor`"))?;
    let c = correlate(
        &e.profile,
        NodeId(anchor),
        q.require("from")?,
        q.require("to")?,
    )?;
    let v = view_request(q)?.apply(&c.projection)?;
    let mut doc = export_value(&v, &export_options(q, Some(&c.projection))?);
    doc["correlation"] = json!({
        "anchor": anchor,
        "from": c.from,
        "to": c.to,
        "points": c.points,
    });
    Ok(doc)
}

fn search(session: &Session, q: &Query) -> Result<Value> {
    let e = entry(session, q.require("p")?)?;
    let needle = q.require("q")?;
    if needle.is_empty() {
        return Err(Error::EmptyQuery.into());
    }
    let needle_lower = needle.to_lowercase();
    let p = &e.profile;
    let nodes: Vec<usize> = (1..p.node_count())
        .filter(|&i| {
            p.node_frame(NodeId(i as u32))
                .display_name()
                .to_lowercase()
                .contains(&needle_lower)
        })
        .collect();
    Ok(json!({ "query": needle, "nodes": nodes }))
}

/// Resolves `raw` against `root`, refusing anything that lands outside it.
fn confine(root: &Path, raw: &str) -> Result<PathBuf> {
    let forbidden = || ApiError {
        status: 403,
        message: format!("{raw} is outside the workspace"),
    };
    let candidate = Path::new(raw);
    let joined = if candidate.is_absolute() {
        candidate.to_path_buf()
    } else {
        root.join(candidate)
    };
    // Reject lexical escapes before touching the file system.
    let mut depth: isize = 0;
    for c in Path::new(raw).components() {
        match c {
            Component::ParentDir => depth -= 1,
            Component::Normal(_) => depth += 1,
            _ => {}
        }
        if depth < 0 {
            return Err(forbidden());
        }
    }
    match joined.canonicalize() {
        Ok(real) if real.starts_with(root) => Ok(real),
        Ok(_) => Err(forbidden()),
        Err(_) if !joined.starts_with(root) => Err(forbidden()),
        Err(_) => Err(ApiError::not_found(format!("no such file {raw}"))),
    }
}

fn source(session: &Session, q: &Query) -> Result<Response> {
    let raw = q.require("file")?;
    let path = confine(session.workspace_root(), raw)?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ApiError::not_found(format!("cannot read {raw}: {e}")))?;
    let from: usize = q.parse_opt("from")?.unwrap_or(1).max(1);
    let to: usize = q.parse_opt("to")?.unwrap_or(usize::MAX);
    if to < from {
        return Err(ApiError::bad_request("`to` precedes `from`"));
    }
    let mut slice = String::new();
    for line in text
        .split_inclusive('\n')
        .skip(from - 1)
        .take(to - from + 1)
    {
        slice.push_str(line);
    }
    Ok(Response::text(
        200,
        "text/plain; charset=utf-8",
        slice.into_bytes(),
    ))
}

fn static_asset(session: &Session, path: &str) -> Result<Response> {
    let rel = path.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let Some(dir) = session.static_dir() else {
        return if rel == "index.html" {
            Ok(Response::text(
                200,
                "text/html; charset=utf-8",
                INDEX_HTML.as_bytes().to_vec(),
            ))
        } else {
            Err(ApiError::not_found(format!("no asset {path}")))
        };
    };
    let file = confine(dir, rel)?;
    let body = std::fs::read(&file).map_err(|_| ApiError::not_found(format!("no asset {path}")))?;
    let content_type = match file.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    };
    Ok(Response::text(200, content_type, body))
}
