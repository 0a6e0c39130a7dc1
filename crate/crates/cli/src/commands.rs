use std::collections::BTreeMap;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use profcct_core::analysis::{
    resolve_metric_name, BottomUpMode, ViewKind, ViewNodeKind, ViewRequest, ViewTree,
};
use profcct_core::derive::{derive_into, ValueBasis};
use profcct_core::ingest::{detect_format, emit_folded, load, LoadOptions, SourceFormat};
use profcct_core::layout::{export, ColorBasis, ExportOptions, FlameSource};
use profcct_core::model::serialize;
use profcct_core::multi::{
    aggregate_with, correlate, diff_with, project_role, AggregateOptions, DiffOptions,
};
use profcct_core::Profile;
use serde_json::json;

use crate::output::{color_enabled, top_pretty, top_tsv, write_output, CliError, Result, TopRow};
use crate::{ColorArg, Command, ExportArgs, OutputFormat, ViewArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert {
            input,
            output,
            to,
            metric,
        } => convert(&input, output.as_deref(), to, metric.as_deref()),
        Command::Info { input } => info(&input),
        Command::Top {
            input,
            view,
            n,
            pretty,
        } => top(&input, &view, n, pretty),
        Command::View {
            input,
            view,
            export,
        } => {
            let p = read_profile(&input)?;
            let v = view_request(&view)?
                .apply(&p)
                .map_err(|e| data(&input, e))?;
            emit(&v, &p, &export, None)
        }
        Command::Diff {
            before,
            after,
            metric,
            view,
            normalize_by_total,
            export,
        } => {
            let (a, b) = (read_profile(&before)?, read_profile(&after)?);
            let metric =
                resolve_metric_name(&a, metric.as_deref()).map_err(|e| data(&before, e))?;
            let options = DiffOptions {
                kind: view.map(ViewKind::from),
                normalize_by_total,
            };
            let d = diff_with(&a, &b, &metric, options)?;
            emit(&d, &a, &export, Some(("scale", json!(d.scale()))))
        }
        Command::Aggregate {
            inputs,
            metric,
            missing_as_zero,
            export,
        } => {
            let profiles = inputs
                .iter()
                .map(|p| read_profile(p))
                .collect::<Result<Vec<_>>>()?;
            let metric = resolve_metric_name(&profiles[0], metric.as_deref())
                .map_err(|e| data(&inputs[0], e))?;
            let refs: Vec<&Profile> = profiles.iter().collect();
            let tree = aggregate_with(&refs, &metric, AggregateOptions { missing_as_zero })?;
            let names: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
            emit(&tree, &profiles[0], &export, Some(("inputs", json!(names))))
        }
        Command::Correlate {
            input,
            roles: (from, to),
            anchor,
            view,
            export,
        } => {
            let p = read_profile(&input)?;
            let (projection, extra) = match anchor {
                Some(path) => {
                    let names: Vec<&str> = path.split(';').filter(|s| !s.is_empty()).collect();
                    let node = p.find_path(&names).ok_or_else(|| {
                        data(&input, profcct_core::Error::UnknownPath(path.clone()))
                    })?;
                    let c = correlate(&p, node, &from, &to).map_err(|e| data(&input, e))?;
                    let extra =
                        json!({"anchor": path, "from": c.from, "to": c.to, "points": c.points});
                    (c.projection, extra)
                }
                None => {
                    let projection = project_role(&p, &to).map_err(|e| data(&input, e))?;
                    (projection, json!({"anchor": null, "from": from, "to": to}))
                }
            };
            let v = view_request(&view)?
                .apply(&projection)
                .map_err(|e| data(&input, e))?;
            emit(&v, &projection, &export, Some(("correlation", extra)))
        }
        Command::Derive {
            input,
            formula,
            name,
            exclusive,
            output,
        } => {
            let p = read_profile(&input)?;
            let basis = if exclusive {
                ValueBasis::Exclusive
            } else {
                ValueBasis::Inclusive
            };
            let derived = derive_into(&p, &name, &formula, basis)?;
            write_output(output.as_deref(), &serialize(&derived))
        }
        Command::Serve {
            inputs,
            port,
            bind,
            root,
            static_dir,
            threads,
        } => serve(&inputs, port, &bind, root, static_dir, threads),
    }
}

fn data(path: &Path, source: profcct_core::Error) -> CliError {
    CliError::Data {
        path: path.to_path_buf(),
        source,
    }
}

fn read_profile(path: &Path) -> Result<Profile> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load(&bytes, &LoadOptions::default()).map_err(|e| data(path, e))
}

fn view_request(args: &ViewArgs) -> Result<ViewRequest> {
    if let Some(t) = args.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!(
                "--threshold must lie in [0, 1], got {t}"
            )));
        }
    }
    Ok(ViewRequest {
        kind: args.view.map(ViewKind::from),
        metric: args.metric.clone(),
        mode: if args.inclusive_callers {
            BottomUpMode::Inclusive
        } else {
            BottomUpMode::Exclusive
        },
        collapse_recursion: args.collapse_recursion,
        max_depth: args.max_depth,
        threshold: args.threshold,
    })
}

fn export_options(args: &ExportArgs, profile: &Profile) -> Result<ExportOptions> {
    let mut o = ExportOptions {
        metrics: profile.metrics().to_vec(),
        rows: !args.no_rows,
        ..Default::default()
    };
    if let Some(w) = args.min_width {
        if !(0.0..=0.5).contains(&w) {
            return Err(CliError::Usage(format!(
                "--min-width must lie in [0, 0.5], got {w}"
            )));
        }
        o.min_width = w;
    }
    o.color = args.color.map(|c| match c {
        ColorArg::Module => ColorBasis::ByModule,
        ColorArg::File => ColorBasis::ByFile,
        ColorArg::Diff => ColorBasis::DiffTag,
    });
    Ok(o)
}

/// Writes the export document of `tree`, with one extra top-level field.
fn emit<S: FlameSource>(
    tree: &S,
    profile: &Profile,
    args: &ExportArgs,
    extra: Option<(&str, serde_json::Value)>,
) -> Result<()> {
    let options = export_options(args, profile)?;
    let mut text = match extra {
        None => export(tree, &options),
        Some((key, value)) => {
            let mut doc = profcct_core::layout::export_value(tree, &options);
            doc[key] = value;
            serde_json::to_string(&doc).expect("JSON values always serialize")
        }
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    write_output(args.output.as_deref(), text.as_bytes())
}

fn infer_format(output: Option<&Path>) -> OutputFormat {
    match output.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("folded" | "collapsed" | "txt") => OutputFormat::Folded,
        _ => OutputFormat::Native,
    }
}

fn convert(
    input: &Path,
    output: Option<&Path>,
    to: Option<OutputFormat>,
    metric: Option<&str>,
) -> Result<()> {
    let p = read_profile(input)?;
    let bytes = match to.unwrap_or_else(|| infer_format(output)) {
        OutputFormat::Native => serialize(&p),
        OutputFormat::Folded => {
            let metric = resolve_metric_name(&p, metric).map_err(|e| data(input, e))?;
            emit_folded(&p, &metric)
                .map_err(|e| data(input, e))?
                .into_bytes()
        }
    };
    write_output(output, &bytes)
}

fn info(input: &Path) -> Result<()> {
    let bytes = std::fs::read(input).map_err(|source| CliError::Io {
        path: input.to_path_buf(),
        source,
    })?;
    let format = detect_format(&bytes).map_err(|e| data(input, e))?;
    let p = load(&bytes, &LoadOptions::default()).map_err(|e| data(input, e))?;
    let meta = p.meta();
    let mut s = String::new();
    let format = match format {
        SourceFormat::Folded => "folded",
        SourceFormat::Pprof => "pprof",
        SourceFormat::Native => "native",
    };
    s.push_str(&format!("format\t{format}\n"));
    s.push_str(&format!("name\t{}\n", meta.name));
    if !meta.collector.is_empty() {
        s.push_str(&format!("collector\t{}\n", meta.collector));
    }
    if let Some(t) = meta.timestamp {
        s.push_str(&format!("timestamp\t{t}\n"));
    }
    for (k, v) in &meta.properties {
        s.push_str(&format!("property\t{k}\t{v}\n"));
    }
    s.push_str(&format!("nodes\t{}\n", p.node_count()));
    s.push_str(&format!("frames\t{}\n", p.frames().len()));
    s.push_str(&format!("points\t{}\n", p.points().len()));
    s.push_str(&format!("metrics\t{}\n", p.metrics().len()));
    for (i, m) in p.metrics().iter().enumerate() {
        s.push_str(&format!(
            "metric\t{}\t{}\t{}\t{}\t{}\n",
            m.name,
            m.unit,
            m.kind.as_str(),
            m.aggregator.as_str(),
            p.total(i)
        ));
    }
    for d in p.derived() {
        s.push_str(&format!("derived\t{}\t{}\n", d.name, d.formula));
    }
    write_output(None, s.as_bytes())
}

/// The ranking `top` prints for each view kind: per-function inclusive
/// values for top-down (each function counted once per path), level-1
/// callees for bottom-up, and function leaves for flat.
pub fn top_rows(v: &ViewTree) -> Vec<TopRow> {
    let total = v.total();
    let mut ranked: Vec<(String, u64)> = match v.kind() {
        ViewKind::TopDown => {
            let mut by_label: BTreeMap<String, u64> = BTreeMap::new();
            let mut stack: Vec<(usize, Vec<String>)> = vec![(v.root(), Vec::new())];
            while let Some((id, above)) = stack.pop() {
                let node = v.node(id);
                let mut path = above;
                if id != v.root() {
                    let label = v.label(id);
                    if !path.contains(&label) {
                        *by_label.entry(label.clone()).or_insert(0) += node.inclusive;
                    }
                    path.push(label);
                }
                for &c in &node.children {
                    stack.push((c, path.clone()));
                }
            }
            by_label.into_iter().collect()
        }
        ViewKind::BottomUp => v
            .node(v.root())
            .children
            .iter()
            .map(|&c| (v.label(c), v.width(c)))
            .collect(),
        ViewKind::Flat => (0..v.len())
            .filter(|&i| {
                matches!(
                    v.node(i).kind,
                    ViewNodeKind::Function | ViewNodeKind::Other | ViewNodeKind::Deep
                )
            })
            .map(|i| (v.label(i), v.width(i)))
            .collect(),
    };
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .map(|(label, value)| TopRow {
            label,
            value,
            percent: if total == 0 {
                0.0
            } else {
                value as f64 * 100.0 / total as f64
            },
        })
        .collect()
}

fn top(input: &Path, args: &ViewArgs, n: usize, pretty: bool) -> Result<()> {
    let p = read_profile(input)?;
    let v = view_request(args)?.apply(&p).map_err(|e| data(input, e))?;
    let mut rows = top_rows(&v);
    rows.truncate(n);
    let text = if pretty {
        top_pretty(
            &rows,
            v.metric(),
            color_enabled(std::io::stdout().is_terminal()),
        )
    } else {
        top_tsv(&rows)
    };
    write_output(None, text.as_bytes())
}

fn serve(
    inputs: &[PathBuf],
    port: u16,
    bind: &str,
    root: Option<PathBuf>,
    static_dir: Option<PathBuf>,
    threads: usize,
) -> Result<()> {
    let profiles = inputs
        .iter()
        .map(|p| read_profile(p))
        .collect::<Result<Vec<_>>>()?;
    let root = match root {
        Some(r) => r,
        None => std::env::current_dir().map_err(|source| CliError::Io {
            path: PathBuf::from("."),
            source,
        })?,
    };
    let mut session = profcct_server::Session::new(&root);
    if let Some(dir) = static_dir {
        session = session.with_static_dir(dir);
    }
    for (path, p) in inputs.iter().zip(profiles) {
        session.add(path.display().to_string(), p);
    }
    let server =
        profcct_server::Server::start(Arc::new(session), &format!("{bind}:{port}"), threads)?;
    eprintln!("listening on http://{}", server.addr());
    server.join();
    Ok(())
}
