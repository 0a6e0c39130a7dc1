//! Flame-graph geometry, tree-table rows and the renderer export document.

mod export;
mod source;

pub use export::{export, export_value, import_rects, round9, ExportOptions, EXPORT_VERSION};
pub use source::FlameSource;

use crate::multi::DiffTag;

/// Default minimum rect width as a fraction of the root.
pub const DEFAULT_MIN_WIDTH: f64 = 1.0 / 2000.0;

/// Label of the rect that absorbs children narrower than the minimum width.
pub const ELLIPSIS_LABEL: &str = "«…»";

/// Palette family a rect's color key is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorBasis {
    ByModule,
    ByFile,
    DiffTag,
}

impl ColorBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            ColorBasis::ByModule => "module",
            ColorBasis::ByFile => "file",
            ColorBasis::DiffTag => "diff",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "module" => Some(ColorBasis::ByModule),
            "file" => Some(ColorBasis::ByFile),
            "diff" => Some(ColorBasis::DiffTag),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlameRect {
    /// Tree node id; `None` for the merged «…» rect.
    pub node: Option<usize>,
    pub depth: usize,
    pub x0: f64,
    pub x1: f64,
    pub label: String,
    pub color_key: String,
    pub tag: Option<DiffTag>,
    pub source: Option<(String, u32)>,
}

impl FlameRect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
}

/// One line of the tree table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub label: String,
    /// Values named by [`FlameSource::columns`].
    pub values: Vec<Option<f64>>,
    pub percent_of_root: f64,
    pub expandable: bool,
    /// Calling-context id in the source profile, where one exists.
    pub context: Option<u32>,
}

enum Pending {
    Node {
        id: usize,
        depth: usize,
        offset: f64,
    },
    Rest {
        depth: usize,
        offset: f64,
        width: f64,
    },
}

/// Lays out `tree` as nested intervals of `[0, 1]`, in pre-order.
///
/// Each child spans its width over the root's width, starting where its
/// previous sibling ended. Children narrower than `min_width` (clamped to
/// `[0, 0.5]`) are merged into one trailing «…» rect; zero-width nodes are
/// dropped.
pub fn layout_flame<S: FlameSource + ?Sized>(
    tree: &S,
    min_width: f64,
    color: ColorBasis,
) -> Vec<FlameRect> {
    let min_width = if min_width.is_finite() {
        min_width.clamp(0.0, 0.5)
    } else {
        0.0
    };
    let root = 0;
    let total = tree.width(root);
    let mut rects = Vec::new();
    rects.push(make_rect(tree, root, 0, 0.0, 1.0, color));
    if total <= 0.0 {
        return rects;
    }
    let mut stack = Vec::new();
    push_children(tree, root, 0, 0.0, total, min_width, &mut stack);
    while let Some(item) = stack.pop() {
        match item {
            Pending::Node { id, depth, offset } => {
                let w = tree.width(id);
                rects.push(make_rect(
                    tree,
                    id,
                    depth,
                    offset / total,
                    (offset + w) / total,
                    color,
                ));
                push_children(tree, id, depth, offset, total, min_width, &mut stack);
            }
            Pending::Rest {
                depth,
                offset,
                width,
            } => rects.push(FlameRect {
                node: None,
                depth,
                x0: offset / total,
                x1: (offset + width) / total,
                label: ELLIPSIS_LABEL.to_string(),
                color_key: "residual".to_string(),
                tag: None,
                source: None,
            }),
        }
    }
    rects
}

fn push_children<S: FlameSource + ?Sized>(
    tree: &S,
    id: usize,
    depth: usize,
    offset: f64,
    total: f64,
    min_width: f64,
    stack: &mut Vec<Pending>,
) {
    let mut cursor = offset;
    let mut narrow = 0.0;
    let mut items = Vec::new();
    for &c in tree.children(id) {
        let w = tree.width(c);
        if w <= 0.0 {
            continue;
        }
        if w / total < min_width {
            narrow += w;
            continue;
        }
        items.push(Pending::Node {
            id: c,
            depth: depth + 1,
            offset: cursor,
        });
        cursor += w;
    }
    if narrow > 0.0 {
        items.push(Pending::Rest {
            depth: depth + 1,
            offset: cursor,
            width: narrow,
        });
    }
    stack.extend(items.into_iter().rev());
}

fn make_rect<S: FlameSource + ?Sized>(
    tree: &S,
    id: usize,
    depth: usize,
    x0: f64,
    x1: f64,
    color: ColorBasis,
) -> FlameRect {
    let tag = tree.tag(id);
    let label = match tag {
        Some(t) if t != DiffTag::Unchanged => format!("{} {}", t.label(), tree.label(id)),
        _ => tree.label(id),
    };
    FlameRect {
        node: Some(id),
        depth,
        x0,
        x1,
        label,
        color_key: tree.color_key(id, color),
        tag,
        source: tree.source(id),
    }
}

/// Builds the row for node `id`.
pub fn table_row<S: FlameSource + ?Sized>(tree: &S, id: usize) -> TableRow {
    let total = tree.width(0);
    let mut depth = 0;
    let mut cur = id;
    while let Some(p) = tree.parent(cur) {
        depth += 1;
        cur = p;
    }
    TableRow {
        node: id,
        parent: tree.parent(id),
        depth,
        label: tree.label(id),
        values: tree.values(id),
        percent_of_root: if total > 0.0 {
            100.0 * tree.width(id) / total
        } else {
            0.0
        },
        expandable: !tree.children(id).is_empty(),
        context: tree.context(id),
    }
}

/// One page of the rows under `parent`, as revealed by expanding it.
pub fn child_rows<S: FlameSource + ?Sized>(
    tree: &S,
    parent: usize,
    offset: usize,
    limit: usize,
) -> Vec<TableRow> {
    tree.children(parent)
        .iter()
        .skip(offset)
        .take(limit)
        .map(|&c| table_row(tree, c))
        .collect()
}
