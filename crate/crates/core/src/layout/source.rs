use super::ColorBasis;
use crate::analysis::{MatchKey, ViewKind, ViewNodeKind, ViewTree};
use crate::multi::{AggregateTree, DiffTag, DiffTree};

/// A tree that can be laid out as a flame graph and listed as a table.
///
/// Node 0 is the root and child lists are in display order.
pub trait FlameSource {
    /// Document kind: a view kind name, `"diff"` or `"aggregate"`.
    fn kind_name(&self) -> &'static str;
    fn metric(&self) -> &str;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn parent(&self, id: usize) -> Option<usize>;
    fn children(&self, id: usize) -> &[usize];
    fn width(&self, id: usize) -> f64;
    fn label(&self, id: usize) -> String;
    /// Function name for the search index; `None` for non-code nodes.
    fn search_name(&self, id: usize) -> Option<String>;
    fn module(&self, id: usize) -> Option<&str>;
    fn file(&self, id: usize) -> Option<&str>;
    fn source(&self, id: usize) -> Option<(String, u32)>;
    fn tag(&self, id: usize) -> Option<DiffTag> {
        let _ = id;
        None
    }
    fn context(&self, id: usize) -> Option<u32> {
        let _ = id;
        None
    }
    /// Names of the per-row values.
    fn columns(&self) -> &'static [&'static str];
    fn values(&self, id: usize) -> Vec<Option<f64>>;
    fn default_color(&self) -> ColorBasis {
        ColorBasis::ByModule
    }
    /// Per-input value vectors, for aggregates.
    fn vectors(&self) -> Option<Vec<Vec<Option<u64>>>> {
        None
    }

    fn color_key(&self, id: usize, basis: ColorBasis) -> String {
        default_color_key(self, id, basis)
    }
}

impl FlameSource for ViewTree {
    fn kind_name(&self) -> &'static str {
        self.kind().as_str()
    }

    fn metric(&self) -> &str {
        ViewTree::metric(self)
    }

    fn len(&self) -> usize {
        ViewTree::len(self)
    }

    fn parent(&self, id: usize) -> Option<usize> {
        self.node(id).parent
    }

    fn children(&self, id: usize) -> &[usize] {
        &self.node(id).children
    }

    fn width(&self, id: usize) -> f64 {
        ViewTree::width(self, id) as f64
    }

    fn label(&self, id: usize) -> String {
        ViewTree::label(self, id)
    }

    fn search_name(&self, id: usize) -> Option<String> {
        self.is_code(id)
            .then(|| self.frame(id).map(|f| f.name().into_owned()))
            .flatten()
    }

    fn module(&self, id: usize) -> Option<&str> {
        match self.node(id).kind {
            ViewNodeKind::File if self.kind() == ViewKind::Flat => {
                self.frame(id).map(|f| f.module.as_str())
            }
            ViewNodeKind::Frame | ViewNodeKind::Function | ViewNodeKind::Module => {
                self.frame(id).map(|f| f.module.as_str())
            }
            _ => None,
        }
    }

    fn file(&self, id: usize) -> Option<&str> {
        match self.node(id).kind {
            ViewNodeKind::Frame | ViewNodeKind::Function | ViewNodeKind::File => {
                self.frame(id).map(|f| f.file.as_str())
            }
            _ => None,
        }
    }

    fn source(&self, id: usize) -> Option<(String, u32)> {
        if !self.is_code(id) {
            return None;
        }
        self.frame(id)
            .and_then(|f| f.source())
            .map(|(file, line)| (file.to_string(), line))
    }

    fn context(&self, id: usize) -> Option<u32> {
        self.node(id).context.map(|c| c.0)
    }

    fn columns(&self) -> &'static [&'static str] {
        &["inclusive", "exclusive"]
    }

    fn values(&self, id: usize) -> Vec<Option<f64>> {
        let n = self.node(id);
        vec![Some(n.inclusive as f64), Some(n.exclusive as f64)]
    }

    fn color_key(&self, id: usize, basis: ColorBasis) -> String {
        // Flat module and file groups are colored by what they name.
        match (self.node(id).kind, basis) {
            (ViewNodeKind::Module, ColorBasis::ByModule | ColorBasis::ByFile) => {
                format!("module:{}", self.module(id).unwrap_or(""))
            }
            (ViewNodeKind::File, ColorBasis::ByFile) => {
                format!("file:{}", self.file(id).unwrap_or(""))
            }
            (ViewNodeKind::File, ColorBasis::ByModule) => {
                format!("module:{}", self.module(id).unwrap_or(""))
            }
            _ => default_color_key(self, id, basis),
        }
    }
}

fn default_color_key<S: FlameSource + ?Sized>(tree: &S, id: usize, basis: ColorBasis) -> String {
    if tree.parent(id).is_none() {
        return "root".to_string();
    }
    if tree.search_name(id).is_none() && basis != ColorBasis::DiffTag {
        return "residual".to_string();
    }
    match basis {
        ColorBasis::ByModule => format!("module:{}", tree.module(id).unwrap_or("")),
        ColorBasis::ByFile => format!("file:{}", tree.file(id).unwrap_or("")),
        ColorBasis::DiffTag => match tree.tag(id) {
            Some(t) => format!("diff:{}", t.as_str()),
            None => "residual".to_string(),
        },
    }
}

fn key_name(key: &MatchKey) -> Option<&str> {
    match key {
        MatchKey::Frame { function, .. } | MatchKey::Function { function, .. } => Some(function),
        _ => None,
    }
}

fn key_file(key: &MatchKey) -> Option<&str> {
    match key {
        MatchKey::Frame { file, .. } | MatchKey::Function { file, .. } | MatchKey::File(file) => {
            Some(file)
        }
        _ => None,
    }
}

impl FlameSource for DiffTree {
    fn kind_name(&self) -> &'static str {
        "diff"
    }

    fn metric(&self) -> &str {
        DiffTree::metric(self)
    }

    fn len(&self) -> usize {
        DiffTree::len(self)
    }

    fn parent(&self, id: usize) -> Option<usize> {
        self.node(id).parent
    }

    fn children(&self, id: usize) -> &[usize] {
        &self.node(id).children
    }

    fn width(&self, id: usize) -> f64 {
        self.node(id).width
    }

    fn label(&self, id: usize) -> String {
        self.node(id).label.clone()
    }

    fn search_name(&self, id: usize) -> Option<String> {
        key_name(&self.node(id).key).map(str::to_string)
    }

    fn module(&self, id: usize) -> Option<&str> {
        Some(self.node(id).module.as_str())
    }

    fn file(&self, id: usize) -> Option<&str> {
        key_file(&self.node(id).key)
    }

    fn source(&self, id: usize) -> Option<(String, u32)> {
        self.node(id).source.clone()
    }

    fn tag(&self, id: usize) -> Option<DiffTag> {
        Some(self.node(id).tag)
    }

    fn columns(&self) -> &'static [&'static str] {
        &["m1", "m2", "delta", "ratio"]
    }

    fn values(&self, id: usize) -> Vec<Option<f64>> {
        let n = self.node(id);
        vec![n.m1, n.m2, n.delta, n.ratio]
    }

    fn default_color(&self) -> ColorBasis {
        ColorBasis::DiffTag
    }
}

impl FlameSource for AggregateTree {
    fn kind_name(&self) -> &'static str {
        "aggregate"
    }

    fn metric(&self) -> &str {
        AggregateTree::metric(self)
    }

    fn len(&self) -> usize {
        AggregateTree::len(self)
    }

    fn parent(&self, id: usize) -> Option<usize> {
        self.node(id).parent
    }

    fn children(&self, id: usize) -> &[usize] {
        &self.node(id).children
    }

    fn width(&self, id: usize) -> f64 {
        self.node(id).stats.sum as f64
    }

    fn label(&self, id: usize) -> String {
        self.node(id).label.clone()
    }

    fn search_name(&self, id: usize) -> Option<String> {
        key_name(&self.node(id).key).map(str::to_string)
    }

    fn module(&self, id: usize) -> Option<&str> {
        Some(self.node(id).module.as_str())
    }

    fn file(&self, id: usize) -> Option<&str> {
        key_file(&self.node(id).key)
    }

    fn source(&self, id: usize) -> Option<(String, u32)> {
        self.node(id).source.clone()
    }

    fn columns(&self) -> &'static [&'static str] {
        &["sum", "min", "max", "mean"]
    }

    fn values(&self, id: usize) -> Vec<Option<f64>> {
        let s = &self.node(id).stats;
        vec![
            Some(s.sum as f64),
            s.min.map(|v| v as f64),
            s.max.map(|v| v as f64),
            s.mean,
        ]
    }

    fn vectors(&self) -> Option<Vec<Vec<Option<u64>>>> {
        Some(self.nodes().iter().map(|n| n.values.clone()).collect())
    }
}
