use std::cmp::Ordering;
use std::collections::BTreeSet;

use rustc_hash::FxHashMap as HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Frame, FrameId, MetricKind, NodeId, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewKind {
    TopDown,
    BottomUp,
    Flat,
}

impl ViewKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::TopDown => "topdown",
            ViewKind::BottomUp => "bottomup",
            ViewKind::Flat => "flat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "topdown" | "top_down" | "top-down" => Some(ViewKind::TopDown),
            "bottomup" | "bottom_up" | "bottom-up" => Some(ViewKind::BottomUp),
            "flat" => Some(ViewKind::Flat),
            _ => None,
        }
    }
}

/// What a bottom-up caller chain carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BottomUpMode {
    /// The callee's exclusive value; level-1 values sum to the profile total.
    #[default]
    Exclusive,
    /// The callee's subtree-inclusive value, counted once per sample even
    /// under recursion.
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewNodeKind {
    Root,
    /// A calling context (top-down).
    Frame,
    /// A function regardless of line (bottom-up chains, flat leaves).
    Function,
    Module,
    File,
    /// Residual of pruned siblings.
    Other,
    /// Residual of a subtree cut by depth truncation.
    Deep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewNode {
    pub kind: ViewNodeKind,
    /// The node's frame; for functions, modules and files a representative.
    pub frame: Option<FrameId>,
    /// Source calling context, for top-down nodes.
    pub context: Option<NodeId>,
    /// Run length after recursion collapsing; 1 otherwise.
    pub repeat: u32,
    pub inclusive: u64,
    pub exclusive: u64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl ViewNode {
    pub(crate) fn new(kind: ViewNodeKind, frame: Option<FrameId>) -> Self {
        ViewNode {
            kind,
            frame,
            context: None,
            repeat: 1,
            inclusive: 0,
            exclusive: 0,
            parent: None,
            children: Vec::new(),
        }
    }
}

/// Identity used to match nodes across profiles, independent of ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatchKey {
    Root,
    Frame {
        function: String,
        module: String,
        file: String,
        line: u32,
    },
    Function {
        function: String,
        module: String,
        file: String,
    },
    Module(String),
    File(String),
    Other,
    Deep,
}

pub const UNKNOWN_LABEL: &str = "«unknown»";
pub const OTHER_LABEL: &str = "«other»";
pub const DEEP_LABEL: &str = "«deep»";

/// A top-down, bottom-up or flat tree over one metric of a profile.
///
/// Node 0 is the root and every parent precedes its children; children are
/// ordered by descending width, ties broken by label.
#[derive(Debug, Clone)]
pub struct ViewTree {
    kind: ViewKind,
    metric: String,
    frames: Arc<Vec<Frame>>,
    nodes: Vec<ViewNode>,
}

impl ViewTree {
    pub(crate) fn from_nodes(
        kind: ViewKind,
        metric: String,
        frames: Arc<Vec<Frame>>,
        nodes: Vec<ViewNode>,
    ) -> Self {
        let mut tree = ViewTree {
            kind,
            metric,
            frames,
            nodes,
        };
        tree.reorder();
        tree
    }

    /// Wraps nodes that are already in sorted pre-order.
    fn from_ordered_nodes(
        kind: ViewKind,
        metric: String,
        frames: Arc<Vec<Frame>>,
        nodes: Vec<ViewNode>,
    ) -> Self {
        ViewTree {
            kind,
            metric,
            frames,
            nodes,
        }
    }

    pub(crate) fn with_nodes(&self, nodes: Vec<ViewNode>) -> Self {
        ViewTree::from_nodes(
            self.kind,
            self.metric.clone(),
            Arc::clone(&self.frames),
            nodes,
        )
    }

    pub fn kind(&self) -> ViewKind {
        self.kind
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn nodes(&self) -> &[ViewNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ViewNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Root inclusive value.
    pub fn total(&self) -> u64 {
        self.nodes[0].inclusive
    }

    pub fn frames(&self) -> &Arc<Vec<Frame>> {
        &self.frames
    }

    pub fn frame(&self, id: usize) -> Option<&Frame> {
        self.nodes[id].frame.map(|f| &self.frames[f.index()])
    }

    /// Value that determines a node's flame-graph width. Flat views use
    /// exclusive values so that siblings tile their parent.
    pub fn width(&self, id: usize) -> u64 {
        match self.kind {
            ViewKind::Flat => self.nodes[id].exclusive,
            _ => self.nodes[id].inclusive,
        }
    }

    pub fn depth(&self, id: usize) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            d += 1;
            cur = p;
        }
        d
    }

    /// Node ids from the root to `id`.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// `;`-joined labels below the root.
    pub fn path_label(&self, id: usize) -> String {
        self.path(id)
            .into_iter()
            .skip(1)
            .map(|n| self.label(n))
            .collect::<Vec<_>>()
            .join(";")
    }

    fn base_label(&self, id: usize) -> std::borrow::Cow<'_, str> {
        use std::borrow::Cow;
        let node = &self.nodes[id];
        let frame = node.frame.map(|f| &self.frames[f.index()]);
        match (node.kind, frame) {
            (ViewNodeKind::Root, _) => Cow::Borrowed(crate::model::ROOT_NAME),
            (ViewNodeKind::Other, _) => Cow::Borrowed(OTHER_LABEL),
            (ViewNodeKind::Deep, _) => Cow::Borrowed(DEEP_LABEL),
            (ViewNodeKind::Module, Some(f)) if !f.module.is_empty() => Cow::Borrowed(&f.module),
            (ViewNodeKind::File, Some(f)) if !f.file.is_empty() => Cow::Borrowed(&f.file),
            (ViewNodeKind::Module | ViewNodeKind::File, _) => Cow::Borrowed(UNKNOWN_LABEL),
            (ViewNodeKind::Frame | ViewNodeKind::Function, Some(f)) => f.name(),
            (ViewNodeKind::Frame | ViewNodeKind::Function, None) => Cow::Borrowed(UNKNOWN_LABEL),
        }
    }

    pub fn label(&self, id: usize) -> String {
        let base = self.base_label(id);
        match self.nodes[id].repeat {
            0 | 1 => base.into_owned(),
            k => format!("{base} (×{k})"),
        }
    }

    /// True for nodes that name a function (search targets).
    pub fn is_code(&self, id: usize) -> bool {
        matches!(
            self.nodes[id].kind,
            ViewNodeKind::Frame | ViewNodeKind::Function
        )
    }

    pub fn match_key(&self, id: usize) -> MatchKey {
        let node = &self.nodes[id];
        let frame = self.frame(id);
        let text = |s: Option<&str>| s.unwrap_or("").to_string();
        match node.kind {
            ViewNodeKind::Root => MatchKey::Root,
            ViewNodeKind::Other => MatchKey::Other,
            ViewNodeKind::Deep => MatchKey::Deep,
            ViewNodeKind::Module => MatchKey::Module(text(frame.map(|f| f.module.as_str()))),
            ViewNodeKind::File => MatchKey::File(text(frame.map(|f| f.file.as_str()))),
            ViewNodeKind::Frame => MatchKey::Frame {
                function: frame.map(Frame::display_name).unwrap_or_default(),
                module: text(frame.map(|f| f.module.as_str())),
                file: text(frame.map(|f| f.file.as_str())),
                line: frame.map_or(0, |f| f.line),
            },
            ViewNodeKind::Function => MatchKey::Function {
                function: frame.map(Frame::display_name).unwrap_or_default(),
                module: text(frame.map(|f| f.module.as_str())),
                file: text(frame.map(|f| f.file.as_str())),
            },
        }
    }

    fn sibling_order(&self, a: usize, b: usize) -> Ordering {
        self.width(b)
            .cmp(&self.width(a))
            .then_with(|| self.base_label(a).cmp(&self.base_label(b)))
            .then_with(|| self.nodes[a].repeat.cmp(&self.nodes[b].repeat))
            .then_with(|| self.match_key(a).cmp(&self.match_key(b)))
    }

    /// Sorts children and renumbers nodes in pre-order.
    fn reorder(&mut self) {
        let mut children: Vec<Vec<usize>> = self
            .nodes
            .iter_mut()
            .map(|n| std::mem::take(&mut n.children))
            .collect();
        for c in children.iter_mut().filter(|c| c.len() > 1) {
            c.sort_by(|&a, &b| self.sibling_order(a, b));
        }
        let n = self.nodes.len();
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(children[id].iter().rev());
        }
        let mut new_id = vec![usize::MAX; n];
        for (i, &old) in order.iter().enumerate() {
            new_id[old] = i;
        }
        let mut old_nodes: Vec<Option<ViewNode>> = std::mem::take(&mut self.nodes)
            .into_iter()
            .map(Some)
            .collect();
        let mut nodes = Vec::with_capacity(order.len());
        for &old in &order {
            let mut node = old_nodes[old].take().expect("each node is visited once");
            node.parent = node.parent.map(|p| new_id[p]);
            let mut kids = std::mem::take(&mut children[old]);
            for c in kids.iter_mut() {
                *c = new_id[*c];
            }
            node.children = kids;
            nodes.push(node);
        }
        self.nodes = nodes;
    }

    /// Nodes naming a function that contains `query`, ignoring case.
    pub fn search(&self, query: &str) -> Result<BTreeSet<usize>> {
        if query.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let needle = query.to_lowercase();
        Ok((0..self.nodes.len())
            .filter(|&id| self.is_code(id) && self.base_label(id).to_lowercase().contains(&needle))
            .collect())
    }
}

/// Builds the view of `metric` in the requested shape.
pub fn compute_view(profile: &Profile, metric: &str, kind: ViewKind) -> Result<ViewTree> {
    compute_view_with(profile, metric, kind, BottomUpMode::default())
}

pub fn compute_view_with(
    profile: &Profile,
    metric: &str,
    kind: ViewKind,
    mode: BottomUpMode,
) -> Result<ViewTree> {
    let m = profile.metric_index(metric)?;
    let descriptor = &profile.metrics()[m];
    if descriptor.kind == MetricKind::Snapshot && kind != ViewKind::TopDown {
        return Err(Error::UnknownMetricSemantics(descriptor.name.clone()));
    }
    let nodes = match kind {
        ViewKind::TopDown => top_down(profile, m),
        ViewKind::BottomUp => {
            let nodes = bottom_up(profile, m, mode);
            return Ok(ViewTree::from_ordered_nodes(
                kind,
                descriptor.name.clone(),
                profile.frame_table(),
                nodes,
            ));
        }
        ViewKind::Flat => flat(profile, m),
    };
    Ok(ViewTree::from_nodes(
        kind,
        descriptor.name.clone(),
        profile.frame_table(),
        nodes,
    ))
}

fn top_down(profile: &Profile, m: usize) -> Vec<ViewNode> {
    let raw = profile.raw_values(m);
    let inclusive = match profile.metrics()[m].kind {
        MetricKind::Additive => profile.inclusive_values(m),
        MetricKind::Snapshot => raw.clone(),
    };
    profile
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| ViewNode {
            kind: if i == 0 {
                ViewNodeKind::Root
            } else {
                ViewNodeKind::Frame
            },
            frame: if i == 0 { None } else { Some(n.frame) },
            context: Some(NodeId(i as u32)),
            repeat: 1,
            inclusive: inclusive[i],
            exclusive: raw[i],
            parent: n.parent.map(NodeId::index),
            children: n.children.iter().map(|c| c.index()).collect(),
        })
        .collect()
}

/// Dense ids for (module, file, function) identities, one per frame.
struct FunctionIds {
    of_frame: Vec<u32>,
    representative: Vec<FrameId>,
}

impl FunctionIds {
    fn new(frames: &[Frame]) -> Self {
        let mut index: HashMap<(&str, &str, std::borrow::Cow<'_, str>), u32> = HashMap::default();
        let mut representative = Vec::new();
        let of_frame = frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                *index
                    .entry((f.module.as_str(), f.file.as_str(), f.name()))
                    .or_insert_with(|| {
                        representative.push(FrameId(i as u32));
                        (representative.len() - 1) as u32
                    })
            })
            .collect();
        FunctionIds {
            of_frame,
            representative,
        }
    }
}

/// Sibling order of two function nodes of equal width, matching
/// [`ViewTree::sibling_order`] for representatives `a` and `b`.
fn function_order(frames: &[Frame], a: FrameId, b: FrameId) -> Ordering {
    let (fa, fb) = (&frames[a.index()], &frames[b.index()]);
    fa.name()
        .cmp(&fb.name())
        .then_with(|| fa.module.cmp(&fb.module))
        .then_with(|| fa.file.cmp(&fb.file))
}

/// One sample chain being walked towards the root.
#[derive(Clone, Copy)]
struct Cursor {
    at: u32,
    function: u32,
    value: u64,
}

/// Builds the bottom-up tree directly in sorted pre-order. Each node owns a
/// contiguous run of cursors; its children are the runs that remain after
/// every cursor steps to its caller and the run is sorted by function.
fn bottom_up(profile: &Profile, m: usize, mode: BottomUpMode) -> Vec<ViewNode> {
    let ids = FunctionIds::new(profile.frames());
    let frames = profile.frames();
    let raw = profile.raw_values(m);
    let cct = profile.nodes();
    let fid = |n: usize| ids.of_frame[cct[n].frame.index()];
    let inclusive = match mode {
        BottomUpMode::Exclusive => None,
        BottomUpMode::Inclusive => Some(profile.inclusive_values(m)),
    };
    let shadowed = |start: usize| {
        let f = fid(start);
        let mut up = cct[start].parent;
        while let Some(p) = up.filter(|p| p.index() != 0) {
            if fid(p.index()) == f {
                return true;
            }
            up = cct[p.index()].parent;
        }
        false
    };
    let mut cursors: Vec<Cursor> = (1..cct.len())
        .filter_map(|start| {
            let value = match &inclusive {
                None => raw[start],
                Some(incl) if !shadowed(start) => incl[start],
                Some(_) => 0,
            };
            (value > 0).then(|| Cursor {
                at: start as u32,
                function: fid(start),
                value,
            })
        })
        .collect();

    // Splits a run sorted by function into groups, in sibling order.
    let groups = |run: &mut [Cursor], offset: usize| -> Vec<(usize, usize, u64)> {
        run.sort_unstable_by_key(|c| c.function);
        let mut out = Vec::new();
        let mut i = 0;
        while i < run.len() {
            let f = run[i].function;
            let mut j = i;
            let mut width = 0;
            while j < run.len() && run[j].function == f {
                width += run[j].value;
                j += 1;
            }
            out.push((offset + i, offset + j, width));
            i = j;
        }
        let rep = |g: &(usize, usize, u64)| ids.representative[run[g.0 - offset].function as usize];
        out.sort_by(|a, b| {
            b.2.cmp(&a.2)
                .then_with(|| function_order(frames, rep(a), rep(b)))
        });
        out
    };

    let mut nodes = vec![ViewNode::new(ViewNodeKind::Root, None)];
    let mut stack: Vec<(usize, usize, usize)> = groups(&mut cursors, 0)
        .into_iter()
        .rev()
        .map(|(a, b, _)| (a, b, 0))
        .collect();
    while let Some((start, end, parent)) = stack.pop() {
        let run = &mut cursors[start..end];
        let id = nodes.len();
        let mut node = ViewNode::new(
            ViewNodeKind::Function,
            Some(ids.representative[run[0].function as usize]),
        );
        node.parent = Some(parent);
        let mut kept = 0;
        for i in 0..run.len() {
            let c = run[i];
            node.inclusive += c.value;
            match cct[c.at as usize].parent.map(NodeId::index) {
                Some(p) if p != 0 => {
                    run[kept] = Cursor {
                        at: p as u32,
                        function: fid(p),
                        value: c.value,
                    };
                    kept += 1;
                }
                _ => node.exclusive += c.value,
            }
        }
        nodes.push(node);
        nodes[parent].children.push(id);
        match kept {
            0 => {}
            1 => stack.push((start, start + 1, id)),
            _ => {
                let children = groups(&mut run[..kept], start);
                stack.extend(children.into_iter().rev().map(|(a, b, _)| (a, b, id)));
            }
        }
    }
    let mut total = 0;
    for c in nodes[0].children.clone() {
        nodes[c].exclusive = nodes[c].inclusive;
        total += nodes[c].inclusive;
    }
    nodes[0].inclusive = total;
    nodes
}

fn flat(profile: &Profile, m: usize) -> Vec<ViewNode> {
    let frames = profile.frames();
    let ids = FunctionIds::new(frames);
    let nf = ids.representative.len();

    // Group ids for modules and (module, file) pairs, keyed by function id.
    let mut module_ids: HashMap<&str, usize> = HashMap::default();
    let mut file_ids: HashMap<(&str, &str), usize> = HashMap::default();
    let mut module_of_fn = Vec::with_capacity(nf);
    let mut file_of_fn = Vec::with_capacity(nf);
    let mut file_module = Vec::new();
    for &rep in &ids.representative {
        let f = &frames[rep.index()];
        let next = module_ids.len();
        let mi = *module_ids.entry(f.module.as_str()).or_insert(next);
        let next = file_ids.len();
        let fi = *file_ids
            .entry((f.module.as_str(), f.file.as_str()))
            .or_insert_with(|| {
                file_module.push(mi);
                next
            });
        module_of_fn.push(mi);
        file_of_fn.push(fi);
    }
    let (nm, nfile) = (module_ids.len(), file_ids.len());

    let raw = profile.raw_values(m);
    let cct = profile.nodes();
    let mut fn_incl = vec![0u64; nf];
    let mut fn_excl = vec![0u64; nf];
    let mut file_incl = vec![0u64; nfile];
    let mut mod_incl = vec![0u64; nm];
    let mut fn_stamp = vec![usize::MAX; nf];
    let mut file_stamp = vec![usize::MAX; nfile];
    let mut mod_stamp = vec![usize::MAX; nm];
    let mut total = 0u64;
    for (i, node) in cct.iter().enumerate().skip(1) {
        let v = raw[i];
        if v == 0 {
            continue;
        }
        total += v;
        fn_excl[ids.of_frame[node.frame.index()] as usize] += v;
        let mut at = i;
        while at != 0 {
            let f = ids.of_frame[cct[at].frame.index()] as usize;
            if fn_stamp[f] != i {
                fn_stamp[f] = i;
                fn_incl[f] += v;
            }
            let fi = file_of_fn[f];
            if file_stamp[fi] != i {
                file_stamp[fi] = i;
                file_incl[fi] += v;
            }
            let mi = module_of_fn[f];
            if mod_stamp[mi] != i {
                mod_stamp[mi] = i;
                mod_incl[mi] += v;
            }
            at = cct[at].parent.map_or(0, NodeId::index);
        }
    }

    let mut nodes = vec![ViewNode::new(ViewNodeKind::Root, None)];
    nodes[0].inclusive = total;
    nodes[0].exclusive = total;
    let mut module_node = vec![usize::MAX; nm];
    let mut file_node = vec![usize::MAX; nfile];
    for f in 0..nf {
        if fn_incl[f] == 0 && fn_excl[f] == 0 {
            continue;
        }
        let rep = ids.representative[f];
        let (mi, fi) = (module_of_fn[f], file_of_fn[f]);
        if module_node[mi] == usize::MAX {
            let mut node = ViewNode::new(ViewNodeKind::Module, Some(rep));
            node.inclusive = mod_incl[mi];
            node.parent = Some(0);
            let id = nodes.len();
            module_node[mi] = id;
            nodes[0].children.push(id);
            nodes.push(node);
        }
        if file_node[fi] == usize::MAX {
            let parent = module_node[file_module[fi]];
            let mut node = ViewNode::new(ViewNodeKind::File, Some(rep));
            node.inclusive = file_incl[fi];
            node.parent = Some(parent);
            let id = nodes.len();
            file_node[fi] = id;
            nodes[parent].children.push(id);
            nodes.push(node);
        }
        let parent = file_node[fi];
        let mut node = ViewNode::new(ViewNodeKind::Function, Some(rep));
        node.inclusive = fn_incl[f];
        node.exclusive = fn_excl[f];
        node.parent = Some(parent);
        let id = nodes.len();
        nodes[parent].children.push(id);
        nodes.push(node);
        nodes[parent].exclusive += fn_excl[f];
        nodes[module_node[mi]].exclusive += fn_excl[f];
    }
    nodes
}
