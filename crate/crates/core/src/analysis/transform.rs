use rustc_hash::FxHashMap as HashMap;

use super::view::{ViewKind, ViewNode, ViewNodeKind, ViewTree};
use crate::error::{Error, Result};
use crate::model::{Frame, FrameId, TraversalOrder};

/// What a traversal visitor wants done with the node it just saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Directive {
    #[default]
    Keep,
    /// Splice the node out; its children move up to its parent and its
    /// exclusive value is credited to the parent.
    Elide,
    /// Fold the node into the sibling placed just before it. Only legal when
    /// both map to the same source line.
    MergeWithPreviousSibling,
}

/// The node handed to a traversal visitor.
pub struct Visit<'a> {
    pub tree: &'a ViewTree,
    pub id: usize,
    pub depth: usize,
    pub node: &'a ViewNode,
}

impl<'a> Visit<'a> {
    pub fn frame(&self) -> Option<&'a Frame> {
        self.tree.frame(self.id)
    }

    pub fn label(&self) -> String {
        self.tree.label(self.id)
    }

    pub fn path_label(&self) -> String {
        self.tree.path_label(self.id)
    }
}

/// Rebuilds a tree node by node, merging siblings that share a frame.
struct Builder {
    nodes: Vec<ViewNode>,
    index: HashMap<(usize, ViewNodeKind, Option<FrameId>), usize>,
}

impl Builder {
    fn new(root: &ViewNode) -> Self {
        let mut root = root.clone();
        root.children.clear();
        root.parent = None;
        Builder {
            nodes: vec![root],
            index: HashMap::default(),
        }
    }

    /// Adds a childless copy of `template` under `parent`, or folds its
    /// values into an existing sibling with the same identity.
    fn add_child(&mut self, parent: usize, template: &ViewNode) -> usize {
        let key = (parent, template.kind, template.frame);
        if let Some(&existing) = self.index.get(&key) {
            let n = &mut self.nodes[existing];
            n.inclusive += template.inclusive;
            n.exclusive += template.exclusive;
            n.repeat = n.repeat.max(template.repeat);
            return existing;
        }
        let id = self.nodes.len();
        let mut node = template.clone();
        node.children.clear();
        node.parent = Some(parent);
        self.nodes.push(node);
        self.nodes[parent].children.push(id);
        self.index.insert(key, id);
        id
    }

    fn add_residual(&mut self, parent: usize, kind: ViewNodeKind, value: u64) {
        let mut node = ViewNode::new(kind, None);
        node.inclusive = value;
        node.exclusive = value;
        self.add_child(parent, &node);
    }

    fn finish(self, src: &ViewTree) -> ViewTree {
        src.with_nodes(self.nodes)
    }
}

fn same_source_line(a: Option<&Frame>, b: Option<&Frame>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => {
            !a.file.is_empty() && a.line != 0 && a.file == b.file && a.line == b.line
        }
        _ => false,
    }
}

impl ViewTree {
    /// Visits every node once in the given order and applies the returned
    /// directives, producing a new tree. The visitor sees the original tree.
    pub fn traverse(
        &self,
        order: TraversalOrder,
        mut visitor: impl FnMut(&Visit<'_>) -> Result<Directive>,
    ) -> Result<ViewTree> {
        let mut directives = vec![Directive::Keep; self.len()];
        let mut stack = vec![(0usize, 0usize, false)];
        while let Some((id, depth, expanded)) = stack.pop() {
            if order == TraversalOrder::Pre || expanded {
                let visit = Visit {
                    tree: self,
                    id,
                    depth,
                    node: self.node(id),
                };
                directives[id] = visitor(&visit)?;
                if expanded {
                    continue;
                }
            } else {
                stack.push((id, depth, true));
            }
            for &c in self.node(id).children.iter().rev() {
                stack.push((c, depth + 1, false));
            }
        }
        if directives[0] != Directive::Keep {
            return Err(Error::Directive(
                "the root cannot be elided or merged".into(),
            ));
        }
        if directives.iter().all(|d| *d == Directive::Keep) {
            return Ok(self.clone());
        }
        self.apply_directives(&directives)
    }

    fn apply_directives(&self, directives: &[Directive]) -> Result<ViewTree> {
        let mut b = Builder::new(self.node(0));
        // (old id, new parent) pairs; children are pushed in reverse so that
        // siblings attach in order and "previous sibling" is well defined.
        let mut stack: Vec<(usize, usize)> = self
            .node(0)
            .children
            .iter()
            .rev()
            .map(|&c| (c, 0))
            .collect();
        // Frame that each builder node was created from, for merge checks.
        let mut origin: Vec<Option<usize>> = vec![None];
        while let Some((old, parent)) = stack.pop() {
            let node = self.node(old);
            let target = match directives[old] {
                Directive::Keep => {
                    let id = b.add_child(parent, node);
                    if id == origin.len() {
                        origin.push(Some(old));
                    }
                    id
                }
                Directive::Elide => {
                    b.nodes[parent].exclusive += node.exclusive;
                    parent
                }
                Directive::MergeWithPreviousSibling => {
                    let prev = b.nodes[parent].children.last().copied().ok_or_else(|| {
                        Error::Merge(format!(
                            "`{}` has no previous sibling",
                            self.path_label(old)
                        ))
                    })?;
                    let prev_frame = origin[prev].and_then(|o| self.frame(o));
                    if !same_source_line(prev_frame, self.frame(old)) {
                        return Err(Error::Merge(format!(
                            "`{}` and its previous sibling map to different source lines",
                            self.path_label(old)
                        )));
                    }
                    let p = &mut b.nodes[prev];
                    p.inclusive += node.inclusive;
                    p.exclusive += node.exclusive;
                    prev
                }
            };
            for &c in node.children.iter().rev() {
                stack.push((c, target));
            }
        }
        Ok(b.finish(self))
    }

    /// Collapses runs of directly recursive calls (same function, any line)
    /// into their head, labelled `name (×k)`.
    pub fn collapse_recursion(&self) -> Result<ViewTree> {
        if self.kind() != ViewKind::TopDown {
            return Err(Error::Directive(
                "recursion collapsing needs a top-down view".into(),
            ));
        }
        let fkey = |id: usize| {
            self.frame(id)
                .map(|f| (f.name().into_owned(), f.module.clone(), f.file.clone()))
        };
        let mut b = Builder::new(self.node(0));
        // (old id, new parent, key of new parent, run length so far)
        let mut stack = vec![];
        for &c in self.node(0).children.iter().rev() {
            stack.push((c, 0usize, None, 1u32));
        }
        while let Some((old, parent, parent_key, run)) = stack.pop() {
            let node = self.node(old);
            let key = if node.kind == ViewNodeKind::Frame {
                fkey(old)
            } else {
                None
            };
            let (target, run) = if key.is_some() && key == parent_key {
                let p = &mut b.nodes[parent];
                p.exclusive += node.exclusive;
                p.repeat = p.repeat.max(run + 1);
                (parent, run + 1)
            } else {
                (b.add_child(parent, node), 1)
            };
            for &c in node.children.iter().rev() {
                stack.push((c, target, key.clone(), run));
            }
        }
        Ok(b.finish(self))
    }

    /// Replaces subtrees whose width falls below `threshold` × total with one
    /// `«other»` child per parent. A threshold of 1 keeps only the root.
    pub fn prune(&self, threshold: f64) -> Result<ViewTree> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Range {
                name: "threshold",
                value: threshold,
            });
        }
        let cut = threshold * self.width(0) as f64;
        let removed = |id: usize| threshold >= 1.0 || (self.width(id) as f64) < cut;
        let mut b = Builder::new(self.node(0));
        let mut stack = vec![(0usize, 0usize)];
        while let Some((old, new)) = stack.pop() {
            let mut residual = None;
            for &c in &self.node(old).children {
                if removed(c) {
                    *residual.get_or_insert(0) += self.width(c);
                } else {
                    let id = b.add_child(new, self.node(c));
                    stack.push((c, id));
                }
            }
            if let Some(value) = residual {
                b.add_residual(new, ViewNodeKind::Other, value);
            }
        }
        Ok(b.finish(self))
    }

    /// Cuts the tree below `max_depth`; each cut is summarised by one
    /// `«deep»` child.
    pub fn truncate_depth(&self, max_depth: usize) -> ViewTree {
        let mut b = Builder::new(self.node(0));
        let mut stack = vec![(0usize, 0usize, 0usize)];
        while let Some((old, new, depth)) = stack.pop() {
            let children = &self.node(old).children;
            if children.is_empty() {
                continue;
            }
            if depth >= max_depth {
                let value = children.iter().map(|&c| self.width(c)).sum();
                b.add_residual(new, ViewNodeKind::Deep, value);
                continue;
            }
            for &c in children {
                let id = b.add_child(new, self.node(c));
                stack.push((c, id, depth + 1));
            }
        }
        b.finish(self)
    }
}
