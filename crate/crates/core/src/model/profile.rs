use rustc_hash::FxHashMap as HashMap;
use std::sync::Arc;

use super::{
    ContextNode, DerivedMetric, Frame, FrameId, Meta, MetricDescriptor, MetricKind,
    MonitoringPoint, NodeId, NodeKind, ROLE_SELF, ROOT_NAME,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraversalOrder {
    Pre,
    Post,
}

/// A calling context tree with metrics, interned frames and monitoring points.
///
/// Profiles are built by a single writer through [`Profile::add_sample`] and
/// friends; once built they are treated as immutable and every analysis
/// returns a new value.
#[derive(Debug, Clone)]
pub struct Profile {
    meta: Meta,
    metrics: Vec<MetricDescriptor>,
    frames: Arc<Vec<Frame>>,
    frame_index: HashMap<Frame, FrameId>,
    nodes: Vec<ContextNode>,
    child_index: HashMap<(NodeId, FrameId), NodeId>,
    points: Vec<MonitoringPoint>,
    derived: Vec<DerivedMetric>,
}

impl Profile {
    /// Creates an empty profile holding only the synthetic root.
    pub fn new(meta: Meta, metrics: Vec<MetricDescriptor>) -> Result<Self> {
        for (i, m) in metrics.iter().enumerate() {
            if metrics[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::DuplicateMetric(m.name.clone()));
            }
        }
        let root_frame = Frame::function(ROOT_NAME);
        let mut frame_index = HashMap::default();
        frame_index.insert(root_frame.clone(), FrameId(0));
        let root = ContextNode {
            frame: FrameId(0),
            parent: None,
            children: Vec::new(),
            kind: NodeKind::Code,
            values: vec![None; metrics.len()],
        };
        Ok(Profile {
            meta,
            metrics,
            frames: Arc::new(vec![root_frame]),
            frame_index,
            nodes: vec![root],
            child_index: HashMap::default(),
            points: Vec::new(),
            derived: Vec::new(),
        })
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut Meta {
        &mut self.meta
    }

    pub fn metrics(&self) -> &[MetricDescriptor] {
        &self.metrics
    }

    /// Position of a raw metric by name.
    pub fn metric_index(&self, name: &str) -> Result<usize> {
        if let Some(i) = self.metrics.iter().position(|m| m.name == name) {
            return Ok(i);
        }
        if self.derived.iter().any(|d| d.name == name) {
            return Err(Error::UnknownMetricSemantics(name.to_string()));
        }
        Err(Error::UnknownMetric(name.to_string()))
    }

    /// Resolves a metric given either by name or by decimal position.
    pub fn resolve_metric(&self, key: &str) -> Result<usize> {
        match self.metric_index(key) {
            Ok(i) => Ok(i),
            Err(Error::UnknownMetric(_)) => match key.parse::<usize>() {
                Ok(i) if i < self.metrics.len() => Ok(i),
                _ => Err(Error::UnknownMetric(key.to_string())),
            },
            Err(e) => Err(e),
        }
    }

    /// First additive metric, the default for analyses that need one.
    pub fn default_metric(&self) -> Option<usize> {
        self.metrics.iter().position(|m| m.is_additive())
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Shared handle to the frame table, for views that outlive a borrow.
    pub fn frame_table(&self) -> Arc<Vec<Frame>> {
        Arc::clone(&self.frames)
    }

    pub fn frame(&self, id: FrameId) -> &Frame {
        &self.frames[id.index()]
    }

    pub fn nodes(&self) -> &[ContextNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn node(&self, id: NodeId) -> &ContextNode {
        &self.nodes[id.index()]
    }

    pub fn get_node(&self, id: NodeId) -> Option<&ContextNode> {
        self.nodes.get(id.index())
    }

    pub fn node_frame(&self, id: NodeId) -> &Frame {
        self.frame(self.node(id).frame)
    }

    pub fn points(&self) -> &[MonitoringPoint] {
        &self.points
    }

    pub fn derived(&self) -> &[DerivedMetric] {
        &self.derived
    }

    /// Interns a frame, returning the id shared by all identical frames.
    pub fn intern_frame(&mut self, frame: Frame) -> Result<FrameId> {
        if let Some(&id) = self.frame_index.get(&frame) {
            return Ok(id);
        }
        if !frame.is_valid() {
            return Err(Error::InvalidFrame);
        }
        let id = FrameId(self.frames.len() as u32);
        Arc::make_mut(&mut self.frames).push(frame.clone());
        self.frame_index.insert(frame, id);
        Ok(id)
    }

    pub fn child(&self, parent: NodeId, frame: FrameId) -> Option<NodeId> {
        self.child_index.get(&(parent, frame)).copied()
    }

    /// Interns a root-first path of frame ids below the synthetic root.
    pub fn intern_path(&mut self, path: &[FrameId]) -> Result<NodeId> {
        let mut cur = NodeId::ROOT;
        for &frame in path {
            if frame.index() >= self.frames.len() {
                return Err(Error::Format {
                    offset: 0,
                    message: format!("frame id {} is not interned", frame.0),
                });
            }
            cur = match self.child_index.get(&(cur, frame)) {
                Some(&n) => n,
                None => {
                    let id = NodeId(self.nodes.len() as u32);
                    self.nodes.push(ContextNode {
                        frame,
                        parent: Some(cur),
                        children: Vec::new(),
                        kind: NodeKind::Code,
                        values: vec![None; self.metrics.len()],
                    });
                    self.nodes[cur.index()].children.push(id);
                    self.child_index.insert((cur, frame), id);
                    id
                }
            };
        }
        Ok(cur)
    }

    fn intern_stack(&mut self, stack: &[Frame]) -> Result<NodeId> {
        let ids = stack
            .iter()
            .map(|f| self.intern_frame(f.clone()))
            .collect::<Result<Vec<_>>>()?;
        self.intern_path(&ids)
    }

    /// Records one sample for a root-first stack and returns its leaf node.
    pub fn add_sample(&mut self, stack: &[Frame], values: &[u64]) -> Result<NodeId> {
        self.check_sample(stack.len(), values.len())?;
        let node = self.intern_stack(stack)?;
        self.record_point(
            vec![(ROLE_SELF.to_string(), node)],
            values.iter().map(|&v| Some(v)).collect(),
        );
        Ok(node)
    }

    /// Same as [`Profile::add_sample`] for a stack of already interned frames.
    pub fn add_sample_ids(&mut self, stack: &[FrameId], values: &[u64]) -> Result<NodeId> {
        self.check_sample(stack.len(), values.len())?;
        let node = self.intern_path(stack)?;
        self.record_point(
            vec![(ROLE_SELF.to_string(), node)],
            values.iter().map(|&v| Some(v)).collect(),
        );
        Ok(node)
    }

    /// Records a monitoring point spanning one or more role-labelled stacks.
    ///
    /// Only single-context points with role `self` contribute to node raw
    /// values; multi-context points are kept as points for correlation.
    pub fn add_point(
        &mut self,
        contexts: &[(&str, &[Frame])],
        values: &[Option<u64>],
    ) -> Result<Vec<NodeId>> {
        if contexts.is_empty() {
            return Err(Error::EmptyStack);
        }
        if values.len() != self.metrics.len() {
            return Err(Error::Arity {
                expected: self.metrics.len(),
                got: values.len(),
            });
        }
        let mut tuple = Vec::with_capacity(contexts.len());
        for (role, stack) in contexts {
            if stack.is_empty() {
                return Err(Error::EmptyStack);
            }
            tuple.push((role.to_string(), self.intern_stack(stack)?));
        }
        let nodes = tuple.iter().map(|(_, n)| *n).collect();
        self.record_point(tuple, values.to_vec());
        Ok(nodes)
    }

    fn check_sample(&self, depth: usize, arity: usize) -> Result<()> {
        if depth == 0 {
            return Err(Error::EmptyStack);
        }
        if arity != self.metrics.len() {
            return Err(Error::Arity {
                expected: self.metrics.len(),
                got: arity,
            });
        }
        Ok(())
    }

    fn record_point(&mut self, contexts: Vec<(String, NodeId)>, values: Vec<Option<u64>>) {
        let point = MonitoringPoint { contexts, values };
        if point.is_single() {
            let node = &mut self.nodes[point.contexts[0].1.index()];
            for (m, v) in point.values.iter().enumerate() {
                let Some(v) = *v else { continue };
                let slot = &mut node.values[m];
                *slot = Some(match self.metrics[m].kind {
                    MetricKind::Additive => slot.unwrap_or(0) + v,
                    MetricKind::Snapshot => v,
                });
            }
        }
        self.points.push(point);
    }

    pub fn set_node_kind(&mut self, node: NodeId, kind: NodeKind) -> Result<()> {
        let n = self
            .nodes
            .get_mut(node.index())
            .ok_or(Error::UnknownNode(node.index()))?;
        n.kind = kind;
        Ok(())
    }

    /// Attaches a derived metric, rejecting name clashes.
    pub fn with_derived(mut self, metric: DerivedMetric) -> Result<Self> {
        if self.metrics.iter().any(|m| m.name == metric.name)
            || self.derived.iter().any(|d| d.name == metric.name)
        {
            return Err(Error::DuplicateMetric(metric.name));
        }
        if metric.values.len() != self.nodes.len() {
            return Err(Error::Arity {
                expected: self.nodes.len(),
                got: metric.values.len(),
            });
        }
        self.derived.push(metric);
        Ok(self)
    }

    /// Node ids from the root down to `node`, inclusive of both.
    pub fn path(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur.index()].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Frames from the first frame below the root down to `node`.
    pub fn path_frames(&self, node: NodeId) -> Vec<&Frame> {
        self.path(node)
            .into_iter()
            .skip(1)
            .map(|n| self.node_frame(n))
            .collect()
    }

    /// `;`-joined function names below the root, used in messages.
    pub fn path_label(&self, node: NodeId) -> String {
        self.path_frames(node)
            .iter()
            .map(|f| f.display_name())
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Finds a node by the display names along its path. The first matching
    /// child is taken at each level.
    pub fn find_path(&self, names: &[&str]) -> Option<NodeId> {
        let mut cur = NodeId::ROOT;
        for name in names {
            cur = *self.nodes[cur.index()]
                .children
                .iter()
                .find(|&&c| self.node_frame(c).display_name() == *name)?;
        }
        Some(cur)
    }

    /// Raw value of `metric` at every node, with missing values read as zero.
    pub fn raw_values(&self, metric: usize) -> Vec<u64> {
        self.nodes
            .iter()
            .map(|n| n.values[metric].unwrap_or(0))
            .collect()
    }

    /// Subtree sums of the raw values of `metric`.
    pub fn inclusive_values(&self, metric: usize) -> Vec<u64> {
        let mut acc = self.raw_values(metric);
        // Children always carry larger ids than their parent.
        for i in (1..self.nodes.len()).rev() {
            if let Some(p) = self.nodes[i].parent {
                acc[p.index()] += acc[i];
            }
        }
        acc
    }

    /// Sum of the raw values of `metric` over all nodes.
    pub fn total(&self, metric: usize) -> u64 {
        self.nodes
            .iter()
            .map(|n| n.values[metric].unwrap_or(0))
            .sum()
    }

    /// Visits every node in pre- or post-order; siblings in stored order.
    pub fn walk<E>(
        &self,
        order: TraversalOrder,
        mut visit: impl FnMut(NodeId) -> std::result::Result<(), E>,
    ) -> std::result::Result<(), E> {
        let mut stack = vec![(NodeId::ROOT, false)];
        while let Some((n, expanded)) = stack.pop() {
            if expanded {
                visit(n)?;
                continue;
            }
            match order {
                TraversalOrder::Pre => visit(n)?,
                TraversalOrder::Post => stack.push((n, true)),
            }
            for &c in self.nodes[n.index()].children.iter().rev() {
                stack.push((c, false));
            }
        }
        Ok(())
    }

    /// Drops frames no node references and renumbers the rest in order of
    /// first use.
    pub fn canonicalize(&mut self) {
        let mut remap = vec![u32::MAX; self.frames.len()];
        let mut frames = Vec::new();
        for node in &mut self.nodes {
            let old = node.frame.index();
            if remap[old] == u32::MAX {
                remap[old] = frames.len() as u32;
                frames.push(self.frames[old].clone());
            }
            node.frame = FrameId(remap[old]);
        }
        self.frames = Arc::new(frames);
        self.frame_index = self
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), FrameId(i as u32)))
            .collect();
        self.child_index = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parent.map(|p| ((p, n.frame), NodeId(i as u32))))
            .collect();
    }

    /// Rebuilds a profile from raw tables, validating tree shape and frame
    /// references. Used by the native decoder.
    pub(crate) fn from_parts(
        meta: Meta,
        metrics: Vec<MetricDescriptor>,
        frames: Vec<Frame>,
        nodes: Vec<ContextNode>,
        points: Vec<MonitoringPoint>,
        derived: Vec<DerivedMetric>,
    ) -> std::result::Result<Self, String> {
        let mut profile = Profile::new(meta, metrics).map_err(|e| e.to_string())?;
        let mut frame_index = HashMap::with_capacity_and_hasher(frames.len(), Default::default());
        for (i, f) in frames.iter().enumerate() {
            if !f.is_valid() {
                return Err(format!("frame {i} has neither function nor address"));
            }
            if frame_index.insert(f.clone(), FrameId(i as u32)).is_some() {
                return Err(format!("frame {i} duplicates an earlier frame"));
            }
        }
        if nodes.is_empty() {
            return Err("node table is empty".into());
        }
        let nm = profile.metrics.len();
        let mut child_index = HashMap::with_capacity_and_hasher(nodes.len(), Default::default());
        let mut built: Vec<ContextNode> = Vec::with_capacity(nodes.len());
        for (i, mut n) in nodes.into_iter().enumerate() {
            if n.frame.index() >= frames.len() {
                return Err(format!("node {i} references missing frame {}", n.frame.0));
            }
            if n.values.len() != nm {
                return Err(format!(
                    "node {i} has {} values, expected {nm}",
                    n.values.len()
                ));
            }
            match (i, n.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err("node 0 must be the root".into()),
                (_, None) => return Err(format!("node {i} is a second root")),
                (_, Some(p)) if p.index() >= i => {
                    return Err(format!("node {i} must follow its parent {}", p.0))
                }
                (_, Some(p)) => {
                    if child_index.insert((p, n.frame), NodeId(i as u32)).is_some() {
                        return Err(format!("node {i} duplicates a sibling frame"));
                    }
                    built[p.index()].children.push(NodeId(i as u32));
                }
            }
            n.children.clear();
            built.push(n);
        }
        for (i, p) in points.iter().enumerate() {
            if p.contexts.is_empty() {
                return Err(format!("point {i} has no context"));
            }
            if p.values.len() != nm {
                return Err(format!(
                    "point {i} has {} values, expected {nm}",
                    p.values.len()
                ));
            }
            if let Some((_, n)) = p.contexts.iter().find(|(_, n)| n.index() >= built.len()) {
                return Err(format!("point {i} references missing node {}", n.0));
            }
        }
        for d in &derived {
            if d.values.len() != built.len() {
                return Err(format!("derived metric `{}` has wrong length", d.name));
            }
        }
        profile.frames = Arc::new(frames);
        profile.frame_index = frame_index;
        profile.nodes = built;
        profile.child_index = child_index;
        profile.points = points;
        profile.derived = derived;
        Ok(profile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MetricDescriptor;

    fn frames(names: &[&str]) -> Vec<Frame> {
        names.iter().map(|n| Frame::function(*n)).collect()
    }

    fn cpu_profile() -> Profile {
        Profile::new(
            Meta::named("t"),
            vec![MetricDescriptor::additive("cpu", "samples")],
        )
        .unwrap()
    }

    #[test]
    fn empty_profile_has_only_root() {
        let p = cpu_profile();
        assert_eq!(p.node_count(), 1);
        assert!(p.points().is_empty());
        assert_eq!(p.node_frame(p.root()).function, ROOT_NAME);
    }

    #[test]
    fn zero_metrics_is_valid() {
        let p = Profile::new(Meta::default(), vec![]).unwrap();
        assert_eq!(p.metrics().len(), 0);
        assert_eq!(p.default_metric(), None);
    }

    #[test]
    fn duplicate_metric_rejected() {
        let m = MetricDescriptor::additive("cpu", "samples");
        let err = Profile::new(Meta::default(), vec![m.clone(), m]).unwrap_err();
        assert_eq!(err, Error::DuplicateMetric("cpu".into()));
    }

    #[test]
    fn prefixes_merge() {
        let mut p = cpu_profile();
        p.add_sample(&frames(&["main", "a", "b"]), &[3]).unwrap();
        p.add_sample(&frames(&["main", "a", "c"]), &[2]).unwrap();
        assert_eq!(p.node_count(), 5);
        let a = p.find_path(&["main", "a"]).unwrap();
        assert_eq!(p.node(a).children.len(), 2);
    }

    #[test]
    fn repeated_stack_accumulates() {
        let mut p = cpu_profile();
        let n1 = p.add_sample(&frames(&["main", "x"]), &[1]).unwrap();
        let n2 = p.add_sample(&frames(&["main", "x"]), &[1]).unwrap();
        assert_eq!(n1, n2);
        assert_eq!(p.node_count(), 3);
        assert_eq!(p.node(n1).values[0], Some(2));
        assert_eq!(p.points().len(), 2);
    }

    #[test]
    fn empty_stack_and_arity() {
        let mut p = cpu_profile();
        assert_eq!(p.add_sample(&[], &[1]).unwrap_err(), Error::EmptyStack);
        assert_eq!(
            p.add_sample(&frames(&["main"]), &[1, 2]).unwrap_err(),
            Error::Arity {
                expected: 1,
                got: 2
            }
        );
    }

    #[test]
    fn frames_are_interned_by_full_identity() {
        let mut p = cpu_profile();
        let a = p
            .intern_frame(Frame::function("f").with_location("x.c", 1))
            .unwrap();
        let b = p
            .intern_frame(Frame::function("f").with_location("x.c", 2))
            .unwrap();
        let c = p
            .intern_frame(Frame::function("f").with_location("x.c", 1))
            .unwrap();
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_eq!(
            p.intern_frame(Frame::default()).unwrap_err(),
            Error::InvalidFrame
        );
    }

    #[test]
    fn snapshot_values_replace() {
        let mut p = Profile::new(
            Meta::default(),
            vec![MetricDescriptor::snapshot("live", "bytes")],
        )
        .unwrap();
        let n = p.add_sample(&frames(&["main"]), &[5]).unwrap();
        p.add_sample(&frames(&["main"]), &[7]).unwrap();
        assert_eq!(p.node(n).values[0], Some(7));
    }

    #[test]
    fn multi_context_points_do_not_touch_raw_values() {
        let mut p = cpu_profile();
        let alloc = frames(&["main", "alloc"]);
        let use_ = frames(&["main", "use"]);
        let nodes = p
            .add_point(&[("alloc", &alloc), ("use", &use_)], &[Some(6)])
            .unwrap();
        assert_eq!(nodes.len(), 2);
        assert_eq!(p.total(0), 0);
        assert_eq!(
            p.points()[0].context("use").collect::<Vec<_>>(),
            vec![nodes[1]]
        );
    }

    #[test]
    fn walk_orders() {
        let mut p = cpu_profile();
        p.add_sample(&frames(&["main", "a"]), &[1]).unwrap();
        p.add_sample(&frames(&["main", "b"]), &[1]).unwrap();
        let mut pre = Vec::new();
        p.walk::<()>(TraversalOrder::Pre, |n| {
            pre.push(p.node_frame(n).function.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(pre, vec![ROOT_NAME, "main", "a", "b"]);
        let mut post = Vec::new();
        p.walk::<()>(TraversalOrder::Post, |n| {
            post.push(p.node_frame(n).function.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(post, vec!["a", "b", "main", ROOT_NAME]);
    }

    #[test]
    fn canonicalize_drops_unused_frames() {
        let mut p = cpu_profile();
        p.intern_frame(Frame::function("unused")).unwrap();
        p.add_sample(&frames(&["main"]), &[1]).unwrap();
        assert_eq!(p.frames().len(), 3);
        p.canonicalize();
        assert_eq!(p.frames().len(), 2);
        assert_eq!(
            p.find_path(&["main"])
                .map(|n| p.node_frame(n).function.clone()),
            Some("main".into())
        );
        // Interning still finds the existing child after renumbering.
        let n = p.add_sample(&frames(&["main"]), &[1]).unwrap();
        assert_eq!(p.node(n).values[0], Some(2));
        assert_eq!(p.node_count(), 2);
    }
}
