use super::{NodeValues, ValueBasis};
use crate::analysis::{Directive, ViewTree, Visit};
use crate::error::{Error, Result};
use crate::model::{DerivedMetric, Frame, NodeId, Profile, TraversalOrder};

pub type VisitCallback =
    Box<dyn Fn(&Visit<'_>) -> std::result::Result<Directive, String> + Send + Sync>;
pub type MetricCallback =
    Box<dyn Fn(&MetricNode<'_>) -> std::result::Result<Option<f64>, String> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hook {
    OnVisit,
    OnMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallbackHandle(pub usize);

/// What a metric callback sees: one node and its own metric values.
pub struct MetricNode<'a> {
    pub profile: &'a Profile,
    pub node: NodeId,
    names: &'a [String],
    values: Vec<Option<f64>>,
}

impl MetricNode<'_> {
    pub fn frame(&self) -> &Frame {
        self.profile.node_frame(self.node)
    }

    pub fn path_label(&self) -> String {
        self.profile.path_label(self.node)
    }

    /// Value of a base or derived metric at this node.
    pub fn value(&self, metric: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == metric)?;
        self.values[i]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }
}

/// Registry of host callbacks. Visit callbacks run in registration order and
/// the first directive other than `Keep` wins.
#[derive(Default)]
pub struct Callbacks {
    next: usize,
    visit: Vec<(CallbackHandle, VisitCallback)>,
    metric: Vec<(CallbackHandle, MetricCallback)>,
}

impl Callbacks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_visit(
        &mut self,
        f: impl Fn(&Visit<'_>) -> std::result::Result<Directive, String> + Send + Sync + 'static,
    ) -> CallbackHandle {
        let h = self.handle();
        self.visit.push((h, Box::new(f)));
        h
    }

    pub fn on_metric(
        &mut self,
        f: impl Fn(&MetricNode<'_>) -> std::result::Result<Option<f64>, String> + Send + Sync + 'static,
    ) -> CallbackHandle {
        let h = self.handle();
        self.metric.push((h, Box::new(f)));
        h
    }

    fn handle(&mut self) -> CallbackHandle {
        self.next += 1;
        CallbackHandle(self.next)
    }

    pub fn hook(&self, handle: CallbackHandle) -> Option<Hook> {
        if self.visit.iter().any(|(h, _)| *h == handle) {
            Some(Hook::OnVisit)
        } else if self.metric.iter().any(|(h, _)| *h == handle) {
            Some(Hook::OnMetric)
        } else {
            None
        }
    }

    pub fn unregister(&mut self, handle: CallbackHandle) -> Result<()> {
        let before = self.visit.len() + self.metric.len();
        self.visit.retain(|(h, _)| *h != handle);
        self.metric.retain(|(h, _)| *h != handle);
        if self.visit.len() + self.metric.len() == before {
            return Err(Error::UnknownHandle(handle.0));
        }
        Ok(())
    }

    /// Runs every visit callback over `tree` and applies their directives.
    pub fn traverse(&self, tree: &ViewTree, order: TraversalOrder) -> Result<ViewTree> {
        if self.visit.is_empty() {
            return Ok(tree.clone());
        }
        tree.traverse(order, |v| {
            for (_, f) in &self.visit {
                match f(v) {
                    Ok(Directive::Keep) => {}
                    Ok(d) => return Ok(d),
                    Err(message) => {
                        return Err(Error::Callback {
                            path: v.path_label(),
                            message,
                        })
                    }
                }
            }
            Ok(Directive::Keep)
        })
    }

    /// Evaluates the metric callback `handle` at every node of `profile`.
    pub fn derive(
        &self,
        handle: CallbackHandle,
        profile: &Profile,
        name: &str,
        basis: ValueBasis,
    ) -> Result<DerivedMetric> {
        let (_, f) = self
            .metric
            .iter()
            .find(|(h, _)| *h == handle)
            .ok_or(Error::UnknownHandle(handle.0))?;
        let table = NodeValues::of(profile, basis);
        let mut values = Vec::with_capacity(profile.node_count());
        for i in 0..profile.node_count() {
            let node = MetricNode {
                profile,
                node: NodeId(i as u32),
                names: &table.names,
                values: table.row(i),
            };
            let v = f(&node).map_err(|message| Error::Callback {
                path: profile.path_label(node.node),
                message,
            })?;
            values.push(v.filter(|v| v.is_finite()));
        }
        Ok(DerivedMetric {
            name: name.to_string(),
            formula: format!("callback#{}", handle.0),
            values,
        })
    }
}
