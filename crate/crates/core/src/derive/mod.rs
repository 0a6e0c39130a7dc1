//! Derived metrics: a small arithmetic formula language evaluated per node,
//! and host callbacks hooked into traversals and metric computation.

mod callback;
mod formula;

use std::collections::HashMap;

pub use callback::{CallbackHandle, Callbacks, Hook, MetricCallback, MetricNode, VisitCallback};
pub use formula::{Expr, Op};

use crate::error::{Error, Result};
use crate::model::{DerivedMetric, MetricKind, Profile};
use crate::multi::DiffTree;

/// Which per-node values identifiers resolve to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueBasis {
    #[default]
    Inclusive,
    Exclusive,
}

/// Evaluation scope of a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scope {
    /// Identifiers name metrics of one profile.
    #[default]
    PerNode,
    /// Identifiers are `m1` and `m2`, the two sides of a diff.
    PerDiffPair,
}

/// Per-node values of every metric, ready for formula lookups.
pub(crate) struct NodeValues {
    pub names: Vec<String>,
    /// `columns[m][node]`
    pub columns: Vec<Vec<Option<f64>>>,
}

impl NodeValues {
    pub(crate) fn of(profile: &Profile, basis: ValueBasis) -> Self {
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for (m, d) in profile.metrics().iter().enumerate() {
            let column = if basis == ValueBasis::Inclusive && d.kind == MetricKind::Additive {
                profile
                    .inclusive_values(m)
                    .into_iter()
                    .map(|v| Some(v as f64))
                    .collect()
            } else {
                profile
                    .nodes()
                    .iter()
                    .map(|n| n.values[m].map(|v| v as f64))
                    .collect()
            };
            names.push(d.name.clone());
            columns.push(column);
        }
        for d in profile.derived() {
            names.push(d.name.clone());
            columns.push(d.values.clone());
        }
        NodeValues { names, columns }
    }

    pub(crate) fn row(&self, node: usize) -> Vec<Option<f64>> {
        self.columns.iter().map(|c| c[node]).collect()
    }
}

/// Evaluates `formula` at every node of `profile`.
pub fn derive(
    profile: &Profile,
    name: &str,
    formula: &str,
    basis: ValueBasis,
) -> Result<DerivedMetric> {
    let expr = Expr::parse(formula)?;
    let values = NodeValues::of(profile, basis);
    let slots: HashMap<&str, usize> = values
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    for ident in expr.identifiers() {
        if !slots.contains_key(ident) {
            return Err(Error::UnknownMetric(ident.to_string()));
        }
    }
    let out = (0..profile.node_count())
        .map(|node| expr.eval(&|id| values.columns[slots[id]][node]))
        .collect();
    Ok(DerivedMetric {
        name: name.to_string(),
        formula: formula.to_string(),
        values: out,
    })
}

/// Evaluates `formula` and attaches the result to a copy of `profile`.
pub fn derive_into(
    profile: &Profile,
    name: &str,
    formula: &str,
    basis: ValueBasis,
) -> Result<Profile> {
    let metric = derive(profile, name, formula, basis)?;
    profile.clone().with_derived(metric)
}

/// Evaluates a pair formula over `m1` and `m2` at every node of a diff.
pub fn derive_diff(diff: &DiffTree, formula: &str) -> Result<Vec<Option<f64>>> {
    let expr = Expr::parse(formula)?;
    if let Some(bad) = expr
        .identifiers()
        .into_iter()
        .find(|i| *i != "m1" && *i != "m2")
    {
        return Err(Error::UnknownMetric(bad.to_string()));
    }
    Ok(diff
        .nodes()
        .iter()
        .map(|n| {
            expr.eval(&|id| match id {
                "m1" => n.m1,
                _ => n.m2,
            })
        })
        .collect())
}
