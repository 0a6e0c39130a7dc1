use rustc_hash::FxHashMap as HashMap;

use crate::analysis::{MatchKey, ViewTree};

/// One node of a tree unified over several views by [`MatchKey`] paths.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedNode {
    pub key: MatchKey,
    pub label: String,
    pub module: String,
    pub source: Option<(String, u32)>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Inclusive value per input; `None` where the path is absent.
    pub inclusive: Vec<Option<u64>>,
    /// Flame-width value per input (see [`ViewTree::width`]).
    pub width: Vec<Option<u64>>,
}

/// Merges views into one tree whose nodes are the union of their paths.
/// Sibling nodes of one input sharing a key are summed.
pub(crate) fn unify(views: &[&ViewTree]) -> Vec<UnifiedNode> {
    let n = views.len();
    let mut nodes = vec![UnifiedNode {
        key: MatchKey::Root,
        label: crate::model::ROOT_NAME.to_string(),
        module: String::new(),
        source: None,
        parent: None,
        children: Vec::new(),
        inclusive: vec![None; n],
        width: vec![None; n],
    }];
    let mut index: HashMap<(usize, MatchKey), usize> = HashMap::default();
    for (i, view) in views.iter().enumerate() {
        let mut stack = vec![(view.root(), 0usize)];
        while let Some((vid, uid)) = stack.pop() {
            let node = view.node(vid);
            let slot = &mut nodes[uid];
            slot.inclusive[i] = Some(slot.inclusive[i].unwrap_or(0) + node.inclusive);
            slot.width[i] = Some(slot.width[i].unwrap_or(0) + view.width(vid));
            for &c in &node.children {
                let key = view.match_key(c);
                let child = match index.get(&(uid, key.clone())) {
                    Some(&id) => id,
                    None => {
                        let id = nodes.len();
                        let frame = view.frame(c);
                        nodes.push(UnifiedNode {
                            key: key.clone(),
                            label: view.label(c),
                            module: frame.map(|f| f.module.clone()).unwrap_or_default(),
                            source: view
                                .is_code(c)
                                .then(|| frame.and_then(|f| f.source()))
                                .flatten()
                                .map(|(file, line)| (file.to_string(), line)),
                            parent: Some(uid),
                            children: Vec::new(),
                            inclusive: vec![None; n],
                            width: vec![None; n],
                        });
                        nodes[uid].children.push(id);
                        index.insert((uid, key), id);
                        id
                    }
                };
                stack.push((c, child));
            }
        }
    }
    nodes
}

/// Renumbers nodes in pre-order after sorting each child list with `cmp`.
pub(crate) fn reorder<T: Clone>(
    nodes: Vec<T>,
    children: impl Fn(&T) -> &Vec<usize>,
    mut relink: impl FnMut(&mut T, Option<usize>, Vec<usize>),
    parent: impl Fn(&T) -> Option<usize>,
    cmp: impl Fn(&T, &T) -> std::cmp::Ordering,
) -> Vec<T> {
    let mut kids: Vec<Vec<usize>> = nodes.iter().map(|n| children(n).clone()).collect();
    for k in kids.iter_mut() {
        k.sort_by(|&a, &b| cmp(&nodes[a], &nodes[b]));
    }
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        order.push(id);
        stack.extend(kids[id].iter().rev());
    }
    let mut new_id = vec![usize::MAX; nodes.len()];
    for (i, &old) in order.iter().enumerate() {
        new_id[old] = i;
    }
    order
        .iter()
        .map(|&old| {
            let mut node = nodes[old].clone();
            let p = parent(&node).map(|p| new_id[p]);
            relink(&mut node, p, kids[old].iter().map(|&c| new_id[c]).collect());
            node
        })
        .collect()
}
