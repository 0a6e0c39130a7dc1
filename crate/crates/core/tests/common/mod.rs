#![allow(dead_code)]

use std::collections::BTreeMap;

use profcct_core::analysis::MatchKey;
use profcct_core::model::MetricDescriptor;
use profcct_core::{Frame, Meta, Profile};
use rand::Rng;

/// Frame `i` of a small pool; some frames share a name but differ by line.
pub fn pool_frame(i: usize) -> Frame {
    Frame::function(format!("f{}", i % 37))
        .with_module(format!("lib{}", i % 3))
        .with_location(format!("src/m{}.c", i % 4), (i % 5) as u32 * 10)
}

pub fn key_of(f: &Frame) -> MatchKey {
    MatchKey::Frame {
        function: f.display_name(),
        module: f.module.clone(),
        file: f.file.clone(),
        line: f.line,
    }
}

/// Random stacks over pool frame indices with one value each.
pub fn random_samples(
    rng: &mut impl Rng,
    max_samples: usize,
    frames: usize,
    max_depth: usize,
) -> Vec<(Vec<usize>, u64)> {
    let n = rng.gen_range(0..=max_samples);
    (0..n)
        .map(|_| {
            let depth = rng.gen_range(1..=max_depth);
            let mut stack = Vec::with_capacity(depth);
            for _ in 0..depth {
                // Bias towards repeating the previous frame to get recursion.
                if !stack.is_empty() && rng.gen_bool(0.15) {
                    stack.push(*stack.last().unwrap());
                } else {
                    stack.push(rng.gen_range(0..frames));
                }
            }
            (stack, rng.gen_range(0..1000))
        })
        .collect()
}

pub fn build(samples: &[(Vec<usize>, u64)]) -> Profile {
    let mut p = Profile::new(
        Meta::named("rand"),
        vec![MetricDescriptor::additive("cpu", "ns")],
    )
    .unwrap();
    for (stack, v) in samples {
        let frames: Vec<Frame> = stack.iter().map(|&i| pool_frame(i)).collect();
        p.add_sample(&frames, &[*v]).unwrap();
    }
    p
}

/// Brute-force inclusive value of every non-empty stack prefix.
pub fn prefix_sums(samples: &[(Vec<usize>, u64)]) -> BTreeMap<Vec<MatchKey>, u64> {
    let mut out = BTreeMap::new();
    for (stack, v) in samples {
        for k in 1..=stack.len() {
            let path: Vec<MatchKey> = stack[..k].iter().map(|&i| key_of(&pool_frame(i))).collect();
            *out.entry(path).or_insert(0) += v;
        }
    }
    out
}

/// Canonical `path -> raw values` form of a profile.
pub fn canonical(p: &Profile) -> BTreeMap<Vec<Frame>, Vec<Option<u64>>> {
    (1..p.node_count())
        .map(|i| {
            let id = profcct_core::NodeId(i as u32);
            let path = p.path_frames(id).into_iter().cloned().collect();
            (path, p.node(id).values.clone())
        })
        .collect()
}
