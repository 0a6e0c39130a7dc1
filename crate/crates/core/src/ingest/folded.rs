//! Collapsed-stack ("folded") text: one `f1;f2;...;fk <value>` line per
//! stack, root first. A frame is `name`, `module!name`, `name@file:line`, or
//! `module!name@file:line`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Frame, Meta, MetricDescriptor, Profile};

pub fn parse_folded(text: &str, metric: &str, unit: &str) -> Result<Profile> {
    let meta = Meta {
        collector: "folded".to_string(),
        ..Meta::default()
    };
    let mut profile = Profile::new(meta, vec![MetricDescriptor::additive(metric, unit)])?;
    let mut ids = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end();
        if trimmed.trim_start().is_empty() {
            continue;
        }
        let err = |message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let (stack, value) = trimmed
            .rsplit_once([' ', '\t'])
            .ok_or_else(|| err("expected `<stack> <value>`"))?;
        let value = parse_value(value).map_err(|m| err(&m))?;
        let stack = stack.trim_end();
        if stack.is_empty() {
            return Err(err("empty stack"));
        }
        ids.clear();
        for token in stack.split(';') {
            if token.is_empty() {
                return Err(err("empty frame"));
            }
            ids.push(profile.intern_frame(parse_frame(token))?);
        }
        profile.add_sample_ids(&ids, &[value])?;
    }
    Ok(profile)
}

fn parse_value(token: &str) -> std::result::Result<u64, String> {
    if let Some(rest) = token.strip_prefix('-') {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("negative value {token}"));
        }
    }
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("`{token}` is not a non-negative integer"));
    }
    token
        .parse()
        .map_err(|_| format!("value {token} does not fit in 64 bits"))
}

/// Parses one folded frame token.
pub fn parse_frame(token: &str) -> Frame {
    let mut frame = Frame::default();
    let mut head = token;
    if let Some((name, loc)) = token.rsplit_once('@') {
        if let Some((file, line)) = loc.rsplit_once(':') {
            if let (false, Ok(line)) = (file.is_empty() || name.is_empty(), line.parse::<u32>()) {
                frame.file = file.to_string();
                frame.line = line;
                head = name;
            }
        }
    }
    match head.split_once('!') {
        Some((module, name)) if !module.is_empty() && !name.is_empty() => {
            frame.module = module.to_string();
            frame.function = name.to_string();
        }
        _ => frame.function = head.to_string(),
    }
    frame
}

/// Renders a frame as a folded token; the inverse of [`parse_frame`].
pub fn format_frame(frame: &Frame) -> Result<String> {
    let mut out = String::new();
    if !frame.module.is_empty() {
        out.push_str(&frame.module);
        out.push('!');
    }
    out.push_str(&frame.display_name());
    if !frame.file.is_empty() {
        let _ = write!(out, "@{}:{}", frame.file, frame.line);
    }
    if out.contains([';', '\n', '\r']) {
        return Err(Error::FoldedFrame(out));
    }
    Ok(out)
}

/// Emits one line per node with a non-zero exclusive value, sorted by path.
pub fn emit_folded(profile: &Profile, metric: &str) -> Result<String> {
    let m = profile.metric_index(metric)?;
    if !profile.metrics()[m].is_additive() {
        return Err(Error::UnknownMetricSemantics(metric.to_string()));
    }
    let tokens = profile
        .frames()
        .iter()
        .map(format_frame)
        .collect::<Vec<_>>();
    let mut lines = Vec::new();
    for (i, node) in profile.nodes().iter().enumerate().skip(1) {
        let value = node.values[m].unwrap_or(0);
        if value == 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = Some(crate::model::NodeId(i as u32));
        while let Some(n) = cur {
            let node = profile.node(n);
            if node.parent.is_none() {
                break;
            }
            path.push(tokens[node.frame.index()].clone()?);
            cur = node.parent;
        }
        path.reverse();
        lines.push((path.join(";"), value));
    }
    lines.sort();
    let mut out = String::new();
    for (stack, value) in lines {
        let _ = writeln!(out, "{stack} {value}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P1: &str = "main;a;b 3\nmain;a;c 2\nmain;d 5\n";

    #[test]
    fn parse_p1() {
        let p = parse_folded(P1, "samples", "samples").unwrap();
        assert_eq!(p.node_count(), 6);
        assert_eq!(p.inclusive_values(0)[0], 10);
        for names in [
            &["main"][..],
            &["main", "a"],
            &["main", "a", "b"],
            &["main", "a", "c"],
            &["main", "d"],
        ] {
            assert!(p.find_path(names).is_some(), "{names:?}");
        }
    }

    #[test]
    fn empty_text_is_empty_profile() {
        let p = parse_folded("", "samples", "samples").unwrap();
        assert_eq!(p.node_count(), 1);
        assert_eq!(p.total(0), 0);
    }

    #[test]
    fn malformed_lines() {
        let e = parse_folded("main;x notanumber", "s", "s").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_folded("main 1\nmain;x -4\n", "s", "s").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, ref message } if message.contains("negative")));
        let e = parse_folded("main;;x 1", "s", "s").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_folded("lonely", "s", "s").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn frame_syntax() {
        let f = parse_frame("libc.so!malloc@malloc.c:42");
        assert_eq!(
            (
                f.module.as_str(),
                f.function.as_str(),
                f.file.as_str(),
                f.line
            ),
            ("libc.so", "malloc", "malloc.c", 42)
        );
        let f = parse_frame("main@src/main.rs:7");
        assert_eq!(
            (f.function.as_str(), f.file.as_str(), f.line),
            ("main", "src/main.rs", 7)
        );
        let f = parse_frame("std::vec::Vec<T>::push");
        assert_eq!(f.function, "std::vec::Vec<T>::push");
        assert!(f.file.is_empty());
        let f = parse_frame("user@host");
        assert_eq!(f.function, "user@host");
        for token in ["libc.so!malloc@malloc.c:42", "main@src/main.rs:7", "plain"] {
            assert_eq!(format_frame(&parse_frame(token)).unwrap(), token);
        }
    }

    #[test]
    fn emit_p1() {
        let p = parse_folded(P1, "samples", "samples").unwrap();
        assert_eq!(emit_folded(&p, "samples").unwrap(), P1);
    }

    #[test]
    fn emit_empty_and_unknown() {
        let p = parse_folded("", "samples", "samples").unwrap();
        assert_eq!(emit_folded(&p, "samples").unwrap(), "");
        assert_eq!(
            emit_folded(&p, "xyz").unwrap_err(),
            Error::UnknownMetric("xyz".into())
        );
    }

    #[test]
    fn emit_rejects_semicolon_frames() {
        let mut p =
            Profile::new(Meta::default(), vec![MetricDescriptor::additive("s", "s")]).unwrap();
        p.add_sample(&[Frame::function("a;b")], &[1]).unwrap();
        assert!(matches!(emit_folded(&p, "s"), Err(Error::FoldedFrame(_))));
    }

    #[test]
    fn duplicates_accumulate_and_canonicalize() {
        let p = parse_folded("main;b 1\nmain;a 2\nmain;b 4\n", "s", "s").unwrap();
        assert_eq!(emit_folded(&p, "s").unwrap(), "main;a 2\nmain;b 5\n");
    }
}
