#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn golden(name: &str) -> Vec<u8> {
    std::fs::read(golden_dir().join(name)).unwrap_or_else(|e| panic!("golden {name}: {e}"))
}

/// Runs the binary from the golden directory so relative input names match.
pub fn profcct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_profcct"))
        .args(args)
        .current_dir(golden_dir())
        .env("PROFCCT_NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

/// Text with line endings normalized.
pub fn canonical_text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).replace("\r\n", "\n")
}

/// JSON re-serialized with sorted keys.
pub fn canonical_json(bytes: &[u8]) -> String {
    let v: serde_json::Value = serde_json::from_slice(bytes).expect("valid JSON");
    serde_json::to_string_pretty(&v).unwrap()
}

/// Diff tags of the rects in an export document, keyed by label.
pub fn rect_labels(bytes: &[u8]) -> Vec<String> {
    let v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    let labels = v["labels"].as_array().unwrap();
    v["rects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            labels[r[4].as_u64().unwrap() as usize]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect()
}
