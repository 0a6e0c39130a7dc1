//! Conversion of external profile formats into [`Profile`]s.

mod folded;
pub mod pprof;

pub use folded::{emit_folded, format_frame, parse_folded, parse_frame};
pub use pprof::parse_pprof;

use crate::error::{Error, Result};
use crate::model::{self, Profile, NATIVE_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Folded,
    Pprof,
    Native,
}

/// Identifies a format from content alone.
pub fn detect_format(bytes: &[u8]) -> Result<SourceFormat> {
    if bytes.is_empty() {
        return Err(Error::UnknownFormat);
    }
    if bytes.starts_with(NATIVE_MAGIC) {
        return Ok(SourceFormat::Native);
    }
    if bytes.starts_with(&[0x1f, 0x8b]) {
        return Ok(SourceFormat::Pprof);
    }
    if first_line_is_folded(bytes) {
        return Ok(SourceFormat::Folded);
    }
    if pprof::looks_like_pprof(bytes) {
        return Ok(SourceFormat::Pprof);
    }
    Err(Error::UnknownFormat)
}

fn first_line_is_folded(bytes: &[u8]) -> bool {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .unwrap_or(bytes.len());
    let Ok(line) = std::str::from_utf8(&bytes[..end]) else {
        return false;
    };
    let Some((stack, value)) = line.trim_end().rsplit_once([' ', '\t']) else {
        return false;
    };
    let stack = stack.trim_end();
    !value.is_empty()
        && value.bytes().all(|b| b.is_ascii_digit())
        && !stack.is_empty()
        && stack.split(';').all(|f| !f.is_empty())
}

/// Options for [`load`]; folded input carries no metric name of its own.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub folded_metric: String,
    pub folded_unit: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            folded_metric: "samples".to_string(),
            folded_unit: "samples".to_string(),
        }
    }
}

/// Detects the format of `bytes` and converts them.
pub fn load(bytes: &[u8], options: &LoadOptions) -> Result<Profile> {
    match detect_format(bytes)? {
        SourceFormat::Native => model::deserialize(bytes),
        SourceFormat::Pprof => parse_pprof(bytes),
        SourceFormat::Folded => {
            let text = std::str::from_utf8(bytes).map_err(|e| Error::Format {
                offset: e.valid_up_to(),
                message: "folded text is not UTF-8".to_string(),
            })?;
            parse_folded(text, &options.folded_metric, &options.folded_unit)
        }
    }
}
