//! pprof `profile.proto` ingestion.
//!
//! Locations arrive leaf-first and are reversed into root-first stacks.
//! Within a location, `line[0]` is the innermost inlined call, so a
//! location's lines are also reversed. Locations without line information
//! become `0x<address>` frames.

use std::collections::HashMap;
use std::io::Read;

use flate2::read::GzDecoder;
use prost::Message;

use crate::error::{Error, Result};
use crate::model::{Frame, FrameId, Meta, MetricDescriptor, Profile};

#[derive(Clone, PartialEq, Message)]
pub struct PprofProfile {
    #[prost(message, repeated, tag = "1")]
    pub sample_type: Vec<ValueType>,
    #[prost(message, repeated, tag = "2")]
    pub sample: Vec<Sample>,
    #[prost(message, repeated, tag = "3")]
    pub mapping: Vec<Mapping>,
    #[prost(message, repeated, tag = "4")]
    pub location: Vec<Location>,
    #[prost(message, repeated, tag = "5")]
    pub function: Vec<Function>,
    #[prost(string, repeated, tag = "6")]
    pub string_table: Vec<String>,
    #[prost(int64, tag = "7")]
    pub drop_frames: i64,
    #[prost(int64, tag = "8")]
    pub keep_frames: i64,
    #[prost(int64, tag = "9")]
    pub time_nanos: i64,
    #[prost(int64, tag = "10")]
    pub duration_nanos: i64,
    #[prost(message, optional, tag = "11")]
    pub period_type: Option<ValueType>,
    #[prost(int64, tag = "12")]
    pub period: i64,
    #[prost(int64, repeated, tag = "13")]
    pub comment: Vec<i64>,
    #[prost(int64, tag = "14")]
    pub default_sample_type: i64,
}

#[derive(Clone, PartialEq, Message)]
pub struct ValueType {
    #[prost(int64, tag = "1")]
    pub r#type: i64,
    #[prost(int64, tag = "2")]
    pub unit: i64,
}

#[derive(Clone, PartialEq, Message)]
pub struct Sample {
    #[prost(uint64, repeated, tag = "1")]
    pub location_id: Vec<u64>,
    #[prost(int64, repeated, tag = "2")]
    pub value: Vec<i64>,
    #[prost(message, repeated, tag = "3")]
    pub label: Vec<Label>,
}

#[derive(Clone, PartialEq, Message)]
pub struct Label {
    #[prost(int64, tag = "1")]
    pub key: i64,
    #[prost(int64, tag = "2")]
    pub str: i64,
    #[prost(int64, tag = "3")]
    pub num: i64,
    #[prost(int64, tag = "4")]
    pub num_unit: i64,
}

#[derive(Clone, PartialEq, Message)]
pub struct Mapping {
    #[prost(uint64, tag = "1")]
    pub id: u64,
    #[prost(uint64, tag = "2")]
    pub memory_start: u64,
    #[prost(uint64, tag = "3")]
    pub memory_limit: u64,
    #[prost(uint64, tag = "4")]
    pub file_offset: u64,
    #[prost(int64, tag = "5")]
    pub filename: i64,
    #[prost(int64, tag = "6")]
    pub build_id: i64,
    #[prost(bool, tag = "7")]
    pub has_functions: bool,
    #[prost(bool, tag = "8")]
    pub has_filenames: bool,
    #[prost(bool, tag = "9")]
    pub has_line_numbers: bool,
    #[prost(bool, tag = "10")]
    pub has_inline_frames: bool,
}

#[derive(Clone, PartialEq, Message)]
pub struct Location {
    #[prost(uint64, tag = "1")]
    pub id: u64,
    #[prost(uint64, tag = "2")]
    pub mapping_id: u64,
    #[prost(uint64, tag = "3")]
    pub address: u64,
    #[prost(message, repeated, tag = "4")]
    pub line: Vec<Line>,
    #[prost(bool, tag = "5")]
    pub is_folded: bool,
}

#[derive(Clone, PartialEq, Message)]
pub struct Line {
    #[prost(uint64, tag = "1")]
    pub function_id: u64,
    #[prost(int64, tag = "2")]
    pub line: i64,
    #[prost(int64, tag = "3")]
    pub column: i64,
}

#[derive(Clone, PartialEq, Message)]
pub struct Function {
    #[prost(uint64, tag = "1")]
    pub id: u64,
    #[prost(int64, tag = "2")]
    pub name: i64,
    #[prost(int64, tag = "3")]
    pub system_name: i64,
    #[prost(int64, tag = "4")]
    pub filename: i64,
    #[prost(int64, tag = "5")]
    pub start_line: i64,
}

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Decodes the raw protobuf message, inflating gzip input first.
pub fn decode_message(bytes: &[u8]) -> Result<PprofProfile> {
    let owned;
    let raw = if bytes.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| format_err(0, format!("gzip: {e}")))?;
        owned = out;
        &owned[..]
    } else {
        bytes
    };
    PprofProfile::decode(raw).map_err(|e| format_err(0, format!("protobuf: {e}")))
}

struct Tables<'a> {
    msg: &'a PprofProfile,
    functions: HashMap<u64, &'a Function>,
    mappings: HashMap<u64, &'a Mapping>,
}

impl<'a> Tables<'a> {
    fn string(&self, index: i64) -> Result<&'a str> {
        usize::try_from(index)
            .ok()
            .and_then(|i| self.msg.string_table.get(i))
            .map(String::as_str)
            .ok_or_else(|| format_err(0, format!("dangling string index {index}")))
    }

    /// Root-first frames for one location.
    fn location_frames(&self, loc: &Location) -> Result<Vec<Frame>> {
        let module = match loc.mapping_id {
            0 => "",
            id => {
                let m = self
                    .mappings
                    .get(&id)
                    .ok_or_else(|| format_err(0, format!("dangling mapping index {id}")))?;
                self.string(m.filename)?
            }
        };
        if loc.line.is_empty() {
            return Ok(vec![Frame::function(format!("0x{:x}", loc.address))
                .with_module(module)
                .with_address(loc.address)]);
        }
        loc.line
            .iter()
            .rev()
            .map(|line| {
                let func = self.functions.get(&line.function_id).ok_or_else(|| {
                    format_err(0, format!("dangling function index {}", line.function_id))
                })?;
                let mut name = self.string(func.name)?;
                if name.is_empty() {
                    name = self.string(func.system_name)?;
                }
                let frame = if name.is_empty() {
                    Frame::function(format!("0x{:x}", loc.address)).with_address(loc.address)
                } else {
                    Frame::function(name)
                };
                let line_no = u32::try_from(line.line.max(0)).unwrap_or(u32::MAX);
                Ok(frame
                    .with_module(module)
                    .with_location(self.string(func.filename)?, line_no))
            })
            .collect()
    }
}

/// Converts a pprof profile (gzip-compressed or raw) into a [`Profile`].
pub fn parse_pprof(bytes: &[u8]) -> Result<Profile> {
    let msg = decode_message(bytes)?;
    convert(&msg)
}

pub fn convert(msg: &PprofProfile) -> Result<Profile> {
    let tables = Tables {
        msg,
        functions: msg.function.iter().map(|f| (f.id, f)).collect(),
        mappings: msg.mapping.iter().map(|m| (m.id, m)).collect(),
    };
    let mut metrics = Vec::with_capacity(msg.sample_type.len());
    for vt in &msg.sample_type {
        metrics.push(MetricDescriptor::additive(
            tables.string(vt.r#type)?,
            tables.string(vt.unit)?,
        ));
    }

    let mut meta = Meta {
        collector: "pprof".to_string(),
        ..Meta::default()
    };
    if msg.time_nanos != 0 {
        meta.timestamp = Some(msg.time_nanos);
    }
    let props = &mut meta.properties;
    props.insert("pprof.period".into(), msg.period.to_string());
    if let Some(pt) = &msg.period_type {
        props.insert(
            "pprof.period_type".into(),
            format!("{}/{}", tables.string(pt.r#type)?, tables.string(pt.unit)?),
        );
    }
    props.insert(
        "pprof.duration_nanos".into(),
        msg.duration_nanos.to_string(),
    );
    props.insert(
        "pprof.drop_frames".into(),
        tables.string(msg.drop_frames)?.to_string(),
    );
    props.insert(
        "pprof.keep_frames".into(),
        tables.string(msg.keep_frames)?.to_string(),
    );
    if msg.default_sample_type != 0 {
        props.insert(
            "pprof.default_sample_type".into(),
            tables.string(msg.default_sample_type)?.to_string(),
        );
    }
    let comments = msg
        .comment
        .iter()
        .map(|&c| tables.string(c))
        .collect::<Result<Vec<_>>>()?;
    if !comments.is_empty() {
        props.insert("pprof.comment".into(), comments.join("\n"));
    }

    let mut profile = Profile::new(meta, metrics)?;
    let mut location_cache: HashMap<u64, Vec<FrameId>> = HashMap::new();
    for loc in &msg.location {
        let ids = tables
            .location_frames(loc)?
            .into_iter()
            .map(|f| profile.intern_frame(f))
            .collect::<Result<Vec<_>>>()?;
        location_cache.insert(loc.id, ids);
    }

    let mut stack = Vec::new();
    let mut values = Vec::with_capacity(msg.sample_type.len());
    for (i, sample) in msg.sample.iter().enumerate() {
        if sample.value.len() != msg.sample_type.len() {
            return Err(format_err(
                0,
                format!(
                    "sample {i} has {} values for {} sample types",
                    sample.value.len(),
                    msg.sample_type.len()
                ),
            ));
        }
        values.clear();
        for &v in &sample.value {
            values.push(
                u64::try_from(v)
                    .map_err(|_| format_err(0, format!("sample {i} has negative value {v}")))?,
            );
        }
        stack.clear();
        for id in sample.location_id.iter().rev() {
            let frames = location_cache
                .get(id)
                .ok_or_else(|| format_err(0, format!("dangling location index {id}")))?;
            stack.extend_from_slice(frames);
        }
        if stack.is_empty() {
            return Err(format_err(0, format!("sample {i} has no locations")));
        }
        profile.add_sample_ids(&stack, &values)?;
    }
    Ok(profile)
}

/// True when the bytes decode as a pprof message with at least one sample
/// type. Used for format detection of uncompressed input.
pub(crate) fn looks_like_pprof(bytes: &[u8]) -> bool {
    PprofProfile::decode(bytes)
        .map(|m| !m.sample_type.is_empty() && !m.string_table.is_empty())
        .unwrap_or(false)
}
