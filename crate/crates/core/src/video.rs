//! Keyframe sampling and per-video aggregation of frame descriptors.
//!
//! Frames are decoded outside the toolkit; a frame manifest lists
//! `video-id<TAB>frame-path<TAB>timestamp` per line.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::descriptor::{l2_normalize, Descriptor, DescriptorSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyframePlan {
    pub interval_seconds: f64,
    pub offset_seconds: f64,
    pub max_frames: Option<usize>,
}

impl Default for KeyframePlan {
    fn default() -> Self {
        KeyframePlan {
            interval_seconds: 2.0,
            offset_seconds: 0.0,
            max_frames: None,
        }
    }
}

impl KeyframePlan {
    pub fn new(interval_seconds: f64, offset_seconds: f64, max_frames: Option<usize>) -> Result<Self> {
        if !interval_seconds.is_finite() || interval_seconds <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "keyframe interval must be positive, got {interval_seconds}"
            )));
        }
        if !offset_seconds.is_finite() || offset_seconds < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "keyframe offset must be nonnegative, got {offset_seconds}"
            )));
        }
        Ok(KeyframePlan {
            interval_seconds,
            offset_seconds,
            max_frames,
        })
    }
}

/// `offset + i·interval` for every `i` landing strictly before `duration`.
/// Any clip with positive duration yields at least the frame at t = 0.
pub fn sample_timestamps(duration_seconds: f64, plan: &KeyframePlan) -> Vec<f64> {
    if duration_seconds.is_nan() || duration_seconds <= 0.0 {
        return Vec::new();
    }
    let limit = plan.max_frames.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    let mut i = 0usize;
    while out.len() < limit {
        let t = plan.offset_seconds + i as f64 * plan.interval_seconds;
        if t >= duration_seconds {
            break;
        }
        out.push(t);
        i += 1;
    }
    if out.is_empty() && limit > 0 {
        out.push(0.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            other => Err(Error::InvalidArgument(format!(
                "aggregation must be mean or max, got `{other}`"
            ))),
        }
    }
}

fn reduce_rows<'a>(rows: impl Iterator<Item = &'a [f32]>, dim: usize, how: Aggregation) -> Vec<f32> {
    match how {
        Aggregation::Mean => {
            let mut acc = vec![0.0f64; dim];
            let mut n = 0usize;
            for r in rows {
                for (a, &v) in acc.iter_mut().zip(r) {
                    *a += v as f64;
                }
                n += 1;
            }
            acc.iter().map(|&a| (a / n as f64) as f32).collect()
        }
        Aggregation::Max => {
            let mut acc = vec![f32::NEG_INFINITY; dim];
            for r in rows {
                for (a, &v) in acc.iter_mut().zip(r) {
                    *a = a.max(v);
                }
            }
            acc
        }
    }
}

/// Element-wise mean (or max) of frame descriptors, then L2 normalization.
pub fn aggregate_video(frames: &[Descriptor], how: Aggregation) -> Result<Descriptor> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidArgument("a video needs at least one frame".into()));
    };
    for f in frames {
        if f.dim() != first.dim() {
            return Err(Error::ShapeMismatch(format!(
                "frame descriptors of length {} and {}",
                first.dim(),
                f.dim()
            )));
        }
        if f.meta.model_code != first.meta.model_code || f.meta.taps != first.meta.taps {
            return Err(Error::Provenance(format!(
                "frames described by {} and {}",
                first.meta.model_code, f.meta.model_code
            )));
        }
    }
    let values = reduce_rows(frames.iter().map(|f| f.values.as_slice()), first.dim(), how);
    Ok(Descriptor {
        values: l2_normalize(&values),
        meta: first.meta.clone(),
        source: None,
    })
}

/// Collapses rows sharing a record id into one aggregated row per id, in
/// order of first appearance. Label and split come from the first row.
pub fn aggregate_set(frames: &DescriptorSet, how: Aggregation) -> Result<DescriptorSet> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("no frames to aggregate".into()));
    }
    let mut groups: IndexMap<&str, Vec<usize>> = IndexMap::new();
    for (i, r) in frames.records.iter().enumerate() {
        groups.entry(r.id.as_str()).or_default().push(i);
    }
    let mut out = DescriptorSet::new(frames.meta.clone(), frames.dim);
    for rows in groups.values() {
        let values = reduce_rows(rows.iter().map(|&i| frames.row(i)), frames.dim, how);
        out.push(&l2_normalize(&values), frames.records[rows[0]].clone())?;
    }
    Ok(out)
}

/// Per-frame voting: the most frequent frame prediction, ties to the
/// lowest class.
pub fn vote_video(frame_predictions: &[usize], classes: usize) -> Result<usize> {
    if frame_predictions.is_empty() {
        return Err(Error::InvalidArgument("a video needs at least one frame".into()));
    }
    let mut tally = vec![0usize; classes];
    for &p in frame_predictions {
        *tally
            .get_mut(p)
            .ok_or_else(|| Error::InvalidArgument(format!("class {p} out of range 0..{classes}")))? += 1;
    }
    let best = *tally.iter().max().expect("nonempty tally");
    Ok(tally.iter().position(|&t| t == best).expect("max is present"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub video_id: String,
    pub path: String,
    pub timestamp: f64,
}

/// Parses a frame manifest. Blank lines and `#` comments are skipped.
pub fn parse_frame_manifest(text: &str) -> Result<Vec<FrameRecord>> {
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |detail: String| Error::Manifest { line: i + 1, detail };
        let fields: Vec<&str> = line.split('\t').collect();
        let [video_id, path, timestamp] = fields[..] else {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        if video_id.is_empty() || path.is_empty() {
            return Err(bad("empty video id or frame path".into()));
        }
        let timestamp: f64 = timestamp
            .trim()
            .parse()
            .ok()
            .filter(|t: &f64| *t >= 0.0 && t.is_finite())
            .ok_or_else(|| bad(format!("bad timestamp `{timestamp}`")))?;
        frames.push(FrameRecord {
            video_id: video_id.to_string(),
            path: path.to_string(),
            timestamp,
        });
    }
    if frames.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(frames)
}

pub fn read_frame_manifest(path: impl AsRef<Path>) -> Result<Vec<FrameRecord>> {
    parse_frame_manifest(&std::fs::read_to_string(path)?)
}
