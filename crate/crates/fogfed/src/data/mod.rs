//! Datasets, distance-class semantics, per-fog partitioning, and window
//! cursoring for online training.

pub mod io;
pub mod synth;

pub use io::{atomic_write, load, save_csv, save_raw_f32, DataFormat};
pub use synth::{synth_generate, synth_train_test};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Number of distance classes.
pub const NUM_CLASSES: usize = 8;
/// Range-profile length: one sample is a 512-point FFT magnitude vector.
pub const FEATURE_DIM: usize = 512;

/// One radar frame: a range profile plus its distance-class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub features: Vec<f32>,
    pub label: u8,
}

/// Dataset provenance and shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Where the frames came from (file path or generator description).
    pub source: String,
}

/// An ordered, immutable collection of frames with uniform feature length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    frames: Vec<Frame>,
    meta: DatasetMeta,
}

impl Dataset {
    /// Validates and wraps frames: non-empty, uniform feature length, finite
    /// features, labels in range.
    pub fn new(frames: Vec<Frame>, source: impl Into<String>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidArgument("dataset has no frames".into()));
        }
        let feature_dim = frames[0].features.len();
        if feature_dim == 0 {
            return Err(Error::InvalidArgument("frames have no features".into()));
        }
        for (i, frame) in frames.iter().enumerate() {
            if frame.features.len() != feature_dim {
                return Err(Error::InvalidArgument(format!(
                    "frame {i} has {} features, frame 0 has {feature_dim}",
                    frame.features.len()
                )));
            }
            if !frame.features.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidValue(format!(
                    "frame {i} contains a non-finite feature"
                )));
            }
            if usize::from(frame.label) >= NUM_CLASSES {
                return Err(Error::InvalidArgument(format!(
                    "frame {i} has label {} >= {NUM_CLASSES}",
                    frame.label
                )));
            }
        }
        Ok(Self {
            frames,
            meta: DatasetMeta {
                num_classes: NUM_CLASSES,
                feature_dim,
                source: source.into(),
            },
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.meta.feature_dim
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    /// Frame counts per class label.
    pub fn label_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut hist = [0usize; NUM_CLASSES];
        for frame in &self.frames {
            hist[usize::from(frame.label)] += 1;
        }
        hist
    }
}

/// One fog node's slice of the training data, consumed window by window.
#[derive(Debug, Clone)]
pub struct Shard {
    fog_id: u32,
    frames: Vec<Frame>,
    cursor: usize,
}

impl Shard {
    pub fn new(fog_id: u32, frames: Vec<Frame>) -> Self {
        Self {
            fog_id,
            frames,
            cursor: 0,
        }
    }

    pub fn fog_id(&self) -> u32 {
        self.fog_id
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Index of the next unconsumed frame.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// How many full windows of `window_size` are still unconsumed.
    pub fn windows_remaining(&self, window_size: usize) -> usize {
        if window_size == 0 {
            return 0;
        }
        (self.frames.len() - self.cursor) / window_size
    }

    /// Returns the next `window_size` frames and advances the cursor, or
    /// `None` (cursor untouched) if fewer than `window_size` remain. A
    /// trailing partial window is never served: online training skips it
    /// rather than training on a short batch of stale data.
    pub fn next_window(&mut self, window_size: usize) -> Option<&[Frame]> {
        if window_size == 0 || self.cursor + window_size > self.frames.len() {
            return None;
        }
        let start = self.cursor;
        self.cursor += window_size;
        Some(&self.frames[start..self.cursor])
    }
}

/// One row of the distance-class table: a half-open interval of distances
/// (lower bound inclusive) mapped to a label and a criticality flag. The
/// final row is open-ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRule {
    /// Inclusive lower bound in meters.
    pub lower: f64,
    /// Exclusive upper bound in meters; `None` for the open-ended last row.
    pub upper: Option<f64>,
    pub label: u8,
    pub critical: bool,
}

/// The 8 interval rows, in ascending distance order. Distances under 1.5 m
/// (classes 1-3) are critical; everything else, including the open-ended
/// class 0 at ≥ 3.5 m, is safe.
pub const CLASS_RULES: [ClassRule; 8] = [
    ClassRule { lower: 0.0, upper: Some(0.5), label: 1, critical: true },
    ClassRule { lower: 0.5, upper: Some(1.0), label: 2, critical: true },
    ClassRule { lower: 1.0, upper: Some(1.5), label: 3, critical: true },
    ClassRule { lower: 1.5, upper: Some(2.0), label: 4, critical: false },
    ClassRule { lower: 2.0, upper: Some(2.5), label: 5, critical: false },
    ClassRule { lower: 2.5, upper: Some(3.0), label: 6, critical: false },
    ClassRule { lower: 3.0, upper: Some(3.5), label: 7, critical: false },
    ClassRule { lower: 3.5, upper: None, label: 0, critical: false },
];

/// Maps a distance in meters to its class label.
pub fn label_of_distance(d: f64) -> Result<u8> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "distance must be a non-negative number, got {d}"
        )));
    }
    for rule in &CLASS_RULES {
        let below_upper = match rule.upper {
            Some(u) => d < u,
            None => true,
        };
        if d >= rule.lower && below_upper {
            return Ok(rule.label);
        }
    }
    unreachable!("class rules partition [0, inf)");
}

/// Whether a class label denotes a critical (near-range) detection.
pub fn is_critical(label: u8) -> Result<bool> {
    if usize::from(label) >= NUM_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range [0, {NUM_CLASSES})"
        )));
    }
    Ok((1..=3).contains(&label))
}

/// Splits a dataset into `k` shards: a seeded random permutation followed by
/// a contiguous near-equal split (sizes differ by at most one, earlier shards
/// take the remainder). Deterministic in `(data, k, seed)`; the shards are
/// disjoint and their union is the whole dataset.
pub fn partition(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Shard>> {
    if k == 0 {
        return Err(Error::InvalidArgument("cannot partition into 0 shards".into()));
    }
    if k > data.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} frames into {k} shards",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut seeded_rng(seed));

    let base = data.len() / k;
    let remainder = data.len() % k;
    let mut shards = Vec::with_capacity(k);
    let mut next = 0usize;
    for fog_id in 0..k {
        let size = base + usize::from(fog_id < remainder);
        let frames = order[next..next + size]
            .iter()
            .map(|&i| data.frames()[i].clone())
            .collect();
        shards.push(Shard::new(fog_id as u32, frames));
        next += size;
    }
    Ok(shards)
}
