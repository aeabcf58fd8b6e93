//! Domain types and the on-disk dataset format.
//!
//! Layout: `<root>/<split>/<sample_id>/{video.f32, video.shape, audio.f32,
//! audio.shape, boxes.txt, meta.txt}`. Tensors are raw little-endian f32
//! with a text sidecar carrying dtype, dims and the sampling rate.
//! `boxes.txt` holds one `cls cx cy w h` line per box in last-frame pixel
//! coordinates, center format. `meta.txt` holds `key=value` lines and
//! always includes the generator seed.

use crate::config::VehicleState;
use crate::error::{HavtError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// A clip of D frames, C channels, H x W pixels in [0,1], row major.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub frames: Vec<f32>,
    /// (frames, channels, height, width)
    pub shape: [usize; 4],
    pub frame_rate: f64,
}

impl VideoClip {
    pub fn zeros(frames: usize, channels: usize, height: usize, width: usize, fps: f64) -> Self {
        VideoClip {
            frames: vec![0.0; frames * channels * height * width],
            shape: [frames, channels, height, width],
            frame_rate: fps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.len() != self.shape.iter().product::<usize>() {
            return Err(HavtError::Validation(
                "video buffer length does not match its shape".into(),
            ));
        }
        if !self.frames.iter().all(|v| v.is_finite()) {
            return Err(HavtError::Validation("video contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Multi-microphone waveforms in [-1, 1], one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    pub samples: Vec<f32>,
    pub mics: usize,
    pub n_samples: usize,
    pub sample_rate: u32,
}

impl AudioSegment {
    pub fn zeros(mics: usize, n_samples: usize, sample_rate: u32) -> Self {
        AudioSegment {
            samples: vec![0.0; mics * n_samples],
            mics,
            n_samples,
            sample_rate,
        }
    }

    pub fn channel(&self, m: usize) -> &[f32] {
        &self.samples[m * self.n_samples..(m + 1) * self.n_samples]
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.mics * self.n_samples {
            return Err(HavtError::Validation(
                "audio buffer length does not match channel count".into(),
            ));
        }
        if !self.samples.iter().all(|v| v.is_finite()) {
            return Err(HavtError::Validation("audio contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Ground-truth box in last-frame pixels, center format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub cls: VehicleState,
}

impl GroundTruthBox {
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let (iw, ih) = (width as f64, height as f64);
        if !(self.cx >= 0.0 && self.cx <= iw && self.cy >= 0.0 && self.cy <= ih) {
            return Err(HavtError::Validation(format!(
                "box center ({}, {}) outside {}x{} image",
                self.cx, self.cy, width, height
            )));
        }
        if !(self.w > 0.0 && self.h > 0.0) {
            return Err(HavtError::Validation("box width/height must be positive".into()));
        }
        if self.w > iw || self.h > ih {
            return Err(HavtError::Validation(
                "box larger than image cannot survive clamping".into(),
            ));
        }
        Ok(())
    }
}

/// One co-registered audio-visual training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub clip: VideoClip,
    pub audio: AudioSegment,
    pub boxes: Vec<GroundTruthBox>,
    /// Free-form generator metadata; always carries `seed`.
    pub meta: Vec<(String, String)>,
}

impl Sample {
    pub fn validate(&self) -> Result<()> {
        self.clip.validate()?;
        self.audio.validate()?;
        let [_, _, h, w] = self.clip.shape;
        for b in &self.boxes {
            b.validate(w, h)?;
        }
        if !self.meta.iter().any(|(k, _)| k == "seed") {
            return Err(HavtError::Validation("meta is missing the 'seed' key".into()));
        }
        Ok(())
    }
}

fn write_f32_blob(path: &Path, data: &[f32]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| HavtError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for v in data {
        out.write_all(&v.to_le_bytes()).map_err(|e| HavtError::io(path, e))?;
    }
    out.flush().map_err(|e| HavtError::io(path, e))
}

fn read_f32_blob(path: &Path, expect: usize) -> Result<Vec<f32>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HavtError::io(path, e))?;
    if bytes.len() != expect * 4 {
        return Err(HavtError::parse(
            path,
            format!("expected {} f32 values, found {} bytes", expect, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_shape(path: &Path, dims: &[usize], rate_key: &str, rate: f64) -> Result<()> {
    let dims_str = dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
    let text = format!("f32 {dims_str}\n{rate_key}={rate}\n");
    fs::write(path, text).map_err(|e| HavtError::io(path, e))
}

fn read_shape(path: &Path, rate_key: &str) -> Result<(Vec<usize>, f64)> {
    let text = fs::read_to_string(path).map_err(|e| HavtError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HavtError::parse(path, "empty shape file"))?;
    let mut parts = header.split_whitespace();
    match parts.next() {
        Some("f32") => {}
        other => {
            return Err(HavtError::parse(path, format!("unsupported dtype {other:?}")));
        }
    }
    let dims: Vec<usize> = parts
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| HavtError::parse(path, format!("bad dim: {e}")))?;
    let mut rate = None;
    for line in lines {
        if let Some((k, v)) = line.split_once('=') {
            if k == rate_key {
                rate = Some(
                    v.parse::<f64>()
                        .map_err(|e| HavtError::parse(path, format!("bad {rate_key}: {e}")))?,
                );
            }
        }
    }
    let rate = rate.ok_or_else(|| HavtError::parse(path, format!("missing {rate_key}")))?;
    Ok((dims, rate))
}

/// Serialize a sample under `dir`, creating it. Fails on invariant
/// violations before touching the filesystem.
pub fn write_sample(sample: &Sample, dir: &Path) -> Result<()> {
    sample.validate()?;
    fs::create_dir_all(dir).map_err(|e| HavtError::io(dir, e))?;

    write_f32_blob(&dir.join("video.f32"), &sample.clip.frames)?;
    write_shape(
        &dir.join("video.shape"),
        &sample.clip.shape,
        "frame_rate",
        sample.clip.frame_rate,
    )?;

    write_f32_blob(&dir.join("audio.f32"), &sample.audio.samples)?;
    write_shape(
        &dir.join("audio.shape"),
        &[sample.audio.mics, sample.audio.n_samples],
        "sample_rate",
        sample.audio.sample_rate as f64,
    )?;

    let mut boxes_txt = String::new();
    for b in &sample.boxes {
        boxes_txt.push_str(&format!("{} {} {} {} {}\n", b.cls.index(), b.cx, b.cy, b.w, b.h));
    }
    let boxes_path = dir.join("boxes.txt");
    fs::write(&boxes_path, boxes_txt).map_err(|e| HavtError::io(&boxes_path, e))?;

    let mut meta_txt = String::new();
    for (k, v) in &sample.meta {
        meta_txt.push_str(&format!("{k}={v}\n"));
    }
    let meta_path = dir.join("meta.txt");
    fs::write(&meta_path, meta_txt).map_err(|e| HavtError::io(&meta_path, e))
}

/// Read a sample previously written by [`write_sample`].
pub fn read_sample(dir: &Path) -> Result<Sample> {
    let (vdims, fps) = read_shape(&dir.join("video.shape"), "frame_rate")?;
    if vdims.len() != 4 {
        return Err(HavtError::parse(dir.join("video.shape"), "expected 4 dims"));
    }
    let vlen = vdims.iter().product();
    let frames = read_f32_blob(&dir.join("video.f32"), vlen)?;
    let clip = VideoClip {
        frames,
        shape: [vdims[0], vdims[1], vdims[2], vdims[3]],
        frame_rate: fps,
    };

    let (adims, rate) = read_shape(&dir.join("audio.shape"), "sample_rate")?;
    if adims.len() != 2 {
        return Err(HavtError::parse(dir.join("audio.shape"), "expected 2 dims"));
    }
    let samples = read_f32_blob(&dir.join("audio.f32"), adims[0] * adims[1])?;
    let audio = AudioSegment {
        samples,
        mics: adims[0],
        n_samples: adims[1],
        sample_rate: rate as u32,
    };

    let boxes_path = dir.join("boxes.txt");
    let boxes_txt = fs::read_to_string(&boxes_path).map_err(|e| HavtError::io(&boxes_path, e))?;
    let mut boxes = Vec::new();
    for (lineno, line) in boxes_txt.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(HavtError::parse(
                &boxes_path,
                format!("line {}: expected 5 fields", lineno + 1),
            ));
        }
        let cls_idx: usize = fields[0]
            .parse()
            .map_err(|e| HavtError::parse(&boxes_path, format!("bad class: {e}")))?;
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| HavtError::parse(&boxes_path, format!("bad coordinate: {e}")))?;
        boxes.push(GroundTruthBox {
            cx: nums[0],
            cy: nums[1],
            w: nums[2],
            h: nums[3],
            cls: VehicleState::from_index(cls_idx)?,
        });
    }

    let meta_path = dir.join("meta.txt");
    let meta_txt = fs::read_to_string(&meta_path).map_err(|e| HavtError::io(&meta_path, e))?;
    let meta = meta_txt
        .lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();

    Ok(Sample { clip, audio, boxes, meta })
}

/// Deterministic disjoint train/val/test index partition.
///
/// Sizes are `round(ratio * n)` for train and val; test takes the rest so
/// the union is exhaustive.
pub fn split_dataset(n: usize, ratios: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(HavtError::Config(format!("split ratios sum to {sum}, expected 1")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_val = (ratios[1] * n as f64).round() as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);
    let train = idx[..n_train].to_vec();
    let val = idx[n_train..n_train + n_val].to_vec();
    let test = idx[n_train + n_val..].to_vec();
    Ok([train, val, test])
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

pub fn sample_id(index: usize) -> String {
    format!("{index:06}")
}

/// Sorted sample ids present under one split directory.
pub fn list_split(root: &Path, split: &str) -> Result<Vec<String>> {
    let dir = root.join(split);
    let mut ids = Vec::new();
    let entries = fs::read_dir(&dir).map_err(|e| HavtError::io(&dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| HavtError::io(&dir, e))?;
        if entry.path().is_dir() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn sample_dir(root: &Path, split: &str, id: &str) -> PathBuf {
    root.join(split).join(id)
}

/// FNV-1a over the sorted id list; logged so runs can prove they trained on
/// identical splits.
pub fn split_hash(ids: &[String]) -> u64 {
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort();
    let mut h: u64 = 0xcbf29ce484222325;
    for id in sorted {
        for b in id.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0x2f;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sample(n_boxes: usize) -> Sample {
        let mut clip = VideoClip::zeros(2, 3, 16, 16, 8.0);
        for (i, v) in clip.frames.iter_mut().enumerate() {
            *v = (i % 7) as f32 / 7.0;
        }
        let mut audio = AudioSegment::zeros(2, 64, 8000);
        for (i, v) in audio.samples.iter_mut().enumerate() {
            *v = ((i as f32) * 0.01).sin() * 0.5;
        }
        let boxes = (0..n_boxes)
            .map(|i| GroundTruthBox {
                cx: 4.0 + i as f64,
                cy: 5.0,
                w: 3.5,
                h: 2.25,
                cls: VehicleState::from_index(i % 3).unwrap(),
            })
            .collect();
        Sample {
            clip,
            audio,
            boxes,
            meta: vec![("seed".into(), "7".into()), ("note".into(), "test".into())],
        }
    }

    #[test]
    fn roundtrip_zero_boxes() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny_sample(0);
        write_sample(&s, dir.path()).unwrap();
        let boxes_txt = fs::read_to_string(dir.path().join("boxes.txt")).unwrap();
        assert!(boxes_txt.is_empty());
        let back = read_sample(dir.path()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn roundtrip_two_boxes_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny_sample(2);
        write_sample(&s, dir.path()).unwrap();
        let back = read_sample(dir.path()).unwrap();
        assert_eq!(s.boxes, back.boxes);
        assert_eq!(s, back);
    }

    #[test]
    fn invalid_box_rejected_with_named_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = tiny_sample(1);
        s.boxes[0].w = -1.0;
        let err = write_sample(&s, dir.path()).unwrap_err();
        assert!(err.to_string().contains("width/height"));
    }

    #[test]
    fn missing_seed_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = tiny_sample(0);
        s.meta.clear();
        let err = write_sample(&s, dir.path()).unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn split_sizes_exact() {
        let [tr, va, te] = split_dataset(10, [0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));
    }

    #[test]
    fn split_deterministic_and_disjoint_over_seeds() {
        for seed in 0..100 {
            let a = split_dataset(137, [0.7, 0.2, 0.1], seed).unwrap();
            let b = split_dataset(137, [0.7, 0.2, 0.1], seed).unwrap();
            assert_eq!(a, b);
            let mut all: Vec<usize> = a.iter().flatten().copied().collect();
            all.sort_unstable();
            let dedup_len = {
                let mut c = all.clone();
                c.dedup();
                c.len()
            };
            assert_eq!(all.len(), 137);
            assert_eq!(dedup_len, 137);
            assert_eq!(all, (0..137).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_large_mimic_disjoint() {
        // Mimics the published 76,490 / 8,431 train/test partition shape.
        let n = 84_921;
        let r_test = 8431.0 / n as f64;
        let r_train = 1.0 - r_test;
        let [tr, va, te] = split_dataset(n, [r_train, 0.0, r_test], 3).unwrap();
        assert_eq!(va.len(), 0);
        assert_eq!(tr.len() + te.len(), n);
        assert_eq!(te.len(), 8431);
        use std::collections::HashSet;
        let st: HashSet<_> = tr.iter().collect();
        assert!(te.iter().all(|i| !st.contains(i)));
    }

    #[test]
    fn bad_ratio_sum_is_config_error() {
        assert!(split_dataset(10, [0.5, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn split_hash_order_invariant() {
        let a = vec!["000001".to_string(), "000002".to_string()];
        let b = vec!["000002".to_string(), "000001".to_string()];
        assert_eq!(split_hash(&a), split_hash(&b));
        let c = vec!["000003".to_string()];
        assert_ne!(split_hash(&a), split_hash(&c));
    }
}
