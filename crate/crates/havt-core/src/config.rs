//! Configuration for the generator, audio frontend, model, and training
//! runs, plus the `section.key=value` config-file format used by the CLI.

use crate::error::{HavtError, Result};
use std::fmt;
use std::path::Path;

pub const CLASS_NAMES: [&str; 3] = ["moving", "idling", "engine_off"];
pub const N_CLASSES: usize = 3;

/// Vehicle engine state. The numeric order is fixed everywhere: it is the
/// storage encoding, the class-logit order, and the AP reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleState {
    Moving = 0,
    Idling = 1,
    EngineOff = 2,
}

impl VehicleState {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(VehicleState::Moving),
            1 => Ok(VehicleState::Idling),
            2 => Ok(VehicleState::EngineOff),
            _ => Err(HavtError::Validation(format!("class index {i} out of range"))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        CLASS_NAMES[self.index()]
    }
}

/// STFT / mel frontend parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioConfig {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    /// Upper filter edge in Hz; 0 means Nyquist.
    pub f_max: f64,
}

impl AudioConfig {
    pub fn paper() -> Self {
        AudioConfig {
            sample_rate: 48_000,
            duration_s: 5.0,
            n_fft: 1024,
            hop: 512,
            n_mels: 128,
            f_min: 0.0,
            f_max: 0.0,
        }
    }

    pub fn desk() -> Self {
        AudioConfig {
            sample_rate: 8_000,
            duration_s: 2.5,
            n_fft: 512,
            hop: 256,
            n_mels: 64,
            f_min: 0.0,
            f_max: 0.0,
        }
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    /// Frame count under centered framing: floor(S / hop) + 1.
    pub fn n_frames(&self) -> usize {
        self.n_samples() / self.hop + 1
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn effective_f_max(&self) -> f64 {
        if self.f_max <= 0.0 {
            self.nyquist()
        } else {
            self.f_max
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.effective_f_max() > self.nyquist() + 1e-9 {
            return Err(HavtError::Config(format!(
                "audio.f_max {} exceeds Nyquist {}",
                self.f_max,
                self.nyquist()
            )));
        }
        if self.n_mels >= self.n_bins() {
            return Err(HavtError::Config(format!(
                "audio.n_mels {} must be below n_fft/2+1 = {}",
                self.n_mels,
                self.n_bins()
            )));
        }
        if self.hop == 0 || self.n_fft == 0 || self.n_samples() < self.n_fft {
            return Err(HavtError::Config("audio frame parameters out of range".into()));
        }
        Ok(())
    }
}

/// Synthetic scene generator parameters. Geometry maps the image onto a
/// ground strip of `scene_width_m` x `scene_depth_m`; microphones sit
/// roadside at `mic_standoff_m` in front of the strip.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub n_vehicles_min: usize,
    pub n_vehicles_max: usize,
    pub image_size: usize,
    pub frames: usize,
    pub frame_rate: f64,
    /// Number of microphone channels synthesized into each sample.
    pub mics: usize,
    /// Probability of moving / idling / engine_off per vehicle.
    pub state_priors: [f64; 3],
    pub idle_fund_min_hz: f64,
    pub idle_fund_max_hz: f64,
    /// Moving-vehicle speed range in pixels per frame.
    pub speed_min: f64,
    pub speed_max: f64,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    /// Vehicle side length as a fraction of the image size.
    pub size_frac_min: f64,
    pub size_frac_max: f64,
    pub scene_width_m: f64,
    pub scene_depth_m: f64,
    pub mic_standoff_m: f64,
    pub seed: u64,
}

impl SceneConfig {
    pub fn paper() -> Self {
        SceneConfig {
            n_vehicles_min: 1,
            n_vehicles_max: 3,
            image_size: 224,
            frames: 16,
            frame_rate: 8.0,
            mics: 6,
            state_priors: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            idle_fund_min_hz: 25.0,
            idle_fund_max_hz: 45.0,
            speed_min: 2.0,
            speed_max: 8.0,
            snr_db_min: 12.0,
            snr_db_max: 24.0,
            size_frac_min: 0.12,
            size_frac_max: 0.62,
            scene_width_m: 20.0,
            scene_depth_m: 12.0,
            mic_standoff_m: 2.0,
            seed: 0,
        }
    }

    pub fn desk() -> Self {
        SceneConfig {
            image_size: 64,
            frames: 8,
            speed_min: 1.0,
            speed_max: 4.0,
            ..SceneConfig::paper()
        }
    }

    /// Evenly spaced roadside microphone positions in scene meters for the
    /// configured channel count.
    pub fn mic_positions(&self) -> Vec<(f64, f64)> {
        mic_layout(self.mics, self.scene_width_m, self.mic_standoff_m)
    }

    pub fn validate(&self) -> Result<()> {
        let psum: f64 = self.state_priors.iter().sum();
        if (psum - 1.0).abs() > 1e-9 {
            return Err(HavtError::Config(format!(
                "scene.state_priors sum to {psum}, expected 1"
            )));
        }
        if !matches!(self.mics, 1 | 3 | 6) {
            return Err(HavtError::Config(format!(
                "scene.mics must be 1, 3 or 6 (got {})",
                self.mics
            )));
        }
        if self.n_vehicles_min > self.n_vehicles_max || self.n_vehicles_max == 0 {
            return Err(HavtError::Config("scene vehicle count range is empty".into()));
        }
        for (name, lo, hi) in [
            ("idle_fund", self.idle_fund_min_hz, self.idle_fund_max_hz),
            ("speed", self.speed_min, self.speed_max),
            ("snr_db", self.snr_db_min, self.snr_db_max),
            ("size_frac", self.size_frac_min, self.size_frac_max),
        ] {
            if lo > hi {
                return Err(HavtError::Config(format!("scene.{name} range is empty")));
            }
        }
        if self.size_frac_max >= 1.0 || self.size_frac_min <= 0.0 {
            return Err(HavtError::Config("scene.size_frac must lie in (0,1)".into()));
        }
        if self.image_size < 32 || self.frames == 0 {
            return Err(HavtError::Config("scene.image_size/frames out of range".into()));
        }
        Ok(())
    }
}

/// Roadside layout: `m` microphones spread across the lane width at a fixed
/// standoff in front of the strip (negative y).
pub fn mic_layout(m: usize, scene_width_m: f64, standoff_m: f64) -> Vec<(f64, f64)> {
    (0..m)
        .map(|k| {
            let x = scene_width_m * (k as f64 + 0.5) / m as f64;
            (x, -standoff_m)
        })
        .collect()
}

/// Channel indices a model with `m` microphones reads from the 6-channel
/// recordings: an evenly spread subset.
pub fn mic_subset(m: usize, total: usize) -> Vec<usize> {
    match (m, total) {
        (1, 6) => vec![2],
        (3, 6) => vec![0, 2, 4],
        _ if m >= total => (0..total).collect(),
        _ => (0..m).map(|k| k * total / m).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    Decoupled,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Joint self-attention + spatial-pulling cross-attention.
    Havt,
    /// Globally pooled audio broadcast and channel-concatenated, no attention.
    Concat,
    /// Video only.
    None,
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadMode::Decoupled => write!(f, "decoupled"),
            HeadMode::Coupled => write!(f, "coupled"),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionMode::Havt => write!(f, "havt"),
            FusionMode::Concat => write!(f, "concat"),
            FusionMode::None => write!(f, "none"),
        }
    }
}

/// Network hyperparameters. Input geometry (image size, frame count, mel
/// shape) comes from [`SceneConfig`] and [`AudioConfig`] at build time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Microphone channels the model consumes (subset of the recorded 6).
    pub mics: usize,
    /// Conv widths of the visual encoder stages; the last is reused for the
    /// stride-32 stage.
    pub vis_widths: [usize; 4],
    pub audio_widths: [usize; 4],
    /// Shared embedding width E.
    pub embed: usize,
    /// Joint self-attention depth.
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    /// Number of spatial aggregation query slots (a g x g grid).
    pub n_scaq: usize,
    pub spca_layers: usize,
    pub head_mode: HeadMode,
    pub fusion: FusionMode,
    /// Enabled pyramid strides, subset of {8, 16, 32}.
    pub scales: Vec<usize>,
    /// Box-size level-assignment thresholds in pixels at a 224 image;
    /// scaled proportionally for other image sizes.
    pub assign_t1: f64,
    pub assign_t2: f64,
    /// Base box scale s0 in the decode w = exp(tw) * stride * s0.
    pub base_scale: f64,
}

impl ModelConfig {
    pub fn paper() -> Self {
        ModelConfig {
            mics: 6,
            vis_widths: [16, 32, 64, 128],
            audio_widths: [16, 32, 64, 128],
            embed: 128,
            depth: 12,
            heads: 4,
            mlp_ratio: 4,
            n_scaq: 49,
            spca_layers: 2,
            head_mode: HeadMode::Decoupled,
            fusion: FusionMode::Havt,
            scales: vec![8, 16, 32],
            assign_t1: 64.0,
            assign_t2: 128.0,
            base_scale: 4.0,
        }
    }

    pub fn desk() -> Self {
        ModelConfig {
            vis_widths: [8, 16, 32, 64],
            audio_widths: [8, 16, 32, 48],
            embed: 48,
            depth: 2,
            ..ModelConfig::paper()
        }
    }

    pub fn scaq_grid(&self) -> Result<usize> {
        let g = (self.n_scaq as f64).sqrt().round() as usize;
        if g * g != self.n_scaq {
            return Err(HavtError::Config(format!(
                "model.n_scaq {} is not a perfect square",
                self.n_scaq
            )));
        }
        Ok(g)
    }

    /// Level-assignment thresholds scaled to the actual image size.
    pub fn assign_thresholds(&self, image_size: usize) -> (f64, f64) {
        let s = image_size as f64 / 224.0;
        (self.assign_t1 * s, self.assign_t2 * s)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.mics, 1 | 3 | 6) {
            return Err(HavtError::Config(format!(
                "model.mics must be 1, 3 or 6 (got {})",
                self.mics
            )));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !matches!(s, 8 | 16 | 32)) {
            return Err(HavtError::Config(
                "model.scales must be a nonempty subset of {8,16,32}".into(),
            ));
        }
        if self.embed % self.heads != 0 {
            return Err(HavtError::Config(format!(
                "model.embed {} must be divisible by heads {}",
                self.embed, self.heads
            )));
        }
        if !matches!(self.n_scaq, 49 | 196 | 784) {
            return Err(HavtError::Config(format!(
                "model.n_scaq must be one of 49, 196, 784 (got {})",
                self.n_scaq
            )));
        }
        self.scaq_grid()?;
        Ok(())
    }
}

/// Optimization / run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub score_thresh: f64,
    pub nms_iou: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lr: 1e-3,
            batch: 16,
            max_epochs: 100,
            patience: 50,
            seed: 0,
            score_thresh: 0.05,
            nms_iou: 0.45,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.max_epochs == 0 {
            return Err(HavtError::Config("run.batch/max_epochs must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(HavtError::Config(format!("run.lr {} out of range", self.lr)));
        }
        Ok(())
    }
}

/// Corpus size and split ratios used by dataset generation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub n_samples: usize,
    pub ratios: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_samples: 4000,
            ratios: [0.75, 0.125, 0.125],
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        let s: f64 = self.ratios.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(HavtError::Config(format!(
                "data split ratios sum to {s}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Top-level configuration bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scene: SceneConfig,
    pub audio: AudioConfig,
    pub model: ModelConfig,
    pub run: RunConfig,
    pub data: DataConfig,
}

impl Config {
    /// Full-size configuration matching the published setup.
    pub fn paper() -> Self {
        Config {
            scene: SceneConfig::paper(),
            audio: AudioConfig::paper(),
            model: ModelConfig::paper(),
            run: RunConfig::default(),
            data: DataConfig::default(),
        }
    }

    /// Reduced configuration sized for CPU training; same architecture.
    pub fn desk() -> Self {
        Config {
            scene: SceneConfig::desk(),
            audio: AudioConfig::desk(),
            model: ModelConfig::desk(),
            run: RunConfig::default(),
            data: DataConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.audio.validate()?;
        self.model.validate()?;
        self.run.validate()?;
        self.data.validate()?;
        if self.model.mics > self.scene.mics {
            return Err(HavtError::Config(format!(
                "model.mics {} exceeds recorded channels {}",
                self.model.mics, self.scene.mics
            )));
        }
        Ok(())
    }

    /// Apply one `section.key=value` assignment.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse::<T>()
                .map_err(|_| HavtError::Config(format!("invalid value '{v}' for {key}")))
        }
        let v = value.trim();
        match key.trim() {
            "scene.n_vehicles_min" => self.scene.n_vehicles_min = num(key, v)?,
            "scene.n_vehicles_max" => self.scene.n_vehicles_max = num(key, v)?,
            "scene.image_size" => self.scene.image_size = num(key, v)?,
            "scene.frames" => self.scene.frames = num(key, v)?,
            "scene.frame_rate" => self.scene.frame_rate = num(key, v)?,
            "scene.mics" => self.scene.mics = num(key, v)?,
            "scene.prior_moving" => self.scene.state_priors[0] = num(key, v)?,
            "scene.prior_idling" => self.scene.state_priors[1] = num(key, v)?,
            "scene.prior_engine_off" => self.scene.state_priors[2] = num(key, v)?,
            "scene.idle_fund_min_hz" => self.scene.idle_fund_min_hz = num(key, v)?,
            "scene.idle_fund_max_hz" => self.scene.idle_fund_max_hz = num(key, v)?,
            "scene.speed_min" => self.scene.speed_min = num(key, v)?,
            "scene.speed_max" => self.scene.speed_max = num(key, v)?,
            "scene.snr_db_min" => self.scene.snr_db_min = num(key, v)?,
            "scene.snr_db_max" => self.scene.snr_db_max = num(key, v)?,
            "scene.size_frac_min" => self.scene.size_frac_min = num(key, v)?,
            "scene.size_frac_max" => self.scene.size_frac_max = num(key, v)?,
            "scene.scene_width_m" => self.scene.scene_width_m = num(key, v)?,
            "scene.scene_depth_m" => self.scene.scene_depth_m = num(key, v)?,
            "scene.mic_standoff_m" => self.scene.mic_standoff_m = num(key, v)?,
            "scene.seed" => self.scene.seed = num(key, v)?,
            "audio.sample_rate" => self.audio.sample_rate = num(key, v)?,
            "audio.duration_s" => self.audio.duration_s = num(key, v)?,
            "audio.n_fft" => self.audio.n_fft = num(key, v)?,
            "audio.hop" => self.audio.hop = num(key, v)?,
            "audio.n_mels" => self.audio.n_mels = num(key, v)?,
            "audio.f_min" => self.audio.f_min = num(key, v)?,
            "audio.f_max" => self.audio.f_max = num(key, v)?,
            "model.mics" => self.model.mics = num(key, v)?,
            "model.embed" => self.model.embed = num(key, v)?,
            "model.depth" => self.model.depth = num(key, v)?,
            "model.heads" => self.model.heads = num(key, v)?,
            "model.mlp_ratio" => self.model.mlp_ratio = num(key, v)?,
            "model.n_scaq" => self.model.n_scaq = num(key, v)?,
            "model.spca_layers" => self.model.spca_layers = num(key, v)?,
            "model.base_scale" => self.model.base_scale = num(key, v)?,
            "model.assign_t1" => self.model.assign_t1 = num(key, v)?,
            "model.assign_t2" => self.model.assign_t2 = num(key, v)?,
            "model.vis_widths" => self.model.vis_widths = parse_widths(key, v)?,
            "model.audio_widths" => self.model.audio_widths = parse_widths(key, v)?,
            "model.head" => {
                self.model.head_mode = match v {
                    "decoupled" => HeadMode::Decoupled,
                    "coupled" => HeadMode::Coupled,
                    _ => {
                        return Err(HavtError::Config(format!(
                            "model.head must be coupled|decoupled (got '{v}')"
                        )))
                    }
                }
            }
            "model.fusion" => {
                self.model.fusion = match v {
                    "havt" => FusionMode::Havt,
                    "concat" => FusionMode::Concat,
                    "none" => FusionMode::None,
                    _ => {
                        return Err(HavtError::Config(format!(
                            "model.fusion must be havt|concat|none (got '{v}')"
                        )))
                    }
                }
            }
            "model.scales" => {
                let mut scales = Vec::new();
                for part in v.split(',') {
                    scales.push(num::<usize>(key, part)?);
                }
                scales.sort_unstable();
                scales.dedup();
                self.model.scales = scales;
            }
            "run.lr" => self.run.lr = num(key, v)?,
            "run.batch" => self.run.batch = num(key, v)?,
            "run.max_epochs" => self.run.max_epochs = num(key, v)?,
            "run.patience" => self.run.patience = num(key, v)?,
            "run.seed" => self.run.seed = num(key, v)?,
            "run.score_thresh" => self.run.score_thresh = num(key, v)?,
            "run.nms_iou" => self.run.nms_iou = num(key, v)?,
            "data.n_samples" => self.data.n_samples = num(key, v)?,
            "data.train_ratio" => self.data.ratios[0] = num(key, v)?,
            "data.val_ratio" => self.data.ratios[1] = num(key, v)?,
            "data.test_ratio" => self.data.ratios[2] = num(key, v)?,
            other => {
                return Err(HavtError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Parse a config file of `section.key=value` lines. `#` starts a
    /// comment; blank lines are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| HavtError::io(path, e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HavtError::Config(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply_kv(key, value)?;
        }
        Ok(())
    }
}

fn parse_widths(key: &str, v: &str) -> Result<[usize; 4]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(HavtError::Config(format!("{key} expects 4 comma-separated widths")));
    }
    let mut out = [0usize; 4];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part
            .parse()
            .map_err(|_| HavtError::Config(format!("invalid width '{part}' for {key}")))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_config_validates() {
        Config::paper().validate().unwrap();
        Config::desk().validate().unwrap();
    }

    #[test]
    fn paper_mel_frame_count() {
        let a = AudioConfig::paper();
        assert_eq!(a.n_samples(), 240_000);
        assert_eq!(a.n_frames(), 469);
        assert_eq!(a.n_mels, 128);
    }

    #[test]
    fn kv_roundtrip_and_errors() {
        let mut c = Config::desk();
        c.apply_kv("run.lr", "0.01").unwrap();
        assert_eq!(c.run.lr, 0.01);
        c.apply_kv("model.scales", "32").unwrap();
        assert_eq!(c.model.scales, vec![32]);
        c.apply_kv("model.head", "coupled").unwrap();
        assert_eq!(c.model.head_mode, HeadMode::Coupled);
        assert!(c.apply_kv("model.head", "both").is_err());
        assert!(c.apply_kv("nonsense.key", "1").is_err());
        assert!(c.apply_kv("run.batch", "abc").is_err());
    }

    #[test]
    fn prior_sum_enforced() {
        let mut c = Config::desk();
        c.scene.state_priors = [0.5, 0.5, 0.5];
        assert!(matches!(c.validate(), Err(HavtError::Config(_))));
    }

    #[test]
    fn f_max_above_nyquist_rejected() {
        let mut a = AudioConfig::paper();
        a.f_max = 30_000.0;
        assert!(a.validate().is_err());
    }

    #[test]
    fn mic_subsets_are_spread() {
        assert_eq!(mic_subset(6, 6), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(mic_subset(3, 6), vec![0, 2, 4]);
        assert_eq!(mic_subset(1, 6), vec![2]);
    }
}
