use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::AugmentConfig;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::nets::BundleSpec;

/// Training strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Translators, then both colorizers, then joint fine-tuning.
    Full,
    /// As `Full`, with the bilateral consistency term logged but not optimized.
    NoBlt,
    /// All eight networks jointly from initialization with the full objective.
    FromScratch,
    /// The NIR colorizer alone on its direct pair term.
    N2cStandalone,
    /// Translators, then the NIR colorizer with latent inputs but no grayscale colorizer.
    N2cPartial,
    /// The grayscale colorizer alone on its direct pair term.
    G2cStandalone,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::NoBlt,
        Ablation::FromScratch,
        Ablation::N2cStandalone,
        Ablation::N2cPartial,
        Ablation::G2cStandalone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoBlt => "no_blt",
            Ablation::FromScratch => "from_scratch",
            Ablation::N2cStandalone => "n2c_standalone",
            Ablation::N2cPartial => "n2c_partial",
            Ablation::G2cStandalone => "g2c_standalone",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub image_size: usize,
    pub base_channels: usize,
    pub batch_size: usize,
    pub lr_phase1: f64,
    pub lr_phase2: f64,
    pub lr_phase3: f64,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub epochs_phase3: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub ablation: Ablation,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    /// Full-length schedule at 256x256.
    fn default() -> Self {
        TrainConfig {
            image_size: 256,
            base_channels: 64,
            batch_size: 10,
            lr_phase1: 1e-4,
            lr_phase2: 1e-4,
            lr_phase3: 1e-5,
            epochs_phase1: 400,
            epochs_phase2: 250,
            epochs_phase3: 100,
            seed: 0,
            weights: LossWeights::default(),
            ablation: Ablation::Full,
            augment: AugmentConfig::training(256),
        }
    }
}

impl TrainConfig {
    /// Desk-scale preset: 32x32, base width 8, 40/25/10 epochs. The
    /// colorization phases use a 20x larger rate than the full-length
    /// schedule since they run a tenth of the epochs.
    pub fn desk() -> Self {
        TrainConfig {
            image_size: 32,
            base_channels: 8,
            lr_phase2: 2e-3,
            lr_phase3: 2e-4,
            epochs_phase1: 40,
            epochs_phase2: 25,
            epochs_phase3: 10,
            augment: AugmentConfig::training(32),
            ..TrainConfig::default()
        }
    }

    pub fn bundle_spec(&self) -> BundleSpec {
        BundleSpec {
            image_size: self.image_size,
            base_channels: self.base_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lr) in [
            ("lr_phase1", self.lr_phase1),
            ("lr_phase2", self.lr_phase2),
            ("lr_phase3", self.lr_phase3),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be > 0, got {lr}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        self.weights.validate()?;
        self.augment.validate()?;
        if self.augment.enable_scale && !self.augment.enable_crop {
            return Err(Error::InvalidConfig(
                "scale augmentation requires cropping back to image_size".into(),
            ));
        }
        if self.augment.enable_crop && self.augment.crop_size != self.image_size {
            return Err(Error::InvalidConfig(format!(
                "crop size {} differs from image size {}",
                self.augment.crop_size, self.image_size
            )));
        }
        let spec = self.bundle_spec();
        crate::nets::Generator::new(spec.translator())?;
        crate::nets::Discriminator::new(spec.image_discriminator())?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        crate::nets::params::hex(&Sha256::digest(&json))
    }

    /// Applies every key set in `o`.
    pub fn apply(&mut self, o: &ConfigOverrides) {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = o.$src.clone() { self.$($dst).+ = v; })*
            };
        }
        if let Some(p) = o.preset {
            *self = match p {
                Preset::Desk => TrainConfig::desk(),
                Preset::Full => TrainConfig::default(),
            };
        }
        set!(
            image_size => image_size,
            base_channels => base_channels,
            batch_size => batch_size,
            lr_phase1 => lr_phase1,
            lr_phase2 => lr_phase2,
            lr_phase3 => lr_phase3,
            epochs_phase1 => epochs_phase1,
            epochs_phase2 => epochs_phase2,
            epochs_phase3 => epochs_phase3,
            seed => seed,
            ablation => ablation,
            lambda1 => weights.lambda1,
            lambda2 => weights.lambda2,
            lambda3 => weights.lambda3,
            lambda4 => weights.lambda4,
            lambda_p => weights.lambda_p,
            lambda_c => weights.lambda_c,
        );
        match o.augment {
            Some(true) => self.augment = AugmentConfig::training(self.image_size),
            Some(false) => self.augment = AugmentConfig::disabled(),
            None => {}
        }
        set!(
            augment_scale => augment.enable_scale,
            augment_crop => augment.enable_crop,
            augment_mirror => augment.enable_mirror,
            augment_contrast => augment.enable_contrast,
        );
        if let Some(v) = o.scale_min {
            self.augment.scale_range.0 = v;
        }
        if let Some(v) = o.scale_max {
            self.augment.scale_range.1 = v;
        }
        if let Some(v) = o.contrast_min {
            self.augment.contrast_range.0 = v;
        }
        if let Some(v) = o.contrast_max {
            self.augment.contrast_range.1 = v;
        }
        if self.augment.enable_crop || o.image_size.is_some() {
            self.augment.crop_size = self.image_size;
        }
    }

    /// Defaults (desk preset), then the file, then `cli`.
    pub fn resolve(file: Option<&Path>, cli: &ConfigOverrides) -> Result<Self> {
        let mut cfg = TrainConfig::desk();
        if let Some(path) = file {
            cfg.apply(&ConfigOverrides::load(path)?);
        }
        cfg.apply(cli);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Full,
}

/// Flat key/value form of [`TrainConfig`]; every key is optional.
///
/// ```toml
/// preset = "desk"
/// seed = 3
/// epochs_phase1 = 10
/// ablation = "no_blt"
/// lambda_c = 1.0
/// augment = false
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub preset: Option<Preset>,
    pub image_size: Option<usize>,
    pub base_channels: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr_phase1: Option<f64>,
    pub lr_phase2: Option<f64>,
    pub lr_phase3: Option<f64>,
    pub epochs_phase1: Option<usize>,
    pub epochs_phase2: Option<usize>,
    pub epochs_phase3: Option<usize>,
    pub seed: Option<u64>,
    pub ablation: Option<Ablation>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,
    pub lambda_p: Option<f64>,
    pub lambda_c: Option<f64>,
    /// Switches the whole training augmentation on or off.
    pub augment: Option<bool>,
    pub augment_scale: Option<bool>,
    pub augment_crop: Option<bool>,
    pub augment_mirror: Option<bool>,
    pub augment_contrast: Option<bool>,
    pub scale_min: Option<f64>,
    pub scale_max: Option<f64>,
    pub contrast_min: Option<f64>,
    pub contrast_max: Option<f64>,
}

impl ConfigOverrides {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_preset() {
        let c = TrainConfig::desk();
        assert_eq!(
            (c.epochs_phase1, c.epochs_phase2, c.epochs_phase3),
            (40, 25, 10)
        );
        assert_eq!(
            (c.batch_size, c.lr_phase1, c.lr_phase2, c.lr_phase3),
            (10, 1e-4, 2e-3, 2e-4)
        );
        c.validate().unwrap();
        let d = TrainConfig::default();
        assert_eq!(
            (d.epochs_phase1, d.epochs_phase2, d.epochs_phase3),
            (400, 250, 100)
        );
    }

    #[test]
    fn file_then_flags() {
        let file = ConfigOverrides::parse(
            "seed = 4\nablation = \"no_blt\"\nepochs_phase1 = 2\naugment = false\n",
        )
        .unwrap();
        let cli = ConfigOverrides {
            epochs_phase1: Some(7),
            ..Default::default()
        };
        let mut c = TrainConfig::desk();
        c.apply(&file);
        c.apply(&cli);
        assert_eq!(c.seed, 4);
        assert_eq!(c.ablation, Ablation::NoBlt);
        assert_eq!(c.epochs_phase1, 7);
        assert_eq!(c.augment, AugmentConfig::disabled());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ConfigOverrides::parse("unknown_key = 1").is_err());
        assert!(ConfigOverrides::parse("ablation = \"half\"").is_err());
        let mut c = TrainConfig::desk();
        c.lr_phase2 = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::desk();
        c.image_size = 24;
        assert!(c.validate().is_err());
        assert!("half".parse::<Ablation>().is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = TrainConfig::desk();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
