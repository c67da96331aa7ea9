//! `key = value` run configuration. Blank lines and `#` comments are skipped;
//! unknown keys and repeated keys are errors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use obs_impact::pipeline::PipelineConfig;
use obs_impact::synthdata::ObsCounts;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub out: PathBuf,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub pretrained: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            out: PathBuf::from("out"),
            train_data: None,
            test_data: None,
            checkpoint: None,
            pretrained: None,
        }
    }
}

const KEYS: [&str; 27] = [
    "seed",
    "lat_min",
    "lat_max",
    "lon_min",
    "lon_max",
    "n_bumps",
    "advection_speed",
    "grid_spacing",
    "obs_per_kind",
    "train_steps",
    "test_steps",
    "radius_km",
    "d",
    "n_gcn_layers",
    "mlp_hidden",
    "k",
    "psi",
    "lr",
    "epochs_pretrain",
    "epochs_finetune",
    "batch_size",
    "fractions",
    "out",
    "train_data",
    "test_data",
    "checkpoint",
    "pretrained",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("{key}: cannot parse {value:?}"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

impl RunConfig {
    /// A single seed drives both the synthetic fields and the model.
    pub fn set_seed(&mut self, seed: u64) {
        self.pipeline.field.seed = seed;
        self.pipeline.model.seed = seed;
    }

    pub fn seed(&self) -> u64 {
        self.pipeline.model.seed
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "seed" {
            self.set_seed(num(key, value)?);
            return Ok(());
        }
        let p = &mut self.pipeline;
        let region = &mut p.field.region;
        match key {
            "lat_min" => region.lat_min = num(key, value)?,
            "lat_max" => region.lat_max = num(key, value)?,
            "lon_min" => region.lon_min = num(key, value)?,
            "lon_max" => region.lon_max = num(key, value)?,
            "n_bumps" => p.field.n_bumps = num(key, value)?,
            "advection_speed" => p.field.advection_speed = num(key, value)?,
            "grid_spacing" => p.field.grid_spacing = num(key, value)?,
            "obs_per_kind" => p.counts = ObsCounts::uniform(num(key, value)?),
            "train_steps" => p.train_steps = num(key, value)?,
            "test_steps" => p.test_steps = num(key, value)?,
            "radius_km" => p.radius_km = num(key, value)?,
            "d" => p.model.d = num(key, value)?,
            "n_gcn_layers" => p.model.n_gcn_layers = num(key, value)?,
            "mlp_hidden" => p.model.mlp_hidden = list(key, value)?,
            "k" => p.model.k = num(key, value)?,
            "psi" => p.model.psi = num(key, value)?,
            "lr" => p.model.lr = num(key, value)?,
            "epochs_pretrain" => p.model.epochs_pretrain = num(key, value)?,
            "epochs_finetune" => p.model.epochs_finetune = num(key, value)?,
            "batch_size" => p.model.batch_size = num(key, value)?,
            "fractions" => p.fractions = list(key, value)?,
            "out" => self.out = value.into(),
            "train_data" => self.train_data = Some(value.into()),
            "test_data" => self.test_data = Some(value.into()),
            "checkpoint" => self.checkpoint = Some(value.into()),
            "pretrained" => self.pretrained = Some(value.into()),
            _ => bail!("unknown key {key:?}; known keys: {}", KEYS.join(", ")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("line {}: {key:?} given twice", i + 1);
            }
            config
                .set(key, value.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        p.field.validate()?;
        p.model.validate()?;
        if p.train_steps == 0 || p.test_steps == 0 {
            bail!("train_steps and test_steps must be at least 1");
        }
        if !(p.radius_km > 0.0) {
            bail!("radius_km must be positive");
        }
        if p.fractions.is_empty() || p.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            bail!("fractions must be non-empty and lie in (0, 1]");
        }
        Ok(())
    }

    pub fn train_path(&self) -> PathBuf {
        self.train_data
            .clone()
            .unwrap_or_else(|| self.out.join("train.dataset"))
    }

    pub fn test_path(&self) -> PathBuf {
        self.test_data
            .clone()
            .unwrap_or_else(|| self.out.join("test.dataset"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("model.ckpt"))
    }

    pub fn pretrained_path(&self) -> PathBuf {
        self.pretrained
            .clone()
            .unwrap_or_else(|| self.out.join("pretrained.ckpt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_accepted() {
        let mut c = RunConfig::default();
        for key in KEYS {
            let value = match key {
                "mlp_hidden" => "8,4",
                "fractions" => "0.1,0.3",
                "lr" | "psi" | "advection_speed" | "grid_spacing" => "0.5",
                _ => "3",
            };
            c.set(key, value).unwrap();
        }
        assert_eq!(c.pipeline.model.mlp_hidden, [8, 4]);
        assert_eq!(c.pipeline.fractions, [0.1, 0.3]);
        assert_eq!(c.pipeline.field.seed, 3);
    }

    #[test]
    fn parse_rejects_bad_input() {
        let ok = RunConfig::parse("# comment\n\nseed = 11\nd=4\n").unwrap();
        assert_eq!(ok.seed(), 11);
        assert_eq!(ok.pipeline.model.d, 4);
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("seed").is_err());
        assert!(RunConfig::parse("seed = x").is_err());
        assert!(RunConfig::parse("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn empty_hidden_list_means_linear_head() {
        let c = RunConfig::parse("mlp_hidden =").unwrap();
        assert!(c.pipeline.model.mlp_hidden.is_empty());
    }
}
