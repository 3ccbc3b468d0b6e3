//! Flat JSON run configuration: defaults < config file < command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use emopp::model::ModelConfig;
use emopp::training::TrainConfig;
use serde_json::{Map, Value};

/// Key echoing where each value came from; ignored when read back.
pub const SOURCES_KEY: &str = "_sources";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Flag => "flag",
        }
    }
}

/// Model and training settings resolved into one flat key space.
#[derive(Debug, Clone)]
pub struct CliConfig {
    values: BTreeMap<String, (Value, Source)>,
    optional: Vec<&'static str>,
}

fn flatten(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map,
        _ => unreachable!("configs serialize to objects"),
    }
}

impl CliConfig {
    pub fn defaults() -> Self {
        let mut values = BTreeMap::new();
        let train = flatten(serde_json::to_value(TrainConfig::default()).expect("serializable"));
        let model = flatten(serde_json::to_value(ModelConfig::default()).expect("serializable"));
        for (k, v) in train.into_iter().chain(model) {
            values.insert(k, (v, Source::Default));
        }
        CliConfig {
            values,
            optional: vec!["pretrained_path"],
        }
    }

    fn known(&self, key: &str) -> bool {
        self.values.contains_key(key) || self.optional.contains(&key)
    }

    pub fn set(&mut self, key: &str, value: Value, source: Source) -> Result<()> {
        if !self.known(key) {
            bail!("unknown config key {key:?}");
        }
        self.values.insert(key.to_string(), (value, source));
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let Value::Object(map) = value else {
            bail!("{}: config must be a JSON object", path.display());
        };
        for (k, v) in map {
            if k == SOURCES_KEY {
                continue;
            }
            self.set(&k, v, Source::File).with_context(|| path.display().to_string())?;
        }
        Ok(())
    }

    fn subset<T: serde::de::DeserializeOwned>(&self, keys: &Map<String, Value>) -> Result<T> {
        let map: Map<String, Value> = self
            .values
            .iter()
            .filter(|(k, _)| keys.contains_key(*k) || self.optional.contains(&k.as_str()))
            .map(|(k, (v, _))| (k.clone(), v.clone()))
            .collect();
        Ok(serde_json::from_value(Value::Object(map))?)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let keys = flatten(serde_json::to_value(TrainConfig::default())?);
        let config: TrainConfig = self.subset(&keys).context("training settings")?;
        config.validate()?;
        Ok(config)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut keys = flatten(serde_json::to_value(ModelConfig::default())?);
        keys.remove("pretrained_path");
        let config: ModelConfig = self.subset(&keys).context("model settings")?;
        config.validate()?;
        Ok(config)
    }

    /// The resolved config plus a `_sources` map; valid input for `--config`.
    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        let mut sources = Map::new();
        for (k, (v, s)) in &self.values {
            out.insert(k.clone(), v.clone());
            sources.insert(k.clone(), Value::String(s.as_str().into()));
        }
        out.insert(SOURCES_KEY.into(), Value::Object(sources));
        Value::Object(out)
    }
}
