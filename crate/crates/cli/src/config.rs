//! Layered settings: built-in defaults, then the `--config` file, then
//! `--set key=value` pairs, then dedicated flags.
//!
//! The file is TOML with one table per section:
//!
//! ```toml
//! [model]
//! lr = 0.0005
//! issue_threshold = 0.6
//!
//! [model.arch]
//! dropout = 0.5
//!
//! [preprocess]
//! merge_time_gap_max = 90
//! ```

use std::path::Path;

use chatmine::corpus::PreprocessConfig;
use chatmine::disentangler::{DisentangleConfig, LinkScorerConfig, LinkTrainConfig};
use chatmine::encoder::EncoderConfig;
use chatmine::pairmodel::ModelConfig;
use chatmine::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Settings {
    pub model: ModelConfig,
    pub preprocess: PreprocessConfig,
    pub encoder: EncoderConfig,
    pub disentangle: DisentangleConfig,
    pub link: LinkScorerConfig,
    pub link_train: LinkTrainConfig,
}

impl Settings {
    /// Defaults overlaid with `file` and then every `key=value` in `sets`.
    pub fn load(file: Option<&Path>, sets: &[String]) -> Result<Settings> {
        let mut tree = serde_json::to_value(Settings::default()).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", path.display(), e.message())))?;
            let overlay = serde_json::to_value(table).map_err(|e| Error::Config(e.to_string()))?;
            merge(&mut tree, overlay, "")?;
        }
        for set in sets {
            merge(&mut tree, parse_set(set)?, "")?;
        }
        let settings: Settings =
            serde_json::from_value(tree).map_err(|e| Error::Config(format!("invalid setting: {e}")))?;
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.preprocess.validate()?;
        self.encoder.validate()?;
        self.link.features.validate()?;
        if !(0.0..=1.0).contains(&self.disentangle.threshold) {
            return Err(Error::Config(format!(
                "disentangle.threshold must lie in [0, 1], got {}",
                self.disentangle.threshold
            )));
        }
        Ok(())
    }

    /// One seed drives every stochastic component.
    pub fn reseed(&mut self, seed: u64) {
        self.model.seed = seed;
        self.link_train.seed = seed;
    }
}

/// `a.b.c=value` as a nested object. The value is read as a TOML value
/// when it parses as one and as a bare string otherwise.
fn parse_set(set: &str) -> Result<Value> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("`--set {set}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("`--set {set}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => serde_json::to_value(t.remove("v")).map_err(|e| Error::Config(e.to_string()))?,
        Err(_) => Value::String(raw.to_string()),
    };
    Ok(key
        .rsplit('.')
        .fold(value, |inner, part| Value::Object([(part.to_string(), inner)].into_iter().collect())))
}

/// Overlays `overlay` onto `base`; keys must already exist in `base`.
fn merge(base: &mut Value, overlay: Value, path: &str) -> Result<()> {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b
                    .get_mut(&k)
                    .ok_or_else(|| Error::Config(format!("unknown setting `{here}`")))?;
                if slot.is_object() && v.is_object() {
                    merge(slot, v, &here)?;
                } else {
                    *slot = v;
                }
            }
            Ok(())
        }
        (_, _) => Err(Error::Config(format!("setting `{path}` is not a table"))),
    }
}
