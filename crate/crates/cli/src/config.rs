//! Key-by-key config parsing with documented defaults.

use diotm_core::datasets::DatasetName;
use diotm_core::diotm::TrainConfig;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

fn field<T: DeserializeOwned>(key: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Config {
        key: key.to_string(),
        reason: e.to_string(),
    })
}

/// Parses a JSON object into a config, filling every missing key with its
/// default. `dataset` is used when the document has no `dataset` key.
pub fn parse_config(text: &str, dataset: Option<DatasetName>) -> Result<TrainConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config {
        key: "<document>".into(),
        reason: e.to_string(),
    })?;
    let Value::Object(map) = doc else {
        return Err(CliError::Config {
            key: "<document>".into(),
            reason: "expected a JSON object".into(),
        });
    };
    config_from_map(&map, dataset)
}

pub fn config_from_map(map: &Map<String, Value>, dataset: Option<DatasetName>) -> Result<TrainConfig> {
    let dataset = match map.get("dataset") {
        Some(v) => field("dataset", v)?,
        None => dataset.ok_or_else(|| CliError::Config {
            key: "dataset".into(),
            reason: "missing; set it in the config or pass --dataset".into(),
        })?,
    };
    let mut c = TrainConfig::new(dataset);
    for (key, v) in map {
        let k = key.as_str();
        match k {
            "dataset" => {}
            "n_train" => c.n_train = field(k, v)?,
            "n_test" => c.n_test = field(k, v)?,
            "iterations" => c.iterations = field(k, v)?,
            "batch_size" => c.batch_size = field(k, v)?,
            "lr" => c.lr = field(k, v)?,
            "lr_min" => c.lr_min = field(k, v)?,
            "alpha" => c.alpha = field(k, v)?,
            "lambda" => c.lambda = field(k, v)?,
            "reg" => c.reg = field(k, v)?,
            "time_dist" => c.time_dist = field(k, v)?,
            "time_sharing" => c.time_sharing = field(k, v)?,
            "z_dim" => c.z_dim = field(k, v)?,
            "hidden_dim" => c.hidden_dim = field(k, v)?,
            "ema_decay" => c.ema_decay = field(k, v)?,
            "fd_step" => c.fd_step = field(k, v)?,
            "seed" => c.seed = field(k, v)?,
            "lr_schedule" => c.lr_schedule = field(k, v)?,
            _ => {
                return Err(CliError::Config {
                    key: key.clone(),
                    reason: "unknown key".into(),
                })
            }
        }
    }
    check(&c)?;
    Ok(c)
}

/// Runs the config constraints, reporting violations against the key.
pub fn check(c: &TrainConfig) -> Result<()> {
    c.validate().map_err(|e| match e {
        diotm_core::Error::InvalidArgument { name, reason } => CliError::Config {
            key: name.to_string(),
            reason,
        },
        other => other.into(),
    })
}

/// Canonical text form; this is what a run directory echoes.
pub fn serialize_config(c: &TrainConfig) -> String {
    let mut s = serde_json::to_string_pretty(c).expect("config serializes");
    s.push('\n');
    s
}
