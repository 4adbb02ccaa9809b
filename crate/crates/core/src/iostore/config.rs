//! Flat `key = value` experiment configs. Keys are the [`ALConfig`] field
//! names; `#` starts a comment; unset keys keep their defaults; an empty
//! value clears an optional field.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::acquisition::Strategy;
use crate::harness::metrics::F1Average;
use crate::harness::ALConfig;
use crate::{Error, Result};

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Config(format!("line {line}: invalid value {raw:?} for {key}")))
}

fn optional<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Option<T>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        value(line, key, raw).map(Some)
    }
}

pub fn parse_config(text: &str) -> Result<ALConfig> {
    let mut c = ALConfig::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, v) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
        let (key, v) = (key.trim(), v.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!("line {line}: duplicate key {key}")));
        }
        match key {
            "strategy" => {
                c.strategy = v.split(',').map(|s| s.trim().parse::<Strategy>()).collect::<Result<_>>()?;
            }
            "draw_size" => c.draw_size = value(line, key, v)?,
            "initial_size" => c.initial_size = value(line, key, v)?,
            "budget" => c.budget = value(line, key, v)?,
            "classes" => c.classes = value(line, key, v)?,
            "epochs" => c.epochs = optional(line, key, v)?,
            "learning_rate" => c.learning_rate = value(line, key, v)?,
            "batch_size" => c.batch_size = value(line, key, v)?,
            "hidden" => c.hidden = value(line, key, v)?,
            "mc_passes" => c.mc_passes = value(line, key, v)?,
            "dropout_rate" => c.dropout_rate = value(line, key, v)?,
            "alpha_decay" => c.alpha_decay = value(line, key, v)?,
            "alpha_schedule" => c.alpha_schedule = v.parse()?,
            "repetitions" => c.repetitions = value(line, key, v)?,
            "seed" => c.seed = value(line, key, v)?,
            "f1_average" => {
                c.f1_average = match v {
                    "macro" => F1Average::Macro,
                    "micro" => F1Average::Micro,
                    _ => return Err(Error::Config(format!("line {line}: f1_average must be macro or micro"))),
                }
            }
            "freeze_clusters" => c.freeze_clusters = value(line, key, v)?,
            "timing" => c.timing = value(line, key, v)?,
            "preset" => c.preset = v.parse()?,
            "samples" => c.samples = value(line, key, v)?,
            "dim" => c.dim = value(line, key, v)?,
            "spread" => c.spread = value(line, key, v)?,
            "min_center_distance" => c.min_center_distance = optional(line, key, v)?,
            "embeddings" => c.embeddings = optional::<PathBuf>(line, key, v)?,
            "labels" => c.labels = optional::<PathBuf>(line, key, v)?,
            _ => return Err(Error::Config(format!("line {line}: unknown key {key}"))),
        }
    }
    c.validate()?;
    Ok(c)
}

/// Every field, in declaration order; parses back to an equal config.
pub fn format_config(c: &ALConfig) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let path = |p: &Option<PathBuf>| opt(p.as_ref().map(|p| p.display().to_string()));
    let strategies: Vec<&str> = c.strategy.iter().map(|s| s.as_str()).collect();
    let lines = [
        ("strategy", strategies.join(",")),
        ("draw_size", c.draw_size.to_string()),
        ("initial_size", c.initial_size.to_string()),
        ("budget", c.budget.to_string()),
        ("classes", c.classes.to_string()),
        ("epochs", opt(c.epochs.map(|e| e.to_string()))),
        ("learning_rate", c.learning_rate.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("hidden", c.hidden.to_string()),
        ("mc_passes", c.mc_passes.to_string()),
        ("dropout_rate", c.dropout_rate.to_string()),
        ("alpha_decay", c.alpha_decay.to_string()),
        ("alpha_schedule", serde_json::to_value(c.alpha_schedule).unwrap().as_str().unwrap_or("additive").to_string()),
        ("repetitions", c.repetitions.to_string()),
        ("seed", c.seed.to_string()),
        ("f1_average", serde_json::to_value(c.f1_average).unwrap().as_str().unwrap_or("macro").to_string()),
        ("freeze_clusters", c.freeze_clusters.to_string()),
        ("timing", c.timing.to_string()),
        ("preset", c.preset.to_string()),
        ("samples", c.samples.to_string()),
        ("dim", c.dim.to_string()),
        ("spread", c.spread.to_string()),
        ("min_center_distance", opt(c.min_center_distance.map(|v| v.to_string()))),
        ("embeddings", path(&c.embeddings)),
        ("labels", path(&c.labels)),
    ];
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn read_config(path: &Path) -> Result<ALConfig> {
    parse_config(&fs::read_to_string(path)?)
}

pub fn write_config(path: &Path, c: &ALConfig) -> Result<()> {
    fs::write(path, format_config(c))?;
    Ok(())
}
