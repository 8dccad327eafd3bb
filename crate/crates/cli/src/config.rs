//! Flat `key = value` config files. Flags override file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use rqi_core::metrics::{Direction, DirectionMap};

const KEYS: &[&str] = &[
    "seed",
    "jobs",
    "scales",
    "crops",
    "crop_size",
    "epochs",
    "learning_rate",
    "batch_size",
    "validation_fraction",
    "mode",
    "head",
    "trials",
    "fractions",
    "niqe_patch",
    "niqe_quantile",
    "reference_id",
];

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", n + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) && !k.starts_with("direction.") {
                bail!("config line {}: unknown key `{k}`", n + 1);
            }
            values.insert(k.to_string(), v.to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config `{key}`: {e}")))
            .transpose()
    }

    /// Flag value if given, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    /// Defaults, then `direction.<metric>` config keys, then `metric=dir` flags.
    pub fn directions(&self, flags: &[String]) -> Result<DirectionMap> {
        let mut map = DirectionMap::default();
        for (k, v) in &self.values {
            if let Some(metric) = k.strip_prefix("direction.") {
                map.set(metric, v.parse::<Direction>()?);
            }
        }
        for f in flags {
            let (m, d) = f.split_once('=').ok_or_else(|| anyhow!("--direction expects metric=higher|lower, got `{f}`"))?;
            map.set(m.trim(), d.trim().parse::<Direction>()?);
        }
        Ok(map)
    }
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| anyhow!("`{x}`: {e}")))
        .collect()
}
