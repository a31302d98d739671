//! Flat key=value config files and flag/file/default resolution.
//!
//! Keys mirror the long flag names (`scale`, `size`, `epochs`, `lr`,
//! `seed`, `grid`, `splits`, `sigma`, `rank-subset`, `variant`). Flags
//! always win over file entries.

use std::collections::HashMap;
use std::path::Path;

use crate::{usage, CliError, Variant};

#[derive(Default)]
pub struct FileConfig(HashMap<String, String>);

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
        let mut map = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "--config {}: line {} is not `key = value`",
                    path.display(),
                    lineno + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    /// Flag value if given, else the parsed file entry, else `None`.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key {key:?}: cannot parse {raw:?}"))),
        }
    }

    pub fn resolve_variant(
        &self,
        flag: Option<Variant>,
        key: &str,
    ) -> Result<Option<Variant>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key).map(String::as_str) {
            None => Ok(None),
            Some("no-aspp") => Ok(Some(Variant::NoAspp)),
            Some("no-concat") => Ok(Some(Variant::NoConcat)),
            Some(other) => Err(usage(format!("config key {key:?}: unknown variant {other:?}"))),
        }
    }
}

/// Parses `"RxC"` into (rows, cols).
pub fn parse_size(s: &str, flag: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if let [r, c] = parts[..] {
        if let (Ok(r), Ok(c)) = (r.trim().parse(), c.trim().parse()) {
            return Ok((r, c));
        }
    }
    Err(usage(format!("{flag} expects RxC (for example 240x320), got {s:?}")))
}

pub fn parse_subset(s: &str) -> Vec<String> {
    s.split(',')
        .map(|m| m.trim().to_string())
        .filter(|m| !m.is_empty())
        .collect()
}

/// Applies an ablation variant to a model config.
pub fn apply_variant(config: &mut msinet::ModelConfig, variant: Option<Variant>) {
    match variant {
        Some(Variant::NoAspp) => config.use_aspp = false,
        Some(Variant::NoConcat) => config.use_multilevel_concat = false,
        None => {}
    }
}
