//! JSON configs with `--key value` overrides.
//!
//! Each override value is read as JSON when it parses (`2`, `[0.5, 1]`,
//! `true`) and as a plain string otherwise. Flags replace keys from the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Raw command-line tail: the config path and the override pairs, in order.
#[derive(Debug, Default, PartialEq)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub pairs: Vec<(String, Value)>,
}

pub fn parse_overrides(args: &[String]) -> Result<Overrides> {
    let mut out = Overrides::default();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            bail!("expected --key value, found `{arg}`");
        };
        let (key, raw) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().with_context(|| format!("flag --{flag} is missing a value"))?;
                (flag.to_string(), v.clone())
            }
        };
        if key.is_empty() {
            bail!("empty flag name in `{arg}`");
        }
        if key == "config" {
            out.config = Some(PathBuf::from(raw));
            continue;
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        out.pairs.push((key, value));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
        Value::Object(map) => Ok(map),
        _ => bail!("config {} must hold a JSON object", path.display()),
    }
}

/// File keys overlaid with flag keys.
pub fn merge(file: Map<String, Value>, pairs: &[(String, Value)]) -> Map<String, Value> {
    let mut merged = file;
    for (k, v) in pairs {
        merged.insert(k.clone(), v.clone());
    }
    merged
}

/// Typed config; unknown keys are rejected by the target type.
pub fn typed<T: DeserializeOwned>(merged: &Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(merged.clone())).context("invalid config")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_pairs_and_config() {
        let o = parse_overrides(&args(&["--eps", "0.1", "--config", "run.json", "--B=[0.5,1]", "--geometry", "chain-open"])).unwrap();
        assert_eq!(o.config, Some(PathBuf::from("run.json")));
        assert_eq!(
            o.pairs,
            vec![
                ("eps".to_string(), json!(0.1)),
                ("B".to_string(), json!([0.5, 1])),
                ("geometry".to_string(), json!("chain-open")),
            ]
        );
    }

    #[test]
    fn rejects_malformed_tails() {
        assert!(parse_overrides(&args(&["eps", "0.1"])).is_err());
        assert!(parse_overrides(&args(&["--eps"])).is_err());
        assert!(parse_overrides(&args(&["--=3"])).is_err());
    }

    #[test]
    fn flags_win() {
        let file = json!({"q": 1, "eps": 0.2}).as_object().unwrap().clone();
        let merged = merge(file, &[("q".to_string(), json!(3))]);
        assert_eq!(Value::Object(merged), json!({"q": 3, "eps": 0.2}));
    }
}
