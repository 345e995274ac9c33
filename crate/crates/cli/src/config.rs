//! Run configuration: config-file sections merged with command-line
//! overrides, plus the `#| ` block embedded in every artifact.

use std::collections::hash_map::RandomState;
use std::fmt;
use std::hash::BuildHasher;
use std::path::Path;

use dcp_core::rng::GENERATOR;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use toml::{Table, Value};

/// A configuration problem; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// A list of reals written as `start:stop:step`, a comma list, a single
/// number or a TOML array. Always serialized as an array.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl Grid {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number '{}'", s.trim()))
        };
        let parts: Vec<&str> = text.split(':').collect();
        match parts.len() {
            1 => text.split(',').map(num).collect::<Result<Vec<_>, _>>().map(Grid),
            3 => {
                let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
                if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                    return Err(format!("grid '{text}' needs start <= stop and step > 0"));
                }
                // endpoints count when within half a step
                let n = ((stop - start) / step + 0.5).floor() as usize;
                Ok(Grid((0..=n).map(|i| start + i as f64 * step).collect()))
            }
            _ => Err(format!("grid '{text}' is not start:stop:step")),
        }
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<f64>),
            One(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Grid(v)),
            Raw::One(x) => Ok(Grid(vec![x])),
            Raw::Int(x) => Ok(Grid(vec![x as f64])),
            Raw::Text(t) => Grid::parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// Reals that may be spelled `-inf`; integers are accepted too.
pub mod real {
    use serde::{Deserialize, Deserializer};

    pub fn de<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            I(i64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(x) => Ok(x),
            Raw::I(x) => Ok(x as f64),
            Raw::S(s) => s
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("bad number '{s}'"))),
        }
    }

    pub fn de_opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        de(d).map(Some)
    }
}

/// The parsed config file: a top-level `seed` and one table per command.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub sections: Table,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("config: cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut table: Table = text.parse().map_err(|e| config_err(format!("config: {e}")))?;
        let seed = match table.remove("seed") {
            None => None,
            Some(Value::Integer(s)) if s >= 0 => Some(s as u64),
            Some(_) => return Err(config_err("config: seed must be a non-negative integer")),
        };
        table.remove("command");
        if let Some(g) = table.remove("generator") {
            if g.as_str() != Some(GENERATOR) {
                return Err(config_err(format!(
                    "generator: artifact used {g}, this build uses {GENERATOR}"
                )));
            }
        }
        Ok(FileConfig { seed, sections: table })
    }

    fn section(&self, command: &str) -> anyhow::Result<Table> {
        match self.sections.get(command) {
            None => Ok(Table::new()),
            Some(Value::Table(t)) => Ok(t.clone()),
            Some(_) => Err(config_err(format!("config: [{command}] must be a table"))),
        }
    }
}

/// Merges the command's file section with the command-line values (which
/// win), checks `required` keys and deserializes the result.
pub fn resolve<A: Serialize, C: DeserializeOwned>(
    command: &str,
    file: &FileConfig,
    cli: &A,
    required: &[&str],
) -> anyhow::Result<C> {
    let mut merged = file.section(command)?;
    let overrides = Table::try_from(cli).map_err(|e| config_err(format!("{command}: {e}")))?;
    merged.extend(overrides);
    for key in required {
        if !merged.contains_key(*key) {
            return Err(config_err(format!("missing: {key}")));
        }
    }
    merged
        .try_into()
        .map_err(|e: toml::de::Error| config_err(format!("{command}: {}", e.message())))
}

/// Largest seed that fits the TOML integer embedded in artifacts.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Picks the seed: command line, then config file, then fresh entropy.
pub fn resolve_seed(cli: Option<u64>, file: &FileConfig) -> anyhow::Result<u64> {
    match cli.or(file.seed) {
        Some(s) if s > MAX_SEED => Err(config_err(format!("seed: must be at most {MAX_SEED}"))),
        Some(s) => Ok(s),
        None => Ok(RandomState::new().hash_one(std::process::id()) & MAX_SEED),
    }
}

/// The TOML block describing a run, embedded in its artifacts.
pub fn embedded<C: Serialize>(command: &str, seed: u64, resolved: &C) -> anyhow::Result<String> {
    let mut top = Table::new();
    top.insert("command".into(), Value::String(command.into()));
    top.insert("seed".into(), Value::Integer(seed as i64));
    top.insert("generator".into(), Value::String(GENERATOR.into()));
    top.insert(command.into(), Value::Table(Table::try_from(resolved)?));
    Ok(toml::to_string(&top)?)
}

/// Pulls the embedded block back out of an artifact: `#| ` lines of text
/// files, or the `config` field of a JSON document.
pub fn extract(bytes: &[u8]) -> anyhow::Result<(String, FileConfig)> {
    let text = String::from_utf8_lossy(bytes);
    let body = if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        v.get("config")
            .and_then(|c| c.as_str())
            .ok_or_else(|| config_err("artifact has no config field"))?
            .to_string()
    } else {
        text.lines()
            .filter_map(|l| l.strip_prefix("#| ").or_else(|| l.strip_prefix("# | ")))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let table: Table = body.parse().map_err(|e| config_err(format!("embedded config: {e}")))?;
    let command = table
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| config_err("artifact has no embedded command"))?
        .to_string();
    Ok((command, FileConfig::parse(&body)?))
}

/// Prefixes every line of the block with `#| `.
pub fn comment_block(block: &str) -> String {
    block.lines().map(|l| format!("#| {l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(Grid::parse("0.5:2:0.5").unwrap().0, vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(Grid::parse("1:2:0.3").unwrap().0.len(), 4);
        assert_eq!(Grid::parse("1:1.9:0.3").unwrap().0.len(), 4);
        assert_eq!(Grid::parse("-3:3:1").unwrap().0.len(), 7);
        assert_eq!(Grid::parse("1,2.5,-inf").unwrap().0[2], f64::NEG_INFINITY);
        assert!(Grid::parse("1:0:1").is_err());
        assert!(Grid::parse("1:2").is_err());
        assert!(Grid::parse("x").is_err());
    }

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        lambda: Grid,
        #[serde(deserialize_with = "real::de")]
        a: f64,
        #[serde(default)]
        side: usize,
    }

    #[derive(Serialize, Default)]
    struct DemoCli {
        lambda: Option<String>,
        a: Option<f64>,
    }

    #[test]
    fn overrides_beat_the_file() {
        let file = FileConfig::parse("seed = 3\n[demo]\nlambda = [1.0, 2.0]\na = 1\nside = 7\n").unwrap();
        assert_eq!(file.seed, Some(3));
        let cli = DemoCli {
            lambda: Some("4:5:1".into()),
            a: None,
        };
        let d: Demo = resolve("demo", &file, &cli, &["lambda"]).unwrap();
        assert_eq!(
            d,
            Demo {
                lambda: Grid(vec![4.0, 5.0]),
                a: 1.0,
                side: 7
            }
        );
    }

    #[test]
    fn missing_and_unknown_keys() {
        let err = resolve::<_, Demo>("demo", &FileConfig::default(), &DemoCli::default(), &["lambda"]).unwrap_err();
        assert_eq!(err.to_string(), "missing: lambda");
        assert!(err.downcast_ref::<ConfigError>().is_some());
        let file = FileConfig::parse("[demo]\nlambda = 1\na = 0\nbogus = 2\n").unwrap();
        let err = resolve::<_, Demo>("demo", &file, &DemoCli::default(), &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn embedded_block_round_trips() {
        let d = Demo {
            lambda: Grid(vec![0.1, 1.0 / 3.0]),
            a: f64::NEG_INFINITY,
            side: 4,
        };
        let block = embedded("demo", 42, &d).unwrap();
        let art = format!("{}x,y\n1,2\n", comment_block(&block));
        let (cmd, file) = extract(art.as_bytes()).unwrap();
        assert_eq!((cmd.as_str(), file.seed), ("demo", Some(42)));
        let back: Demo = resolve("demo", &file, &DemoCli::default(), &[]).unwrap();
        assert_eq!(back, d);
        let json = serde_json::json!({ "config": block }).to_string();
        assert_eq!(extract(json.as_bytes()).unwrap().1.seed, Some(42));
    }
}
