//! TOML config loading with flat `--key=value` overrides and diagnostics
//! that point at the offending line or override.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::de::{DeTable, DeValue};
use toml::{Table, Value};

/// A semantic problem with one config key, found after parsing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct Invalid {
    pub key: String,
    pub message: String,
}

impl Invalid {
    pub fn new(key: impl Into<String>, message: impl ToString) -> Self {
        Self {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("override {raw:?}: {message}")]
    Override { raw: String, message: String },
    #[error("{location}: {key}: {message}")]
    Invalid {
        location: String,
        key: String,
        message: String,
    },
}

/// A config document the CLI knows how to load and check.
pub trait Settings: Serialize + DeserializeOwned + Default {
    /// Keys that are absent from the serialized defaults but still accepted.
    const OPTIONAL_KEYS: &'static [&'static str] = &[];

    fn check(&self) -> Result<(), Invalid>;
}

/// A parsed, overridden and validated config plus where its keys came from.
#[derive(Debug)]
pub struct Loaded<C> {
    pub config: C,
    pub path: Option<PathBuf>,
    pub overrides: Vec<String>,
}

pub fn load<C: Settings>(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<Loaded<C>, ConfigError> {
    let (text, origin) = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            (text, p.display().to_string())
        }
        None => (String::new(), "defaults".to_string()),
    };
    let parse_err = |e: toml::de::Error| ConfigError::Parse {
        origin: origin.clone(),
        message: e.to_string().trim_end().to_string(),
    };

    // Deserializing the file on its own keeps toml's line and column in errors.
    toml::from_str::<C>(&text).map_err(parse_err)?;
    let mut table: Table = toml::from_str(&text).map_err(parse_err)?;

    let defaults = Table::try_from(C::default()).expect("defaults serialize to a table");
    let known = known_keys(&defaults, C::OPTIONAL_KEYS);
    let mut overridden: Vec<(String, String)> = Vec::new();
    for raw in overrides {
        let (key, value) = resolve_override(raw, &known, &defaults)?;
        set_path(&mut table, &key, value);
        C::deserialize(Value::Table(table.clone())).map_err(|e| ConfigError::Override {
            raw: raw.clone(),
            message: e.to_string().trim_end().to_string(),
        })?;
        overridden.push((key, raw.clone()));
    }

    let config = C::deserialize(Value::Table(table)).map_err(|e| ConfigError::Parse {
        origin: origin.clone(),
        message: e.to_string().trim_end().to_string(),
    })?;
    if let Err(invalid) = config.check() {
        let location = match overridden
            .iter()
            .rev()
            .find(|(k, _)| covers(&invalid.key, k))
        {
            Some((_, raw)) => format!("override {raw}"),
            None => match locate(&text, &invalid.key) {
                Some((line, col)) => format!("{origin}:{line}:{col}"),
                None => format!("{origin} (default value)"),
            },
        };
        return Err(ConfigError::Invalid {
            location,
            key: invalid.key,
            message: invalid.message,
        });
    }
    Ok(Loaded {
        config,
        path: path.map(Path::to_path_buf),
        overrides: overrides.to_vec(),
    })
}

/// Does a value set at `set` account for a problem reported at `reported`?
fn covers(reported: &str, set: &str) -> bool {
    reported == set
        || reported.starts_with(&format!("{set}."))
        || set.starts_with(&format!("{reported}."))
}

fn known_keys(defaults: &Table, optional: &[&str]) -> BTreeSet<String> {
    fn walk(prefix: &str, table: &Table, out: &mut BTreeSet<String>) {
        for (k, v) in table {
            let path = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match v {
                Value::Table(inner) => walk(&path, inner, out),
                _ => {
                    out.insert(path);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    walk("", defaults, &mut out);
    out.extend(optional.iter().map(|s| s.to_string()));
    out
}

/// Splits `--key=value`, resolves `key` to a full dotted path (a unique leaf
/// name is enough) and parses `value` as a TOML value.
fn resolve_override(
    raw: &str,
    known: &BTreeSet<String>,
    defaults: &Table,
) -> Result<(String, Value), ConfigError> {
    let err = |message: String| ConfigError::Override {
        raw: raw.to_string(),
        message,
    };
    let body = raw.strip_prefix("--").unwrap_or(raw);
    let (key, value) = body
        .split_once('=')
        .ok_or_else(|| err("expected --key=value".into()))?;
    let key = key.trim();

    let path = if known.contains(key) {
        key.to_string()
    } else {
        let suffix = format!(".{key}");
        let matches: Vec<&String> = known.iter().filter(|k| k.ends_with(&suffix)).collect();
        match matches.as_slice() {
            [one] => (*one).clone(),
            [] => return Err(err(format!("unknown key {key:?}"))),
            many => {
                let names: Vec<&str> = many.iter().map(|s| s.as_str()).collect();
                return Err(err(format!(
                    "ambiguous key {key:?}; use one of {}",
                    names.join(", ")
                )));
            }
        }
    };

    let wants_list = matches!(lookup(defaults, &path), Some(Value::Array(_)));
    let value = value.trim();
    let parsed = if wants_list && !value.starts_with('[') {
        let items = if value.is_empty() {
            Vec::new()
        } else {
            value.split(',').map(|v| parse_scalar(v.trim())).collect()
        };
        Value::Array(items)
    } else {
        parse_scalar(value)
    };
    Ok((path, parsed))
}

/// A TOML literal if it parses as one, otherwise a bare string.
fn parse_scalar(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn lookup<'a>(table: &'a Table, path: &str) -> Option<&'a Value> {
    let mut parts = path.split('.');
    let mut current = table.get(parts.next()?)?;
    for part in parts {
        current = current.as_table()?.get(part)?;
    }
    Some(current)
}

fn set_path(table: &mut Table, path: &str, value: Value) {
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut current = table;
    for part in parts {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        if !entry.is_table() {
            *entry = Value::Table(Table::new());
        }
        current = entry.as_table_mut().expect("just made a table");
    }
    current.insert(leaf.to_string(), value);
}

/// 1-based line and column of the key defining `path` in `text`.
fn locate(text: &str, path: &str) -> Option<(usize, usize)> {
    let doc = DeTable::parse(text).ok()?;
    let mut table = doc.get_ref();
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        let (key, value) = table.iter().find(|(k, _)| k.get_ref().as_ref() == part)?;
        match (parts.peek(), value.get_ref()) {
            (Some(_), DeValue::Table(inner)) => table = inner,
            (Some(_), _) => return None,
            (None, _) => return Some(line_col(text, key.span().start)),
        }
    }
    None
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |nl| before.len() - nl - 1)
        + 1;
    (line, col)
}
