//! Experiment configuration files (TOML).
//!
//! A file either spells out a whole [`TrialConfig`] or names a `builtin`
//! preset. Other top-level keys are deep-merged over the preset, then the
//! `[overrides]` table (dotted paths such as `params.sensitivity`) is
//! applied, then any command-line `--set` pairs. An optional `[sweep]` table
//! holds sweep settings.
//!
//! A run manifest written by this tool is also accepted: its `[config]` and
//! `[sweep]` tables are read back.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use shoal_core::{builtin_config, Builtin, TrialConfig};
use thiserror::Error;
use toml::de::{DeTable, DeValue};
use toml::{Spanned, Table, Value};

/// Sweep settings; every field can also come from the command line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub trial: TrialConfig,
    pub sweep: SweepSpec,
    pub builtin: Option<Builtin>,
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Syntax { origin: String, line: usize, column: usize, message: String },
    /// `location` is `file:line` or the `--set` flag that introduced the value.
    #[error("{location}: {field}: {message}")]
    Invalid { location: String, field: String, message: String },
}

/// A dotted-path assignment, as given to `--set`.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: String,
    pub value: Value,
}

impl FromStr for Override {
    type Err = String;

    /// `path=value`, where the value is any TOML value (bare strings allowed).
    fn from_str(s: &str) -> Result<Self, String> {
        let (path, raw) = s.split_once('=').ok_or_else(|| format!("expected PATH=VALUE, got `{s}`"))?;
        let path = path.trim();
        parse_path(path)?;
        let raw = raw.trim();
        let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("key just parsed"),
            Err(_) => Value::String(raw.to_string()),
        };
        Ok(Override { path: path.to_string(), value })
    }
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.path, self.value)
    }
}

pub fn parse_config(path: &Path, extra: &[Override]) -> Result<LoadedConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text, &path.display().to_string(), extra)
}

/// Serialize a full configuration; `parse_config_str` reads it back exactly.
pub fn write_config(trial: &TrialConfig, sweep: &SweepSpec) -> Result<String, toml::ser::Error> {
    #[derive(Serialize)]
    struct Out<'a> {
        #[serde(flatten)]
        trial: &'a TrialConfig,
        #[serde(skip_serializing_if = "is_default")]
        sweep: &'a SweepSpec,
    }
    toml::to_string(&Out { trial, sweep })
}

fn is_default(s: &&SweepSpec) -> bool {
    **s == SweepSpec::default()
}

pub fn parse_config_str(text: &str, origin: &str, extra: &[Override]) -> Result<LoadedConfig, ConfigFileError> {
    let mut doc: Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
        ConfigFileError::Syntax { origin: origin.to_string(), line, column, message: e.message().trim().to_string() }
    })?;
    let mut locator = Locator::new(text, origin, extra);

    // A manifest carries the resolved configuration under [config].
    if doc.contains_key("command") {
        if let Some(Value::Table(config)) = doc.remove("config") {
            let sweep = doc.remove("sweep");
            doc = config;
            if let Some(sweep) = sweep {
                doc.insert("sweep".into(), sweep);
            }
            locator.prefix = "config.".into();
        }
    }

    let builtin = match doc.remove("builtin") {
        None => None,
        Some(Value::String(name)) => Some(
            name.parse::<Builtin>()
                .map_err(|e| locator.invalid("builtin", e.to_string()))?,
        ),
        Some(other) => return Err(locator.invalid("builtin", format!("expected a preset name, got {}", other.type_str()))),
    };
    let overrides = match doc.remove("overrides") {
        None => Vec::new(),
        Some(Value::Table(t)) => {
            let mut leaves = Vec::new();
            flatten(&Value::Table(t), String::new(), &mut leaves);
            leaves
        }
        Some(_) => return Err(locator.invalid("overrides", "expected a table of dotted paths")),
    };
    let sweep = match doc.remove("sweep") {
        None => SweepSpec::default(),
        Some(v) => deserialize_at::<SweepSpec>(v, &locator, "sweep")?,
    };

    let mut root = match builtin {
        Some(b) => Value::try_from(builtin_config(b)).expect("builtin presets serialize"),
        None => Value::Table(Table::new()),
    };
    let mut user_paths = Vec::new();
    for (key, value) in doc {
        flatten(&value, key.clone(), &mut user_paths);
        deep_merge(&mut root, &key, value);
    }
    let assignments = overrides.into_iter().chain(extra.iter().map(|o| (o.path.clone(), o.value.clone())));
    for (path, value) in assignments {
        set_path(&mut root, &path, value).map_err(|m| locator.invalid(&path, m))?;
        user_paths.push((path, Value::Boolean(true)));
    }

    let trial: TrialConfig = deserialize_at(root, &locator, "")?;
    let echoed = Value::try_from(&trial).expect("configuration serializes");
    for (path, _) in &user_paths {
        if get_path(&echoed, path).is_none() {
            return Err(locator.invalid(path, "unknown key"));
        }
    }
    trial.validate().map_err(|e| locator.invalid(&e.field, e.message))?;
    Ok(LoadedConfig { trial, sweep, builtin })
}

fn deserialize_at<T: serde::de::DeserializeOwned>(value: Value, locator: &Locator, base: &str) -> Result<T, ConfigFileError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let field = match (base.is_empty(), inner == ".") {
            (true, true) => String::new(),
            (true, false) => inner.clone(),
            (false, true) => base.to_string(),
            (false, false) => format!("{base}.{inner}"),
        };
        // Missing fields are reported by the parent; name the field itself.
        let message = e.inner().message().trim().to_string();
        let field = match message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
            Some(name) if field.is_empty() => name.to_string(),
            Some(name) => format!("{field}.{name}"),
            None => field,
        };
        locator.invalid(&field, message)
    })
}

/// Maps dotted paths to source lines.
struct Locator {
    origin: String,
    prefix: String,
    lines: BTreeMap<String, usize>,
    flags: BTreeMap<String, String>,
}

impl Locator {
    fn new(text: &str, origin: &str, extra: &[Override]) -> Self {
        let mut lines = BTreeMap::new();
        if let Ok(doc) = DeTable::parse(text) {
            record_table(doc.get_ref(), String::new(), text, &mut lines);
        }
        let flags = extra.iter().map(|o| (o.path.clone(), format!("--set {o}"))).collect();
        Locator { origin: origin.to_string(), prefix: String::new(), lines, flags }
    }

    /// Location of the source that set `field`: a value inside it if one was
    /// set explicitly, else the field itself or its nearest parent.
    fn locate(&self, field: &str) -> String {
        if !field.is_empty() {
            let inside = |p: &str| p.strip_prefix(field).is_some_and(|rest| rest.starts_with(['.', '[']));
            if let Some(flag) = self.flags.iter().find(|(p, _)| inside(p)).map(|(_, f)| f) {
                return flag.clone();
            }
            for base in [format!("{}overrides.", self.prefix), self.prefix.clone()] {
                let line = self.lines.iter().filter_map(|(p, l)| p.strip_prefix(&base).filter(|p| inside(p)).map(|_| *l)).min();
                if let Some(line) = line {
                    return format!("{}:{line}", self.origin);
                }
            }
        }
        let mut path = field.to_string();
        loop {
            if let Some(flag) = self.flags.get(&path) {
                return flag.clone();
            }
            for candidate in [format!("{}overrides.{path}", self.prefix), format!("{}{path}", self.prefix)] {
                if let Some(line) = self.lines.get(&candidate) {
                    return format!("{}:{line}", self.origin);
                }
            }
            match parent(&path) {
                Some(p) => path = p,
                None => break,
            }
        }
        let fallback = ["builtin", "command"].iter().find_map(|k| self.lines.get(*k)).copied().unwrap_or(1);
        format!("{}:{fallback}", self.origin)
    }

    fn invalid(&self, field: &str, message: impl Into<String>) -> ConfigFileError {
        ConfigFileError::Invalid { location: self.locate(field), field: field.to_string(), message: message.into() }
    }
}

fn parent(path: &str) -> Option<String> {
    if path.is_empty() {
        return None;
    }
    match path.rfind(['.', '[']) {
        Some(k) => Some(path[..k].to_string()),
        None => Some(String::new()),
    }
}

fn record_table(table: &DeTable<'_>, base: String, text: &str, out: &mut BTreeMap<String, usize>) {
    for (key, value) in table.iter() {
        let path = if base.is_empty() { key.get_ref().to_string() } else { format!("{base}.{}", key.get_ref()) };
        out.entry(path.clone()).or_insert_with(|| line_col(text, key.span().start).0);
        record_value(value, path, text, out);
    }
}

fn record_value(value: &Spanned<DeValue<'_>>, path: String, text: &str, out: &mut BTreeMap<String, usize>) {
    match value.get_ref() {
        DeValue::Table(t) => record_table(t, path, text, out),
        DeValue::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                let p = format!("{path}[{i}]");
                let span: Range<usize> = item.span();
                out.entry(p.clone()).or_insert_with(|| line_col(text, span.start).0);
                record_value(item, p, text, out);
            }
        }
        _ => {}
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|k| k + 1).unwrap_or(0) + 1;
    (line, column)
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
}

fn parse_path(path: &str) -> Result<Vec<Segment>, String> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (name, mut rest) = match part.find('[') {
            Some(k) => (&part[..k], &part[k..]),
            None => (part, ""),
        };
        if name.is_empty() {
            return Err(format!("empty key in path `{path}`"));
        }
        out.push(Segment::Key(name.to_string()));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(|| format!("unclosed index in `{path}`"))?;
            let index = rest[1..close].parse().map_err(|_| format!("bad index in `{path}`"))?;
            out.push(Segment::Index(index));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(format!("unexpected `{rest}` in `{path}`"));
            }
        }
    }
    Ok(out)
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let segments = parse_path(path)?;
    let mut cur = root;
    for seg in &segments {
        cur = match seg {
            Segment::Key(k) => match cur {
                Value::Table(t) => t.entry(k.clone()).or_insert_with(|| Value::Table(Table::new())),
                _ => return Err(format!("`{k}` is not inside a table")),
            },
            Segment::Index(i) => match cur {
                Value::Array(a) => {
                    let len = a.len();
                    a.get_mut(*i).ok_or_else(|| format!("index {i} out of range (length {len})"))?
                }
                _ => return Err(format!("index {i} applied to a non-array")),
            },
        };
    }
    *cur = value;
    Ok(())
}

fn get_path<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    let mut cur = root;
    for seg in parse_path(path).ok()? {
        cur = match (seg, cur) {
            (Segment::Key(k), Value::Table(t)) => t.get(&k)?,
            (Segment::Index(i), Value::Array(a)) => a.get(i)?,
            _ => return None,
        };
    }
    Some(cur)
}

/// Tables merge key by key; anything else replaces.
fn deep_merge(root: &mut Value, key: &str, value: Value) {
    let Value::Table(t) = root else { return };
    match (t.get_mut(key), value) {
        (Some(existing @ Value::Table(_)), Value::Table(incoming)) => {
            for (k, v) in incoming {
                deep_merge(existing, &k, v);
            }
        }
        (_, value) => {
            t.insert(key.to_string(), value);
        }
    }
}

/// Leaf paths of a value, with array indices.
fn flatten(value: &Value, path: String, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Table(t) if !t.is_empty() => {
            for (k, v) in t {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                flatten(v, p, out);
            }
        }
        Value::Array(a) if !a.is_empty() => {
            for (i, v) in a.iter().enumerate() {
                flatten(v, format!("{path}[{i}]"), out);
            }
        }
        _ => out.push((path, value.clone())),
    }
}
