//! Flat `key = value` config files.
//!
//! Each entry becomes a `--key=value` flag placed right after the subcommand,
//! ahead of everything the user typed, so explicit flags win.

use std::ffi::OsString;

use crate::error::CliError;

/// Returns `args` with the entries of the `--config` file spliced in.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.to_string_lossy())))?;
    let mut flags = Vec::new();
    for (key, value) in &table {
        let name = key.replace('_', "-");
        if name == "config" {
            return Err(CliError::Usage(
                "config files cannot include other configs".into(),
            ));
        }
        if let Some(v) = flag_value(&name, value)? {
            flags.push(OsString::from(format!("--{name}={v}")));
        } else if value.as_bool() == Some(true) {
            flags.push(OsString::from(format!("--{name}")));
        }
    }
    let at = subcommand_index(&args).map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--config" {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// `None` for booleans, which map to bare flags (or to nothing when false).
fn flag_value(key: &str, value: &toml::Value) -> Result<Option<String>, CliError> {
    use toml::Value;
    Ok(Some(match value {
        Value::Boolean(_) => return Ok(None),
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::Integer(i) => Ok(i.to_string()),
                Value::Float(f) => Ok(f.to_string()),
                Value::String(s) => Ok(s.clone()),
                _ => Err(CliError::Usage(format!(
                    "config key {key}: arrays hold numbers or strings"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => return Err(CliError::Usage(format!("config key {key}: unsupported value"))),
    }))
}
