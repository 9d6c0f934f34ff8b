//! `key = value` config files, turned into command-line flags for any option not given.

use std::ffi::OsString;
use std::path::PathBuf;

use crate::{CliError, CliResult};

const SWITCHES: [&str; 2] = ["deterministic", "resume"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

fn given(args: &[OsString], flag: &str) -> bool {
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&format!("{flag}="))
    })
}

/// Parses the flat format: one `key = value` per line, `#` comments, keys in either
/// `kebab-case` or `snake_case`.
pub fn parse(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Core(groupphi::Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            }));
        };
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Appends config-file entries as flags after the command line; flags already present win.
pub fn expand_args(mut args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|source| groupphi::Error::File { path, source })?;
    let mut extra = Vec::new();
    for (key, value) in parse(&text)? {
        let flag = format!("--{key}");
        if key == "config" || given(&args, &flag) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            if matches!(value.as_str(), "true" | "1" | "yes") {
                extra.push(OsString::from(flag));
            }
        } else {
            extra.push(OsString::from(flag));
            extra.push(OsString::from(value));
        }
    }
    args.extend(extra);
    Ok(args)
}
