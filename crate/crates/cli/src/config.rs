//! Flat `key = value` config files, merged into the argument list ahead of
//! the command-line flags so that flags win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// keys may use `_` or `-`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            bail!("line {}: bad key {:?}", i + 1, key);
        }
        let value = value.trim().trim_matches('"').to_string();
        out.push((key, value));
    }
    Ok(out)
}

/// `--key value` pairs; `true`/`false` become a bare switch or nothing, and
/// whitespace-separated values (`interval = -1 1`) expand to several args.
pub fn to_args(pairs: &[(String, String)]) -> Vec<OsString> {
    let mut args = Vec::new();
    for (key, value) in pairs {
        match value.as_str() {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            v => {
                args.push(format!("--{key}").into());
                args.extend(v.split_whitespace().map(OsString::from));
            }
        }
    }
    args
}

/// Finds `--config PATH` (or `--config=PATH`) in `args` and returns the
/// arguments with the config's flags spliced in right after the subcommand.
pub fn merge(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let extra = to_args(&parse(&text)?);
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.to_string_lossy().as_ref()))
        .map(|i| i + 1)
        .unwrap_or(args.len().min(1));
    let mut merged = args[..at].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[at..]);
    Ok(merged)
}
