//! Flat `key = value` config files. Each key is a long flag name; values are
//! spliced into the argument list ahead of the command-line flags, which
//! therefore take precedence.

use std::path::Path;

use clap::{ArgAction, Command};

use crate::commands::CliError;

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("config line {}: expected 'key = value'", i + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Input(format!("config line {}: empty key", i + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config <path>` or `--config=<path>` in raw arguments.
pub fn find_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Converts config entries to flags understood by `sub`. Keys that belong to
/// another subcommand are ignored; keys unknown to every subcommand are errors.
pub fn to_args(root: &Command, sub: &str, entries: &[(String, String)]) -> Result<Vec<String>, CliError> {
    let find = |cmd: &Command, key: &str| cmd.get_arguments().find(|a| a.get_long() == Some(key)).cloned();
    let target = root.find_subcommand(sub).ok_or_else(|| CliError::Input(format!("unknown command '{sub}'")))?;
    let mut out = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(CliError::Input("config files cannot include other config files".into()));
        }
        match find(target, key) {
            Some(arg) => {
                if matches!(arg.get_action(), ArgAction::SetTrue) {
                    match value.as_str() {
                        "true" | "yes" | "1" => out.push(format!("--{key}")),
                        "false" | "no" | "0" => {}
                        _ => return Err(CliError::Input(format!("config key '{key}': expected true or false"))),
                    }
                } else {
                    out.push(format!("--{key}"));
                    out.push(value.clone());
                }
            }
            None if root.get_subcommands().any(|c| find(c, key).is_some()) => {}
            None => return Err(CliError::Input(format!("unknown config key '{key}'"))),
        }
    }
    Ok(out)
}

/// Returns `args` with config-file flags inserted right after the subcommand.
pub fn expand(root: &Command, args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = find_path(&args) else { return Ok(args) };
    let Some(pos) = args.iter().skip(1).position(|a| root.find_subcommand(a).is_some()).map(|p| p + 1) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Input(format!("cannot read config file {path}: {e}")))?;
    let entries = parse(&text)?;
    let injected = to_args(root, &args[pos], &entries)?;
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
