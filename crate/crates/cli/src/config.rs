//! `key = value` configuration files that mirror command-line flags.
//!
//! Values from the file are spliced into the argument list as `--key=value`
//! for every flag the chosen subcommand accepts and the command line does not
//! already set, so explicit flags always win.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parses `key = value` lines; `#` starts a comment. Keys may use `_` or `-`.
pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("--config: line {}: expected `key = value`", i + 1);
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("--config: line {}: empty key", i + 1);
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
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

fn long_flags(cmd: &clap::Command) -> BTreeSet<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

fn has_flag(args: &[OsString], flag: &str) -> bool {
    let eq = format!("--{flag}=");
    let bare = format!("--{flag}");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == bare || s.starts_with(&eq)
    })
}

/// Returns `args` with values from `--config` merged in; unchanged when no
/// config file is given.
pub fn merge_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("--config: cannot read {}", path.display()))?;
    let entries = parse(&text)?;

    let root = Cli::command();
    let sub_names: Vec<String> = root
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let Some(sub) = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find(|a| sub_names.contains(a))
    else {
        return Ok(args);
    };
    let accepted = long_flags(root.find_subcommand(&sub).expect("listed subcommand"));
    let known: BTreeSet<String> = root
        .get_subcommands()
        .flat_map(long_flags)
        .chain(long_flags(&root))
        .collect();

    let mut merged = args;
    for e in entries {
        if e.key == "config" {
            bail!(
                "--config: line {}: a config file cannot include another",
                e.line
            );
        }
        if !known.contains(&e.key) {
            bail!("--config: line {}: unknown key `{}`", e.line, e.key);
        }
        if accepted.contains(&e.key) && !has_flag(&merged, &e.key) {
            merged.push(format!("--{}={}", e.key, e.value).into());
        } else {
            log::debug!("config key `{}` not applied to `{sub}`", e.key);
        }
    }
    Ok(merged)
}
