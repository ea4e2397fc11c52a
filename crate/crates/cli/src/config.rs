//! `--config` support: file entries become flags placed ahead of the user's
//! own, so that explicit flags override them.

use std::collections::BTreeMap;

use anyhow::{bail, Context as _};
use clap::Command;
use dbf_core::harness::parse_config;

pub type Config = BTreeMap<String, String>;

/// Returns the argument vector with config entries spliced in after the
/// subcommand name, plus the parsed entries for echoing into reports.
pub fn expand(cmd: &Command, raw: Vec<String>) -> anyhow::Result<(Vec<String>, Option<Config>)> {
    let Some(path) = config_path(&raw) else {
        return Ok((raw, None));
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let entries = parse_config(&text).with_context(|| format!("parsing config {path}"))?;
    let Some((pos, sub)) = subcommand_position(cmd, &raw) else {
        return Ok((raw, Some(entries)));
    };
    let mut injected = Vec::new();
    for (key, value) in &entries {
        let long = key.replace('_', "-");
        if long == "config" {
            bail!("config file {path}: 'config' cannot be nested");
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(long.as_str()));
        match arg {
            Some(arg) if arg.get_action().takes_values() => injected.push(format!("--{long}={value}")),
            Some(_) => {
                if parse_bool(value).with_context(|| format!("config key '{key}'"))? {
                    injected.push(format!("--{long}"));
                }
            }
            None if known_elsewhere(cmd, &long) => {}
            None => bail!("config file {path}: unknown key '{key}'"),
        }
    }
    let mut argv = raw;
    argv.splice(pos + 1..pos + 1, injected);
    Ok((argv, Some(entries)))
}

fn config_path(raw: &[String]) -> Option<String> {
    let mut it = raw.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn subcommand_position<'a>(cmd: &'a Command, raw: &[String]) -> Option<(usize, &'a Command)> {
    let mut i = 1;
    while i < raw.len() {
        let a = raw[i].as_str();
        if a == "--config" || a == "--threads" {
            i += 2;
            continue;
        }
        if let Some(sub) = cmd.find_subcommand(a) {
            return Some((i, sub));
        }
        i += 1;
    }
    None
}

fn known_elsewhere(cmd: &Command, long: &str) -> bool {
    cmd.get_subcommands()
        .flat_map(|s| s.get_arguments())
        .any(|a| a.get_long() == Some(long))
}

fn parse_bool(v: &str) -> anyhow::Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("expected a boolean, got '{v}'"),
    }
}
