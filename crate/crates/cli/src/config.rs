//! `--config` files: flat `key = value` lines, `#` comments and `[command]`
//! sections. Keys are long option names; values from the file are spliced
//! into the argument list unless the same option was given on the command line.

use std::collections::BTreeMap;
use std::ffi::OsString;

use clap::{ArgAction, Command};
use stable_exit::{Error, Result};

/// Keys outside any section apply to every command.
const GLOBAL: &str = "";

#[derive(Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub sections: BTreeMap<String, Vec<(String, String)>>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut cfg = ConfigFile::default();
    let mut section = GLOBAL.to_string();
    cfg.sections.entry(section.clone()).or_default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad =
            |what: &str| Error::InvalidParameter(format!("config line {}: {what}: {raw:?}", n + 1));
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| bad("unclosed section"))?
                .trim();
            if name.is_empty() {
                return Err(bad("empty section name"));
            }
            section = name.to_string();
            cfg.sections.entry(section.clone()).or_default();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key = value"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(bad("empty key"));
        }
        let entries = cfg.sections.get_mut(&section).expect("section exists");
        if entries.iter().any(|(e, _)| e == k) {
            return Err(bad("duplicate key"));
        }
        entries.push((k.to_string(), v.to_string()));
    }
    Ok(cfg)
}

/// Long option names of a subcommand, with whether each is a plain flag.
fn options_of(cmd: &Command) -> BTreeMap<String, bool> {
    cmd.get_arguments()
        .filter_map(|a| {
            let flag = matches!(a.get_action(), ArgAction::SetTrue);
            a.get_long().map(|l| (l.to_string(), flag))
        })
        .filter(|(l, _)| l != "config" && l != "help")
        .collect()
}

fn given_on_command_line(raw: &[OsString], key: &str) -> bool {
    let long = format!("--{key}");
    let prefixed = format!("--{key}=");
    raw.iter().any(|a| {
        a.to_str()
            .is_some_and(|s| s == long || s.starts_with(&prefixed))
    })
}

/// Path given by `--config`, if any.
fn config_path(raw: &[OsString]) -> Option<OsString> {
    let mut it = raw.iter();
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

/// Returns `raw` with values from the `--config` file inserted after the
/// subcommand name. Unknown keys or sections are errors.
pub fn apply_config_file(root: &Command, raw: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&raw) else {
        return Ok(raw);
    };
    let Some(pos) = raw
        .iter()
        .skip(1)
        .position(|a| root.find_subcommand(a.to_string_lossy().as_ref()).is_some())
        .map(|p| p + 1)
    else {
        return Ok(raw);
    };
    let name = raw[pos].to_string_lossy().to_string();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.to_string_lossy())))?;
    let cfg = parse_config(&text)?;
    for (section, entries) in &cfg.sections {
        let known = if section == GLOBAL {
            None
        } else {
            let sub = root.find_subcommand(section).ok_or_else(|| {
                Error::InvalidParameter(format!("config section [{section}] names no command"))
            })?;
            Some(options_of(sub))
        };
        for (k, _) in entries {
            let ok = match &known {
                Some(opts) => opts.contains_key(k),
                None => root
                    .get_subcommands()
                    .any(|s| options_of(s).contains_key(k)),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key {k:?} in section [{section}]"
                )));
            }
        }
    }
    let opts = options_of(root.find_subcommand(&name).expect("found above"));
    let mut extra: Vec<OsString> = Vec::new();
    let mut seen = Vec::new();
    let local = cfg.sections.get(&name).into_iter().flatten();
    let global = cfg.sections.get(GLOBAL).into_iter().flatten();
    for (k, v) in local.chain(global) {
        if seen.contains(k) || given_on_command_line(&raw, k) {
            continue;
        }
        seen.push(k.clone());
        let Some(&flag) = opts.get(k) else {
            // A global key for some other command.
            continue;
        };
        if flag {
            match v.as_str() {
                "true" => extra.push(format!("--{k}").into()),
                "false" => {}
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "config key {k:?} takes true or false, got {v:?}"
                    )))
                }
            }
        } else {
            extra.push(format!("--{k}").into());
            extra.push(v.into());
        }
    }
    let mut out = raw[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&raw[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let c = parse_config("seed = 3 # global\n\n[solve]\nwalks=1000\nat = 0,0\n").unwrap();
        assert_eq!(c.sections[""], vec![("seed".to_string(), "3".to_string())]);
        assert_eq!(c.sections["solve"].len(), 2);
        assert!(parse_config("[solve\n").is_err());
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("a=1\na=2\n").is_err());
    }
}
