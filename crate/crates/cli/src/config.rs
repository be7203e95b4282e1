//! `--config` files: `key=value` lines appended as `--key value` unless the
//! flag already appears on the command line.

use std::ffi::OsString;
use std::fs;

pub fn expand_argv(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = args.get(i + 1).cloned();
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut out = argv;
    for extra in config_args(&text, &args)? {
        out.push(extra.into());
    }
    Ok(out)
}

fn config_args(text: &str, present: &[String]) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        let flag = format!("--{}", key.trim().replace('_', "-"));
        if flag == "--config" {
            return Err(format!("config line {}: nested config files are not supported", i + 1));
        }
        let given = present.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        let value = value.trim();
        match value {
            "true" => out.push(flag),
            "false" => {}
            _ => {
                out.push(flag);
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}
