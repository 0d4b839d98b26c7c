//! Config-file support: the `[<subcommand>]` table of a TOML file becomes a
//! list of flags placed in front of the command-line flags, so that anything
//! given explicitly wins.

use std::ffi::OsString;
use std::path::Path;

use hybridscreen::Error;
use toml::Value;

const SUBCOMMANDS: [&str; 5] = ["synth", "train", "sweep", "fuse", "report"];

/// Finds the value of `--config` in `args` (either `--config F` or `--config=F`).
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn scalar_text(key: &str, v: &Value) -> Result<String, Error> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Boolean(b) => Ok(b.to_string()),
        other => Err(Error::Validation(format!(
            "config key {key}: unsupported value {other}"
        ))),
    }
}

/// Turns one config table into flags.
pub fn table_to_flags(table: &toml::Table) -> Result<Vec<OsString>, Error> {
    let mut out = Vec::new();
    for (key, value) in table {
        if key == "config" {
            return Err(Error::Validation("config files cannot nest `config`".into()));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Boolean(true) => out.push(flag.into()),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                let parts = items.iter().map(|v| scalar_text(key, v)).collect::<Result<Vec<_>, _>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar_text(key, v)?.into());
            }
        }
    }
    Ok(out)
}

/// Returns `argv` with the config-file flags for the chosen subcommand
/// inserted right after the subcommand name. Arguments are unchanged when no
/// `--config` is present.
pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let Some(pos) = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(argv);
    };
    let Some(path) = config_path(&argv[pos + 1..]) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    if !path.is_file() {
        return Err(Error::Validation(format!("config file {} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path)?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e| Error::Validation(format!("config file {}: {e}", path.display())))?;
    let sub = argv[pos].to_string_lossy().into_owned();
    let flags = match doc.get(&sub) {
        None => Vec::new(),
        Some(Value::Table(t)) => table_to_flags(t)?,
        Some(_) => return Err(Error::Validation(format!("config section [{sub}] must be a table"))),
    };
    let mut out = argv[..=pos].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn table_becomes_flags() {
        let t: toml::Table = "n = 10\nasd_fraction = 0.79\noverwrite = true\nquiet = false\ngrid = [0.1, 1.0]\nkind = \"tabular\""
            .parse()
            .unwrap();
        let flags = table_to_flags(&t).unwrap();
        assert_eq!(
            flags,
            os(&["--asd-fraction", "0.79", "--grid", "0.1,1", "--kind", "tabular", "--n", "10", "--overwrite"])
        );
    }

    #[test]
    fn flags_are_inserted_before_user_args() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "[synth]\nseed = 4\n[train]\nseed = 9\n").unwrap();
        let argv = os(&["bin", "synth", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
        let out = expand_args(argv).unwrap();
        assert_eq!(out[..4], os(&["bin", "synth", "--seed", "4"])[..]);
        assert_eq!(out.last().unwrap(), "5");
    }

    #[test]
    fn missing_config_file_is_a_validation_error() {
        let argv = os(&["bin", "train", "--config=/nonexistent/x.toml"]);
        assert!(matches!(expand_args(argv), Err(Error::Validation(_))));
    }
}
