//! Config files and the small value grammars used by the flags.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Keys that are switches on the command line rather than `--key value`.
const COMMAND_KEY: &str = "command";

/// Replace `--config <path>` (or `--config=<path>`) by the flags the file
/// spells out. File flags go right after the subcommand so that flags given
/// on the command line come later and win.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| Error::config("config", "missing path"))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone().into(),
        source,
    })?;
    let (command, flags) = parse_config(&text, Path::new(&path))?;
    // rest[0] is the program name; find the subcommand among the rest
    let has_command = rest.iter().skip(1).any(|a| is_command(a));
    let mut out = vec![rest.first().cloned().unwrap_or_else(|| "birkhoff".into())];
    let mut tail: Vec<String> = rest.into_iter().skip(1).collect();
    if has_command {
        let pos = tail.iter().position(|a| is_command(a)).unwrap();
        out.extend(tail.drain(..=pos));
    } else {
        let c = command.ok_or_else(|| Error::config("command", "no subcommand on the command line or in the config file"))?;
        out.push(c);
    }
    out.extend(flags);
    out.extend(tail);
    Ok(out)
}

fn is_command(a: &str) -> bool {
    matches!(a, "pressure" | "dimension" | "tail" | "spectrum" | "rate" | "verify")
}

/// `key=value` lines, one per flag; `param` and `exponents` may repeat.
/// Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str, path: &Path) -> Result<(Option<String>, Vec<String>)> {
    let mut command = None;
    let mut flags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Output {
            path: path.to_path_buf(),
            detail: format!("line {}: expected key=value, got `{line}`", i + 1),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k == COMMAND_KEY {
            command = Some(v.to_string());
            continue;
        }
        let key = if k == "tolerance" { "tol" } else { k };
        flags.push(format!("--{key}"));
        flags.push(v.to_string());
    }
    Ok((command, flags))
}

/// `lo:hi:count`, geometric spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl std::str::FromStr for AlphaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::config("alpha", format!("expected lo:hi:count, got `{s}`")));
        }
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config("alpha", format!("`{t}` is not a number")))
        };
        let lo = num(parts[0])?;
        let hi = num(parts[1])?;
        let count = num(parts[2])?;
        if !(count >= 2.0 && count.fract() == 0.0) {
            return Err(Error::config("alpha", format!("count must be an integer >= 2, got {}", parts[2])));
        }
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::config("alpha", format!("need 0 < lo < hi, got {lo}:{hi}")));
        }
        Ok(Self {
            lo,
            hi,
            count: count as usize,
        })
    }
}

/// Comma-separated reals.
pub fn parse_list(field: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(field, format!("`{t}` is not a number")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn grid_parsing() {
        let g: AlphaGrid = "10:1e5:24".parse().unwrap();
        assert_eq!((g.lo, g.hi, g.count), (10.0, 1e5, 24));
        for bad in ["10:1e5", "10:5:3", "1:2:1", "1:2:2.5", "a:2:3"] {
            match bad.parse::<AlphaGrid>() {
                Err(Error::Config { field, .. }) => assert_eq!(field, "alpha"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn config_flags_precede_command_line() {
        let dir = std::env::temp_dir().join(format!("birkhoff-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        fs::write(&path, "# run\ncommand=spectrum\nsystem=lueroth\nparam=r=3\ntolerance=1e-8\n").unwrap();
        let out = expand_config(argv(&format!("birkhoff --config {} --tol 1e-9", path.display()))).unwrap();
        assert_eq!(
            out,
            argv("birkhoff spectrum --system lueroth --param r=3 --tol 1e-8 --tol 1e-9")
        );
        let out = expand_config(argv(&format!("birkhoff rate --config={}", path.display()))).unwrap();
        assert_eq!(out[1], "rate");
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn config_line_errors_name_the_line() {
        let e = parse_config("system=gauss\noops\n", Path::new("x.cfg")).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
