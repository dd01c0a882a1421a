//! Grid syntax and config-file merging.

use std::collections::BTreeMap;

use clap::ValueEnum;

use super::{CliError, Model, Opts};
use crate::rates::{linspace, logspace};

const SEED_ENV: &str = "FBCAST_SEED";

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn number(name: &str, s: &str) -> Result<f64, CliError> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| input(format!("{name}: `{s}` is not a number")))?;
    if !x.is_finite() {
        return Err(input(format!("{name}: `{s}` is not finite")));
    }
    Ok(x)
}

fn count(name: &str, s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| input(format!("{name}: `{s}` is not a non-negative integer")))
}

/// Parses `a,b,c`, `a:b:n` (linear) or `log:a:b:n` (logarithmic).
///
/// ```
/// use fbcast::cli::parse_grid;
/// assert_eq!(parse_grid("p", "1,2.5").unwrap(), vec![1.0, 2.5]);
/// assert_eq!(parse_grid("p", "0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
/// assert_eq!(parse_grid("p", "log:1:100:3").unwrap().len(), 3);
/// assert!(parse_grid("p", "").is_err());
/// ```
pub fn parse_grid(name: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(input(format!("{name}: grid is empty")));
    }
    let (log, body) = match s.strip_prefix("log:") {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if log || body.contains(':') {
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            return Err(input(format!("{name}: range must be `a:b:n` or `log:a:b:n`")));
        }
        let (a, b) = (number(name, parts[0])?, number(name, parts[1])?);
        let n = count(name, parts[2])?;
        if n == 0 {
            return Err(input(format!("{name}: grid is empty")));
        }
        if log {
            if !(a > 0.0 && b > 0.0) {
                return Err(input(format!("{name}: logarithmic range needs positive ends")));
            }
            return Ok(logspace(a, b, n));
        }
        return Ok(linspace(a, b, n));
    }
    parse_list(name, body)
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(name: &str, s: &str) -> Result<Vec<f64>, CliError> {
    if s.trim().is_empty() {
        return Err(input(format!("{name}: list is empty")));
    }
    s.split(',').map(|x| number(name, x)).collect()
}

/// Parses block lengths: `n`, `a,b,c` or the inclusive range `a..b`.
///
/// ```
/// use fbcast::cli::parse_etas;
/// assert_eq!(parse_etas("3..6").unwrap(), vec![3, 4, 5, 6]);
/// assert_eq!(parse_etas("2,5").unwrap(), vec![2, 5]);
/// assert!(parse_etas("0").is_err());
/// ```
pub fn parse_etas(s: &str) -> Result<Vec<usize>, CliError> {
    let s = s.trim();
    let etas = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (count("eta", a)?, count("eta", b)?);
        (a..=b).collect()
    } else if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(|x| count("eta", x)).collect::<Result<Vec<_>, _>>()?
    };
    if etas.is_empty() {
        return Err(input("eta: no block lengths"));
    }
    if etas.contains(&0) {
        return Err(input("eta: block lengths must be >= 1"));
    }
    Ok(etas)
}

fn value_text(key: &str, v: &toml::Value) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Array(items) => Ok(items
            .iter()
            .map(|x| value_text(key, x))
            .collect::<Result<Vec<_>, _>>()?
            .join(",")),
        _ => Err(input(format!("config key `{key}`: unsupported value type"))),
    }
}

fn fill_f64(slot: &mut Option<f64>, key: &str, v: &str) -> Result<(), CliError> {
    if slot.is_none() {
        *slot = Some(number(key, v)?);
    }
    Ok(())
}

fn fill_str(slot: &mut Option<String>, v: &str) {
    if slot.is_none() {
        *slot = Some(v.to_string());
    }
}

/// Fills options missing on the command line from `text` (TOML).
pub fn merge_config(opts: &mut Opts, text: &str) -> Result<(), CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| input(format!("config: {e}")))?;
    let mut kv = BTreeMap::new();
    for (k, v) in &table {
        kv.insert(k.as_str(), value_text(k, v)?);
    }
    for (k, v) in kv {
        let v = v.as_str();
        match k {
            "model" => {
                if opts.model.is_none() {
                    opts.model =
                        Some(Model::from_str(v, true).map_err(|_| input(format!("config model: unknown `{v}`")))?);
                }
            }
            "p" => fill_str(&mut opts.p, v),
            "rho" => fill_str(&mut opts.rho, v),
            "alphas" => fill_str(&mut opts.alphas, v),
            "gains" => fill_str(&mut opts.gains, v),
            "eta" => fill_str(&mut opts.eta, v),
            "zeta" => fill_str(&mut opts.zeta, v),
            "s1" => fill_f64(&mut opts.s1, k, v)?,
            "s2" => fill_f64(&mut opts.s2, k, v)?,
            "eps" => fill_f64(&mut opts.eps, k, v)?,
            "tol" => fill_f64(&mut opts.tol, k, v)?,
            "sw1" => fill_f64(&mut opts.sw1, k, v)?,
            "sw2" => fill_f64(&mut opts.sw2, k, v)?,
            "delta" => fill_f64(&mut opts.delta, k, v)?,
            "q" => fill_f64(&mut opts.q, k, v)?,
            "sign" => fill_f64(&mut opts.sign, k, v)?,
            "factor" => fill_f64(&mut opts.factor, k, v)?,
            "trials" => {
                if opts.trials.is_none() {
                    opts.trials = Some(count(k, v)?);
                }
            }
            "seed" => {
                if opts.seed.is_none() {
                    opts.seed = Some(
                        v.trim()
                            .parse()
                            .map_err(|_| input(format!("seed: `{v}` is not a u64")))?,
                    );
                }
            }
            "out" => {
                if opts.out.is_none() {
                    opts.out = Some(v.into());
                }
            }
            _ => return Err(input(format!("config: unknown key `{k}`"))),
        }
    }
    Ok(())
}

/// Applies the config file, then the seed environment variable.
pub(super) fn resolve(opts: &Opts) -> Result<Opts, CliError> {
    let mut o = opts.clone();
    if let Some(path) = &o.config {
        let text = std::fs::read_to_string(path).map_err(|e| input(format!("config {}: {e}", path.display())))?;
        merge_config(&mut o, &text)?;
    }
    if o.seed.is_none() {
        if let Ok(v) = std::env::var(SEED_ENV) {
            o.seed = Some(
                v.trim()
                    .parse()
                    .map_err(|_| input(format!("{SEED_ENV}: `{v}` is not a u64")))?,
            );
        }
    }
    Ok(o)
}
