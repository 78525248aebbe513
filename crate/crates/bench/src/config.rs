//! `key=value` configuration files for instance generation.

use crate::generate::{GenerationSpec, LambdaSpec};
use crate::BenchError;

/// Parses `key=value` lines. Blank lines and `#` comments are skipped; keys
/// are case-sensitive.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, BenchError> {
    text.lines()
        .enumerate()
        .filter_map(|(n, raw)| {
            let line = raw.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then_some((n, line))
        })
        .map(|(n, line)| {
            let (k, v) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("config line {}: expected key=value", n + 1))
            })?;
            Ok((k.trim().to_owned(), v.trim().to_owned()))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, BenchError> {
    value
        .parse()
        .map_err(|_| BenchError::Config(format!("bad value `{value}` for `{key}`")))
}

/// Overrides fields of `spec`. Recognized keys: `T`, `W`, `K`, `P`, `rho`,
/// `sigma`, `noise_std`, `lambda` (fixed), `lambda_rel` (fraction of λ_max), `seed`.
pub fn apply_config(
    mut spec: GenerationSpec,
    pairs: &[(String, String)],
) -> Result<GenerationSpec, BenchError> {
    for (k, v) in pairs {
        match k.as_str() {
            "T" => spec.t = num(k, v)?,
            "W" => spec.w = num(k, v)?,
            "K" => spec.k = num(k, v)?,
            "P" => spec.p = num(k, v)?,
            "rho" => spec.rho = num(k, v)?,
            "sigma" => spec.sigma = num(k, v)?,
            "noise_std" => spec.noise_std = num(k, v)?,
            "lambda" => spec.lambda = LambdaSpec::Fixed(num(k, v)?),
            "lambda_rel" => spec.lambda = LambdaSpec::RelativeToMax(num(k, v)?),
            "seed" => spec.seed = num(k, v)?,
            _ => return Err(BenchError::Config(format!("unknown config key `{k}`"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}
