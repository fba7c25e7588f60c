//! Configuration file layout and flag parsing helpers.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Contents of a `--config` file. Explicit flags take precedence over it.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output: Option<OutputConfig>,
    pub eval: Option<EvalConfig>,
    pub verify: Option<VerifyConfig>,
    pub converge: Option<ConvergeConfig>,
    pub scaling: Option<ScalingConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub x: Option<String>,
    pub y: Option<String>,
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub potential: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub suite: Option<String>,
    pub j_range: Option<String>,
    pub alpha_list: Option<Vec<f64>>,
    pub delta_list: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub function: Option<String>,
    pub lambda_list: Option<Vec<f64>>,
    pub grid: Option<String>,
    pub radius: Option<f64>,
    pub method: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub piece: Option<String>,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub j_range: Option<String>,
    pub trials: Option<usize>,
    pub spacing: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_end())))
    }
}

/// Parses `"r,theta"`.
pub fn parse_point(field: &str, s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Config(format!("{field}: expected \"r,theta\", got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    Ok((parts[0].parse().map_err(|_| bad())?, parts[1].parse().map_err(|_| bad())?))
}

/// Parses `"a..b"` (inclusive), `"a,b,c"` or a single integer.
pub fn parse_j_range(field: &str, s: &str) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::Config(format!("{field}: expected \"a..b\" or a comma list of integers, got {s:?}"));
    let js: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if js.is_empty() {
        return Err(bad());
    }
    Ok(js)
}

/// Parses `"NxM"` into `(nr, ntheta)`.
pub fn parse_grid(field: &str, s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Config(format!("{field}: expected \"NRxNTHETA\", got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Parses a seed in decimal or `0x` hexadecimal.
pub fn parse_seed(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).map_err(|e| e.to_string()),
        None => s.parse().map_err(|e: std::num::ParseIntError| e.to_string()),
    }
}

/// Requires `value` to satisfy `ok`, naming `field` otherwise.
pub fn check(field: &str, value: f64, ok: bool, rule: &str) -> Result<f64, CliError> {
    if ok && !value.is_nan() {
        Ok(value)
    } else {
        Err(CliError::Config(format!("{field}: {rule} (got {value})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_ranges() {
        assert_eq!(parse_j_range("j", "2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_j_range("j", "2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_j_range("j", "1,4").unwrap(), vec![1, 4]);
        assert!(parse_j_range("j", "5..2").is_err());
    }

    #[test]
    fn seeds_and_grids() {
        assert_eq!(parse_seed("0xAB01").unwrap(), 0xAB01);
        assert_eq!(parse_seed("17").unwrap(), 17);
        assert_eq!(parse_grid("g", "256x128").unwrap(), (256, 128));
        assert!(parse_grid("g", "256").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[converge]\npp = 2.0\n").is_err());
        let c: RunConfig = toml::from_str("seed = 0xAB01\n[converge]\np = inf\nlambda_list = [1.0, 2.0]\n").unwrap();
        assert_eq!(c.seed, Some(0xAB01));
        assert!(c.converge.unwrap().p.unwrap().is_infinite());
    }
}
