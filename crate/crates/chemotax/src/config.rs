//! `key = value` experiment files, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chemotax_core::evolution::Scheme;
use chemotax_core::kinetics::{ExpSaturating, KineticsSpec};
use chemotax_core::ModelParams;

use crate::error::{CliError, Result};

/// Every key the parser accepts, in header order.
pub const KEYS: &[&str] = &[
    "kinetics",
    "D1",
    "D2",
    "chi",
    "ubar",
    "beta",
    "L",
    "phi_decay",
    "h_saturation",
    "N",
    "k",
    "kmax",
    "chi_max",
    "dt",
    "t_final",
    "eps",
    "seed",
    "scheme",
    "points",
    "snapshots",
    "probe",
    "out",
];

pub const REQUIRED: &[&str] = &["D1", "D2", "chi", "ubar", "beta", "L"];

pub const DEFAULT_N: usize = 200;

/// Raw key/value pairs, before interpretation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected `key = value`, got `{line}`",
                    no + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::config(key, "unknown key"));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::config(key, "given more than once"));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Flags win over whatever the file said.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(CliError::config(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Fills `key` only when it is absent.
    pub fn set_default(&mut self, key: &str, value: &str) {
        self.entries
            .entry(key.to_string())
            .or_insert_with(|| value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub n: usize,
    pub k: u32,
    pub kmax: Option<u32>,
    pub chi_max: Option<f64>,
    pub dt: f64,
    pub t_final: f64,
    pub eps: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Sweep schedule length.
    pub points: usize,
    /// χ values at which `continue` writes full states.
    pub snapshots: Vec<f64>,
    /// `simulate` probes a branch point instead of the constant state.
    pub probe: bool,
    pub out_dir: PathBuf,
    /// Every key with its effective value, for output headers.
    pub resolved: Vec<(String, String)>,
}

fn parse_f64(raw: &RawConfig, key: &str) -> Result<Option<f64>> {
    raw.get(key)
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::config(key, format!("`{s}` is not a number")))
        })
        .transpose()
}

fn parse_int<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<Option<T>> {
    raw.get(key)
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::config(key, format!("`{s}` is not a nonnegative integer")))
        })
        .transpose()
}

fn required(raw: &RawConfig, key: &str) -> Result<f64> {
    parse_f64(raw, key)?.ok_or_else(|| CliError::config(key, "missing required key"))
}

fn positive(key: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::config(key, format!("must be positive, got {x}")))
    }
}

fn nonnegative(key: &str, x: f64) -> Result<f64> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::config(key, format!("must be nonnegative, got {x}")))
    }
}

impl ExperimentConfig {
    /// `env_out` is the value of `CHEMOTAX_OUT`, used when `out` is not set.
    pub fn resolve(raw: &RawConfig, env_out: Option<&str>) -> Result<Self> {
        let d1 = positive("D1", required(raw, "D1")?)?;
        let d2 = positive("D2", required(raw, "D2")?)?;
        let chi = nonnegative("chi", required(raw, "chi")?)?;
        let ubar = positive("ubar", required(raw, "ubar")?)?;
        let beta = positive("beta", required(raw, "beta")?)?;
        let length = positive("L", required(raw, "L")?)?;

        let family = raw.get("kinetics").unwrap_or("linear");
        let kinetics = match family {
            "linear" => {
                for key in ["phi_decay", "h_saturation"] {
                    if raw.get(key).is_some() {
                        return Err(CliError::config(key, "only used with `kinetics = custom`"));
                    }
                }
                KineticsSpec::linear(beta)?
            }
            "custom" => {
                let gamma = nonnegative("phi_decay", parse_f64(raw, "phi_decay")?.unwrap_or(0.0))?;
                let kappa =
                    nonnegative("h_saturation", parse_f64(raw, "h_saturation")?.unwrap_or(0.0))?;
                ExpSaturating { gamma, beta, kappa }.into_spec()?
            }
            other => {
                return Err(CliError::config(
                    "kinetics",
                    format!("expected `linear` or `custom`, got `{other}`"),
                ))
            }
        };
        let params = ModelParams::new(d1, d2, chi, ubar, length, kinetics)?;

        let n = parse_int::<usize>(raw, "N")?.unwrap_or(DEFAULT_N);
        if n < 2 {
            return Err(CliError::config("N", "need at least 2 cells"));
        }
        let k = parse_int::<u32>(raw, "k")?.unwrap_or(1);
        if k == 0 {
            return Err(CliError::config("k", "mode 0 never bifurcates"));
        }
        let kmax = parse_int::<u32>(raw, "kmax")?;
        if kmax == Some(0) {
            return Err(CliError::config("kmax", "must be at least 1"));
        }
        let chi_max = parse_f64(raw, "chi_max")?
            .map(|x| positive("chi_max", x))
            .transpose()?;
        let dt = positive("dt", parse_f64(raw, "dt")?.unwrap_or(1e-3))?;
        let t_final = positive("t_final", parse_f64(raw, "t_final")?.unwrap_or(10.0))?;
        if t_final < dt {
            return Err(CliError::config("t_final", "must be at least dt"));
        }
        let eps = nonnegative("eps", parse_f64(raw, "eps")?.unwrap_or(1e-3))?;
        let seed = parse_int::<u64>(raw, "seed")?.unwrap_or(0);
        let scheme = match raw.get("scheme").unwrap_or("semi-implicit") {
            "semi-implicit" => Scheme::SemiImplicit,
            "implicit" => Scheme::FullyImplicit,
            other => {
                return Err(CliError::config(
                    "scheme",
                    format!("expected `semi-implicit` or `implicit`, got `{other}`"),
                ))
            }
        };
        let points = parse_int::<usize>(raw, "points")?.unwrap_or(24);
        if points < 2 {
            return Err(CliError::config("points", "need at least 2"));
        }
        let snapshots = match raw.get("snapshots") {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| *x > 0.0 && x.is_finite())
                        .ok_or_else(|| {
                            CliError::config("snapshots", format!("`{s}` is not a positive χ"))
                        })
                })
                .collect::<Result<_>>()?,
        };
        let probe = match raw.get("probe").unwrap_or("false") {
            "true" => true,
            "false" => false,
            other => {
                return Err(CliError::config(
                    "probe",
                    format!("expected `true` or `false`, got `{other}`"),
                ))
            }
        };
        let out_dir = PathBuf::from(
            raw.get("out")
                .or(env_out.filter(|s| !s.is_empty()))
                .unwrap_or("chemotax-out"),
        );

        let mut resolved: Vec<(String, String)> = vec![
            ("kinetics".into(), family.into()),
            ("D1".into(), d1.to_string()),
            ("D2".into(), d2.to_string()),
            ("chi".into(), chi.to_string()),
            ("ubar".into(), ubar.to_string()),
            ("beta".into(), beta.to_string()),
            ("L".into(), length.to_string()),
        ];
        if family == "custom" {
            for key in ["phi_decay", "h_saturation"] {
                resolved.push((key.into(), raw.get(key).unwrap_or("0").into()));
            }
        }
        resolved.extend([
            ("N".into(), n.to_string()),
            ("k".into(), k.to_string()),
            (
                "kmax".into(),
                kmax.map_or("auto".into(), |x| x.to_string()),
            ),
            (
                "chi_max".into(),
                chi_max.map_or("auto".into(), |x| x.to_string()),
            ),
            ("dt".into(), dt.to_string()),
            ("t_final".into(), t_final.to_string()),
            ("eps".into(), eps.to_string()),
            ("seed".into(), seed.to_string()),
            ("scheme".into(), raw.get("scheme").unwrap_or("semi-implicit").into()),
            ("points".into(), points.to_string()),
            (
                "snapshots".into(),
                snapshots
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("probe".into(), probe.to_string()),
        ]);

        Ok(Self {
            params,
            n,
            k,
            kmax,
            chi_max,
            dt,
            t_final,
            eps,
            seed,
            scheme,
            points,
            snapshots,
            probe,
            out_dir,
            resolved,
        })
    }
}
