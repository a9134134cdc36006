//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! n_tx = 2
//! n_rx = 2
//! ebn0 = [0, 2, 4]
//! sir_db = 3          # or `none`
//! ```
//!
//! | key | default |
//! |-----|---------|
//! | `n_tx`, `n_rx`, `ebn0` | required |
//! | `tap_powers` | `[0.5, 0.5]` |
//! | `sir_db` | `none` (no interferer) |
//! | `cci_n_tx` | `n_tx` |
//! | `cci_tap_powers` | `tap_powers`, rescaled to the SIR |
//! | `cci_delta_tx`, `cci_delta_rx` | `0` |
//! | `cci_rank` | `full` |
//! | `rounds` | `3` |
//! | `turbo_iters` | `5` |
//! | `schemes` | `[proposed, llr_level]` |
//! | `frames` | `2000` |
//! | `seed` | `0` |
//! | `out` | `bler.csv` |
//! | `info_bits` | `512` |
//! | `early_exit` | `false` |

use std::fmt;
use std::path::PathBuf;

use crate::arq::{ArqConfig, Scheme};
use crate::channel::{CciProfile, ChannelProfile};

/// Parse or validation failure. `line` is 1-based; it is absent for
/// problems that are not tied to a line (such as a missing key).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct CciScenario {
    pub n_tx: usize,
    /// Relative tap powers; scaled to meet `sir_db`.
    pub tap_powers: Vec<f64>,
    pub delta_tx: f64,
    pub delta_rx: f64,
    pub rank: Option<usize>,
    pub sir_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub n_tx: usize,
    pub n_rx: usize,
    pub tap_powers: Vec<f64>,
    pub cci: Option<CciScenario>,
    pub ebn0_db: Vec<f64>,
    pub rounds: usize,
    pub turbo_iters: usize,
    pub schemes: Vec<Scheme>,
    pub frames: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub info_bits: usize,
    pub early_exit: bool,
}

impl Scenario {
    pub fn profile(&self) -> ChannelProfile {
        ChannelProfile::new(self.tap_powers.clone()).expect("validated at parse time")
    }

    /// Interferer profile with absolute tap powers, if any.
    pub fn cci_profile(&self) -> Option<CciProfile> {
        self.cci.as_ref().map(|c| {
            CciProfile {
                n_tx: c.n_tx,
                tap_powers: c.tap_powers.clone(),
                delta_tx: c.delta_tx,
                delta_rx: c.delta_rx,
                scatter_rank: c.rank,
            }
            .with_sir(c.sir_db, self.n_tx)
            .expect("validated at parse time")
        })
    }

    pub fn arq_config(&self, scheme: Scheme) -> ArqConfig {
        ArqConfig {
            max_rounds: self.rounds,
            turbo_iters: self.turbo_iters,
            scheme,
            early_exit: self.early_exit,
        }
    }
}

const KEYS: &[&str] = &[
    "n_tx",
    "n_rx",
    "tap_powers",
    "sir_db",
    "cci_n_tx",
    "cci_tap_powers",
    "cci_delta_tx",
    "cci_delta_rx",
    "cci_rank",
    "ebn0",
    "rounds",
    "turbo_iters",
    "schemes",
    "frames",
    "seed",
    "out",
    "info_bits",
    "early_exit",
];

struct Entry {
    line: usize,
    value: String,
}

struct Entries(Vec<(&'static str, Entry)>);

fn err(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.map(str::to_string),
        message: message.into(),
    }
}

impl Entries {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.0.iter().find(|(k, _)| *k == key).map(|(_, e)| e)
    }

    fn parse<T>(
        &self,
        key: &'static str,
        f: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|e| f(&e.value).map_err(|m| err(Some(e.line), Some(key), m)))
            .transpose()
    }

    fn required<T>(
        &self,
        key: &'static str,
        f: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, ConfigError> {
        self.parse(key, f)?
            .ok_or_else(|| err(None, Some(key), "required key is missing"))
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.get(key).map(|e| e.line)
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be a positive integer".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("'{s}' is not a positive integer")),
    }
}

fn real(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("'{s}' is not a finite number"))
}

fn list<T>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let inner = match s.strip_prefix('[') {
        Some(rest) => rest
            .strip_suffix(']')
            .ok_or_else(|| "unterminated list".to_string())?,
        None => s,
    };
    let items: Vec<T> = inner
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(f)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("list must not be empty".into());
    }
    Ok(items)
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("'{s}' is not true or false")),
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|x| x.strip_suffix('"'))
        .unwrap_or(s)
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let mut entries = Entries(Vec::new());
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| err(Some(line), None, "expected `key = value`"))?;
        let k = k.trim();
        let key = KEYS
            .iter()
            .copied()
            .find(|&known| known == k)
            .ok_or_else(|| err(Some(line), Some(k), "unknown key"))?;
        if entries.get(key).is_some() {
            return Err(err(Some(line), Some(key), "duplicate key"));
        }
        entries.0.push((
            key,
            Entry {
                line,
                value: v.trim().to_string(),
            },
        ));
    }

    let n_tx = entries.required("n_tx", positive)?;
    let n_rx = entries.required("n_rx", positive)?;
    let ebn0_db = entries.required("ebn0", |s| list(s, real))?;
    let tap_powers = entries
        .parse("tap_powers", |s| list(s, real))?
        .unwrap_or_else(|| vec![0.5, 0.5]);
    if let Err(e) = ChannelProfile::new(tap_powers.clone()) {
        return Err(err(
            entries.line("tap_powers"),
            Some("tap_powers"),
            e.to_string(),
        ));
    }

    let sir = entries.parse("sir_db", |s| {
        if s == "none" {
            Ok(None)
        } else {
            real(s).map(Some)
        }
    })?;
    let cci_keys = [
        "cci_n_tx",
        "cci_tap_powers",
        "cci_delta_tx",
        "cci_delta_rx",
        "cci_rank",
    ];
    let cci = match sir.flatten() {
        None => {
            if let Some(k) = cci_keys.iter().find(|k| entries.get(k).is_some()) {
                return Err(err(
                    entries.line(k),
                    Some(k),
                    "interferer key given without sir_db",
                ));
            }
            None
        }
        Some(sir_db) => {
            let c_n_tx = entries.parse("cci_n_tx", positive)?.unwrap_or(n_tx);
            let c_taps = entries
                .parse("cci_tap_powers", |s| list(s, real))?
                .unwrap_or_else(|| tap_powers.clone());
            if c_taps.iter().any(|&p| p < 0.0) || !(c_taps.iter().sum::<f64>() > 0.0) {
                return Err(err(
                    entries.line("cci_tap_powers"),
                    Some("cci_tap_powers"),
                    "powers must be non-negative and not all zero",
                ));
            }
            let delta = |key: &'static str| -> Result<f64, ConfigError> {
                Ok(entries
                    .parse(key, |s| {
                        let v = real(s)?;
                        if (0.0..1.0).contains(&v) {
                            Ok(v)
                        } else {
                            Err("correlation must lie in [0, 1)".into())
                        }
                    })?
                    .unwrap_or(0.0))
            };
            let delta_tx = delta("cci_delta_tx")?;
            let delta_rx = delta("cci_delta_rx")?;
            let full = c_n_tx.min(n_rx);
            let rank = entries
                .parse("cci_rank", |s| {
                    if s == "full" {
                        return Ok(None);
                    }
                    let r = positive(s)?;
                    if r > full {
                        return Err(format!("rank {r} exceeds min(cci_n_tx, n_rx) = {full}"));
                    }
                    Ok((r < full).then_some(r))
                })?
                .flatten();
            Some(CciScenario {
                n_tx: c_n_tx,
                tap_powers: c_taps,
                delta_tx,
                delta_rx,
                rank,
                sir_db,
            })
        }
    };

    let rounds = entries.parse("rounds", positive)?.unwrap_or(3);
    let turbo_iters = entries.parse("turbo_iters", positive)?.unwrap_or(5);
    let schemes = entries
        .parse("schemes", |s| {
            list(s, |x| x.parse::<Scheme>().map_err(|e| e.to_string()))
        })?
        .unwrap_or_else(|| Scheme::ALL.to_vec());
    let frames = entries.parse("frames", positive)?.unwrap_or(2000);
    let seed = entries
        .parse("seed", |s| {
            s.parse::<u64>()
                .map_err(|_| format!("'{s}' is not a non-negative integer"))
        })?
        .unwrap_or(0);
    let out = entries
        .parse("out", |s| {
            let p = unquote(s);
            if p.is_empty() {
                Err("path must not be empty".to_string())
            } else {
                Ok(PathBuf::from(p))
            }
        })?
        .unwrap_or_else(|| PathBuf::from("bler.csv"));
    let info_bits = entries.parse("info_bits", positive)?.unwrap_or(512);
    if (2 * (info_bits + 4)) % (2 * n_tx) != 0 {
        return Err(err(
            entries.line("info_bits"),
            Some("info_bits"),
            format!(
                "{} code bits do not fill {n_tx} antennas",
                2 * (info_bits + 4)
            ),
        ));
    }
    let early_exit = entries.parse("early_exit", boolean)?.unwrap_or(false);

    Ok(Scenario {
        n_tx,
        n_rx,
        tap_powers,
        cci,
        ebn0_db,
        rounds,
        turbo_iters,
        schemes,
        frames,
        seed,
        out,
        info_bits,
        early_exit,
    })
}
