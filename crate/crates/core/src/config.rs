//! Run configuration: UTF-8 text, one `key = value` per line, `#`
//! comments, dotted keys for nesting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::market::{validate_params, MarketParams};
use crate::montecarlo::SimConfig;
use crate::utility::UtilitySpec;

const KNOWN_KEYS: &[&str] = &[
    "r",
    "mu",
    "sigma",
    "beta",
    "utility.kind",
    "utility.p",
    "utility.eta",
    "utility.K",
    "utility.grid_file",
    "wealth",
    "phi",
    "tol_phi",
    "tol_root",
    "max_iter",
    "strict",
    "penalty",
    "seed",
    "n_paths",
    "dt",
    "t_max",
    "antithetic",
    "format",
    "out_path",
    "policy.points",
    "frontier.points",
    "frontier.p_min",
    "frontier.p_max",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(invalid(format!(
                "format must be json or csv, got {other:?}"
            ))),
        }
    }
}

/// Penalty override: skip calibration and solve at a fixed `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyChoice {
    Value(f64),
    /// The Case iv threshold `P*`.
    Pstar,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub market: MarketParams,
    pub utility: UtilitySpec,
    pub wealth: f64,
    pub phi: f64,
    pub tol_phi: f64,
    pub tol_root: f64,
    pub max_iter: usize,
    pub strict: bool,
    pub penalty: Option<PenaltyChoice>,
    pub sim: SimConfig,
    pub format: Format,
    pub out_path: Option<PathBuf>,
    pub policy_points: usize,
    pub frontier_points: usize,
    pub frontier_range: (Option<f64>, Option<f64>),
}

/// Splits text into `key → value`, rejecting malformed lines, duplicates
/// and unknown keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            invalid(format!(
                "line {}: expected `key = value`, got {raw:?}",
                n + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        if !KNOWN_KEYS.contains(&key) {
            return Err(invalid(format!("line {}: unknown key {key:?}", n + 1)));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(invalid(format!("line {}: duplicate key {key:?}", n + 1)));
        }
    }
    Ok(out)
}

struct Pairs<'a>(&'a BTreeMap<String, String>);

impl Pairs<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.parse(key)?
            .ok_or_else(|| invalid(format!("missing required key {key:?}")))
    }

    fn or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parse(key)?.unwrap_or(default))
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str_in(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `text`; relative `utility.grid_file` paths resolve against `base`.
    pub fn from_str_in(text: &str, base: &Path) -> Result<Self> {
        let map = parse_pairs(text)?;
        let kv = Pairs(&map);
        let market = validate_params(MarketParams {
            r: kv.required("r")?,
            mu: kv.required("mu")?,
            sigma: kv.required("sigma")?,
            beta: kv.required("beta")?,
        })?;
        let utility = parse_utility(&kv, base)?;
        let wealth = kv.required("wealth")?;
        if !(wealth > 0.0 && wealth.is_finite()) {
            return Err(invalid(format!(
                "wealth must be positive and finite, got {wealth}"
            )));
        }
        let phi = kv.or("phi", 0.0)?;
        if !(0.0..=1.0).contains(&phi) {
            return Err(invalid(format!("phi must lie in [0, 1], got {phi}")));
        }
        let tol_phi = kv.or("tol_phi", 1e-6)?;
        let tol_root = kv.or("tol_root", 1e-14)?;
        if !(tol_phi > 0.0 && tol_phi < 1.0) || !(tol_root > 0.0 && tol_root < 1.0) {
            return Err(invalid("tol_phi and tol_root must lie in (0, 1)"));
        }
        let penalty = match kv.raw("penalty") {
            None => None,
            Some("pstar") => Some(PenaltyChoice::Pstar),
            Some(_) => {
                let p: f64 = kv.required("penalty")?;
                if !p.is_finite() {
                    return Err(invalid("penalty must be finite"));
                }
                Some(PenaltyChoice::Value(p))
            }
        };
        let sim = SimConfig {
            n_paths: kv.parse("n_paths")?.unwrap_or(100_000),
            dt: kv.or("dt", 1e-3)?,
            t_max: kv.parse("t_max")?,
            seed: kv.parse("seed")?.unwrap_or(0),
            antithetic: kv.parse("antithetic")?.unwrap_or(true),
            ..SimConfig::default()
        };
        sim.validate()?;
        let policy_points = kv.parse("policy.points")?.unwrap_or(101);
        let frontier_points = kv.parse("frontier.points")?.unwrap_or(50);
        if policy_points < 2 || frontier_points < 2 {
            return Err(invalid(
                "policy.points and frontier.points must be at least 2",
            ));
        }
        Ok(RunConfig {
            market,
            utility,
            wealth,
            phi,
            tol_phi,
            tol_root,
            max_iter: kv.parse("max_iter")?.unwrap_or(200),
            strict: kv.parse("strict")?.unwrap_or(false),
            penalty,
            sim,
            format: kv.parse("format")?.unwrap_or(Format::Json),
            out_path: kv.raw("out_path").map(PathBuf::from),
            policy_points,
            frontier_points,
            frontier_range: (kv.parse("frontier.p_min")?, kv.parse("frontier.p_max")?),
        })
    }
}

fn parse_utility(kv: &Pairs, base: &Path) -> Result<UtilitySpec> {
    let kind = kv
        .raw("utility.kind")
        .ok_or_else(|| invalid("missing required key \"utility.kind\""))?;
    match kind {
        "power" => UtilitySpec::power(kv.required("utility.p")?),
        "log" => Ok(UtilitySpec::log()),
        "shifted_power" => UtilitySpec::shifted_power(
            kv.required("utility.p")?,
            kv.required("utility.eta")?,
            kv.or("utility.K", 0.0)?,
        ),
        "custom" => {
            let file = kv
                .raw("utility.grid_file")
                .ok_or_else(|| invalid("custom utility needs utility.grid_file"))?;
            let path = base.join(file);
            let (c, m) = read_grid(&path)?;
            UtilitySpec::custom(&c, &m, kv.or("utility.K", 0.0)?)
        }
        other => Err(invalid(format!(
            "utility.kind must be power, log, shifted_power or custom, got {other:?}"
        ))),
    }
}

/// Reads a two-column CSV `c,marginal` with a header row.
pub fn read_grid(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = |e: csv::Error| invalid(format!("grid file {}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(bad)?;
    let mut c = Vec::new();
    let mut m = Vec::new();
    for row in reader.deserialize::<(f64, f64)>() {
        let (ci, mi) = row.map_err(bad)?;
        c.push(ci);
        m.push(mi);
    }
    Ok((c, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "r = 0.02\nmu = 0.06\nsigma = 0.2\nbeta = 0.04\nwealth = 10\n";

    fn parse(extra: &str) -> Result<RunConfig> {
        RunConfig::from_str_in(&format!("{BASE}{extra}"), Path::new("."))
    }

    #[test]
    fn parses_comments_and_defaults() {
        let cfg = parse("# utility\nutility.kind = power  # CRRA\nutility.p = 0.5\n").unwrap();
        assert_eq!(cfg.utility, UtilitySpec::power(0.5).unwrap());
        assert_eq!(cfg.phi, 0.0);
        assert_eq!(cfg.tol_phi, 1e-6);
        assert_eq!(cfg.sim.n_paths, 100_000);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.policy_points, 101);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let k = "utility.kind = log\n";
        assert!(parse(&format!("{k}colour = red\n"))
            .unwrap_err()
            .to_string()
            .contains("unknown key"));
        assert!(parse(&format!("{k}phi = 0.1\nphi = 0.2\n"))
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        assert!(parse(&format!("{k}phi\n")).is_err());
        assert!(parse(&format!("{k}phi = lots\n")).is_err());
        assert!(parse("utility.kind = cubic\n").is_err());
        assert!(parse(&format!("{k}format = xml\n")).is_err());
    }

    #[test]
    fn invalid_market_is_rejected() {
        let text =
            "r = 0.02\nmu = 0.01\nsigma = 0.2\nbeta = 0.04\nwealth = 1\nutility.kind = log\n";
        assert!(matches!(
            RunConfig::from_str_in(text, Path::new(".")),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn penalty_override() {
        let cfg = parse("utility.kind = log\npenalty = pstar\n").unwrap();
        assert_eq!(cfg.penalty, Some(PenaltyChoice::Pstar));
        let cfg = parse("utility.kind = log\npenalty = -2.5\n").unwrap();
        assert_eq!(cfg.penalty, Some(PenaltyChoice::Value(-2.5)));
    }
}
