//! Run configuration: plain `key = value` text, overridable from flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sparserec::evaluation::DEFAULT_FAR_TARGETS;
use sparserec::{Classifier, SacrcConfig, ScoreRule};

use crate::error::{CliError, CliResult};

/// Largest number of principal components the automatic setting keeps.
pub const AUTO_PCA_CAP: usize = 1300;

pub const DEFAULT_SEED: u64 = 42;

pub const CONFIG_KEYS: [&str; 9] = [
    "lambda",
    "sparsity_k",
    "residual_tol",
    "pca",
    "classifier",
    "score",
    "protocol",
    "far_targets",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PcaSetting {
    /// `min(1300, feasible)` components.
    #[default]
    Auto,
    Fixed(usize),
    Retain(f64),
    Off,
}

impl FromStr for PcaSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(PcaSetting::Auto),
            "off" | "none" => Ok(PcaSetting::Off),
            _ => {
                if let Some(rho) = s.strip_prefix("retain:") {
                    let rho: f64 = rho.parse().map_err(|e| format!("pca `{s}`: {e}"))?;
                    if !(rho > 0.0 && rho <= 1.0) {
                        return Err(format!("pca retain fraction {rho} must lie in (0, 1]"));
                    }
                    return Ok(PcaSetting::Retain(rho));
                }
                match s.parse::<usize>() {
                    Ok(0) => Err("pca component count must be positive".into()),
                    Ok(k) => Ok(PcaSetting::Fixed(k)),
                    Err(_) => Err(format!("pca `{s}`: expected K, retain:<fraction>, auto or off")),
                }
            }
        }
    }
}

impl fmt::Display for PcaSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcaSetting::Auto => f.write_str("auto"),
            PcaSetting::Fixed(k) => write!(f, "{k}"),
            PcaSetting::Retain(rho) => write!(f, "retain:{rho}"),
            PcaSetting::Off => f.write_str("off"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ProtocolSetting {
    #[default]
    AllVsAll,
    Pairs(PathBuf),
}

impl FromStr for ProtocolSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all-vs-all" => Ok(ProtocolSetting::AllVsAll),
            _ => match s.strip_prefix("pairs:") {
                Some(path) if !path.is_empty() => Ok(ProtocolSetting::Pairs(PathBuf::from(path))),
                _ => Err(format!("protocol `{s}`: expected all-vs-all or pairs:<file>")),
            },
        }
    }
}

impl fmt::Display for ProtocolSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolSetting::AllVsAll => f.write_str("all-vs-all"),
            ProtocolSetting::Pairs(p) => write!(f, "pairs:{}", p.display()),
        }
    }
}

/// Every tunable of a run. `None` hyperparameters fall back to the values
/// stored in the model (or the library defaults when fitting).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: Option<f64>,
    pub sparsity_k: Option<usize>,
    pub residual_tol: Option<f64>,
    pub pca: PcaSetting,
    pub classifier: Classifier,
    pub score: ScoreRule,
    pub protocol: ProtocolSetting,
    pub far_targets: Vec<f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            sparsity_k: None,
            residual_tol: None,
            pca: PcaSetting::Auto,
            classifier: Classifier::Sacrc,
            score: ScoreRule::ClassEvidence,
            protocol: ProtocolSetting::AllVsAll,
            far_targets: DEFAULT_FAR_TARGETS.to_vec(),
            seed: DEFAULT_SEED,
        }
    }
}

fn parse_nonneg(key: &str, value: &str) -> Result<f64, String> {
    let v: f64 = value.parse().map_err(|e| format!("{key} `{value}`: {e}"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("{key} = {v} must be finite and >= 0"));
    }
    Ok(v)
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "lambda" => self.lambda = Some(parse_nonneg("lambda", value)?),
            "residual_tol" => self.residual_tol = Some(parse_nonneg("residual_tol", value)?),
            "sparsity_k" => {
                self.sparsity_k = match value {
                    "auto" => None,
                    v => match v.parse::<usize>() {
                        Ok(0) | Err(_) => return Err(format!("sparsity_k `{v}`: expected a positive integer or auto")),
                        Ok(k) => Some(k),
                    },
                }
            }
            "pca" => self.pca = value.parse()?,
            "classifier" => self.classifier = value.parse().map_err(|e: sparserec::Error| e.to_string())?,
            "score" => self.score = value.parse().map_err(|e: sparserec::Error| e.to_string())?,
            "protocol" => self.protocol = value.parse()?,
            "far_targets" => {
                let targets = value
                    .split(',')
                    .map(|t| {
                        let t = t.trim();
                        match t.parse::<f64>() {
                            Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
                            _ => Err(format!("far_targets entry `{t}` must be a number in (0, 1)")),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                self.far_targets = targets;
            }
            "seed" => self.seed = value.parse().map_err(|e| format!("seed `{value}`: {e}"))?,
            other => {
                return Err(format!(
                    "unknown key `{other}` (expected one of: {})",
                    CONFIG_KEYS.join(", ")
                ))
            }
        }
        Ok(())
    }

    /// Parses config text on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            self.set(key, value).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Hyperparameters for a dictionary of `num_atoms` atoms: explicit
    /// settings override `base`.
    pub fn resolve(&self, base: SacrcConfig) -> SacrcConfig {
        SacrcConfig {
            lambda: self.lambda.unwrap_or(base.lambda),
            sparsity_k: self.sparsity_k.unwrap_or(base.sparsity_k),
            residual_tol: self.residual_tol.unwrap_or(base.residual_tol),
        }
    }

    /// Fully resolved settings, one `(key, value)` pair per line of a report.
    /// `components` is the PCA output dimension actually used (`None` when
    /// PCA is off).
    pub fn echo(&self, resolved: &SacrcConfig, components: Option<usize>) -> Vec<(&'static str, String)> {
        vec![
            ("lambda", resolved.lambda.to_string()),
            ("sparsity_k", resolved.sparsity_k.to_string()),
            ("residual_tol", resolved.residual_tol.to_string()),
            ("pca", self.pca.to_string()),
            ("pca_components", components.map_or("off".into(), |k| k.to_string())),
            ("classifier", self.classifier.name().into()),
            ("score", self.score.name().into()),
            ("protocol", self.protocol.to_string()),
            (
                "far_targets",
                self.far_targets.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let cfg = RunConfig::parse(
            "# run\nlambda = 0.1\nsparsity_k=7\nresidual_tol = 1e-8\npca = retain:0.99\n\
             classifier = knn1\nscore = residual\nprotocol = pairs:p.csv\nfar_targets = 0.1, 0.05\nseed = 9 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.lambda, Some(0.1));
        assert_eq!(cfg.sparsity_k, Some(7));
        assert_eq!(cfg.residual_tol, Some(1e-8));
        assert_eq!(cfg.pca, PcaSetting::Retain(0.99));
        assert_eq!(cfg.classifier, Classifier::Knn1);
        assert_eq!(cfg.score, ScoreRule::Residual);
        assert_eq!(cfg.protocol, ProtocolSetting::Pairs("p.csv".into()));
        assert_eq!(cfg.far_targets, vec![0.1, 0.05]);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = RunConfig::parse("lambda = 0.1\nlamda = 2\n").unwrap_err();
        assert!(err.contains("line 2") && err.contains("lamda"), "{err}");
        for bad in [
            "lambda = -1",
            "sparsity_k = 0",
            "pca = 0",
            "pca = retain:1.5",
            "classifier = svm",
            "score = z",
            "protocol = pairs:",
            "far_targets = 0.1,1",
            "seed = -3",
            "no equals sign",
        ] {
            assert!(RunConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn settings_round_trip_through_display() {
        for s in ["auto", "off", "37", "retain:0.95"] {
            assert_eq!(s.parse::<PcaSetting>().unwrap().to_string(), s);
        }
        for s in ["all-vs-all", "pairs:dir/x.csv"] {
            assert_eq!(s.parse::<ProtocolSetting>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn resolve_and_echo() {
        let mut cfg = RunConfig::default();
        cfg.set("lambda", "0.5").unwrap();
        let r = cfg.resolve(SacrcConfig::for_atoms(20));
        assert_eq!((r.lambda, r.sparsity_k, r.residual_tol), (0.5, 20, 1e-6));
        let echo = cfg.echo(&r, Some(12));
        let keys: Vec<_> = echo.iter().map(|(k, _)| *k).collect();
        assert_eq!(
            keys,
            [
                "lambda",
                "sparsity_k",
                "residual_tol",
                "pca",
                "pca_components",
                "classifier",
                "score",
                "protocol",
                "far_targets",
                "seed"
            ]
        );
        assert_eq!(echo[4].1, "12");
        // the echo parses back (minus the derived component count)
        let text: String = echo
            .iter()
            .filter(|(k, _)| *k != "pca_components")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.resolve(SacrcConfig::for_atoms(3)), r);
    }
}
