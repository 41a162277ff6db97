//! Solver settings from flags, a `key=value` file and per-problem defaults.

use std::path::Path;
use std::time::Duration;

use usbs::bundle::SolverConfig;

use crate::CliError;

/// Settings that may come from flags or the config file; unset fields fall
/// through to the next source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub kc: Option<usize>,
    pub kp: Option<usize>,
    pub sketch_rank: Option<usize>,
    pub eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub max_time: Option<f64>,
    pub seed: Option<u64>,
    pub linf: Option<bool>,
}

impl Overrides {
    /// `self` wins over `other`.
    pub fn or(self, other: Overrides) -> Overrides {
        Overrides {
            rho: self.rho.or(other.rho),
            beta: self.beta.or(other.beta),
            kc: self.kc.or(other.kc),
            kp: self.kp.or(other.kp),
            sketch_rank: self.sketch_rank.or(other.sketch_rank),
            eps: self.eps.or(other.eps),
            max_iters: self.max_iters.or(other.max_iters),
            max_time: self.max_time.or(other.max_time),
            seed: self.seed.or(other.seed),
            linf: self.linf.or(other.linf),
        }
    }

    pub fn apply(&self, mut cfg: SolverConfig) -> Result<SolverConfig, CliError> {
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.kc {
            cfg.k_c = v;
        }
        if let Some(v) = self.kp {
            cfg.k_p = v;
        }
        if let Some(v) = self.sketch_rank {
            cfg.sketch_rank = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.max_time {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("max-time must be a non-negative number of seconds, got {v}")));
            }
            cfg.max_time = Some(Duration::from_secs_f64(v));
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.linf {
            cfg.linf_check = v;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("config line {line}: bad value '{v}' for '{key}'")))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_str(text: &str) -> Result<Overrides, CliError> {
    let mut o = Overrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {line}: expected key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        match k.replace('_', "-").as_str() {
            "rho" => o.rho = Some(parse_value(line, k, v)?),
            "beta" => o.beta = Some(parse_value(line, k, v)?),
            "kc" => o.kc = Some(parse_value(line, k, v)?),
            "kp" => o.kp = Some(parse_value(line, k, v)?),
            "sketch-rank" => o.sketch_rank = Some(parse_value(line, k, v)?),
            "eps" => o.eps = Some(parse_value(line, k, v)?),
            "max-iters" => o.max_iters = Some(parse_value(line, k, v)?),
            "max-time" => o.max_time = Some(parse_value(line, k, v)?),
            "seed" => o.seed = Some(parse_value(line, k, v)?),
            "linf" => o.linf = Some(parse_value(line, k, v)?),
            _ => return Err(CliError::Usage(format!("config line {line}: unknown key '{k}'"))),
        }
    }
    Ok(o)
}

pub fn parse_config(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let o = parse_config_str("# defaults\nrho = 0.02\nmax_iters=5 # short\n\nsketch-rank=3\nlinf=true\n").unwrap();
        assert_eq!(o.rho, Some(0.02));
        assert_eq!(o.max_iters, Some(5));
        assert_eq!(o.sketch_rank, Some(3));
        assert_eq!(o.linf, Some(true));
        assert!(parse_config_str("bogus=1").is_err());
        assert!(parse_config_str("rho").is_err());
        assert!(parse_config_str("rho=abc").is_err());
    }

    #[test]
    fn precedence() {
        let flags = Overrides {
            rho: Some(1.0),
            ..Overrides::default()
        };
        let file = Overrides {
            rho: Some(2.0),
            eps: Some(0.5),
            ..Overrides::default()
        };
        let cfg = flags.or(file).apply(SolverConfig::qap(3)).unwrap();
        assert_eq!(cfg.rho, 1.0);
        assert_eq!(cfg.eps, 0.5);
        assert_eq!(cfg.k_c, 2);
        let bad = Overrides {
            beta: Some(1.5),
            ..Overrides::default()
        };
        assert!(bad.apply(SolverConfig::default()).is_err());
    }
}
