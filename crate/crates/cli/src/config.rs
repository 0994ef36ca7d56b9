//! Run configuration: flat key=value config files with command-line
//! overrides, validated into a concrete plan.

use dephasing_chain::model::DiagonalInitialState;
use dephasing_chain::ChainParams;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ed,
    TransferTalbot,
    TransferContour,
    Asymptotic,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "ed" => Ok(Method::Ed),
            "transfer-talbot" => Ok(Method::TransferTalbot),
            "transfer-contour" => Ok(Method::TransferContour),
            "asymptotic" => Ok(Method::Asymptotic),
            other => Err(format!(
                "unknown method '{other}' (expected ed, transfer-talbot, transfer-contour or asymptotic)"
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Ed => "ed",
            Method::TransferTalbot => "transfer-talbot",
            Method::TransferContour => "transfer-contour",
            Method::Asymptotic => "asymptotic",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub enum Initial {
    Delta,
    DomainWall,
    CustomCsv(String),
}

impl Initial {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "delta" => Ok(Initial::Delta),
            "domain-wall" => Ok(Initial::DomainWall),
            other => {
                if let Some(path) = other.strip_prefix("csv:") {
                    Ok(Initial::CustomCsv(path.to_string()))
                } else {
                    Err(format!("unknown initial state '{other}' (delta, domain-wall, csv:PATH)"))
                }
            }
        }
    }

    pub fn build(&self, sites: usize) -> Result<DiagonalInitialState, String> {
        match self {
            Initial::Delta => DiagonalInitialState::delta(sites).map_err(|e| e.to_string()),
            Initial::DomainWall => {
                DiagonalInitialState::domain_wall(sites).map_err(|e| e.to_string())
            }
            Initial::CustomCsv(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {path}: {e}"))?;
                let s = DiagonalInitialState::from_csv(&text).map_err(|e| e.to_string())?;
                if s.sites() != sites {
                    return Err(format!(
                        "initial-state csv has {} sites but L = {sites}",
                        s.sites()
                    ));
                }
                Ok(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSpacing {
    Linear,
    Log,
}

/// Fully resolved run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ChainParams,
    pub initial: Initial,
    pub times: Vec<f64>,
    pub method: Method,
    pub nq: usize,
    pub lmax: usize,
    pub output: String,
    pub threads: Option<usize>,
    pub smooth: Option<usize>,
    /// the key=value pairs this config resolved from, for the manifest
    pub resolved: BTreeMap<String, String>,
}

/// Layered raw settings: defaults < config file < command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub map: BTreeMap<String, String>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read config: {e}"))?;
        let mut map = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value, got '{line}'", ln + 1))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Overrides { map })
    }

    pub fn set(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            self.map.insert(key.to_string(), v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, String>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("bad value for {key}='{v}': {e}")),
        }
    }

    /// Resolve into a concrete configuration, applying the preset first.
    pub fn resolve(mut self) -> Result<RunConfig, String> {
        if let Some(preset) = self.map.get("preset").cloned() {
            apply_preset(&preset, &mut self.map)?;
        }
        let sites: usize = self.parse_or("L", 64)?;
        let j: f64 = self.parse_or("J", 1.0)?;
        let gamma: f64 = self.parse_or("gamma", 0.0)?;
        let params = ChainParams::new(sites, j, gamma).map_err(|e| e.to_string())?;
        let initial = Initial::parse(self.get("initial").unwrap_or("delta"))?;
        let method = Method::parse(self.get("method").unwrap_or("transfer-contour"))?;
        let nq: usize = self.parse_or("nq", sites.max(2048))?;
        let lmax: usize = self.parse_or("lmax", 4)?;
        let output: String = self.get("output").unwrap_or("run").to_string();
        let threads: Option<usize> = match self.get("threads") {
            None | Some("auto") => None,
            Some(v) => Some(v.parse().map_err(|e| format!("bad threads '{v}': {e}"))?),
        };
        let smooth: Option<usize> = match self.get("smooth") {
            None => None,
            Some(v) => Some(v.parse().map_err(|e| format!("bad smooth '{v}': {e}"))?),
        };

        let times = if let Some(list) = self.get("times") {
            let mut ts = Vec::new();
            for tok in list.split(',') {
                ts.push(
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| format!("bad time '{tok}': {e}"))?,
                );
            }
            ts
        } else {
            let t0: f64 = self.parse_or("t-start", 0.5)?;
            let t1: f64 = self.parse_or("t-end", 2.0)?;
            let count: usize = self.parse_or("t-count", 4)?;
            let spacing = match self.get("t-spacing").unwrap_or("linear") {
                "linear" => TimeSpacing::Linear,
                "log" => TimeSpacing::Log,
                other => return Err(format!("bad t-spacing '{other}' (linear or log)")),
            };
            build_grid(t0, t1, count, spacing)?
        };
        if times.is_empty() {
            return Err("no output times requested".into());
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
            return Err("times must be non-negative and strictly increasing".into());
        }
        if method == Method::Ed && sites > dephasing_chain::ed_oracle::DIRECT_SIZE_LIMIT {
            return Err(format!(
                "method=ed requires L <= {}, got {sites}",
                dephasing_chain::ed_oracle::DIRECT_SIZE_LIMIT
            ));
        }
        Ok(RunConfig {
            params,
            initial,
            times,
            method,
            nq,
            lmax,
            output,
            threads,
            smooth,
            resolved: self.map,
        })
    }
}

fn build_grid(t0: f64, t1: f64, count: usize, spacing: TimeSpacing) -> Result<Vec<f64>, String> {
    if count < 1 || t1 < t0 {
        return Err("bad time grid".into());
    }
    if count == 1 {
        return Ok(vec![t0]);
    }
    let ts = (0..count)
        .map(|k| {
            let f = k as f64 / (count - 1) as f64;
            match spacing {
                TimeSpacing::Linear => t0 + (t1 - t0) * f,
                TimeSpacing::Log => t0 * (t1 / t0).powf(f),
            }
        })
        .collect();
    Ok(ts)
}

fn apply_preset(name: &str, map: &mut BTreeMap<String, String>) -> Result<(), String> {
    let pairs: &[(&str, &str)] = match name {
        // domain-wall melting profiles near x = L/2 at gamma t = 0.05, 0.2, 1, 5
        "fig2" => &[
            ("L", "100000"),
            ("J", "1"),
            ("gamma", "0.01"),
            ("initial", "domain-wall"),
            ("method", "transfer-contour"),
            ("times", "5,20,100,500"),
        ],
        // transferred magnetization and its running exponent
        "fig3" => &[
            ("L", "100000"),
            ("J", "1"),
            ("gamma", "0.01"),
            ("initial", "domain-wall"),
            ("method", "transfer-contour"),
            ("t-start", "0.1"),
            ("t-end", "3000"),
            ("t-count", "97"),
            ("t-spacing", "log"),
        ],
        // off-diagonal decay
        "fig4" => &[
            ("L", "200"),
            ("J", "1"),
            ("gamma", "0.5"),
            ("initial", "delta"),
            ("method", "ed"),
            ("t-start", "6"),
            ("t-end", "40"),
            ("t-count", "25"),
            ("t-spacing", "log"),
            ("lmax", "4"),
        ],
        other => return Err(format!("unknown preset '{other}' (fig2, fig3, fig4)")),
    };
    for (k, v) in pairs {
        map.entry(k.to_string()).or_insert_with(|| v.to_string());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_overrides_merge() {
        let mut ov = Overrides::default();
        ov.set("L", Some("16".into()));
        ov.set("gamma", Some("0.3".into()));
        let cfg = ov.resolve().unwrap();
        assert_eq!(cfg.params.sites, 16);
        assert_eq!(cfg.params.gamma, 0.3);
        assert_eq!(cfg.method, Method::TransferContour);
    }

    #[test]
    fn preset_fills_missing_keys_only() {
        let mut ov = Overrides::default();
        ov.set("preset", Some("fig2".into()));
        ov.set("L", Some("1000".into())); // override the preset size
        let cfg = ov.resolve().unwrap();
        assert_eq!(cfg.params.sites, 1000);
        assert_eq!(cfg.params.gamma, 0.01);
        assert_eq!(cfg.times, vec![5.0, 20.0, 100.0, 500.0]);
    }

    #[test]
    fn invalid_combinations_rejected() {
        let mut ov = Overrides::default();
        ov.set("method", Some("ed".into()));
        ov.set("L", Some("100000".into()));
        assert!(ov.resolve().is_err());
        let mut ov = Overrides::default();
        ov.set("times", Some("2,1".into()));
        assert!(ov.resolve().is_err());
    }
}
