//! Run configuration and its flat `key = value` file format.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use stochopt::sim::SimConfig;
use stochopt::{BlackScholesParams, Error, HestonParams, KimOmbergParams, Preferences, Result};

pub const DEFAULT_GAMMA: f64 = 5.0;
pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_STEPS: usize = 256;
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    BlackScholes,
    Heston,
    Ko,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bs" | "black-scholes" => Ok(Self::BlackScholes),
            "heston" => Ok(Self::Heston),
            "ko" | "kim-omberg" => Ok(Self::Ko),
            _ => Err(Error::InvalidConfig(format!(
                "unknown model `{s}` (expected bs, heston or ko)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BlackScholes => "bs",
            Self::Heston => "heston",
            Self::Ko => "ko",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Stochastic volatility, yearly units.
    Pan,
    /// Return predictability, monthly units.
    Barberis,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pan" => Ok(Self::Pan),
            "barberis" => Ok(Self::Barberis),
            _ => Err(Error::InvalidConfig(format!(
                "unknown preset `{s}` (expected pan or barberis)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pan => "pan",
            Self::Barberis => "barberis",
        })
    }
}

/// Everything a command needs. Unset parameters fall back to the preset,
/// and the preset falls back to the model's default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub preset: Option<Preset>,
    pub gamma: f64,
    pub horizon: Option<f64>,
    pub r: Option<f64>,
    pub mu: Option<f64>,
    pub mu_s: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda_y: Option<f64>,
    pub y_bar: Option<f64>,
    pub sigma_y: Option<f64>,
    pub rho: Option<f64>,
    pub y0: Option<f64>,
    pub paths: usize,
    /// Time steps per unit of model time.
    pub steps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Heston,
            preset: None,
            gamma: DEFAULT_GAMMA,
            horizon: None,
            r: None,
            mu: None,
            mu_s: None,
            sigma: None,
            lambda_y: None,
            y_bar: None,
            sigma_y: None,
            rho: None,
            y0: None,
            paths: DEFAULT_PATHS,
            steps: DEFAULT_STEPS,
            seed: DEFAULT_SEED,
            out: None,
        }
    }
}

/// A fully resolved market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedModel {
    BlackScholes(BlackScholesParams),
    Heston(HestonParams),
    Ko(KimOmbergParams),
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{value}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| parse_num::<f64>(key, v).map(Some);
        match key {
            "model" => self.model = value.parse()?,
            "preset" => self.preset = Some(value.parse()?),
            "gamma" => self.gamma = parse_num(key, value)?,
            "horizon" => self.horizon = num(value)?,
            "r" => self.r = num(value)?,
            "mu" => self.mu = num(value)?,
            "mu_s" => self.mu_s = num(value)?,
            "sigma" => self.sigma = num(value)?,
            "lambda_y" => self.lambda_y = num(value)?,
            "y_bar" => self.y_bar = num(value)?,
            "sigma_y" => self.sigma_y = num(value)?,
            "rho" => self.rho = num(value)?,
            "y0" => self.y0 = num(value)?,
            "paths" => self.paths = parse_num(key, value)?,
            "steps" => self.steps = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// One `key = value` line per set field; `parse` inverts it exactly.
    pub fn serialize(&self) -> String {
        let mut s = format!("model = {}\n", self.model);
        if let Some(p) = self.preset {
            s.push_str(&format!("preset = {p}\n"));
        }
        s.push_str(&format!("gamma = {:?}\n", self.gamma));
        let optional = [
            ("horizon", self.horizon),
            ("r", self.r),
            ("mu", self.mu),
            ("mu_s", self.mu_s),
            ("sigma", self.sigma),
            ("lambda_y", self.lambda_y),
            ("y_bar", self.y_bar),
            ("sigma_y", self.sigma_y),
            ("rho", self.rho),
            ("y0", self.y0),
        ];
        for (k, v) in optional {
            if let Some(v) = v {
                s.push_str(&format!("{k} = {v:?}\n"));
            }
        }
        s.push_str(&format!(
            "paths = {}\nsteps = {}\nseed = {}\n",
            self.paths, self.steps, self.seed
        ));
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {}\n", out.display()));
        }
        s
    }

    pub fn preferences(&self) -> Result<Preferences> {
        Preferences::new(self.gamma)
    }

    fn preset_or_default(&self) -> Preset {
        self.preset.unwrap_or(match self.model {
            ModelKind::Ko => Preset::Barberis,
            _ => Preset::Pan,
        })
    }

    pub fn resolve(&self) -> Result<ResolvedModel> {
        let preset = self.preset_or_default();
        let pick = |v: Option<f64>, d: f64| v.unwrap_or(d);
        match self.model {
            ModelKind::Heston => {
                if preset != Preset::Pan {
                    return Err(Error::InvalidConfig("the heston model takes the pan preset".into()));
                }
                let d = HestonParams::pan();
                let p = HestonParams {
                    r: pick(self.r, d.r),
                    mu_s: pick(self.mu_s, d.mu_s),
                    lambda_y: pick(self.lambda_y, d.lambda_y),
                    y_bar: pick(self.y_bar, d.y_bar),
                    sigma_y: pick(self.sigma_y, d.sigma_y),
                    rho: pick(self.rho, d.rho),
                };
                p.validate()?;
                Ok(ResolvedModel::Heston(p))
            }
            ModelKind::Ko => {
                if preset != Preset::Barberis {
                    return Err(Error::InvalidConfig("the ko model takes the barberis preset".into()));
                }
                let d = KimOmbergParams::barberis();
                let p = KimOmbergParams {
                    r: pick(self.r, d.r),
                    sigma: pick(self.sigma, d.sigma),
                    lambda_y: pick(self.lambda_y, d.lambda_y),
                    y_bar: pick(self.y_bar, d.y_bar),
                    sigma_y: pick(self.sigma_y, d.sigma_y),
                    rho: pick(self.rho, d.rho),
                };
                p.validate()?;
                Ok(ResolvedModel::Ko(p))
            }
            ModelKind::BlackScholes => {
                let d = match preset {
                    Preset::Pan => HestonParams::pan().matched_black_scholes(),
                    Preset::Barberis => KimOmbergParams::barberis().matched_black_scholes(),
                };
                let p = BlackScholesParams::new(pick(self.r, d.r), pick(self.mu, d.mu), pick(self.sigma, d.sigma))?;
                Ok(ResolvedModel::BlackScholes(p))
            }
        }
    }

    /// Horizon in model time units: 10 years for the yearly preset, 240 months
    /// for the monthly one.
    pub fn horizon(&self) -> Result<f64> {
        let t = self.horizon.unwrap_or(match self.preset_or_default() {
            Preset::Pan => 10.0,
            Preset::Barberis => 240.0,
        });
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(Error::NonpositiveParameter {
                name: "horizon",
                value: t,
                requirement: "positive",
            })
        }
    }

    /// Initial factor value, defaulting to its long-run level.
    pub fn y0(&self, model: &ResolvedModel) -> f64 {
        self.y0.unwrap_or(match model {
            ResolvedModel::BlackScholes(_) => 0.0,
            ResolvedModel::Heston(p) => p.y_bar,
            ResolvedModel::Ko(p) => p.y_bar,
        })
    }

    pub fn sim_config(&self, horizon: f64, y0: f64) -> Result<SimConfig> {
        if self.paths < 2 || self.steps == 0 {
            return Err(Error::InvalidConfig(
                "need at least 2 paths and 1 step per unit time".into(),
            ));
        }
        let mut c = SimConfig::new(horizon, y0, self.seed);
        c.n_paths = self.paths;
        c.n_steps = ((self.steps as f64 * horizon).ceil() as usize).max(1);
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default_and_full() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
        let full = RunConfig {
            model: ModelKind::Ko,
            preset: Some(Preset::Barberis),
            gamma: 13.5,
            horizon: Some(240.0),
            r: Some(0.1 + 0.2),
            mu: Some(1e-300),
            mu_s: Some(4.4),
            sigma: Some(0.0436),
            lambda_y: Some(0.0226),
            y_bar: Some(-0.0034),
            sigma_y: Some(8e-4),
            rho: Some(-0.935),
            y0: Some(0.003_400_000_000_000_001),
            paths: 1234,
            steps: 17,
            seed: u64::MAX,
            out: Some(PathBuf::from("/tmp/x y.csv")),
        };
        assert_eq!(RunConfig::parse(&full.serialize()).unwrap(), full);
    }

    #[test]
    fn comments_and_errors() {
        let c = RunConfig::parse("# header\nmodel = ko  # monthly\n\ngamma=2\n").unwrap();
        assert_eq!(c.model, ModelKind::Ko);
        assert_eq!(c.gamma, 2.0);
        assert!(RunConfig::parse("gamma 2").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("rho = abc").is_err());
    }

    #[test]
    fn presets_and_overrides() {
        let mut c = RunConfig::default();
        assert_eq!(c.resolve().unwrap(), ResolvedModel::Heston(HestonParams::pan()));
        c.rho = Some(0.0);
        let ResolvedModel::Heston(p) = c.resolve().unwrap() else {
            panic!()
        };
        assert_eq!(p.rho, 0.0);
        c.rho = Some(0.5);
        assert!(c.resolve().unwrap_err().is_validation());
        c.model = ModelKind::Ko;
        c.rho = None;
        assert_eq!(c.horizon().unwrap(), 240.0);
        c.preset = Some(Preset::Pan);
        assert!(c.resolve().is_err());
    }
}
