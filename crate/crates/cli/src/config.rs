use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::path::Path;

use hybrident::budget::RateBudget;
use hybrident::source::NoiseModel;

/// A preset name or explicit noise parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Preset(String),
    Model(NoiseModel),
}

impl NoiseSpec {
    /// `ideal`, `paper-fit`, or inline JSON such as
    /// `{"werner_p":0.9,"dephase_q":0,"miscal_angle":0}`.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let t = text.trim();
        if t.starts_with('{') {
            let m: NoiseModel = serde_json::from_str(t).context("inline noise JSON")?;
            Ok(NoiseSpec::Model(m))
        } else {
            Ok(NoiseSpec::Preset(t.to_string()))
        }
    }

    pub fn model(&self) -> hybrident::Result<NoiseModel> {
        match self {
            NoiseSpec::Preset(name) => NoiseModel::preset(name),
            NoiseSpec::Model(m) => {
                m.validate()?;
                Ok(*m)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Durations {
    pub tomography: f64,
    pub chsh: f64,
    pub fringe: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            tomography: 15.0,
            chsh: 60.0,
            fringe: 15.0,
        }
    }
}

/// Top-level JSON config. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub noise: NoiseSpec,
    pub budget: RateBudget,
    pub rate_cps: f64,
    pub durations: Durations,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            noise: NoiseSpec::Preset("paper-fit".into()),
            budget: RateBudget::paper_defaults(),
            rate_cps: 100.0,
            durations: Durations::default(),
            seed: 0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn check(&self) -> anyhow::Result<()> {
        if !(self.rate_cps >= 0.0 && self.rate_cps.is_finite()) {
            bail!("rate_cps must be finite and non-negative, got {}", self.rate_cps);
        }
        let d = self.durations;
        for (name, v) in [("tomography", d.tomography), ("chsh", d.chsh), ("fringe", d.fringe)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("durations.{name} must be positive, got {v}");
            }
        }
        self.budget.validate()?;
        self.noise.model()?;
        Ok(())
    }
}
