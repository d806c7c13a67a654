// Copyright 2026 The metadyn-close authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! Flat `key = value` run configuration. Command-line flags use the same key
//! names and are applied after the file, so they win.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use metadyn_core::msd::DEFAULT_EPSILON;
use metadyn_core::toysim::{NlConfig, DEFAULT_LAMBDA};
use metadyn_core::{Mode, ToySystem};

#[derive(Debug, Clone, PartialEq)]
pub struct MtdSettings {
    pub tau_g: u64,
    pub sigma: f64,
    pub height: f64,
    pub grid: bool,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub epsilon: f64,
    pub nl: NlConfig,
    pub mtd: MtdSettings,
    pub lambda: f64,
    pub system: ToySystem,
    pub steps: u64,
    /// Reference-set file; the bundled demo set when absent.
    pub refs: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub traj_stride: u64,
    /// Fraction of run time spent in distance evaluation, for the Amdahl projection.
    pub amdahl_p: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Close,
            epsilon: DEFAULT_EPSILON,
            nl: NlConfig {
                enabled: false,
                size: 50,
                stride: 50,
            },
            mtd: MtdSettings {
                tau_g: 50,
                sigma: 0.5,
                height: 0.5,
                grid: false,
                grid_min: None,
                grid_max: None,
                grid_bins: metadyn_core::metadynamics::DEFAULT_BINS,
            },
            lambda: DEFAULT_LAMBDA,
            system: ToySystem::default(),
            steps: 5000,
            refs: None,
            out_dir: PathBuf::from("metadyn-out"),
            traj_stride: 0,
            amdahl_p: 0.43,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid value {value:?} for {key}: expected on/off"),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.system;
        match key {
            "mode" => self.mode = value.parse()?,
            "epsilon" => self.epsilon = num(key, value)?,
            "nl" => self.nl.enabled = switch(key, value)?,
            "nl-size" => self.nl.size = num(key, value)?,
            "nl-stride" => self.nl.stride = num(key, value)?,
            "tau-g" => self.mtd.tau_g = num(key, value)?,
            "sigma" => self.mtd.sigma = num(key, value)?,
            "height" => self.mtd.height = num(key, value)?,
            "grid" => self.mtd.grid = switch(key, value)?,
            "grid-min" => self.mtd.grid_min = Some(num(key, value)?),
            "grid-max" => self.mtd.grid_max = Some(num(key, value)?),
            "grid-bins" => self.mtd.grid_bins = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "n-beads" => s.n_beads = num(key, value)?,
            "bond-k" => s.bond_k = num(key, value)?,
            "bond-r0" => s.bond_r0 = num(key, value)?,
            "angle-k" => s.angle_k = num(key, value)?,
            "angle-theta0" => s.angle_theta0 = num(key, value)?,
            "mass" => s.mass = num(key, value)?,
            "temperature" => s.temperature = num(key, value)?,
            "friction" => s.friction = num(key, value)?,
            "dt" => s.dt = num(key, value)?,
            "seed" => s.rng_seed = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "refs" => self.refs = Some(PathBuf::from(value)),
            "out-dir" => self.out_dir = PathBuf::from(value),
            "traj-stride" => self.traj_stride = num(key, value)?,
            "amdahl-p" => self.amdahl_p = num(key, value)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Applies a config file's contents. Blank lines and `#` comments are ignored.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_pairs<'a>(
        &mut self,
        pairs: impl IntoIterator<Item = (&'a str, String)>,
    ) -> Result<()> {
        for (key, value) in pairs {
            self.set(key, &value)
                .with_context(|| format!("flag --{key}"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_file_text("# demo\nmode = original\nepsilon=0.5\n\nnl = on\nnl-size = 4\n")
            .unwrap();
        assert_eq!(cfg.mode, Mode::Original);
        assert!(cfg.nl.enabled);
        cfg.apply_pairs([("mode", "close".to_string()), ("nl", "off".to_string())])
            .unwrap();
        assert_eq!(cfg.mode, Mode::Close);
        assert!(!cfg.nl.enabled);
        assert_eq!(cfg.epsilon, 0.5);
        assert_eq!(cfg.nl.size, 4);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_file_text("colour = blue\n").is_err());
        assert!(cfg.apply_file_text("steps 10\n").is_err());
        assert!(cfg.apply_file_text("steps = ten\n").is_err());
        assert!(cfg.apply_file_text("grid = maybe\n").is_err());
    }
}
