//! Experiment configuration: a flat TOML file whose keys carry their units,
//! overridden key by key from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use phasemix::geometry::{build_box, build_torus, random_regular, Graph, RegularGraphSpec};
use phasemix::glauber::{ChainMode, InitDistribution};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PHASEMIX_OUTPUT_DIR";

/// Every key is optional; commands fill in their own defaults. The same
/// struct doubles as the flag set, so `--horizon-continuous-time 50`
/// overrides `horizon_continuous_time = 50.0` from the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name used for the output subdirectory.
    #[arg(long, global = true)]
    pub experiment: Option<String>,
    /// Master seed; every stream is derived from it.
    #[arg(long = "seed", global = true)]
    pub master_seed: Option<u64>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// torus | box | rrg | triangle
    #[arg(long, global = true)]
    pub geometry: Option<String>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Torus side `n`, or box half-width `m`.
    #[arg(long, global = true)]
    pub side: Option<usize>,
    /// List of sides for size scans.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sides: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub vertices: Option<usize>,
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    #[arg(long, global = true)]
    pub graph_seed: Option<u64>,

    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Use `beta_factor · β̂_c` with `β̂_c` from a Binder crossing.
    #[arg(long, global = true)]
    pub beta_factor: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub binder_betas: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub binder_sides: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub binder_samples: Option<usize>,
    #[arg(long, global = true)]
    pub bond_probability: Option<f64>,

    /// plain | restricted-plus | restricted-minus
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// all-plus | all-minus | plus-minus | strip | checkerboard
    #[arg(long, global = true, value_delimiter = ',')]
    pub init: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub strip_width_fraction: Option<f64>,
    /// magnetization | abs-magnetization-density | energy
    #[arg(long, global = true)]
    pub observable: Option<String>,

    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub burn_in_sweeps: Option<usize>,
    #[arg(long, global = true)]
    pub horizon_continuous_time: Option<f64>,
    #[arg(long, global = true)]
    pub probe_interval_continuous_time: Option<f64>,
    #[arg(long, global = true)]
    pub t_cap_continuous_time: Option<f64>,

    #[arg(long, global = true)]
    pub band_relative: Option<f64>,
    #[arg(long, global = true)]
    pub dwell_probes: Option<usize>,
    #[arg(long, global = true)]
    pub window_probes: Option<usize>,

    /// Block size of the coarse grid.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Several block sizes for `coarse`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub inner_radius: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub radii: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub center_vertex: Option<usize>,
    /// Ball radius for the `σ⁺ ∧ σ̂` polymer statistics.
    #[arg(long, global = true)]
    pub ball_radius: Option<usize>,
    /// direct | ti | both
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long, global = true)]
    pub ti_grid_step: Option<f64>,
    #[arg(long, global = true)]
    pub ti_replicates: Option<usize>,
    #[arg(long, global = true)]
    pub ti_sweeps: Option<usize>,
    /// exact | mcmc
    #[arg(long, global = true)]
    pub sampler: Option<String>,
    /// free | wired | plus
    #[arg(long, global = true)]
    pub boundary: Option<String>,
    #[arg(long, global = true)]
    pub boundary_prime: Option<String>,
    /// Stored configurations for `coarse`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Values set in `over` win.
    pub fn merged(self, over: &ExperimentConfig) -> Self {
        let base = serde_json::to_value(self).expect("config to json");
        let top = serde_json::to_value(over).expect("config to json");
        let (mut base, top) = (base.as_object().cloned().unwrap(), top.as_object().cloned().unwrap());
        for (k, v) in top {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
        serde_json::from_value(serde_json::Value::Object(base)).expect("merged config")
    }

    pub fn geometry(&self) -> Result<Graph> {
        self.geometry_with_side(self.side)
    }

    pub fn geometry_with_side(&self, side: Option<usize>) -> Result<Graph> {
        let kind = self.geometry.as_deref().unwrap_or("torus");
        let need = |v: Option<usize>, key: &str| v.with_context(|| format!("geometry {kind} needs key `{key}`"));
        Ok(match kind {
            "torus" => build_torus(self.dim.unwrap_or(2), need(side, "side")?)?,
            "box" => build_box(self.dim.unwrap_or(2), need(side, "side")?)?,
            "rrg" => random_regular(RegularGraphSpec {
                n: need(self.vertices, "vertices")?,
                degree: need(self.degree, "degree")?,
                seed: self.graph_seed.unwrap_or(0),
            })?,
            "triangle" => Graph::general(3, vec![[0, 1], [1, 2], [0, 2]])?,
            other => bail!("key `geometry`: unknown value {other:?}"),
        })
    }

    pub fn mode(&self) -> Result<ChainMode> {
        Ok(match self.mode.as_deref().unwrap_or("plain") {
            "plain" => ChainMode::Plain,
            "restricted-plus" => ChainMode::RestrictedPlus,
            "restricted-minus" => ChainMode::RestrictedMinus,
            other => bail!("key `mode`: unknown value {other:?}"),
        })
    }

    pub fn inits(&self, default: &[&str]) -> Result<Vec<InitDistribution>> {
        let names: Vec<String> = match &self.init {
            Some(v) => v.clone(),
            None => default.iter().map(|s| s.to_string()).collect(),
        };
        names
            .iter()
            .map(|n| {
                Ok(match n.as_str() {
                    "all-plus" => InitDistribution::AllPlus,
                    "all-minus" => InitDistribution::AllMinus,
                    "plus-minus" => InitDistribution::PlusMinus,
                    "strip" => InitDistribution::Strip {
                        width_fraction: self.strip_width_fraction.unwrap_or(InitDistribution::DEFAULT_STRIP_WIDTH),
                    },
                    "checkerboard" => InitDistribution::Checkerboard,
                    other => bail!("key `init`: unknown value {other:?}"),
                })
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.master_seed.context("this command is stochastic: pass --seed or set `master_seed`")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let c = ExperimentConfig {
            experiment: Some("x".into()),
            master_seed: Some(7),
            beta: Some(0.5),
            radii: Some(vec![2, 4]),
            init: Some(vec!["strip".into()]),
            horizon_continuous_time: Some(12.5),
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("horizon = 3.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("horizon"), "{err:#}");
        let err = ExperimentConfig::parse("beta = \"hot\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("beta"), "{err:#}");
    }

    #[test]
    fn flags_override_file() {
        let file = ExperimentConfig::parse("beta = 0.5\nside = 8\n").unwrap();
        let flags = ExperimentConfig { beta: Some(0.9), ..Default::default() };
        let m = file.merged(&flags);
        assert_eq!((m.beta, m.side), (Some(0.9), Some(8)));
    }

    #[test]
    fn geometry_errors_name_the_key() {
        let c = ExperimentConfig { geometry: Some("rrg".into()), degree: Some(3), ..Default::default() };
        assert!(format!("{:#}", c.geometry().unwrap_err()).contains("vertices"));
        let c = ExperimentConfig { mode: Some("sideways".into()), ..Default::default() };
        assert!(format!("{:#}", c.mode().unwrap_err()).contains("mode"));
    }

    #[test]
    fn registry_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let c = ExperimentConfig::load(&path).unwrap();
                assert!(c.experiment.is_some(), "{}", path.display());
                n += 1;
            }
        }
        assert!(n >= 9);
    }
}
