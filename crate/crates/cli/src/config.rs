use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use memesim::{ExperimentKind, Generator, SimParams, SweepSpec, Wiring};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Contents of a `--config` file. Every key is optional and unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sim: SimParams,
    pub sweep: SweepSpec,
    pub out: Option<PathBuf>,
    pub verbosity: u8,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Parses a value by its config-file spelling, e.g. `preferential` or `rw`.
pub fn parse_named<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed of every derived random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for replicates (1 runs sequentially, 0 uses all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub replicates: Option<u32>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<usize>,
    /// Number of humans.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub kout: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// random | preferential
    #[arg(long, value_parser = parse_named::<Wiring>)]
    pub wiring: Option<Wiring>,
    /// rw | pa | undirected-pa
    #[arg(long, value_parser = parse_named::<Generator>)]
    pub generator: Option<Generator>,
    #[arg(long)]
    pub rewire_dead_ends: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// phase-map | targeting | popularity | amplification | alpha-mu-tau
    #[arg(long, value_parser = parse_named::<ExperimentKind>)]
    pub kind: Option<ExperimentKind>,
    #[arg(long, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub phi_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub mu_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<usize>>,
}

/// Resolved settings of one invocation.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: RunConfig,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn resolve(common: &CommonArgs, grid: &GridArgs) -> Result<Settings> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let m = &common.model;
    let net = &mut config.sim.net;
    set(&mut net.gamma, m.gamma);
    set(&mut net.n_humans, m.n);
    set(&mut net.beta, m.beta);
    set(&mut net.k_out, m.kout);
    set(&mut net.p, m.p);
    set(&mut net.wiring, m.wiring);
    set(&mut net.generator, m.generator);
    if m.rewire_dead_ends {
        net.rewire_dead_ends = true;
    }
    set(&mut config.sim.phi, m.phi);
    set(&mut config.sim.mu, m.mu);
    set(&mut config.sim.alpha, m.alpha);

    let sweep = &mut config.sweep;
    set(&mut sweep.base_seed, common.seed);
    set(&mut sweep.replicates, common.replicates);
    set(&mut sweep.kind, grid.kind);
    set(&mut sweep.gamma_grid, grid.gamma_grid.clone());
    set(&mut sweep.phi_grid, grid.phi_grid.clone());
    set(&mut sweep.mu_grid, grid.mu_grid.clone());
    set(&mut sweep.alpha_grid, grid.alpha_grid.clone());

    config.sim.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    config.out = None;
    Ok(Settings {
        config,
        out,
        workers: common.workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sim": {"mu": 0.5}}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sim": {"muu": 0.5}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sim": {"net": {"gama": 0.1}}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn defaults_are_the_reference_model() {
        let c = RunConfig::default();
        assert_eq!(c.sim.net.n_humans, 10_000);
        assert_eq!(c.sim.net.beta, 0.1);
        assert_eq!(c.sim.net.k_out, 3);
        assert_eq!(c.sim.net.p, 0.5);
        assert_eq!(c.sim.alpha, 15);
        assert_eq!(c.sim.mu, 0.75);
    }

    #[test]
    fn named_values_use_config_spelling() {
        assert_eq!(
            parse_named::<Wiring>("preferential"),
            Ok(Wiring::Preferential)
        );
        assert_eq!(
            parse_named::<Generator>("undirected-pa"),
            Ok(Generator::UndirectedPA)
        );
        assert_eq!(
            parse_named::<ExperimentKind>("alpha-mu-tau"),
            Ok(ExperimentKind::AlphaMuTau)
        );
        assert!(parse_named::<Wiring>("hubs").is_err());
    }
}
