//! Inverse solvers behind a common trait, selectable by name.

pub mod rt_fit;
pub mod sir_fit;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::RegionDataset;
use crate::error::{Error, Result};
use crate::nn::{Activation, NetworkConfig, TrainConfig};
use rt_fit::{fit_rt, RtFit, RtFitConfig};
use sir_fit::{fit_sir_with, SirFitOptions, SirFitResult};

/// Everything a solver may need besides the data. Each solver reads the
/// parts that concern it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Overrides the solver's default architecture. The seed is replaced per run.
    pub network: Option<NetworkConfig>,
    pub train: TrainConfig,
    pub sir: SirFitOptions,
    pub rt: RtFitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum FitOutcome {
    Sir(SirFitResult),
    Rt(RtFit),
}

pub trait InverseSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn default_network(&self) -> NetworkConfig;

    fn fit(&self, ds: &RegionDataset, settings: &SolverSettings, seed: u64) -> Result<FitOutcome>;

    fn network(&self, settings: &SolverSettings, seed: u64) -> NetworkConfig {
        settings.network.clone().unwrap_or_else(|| self.default_network()).with_seed(seed)
    }
}

/// Constant α and β.
#[derive(Debug, Default, Clone, Copy)]
pub struct SirSolver;

impl InverseSolver for SirSolver {
    fn name(&self) -> &'static str {
        "sir"
    }

    fn default_network(&self) -> NetworkConfig {
        NetworkConfig::new(3, 7, 20, Activation::Tanh, 0)
    }

    fn fit(&self, ds: &RegionDataset, settings: &SolverSettings, seed: u64) -> Result<FitOutcome> {
        let net = self.network(settings, seed);
        fit_sir_with(ds, &net, &settings.train, &settings.sir).map(FitOutcome::Sir)
    }
}

/// Time-dependent R_t with a fixed α.
#[derive(Debug, Default, Clone, Copy)]
pub struct RtSolver;

impl InverseSolver for RtSolver {
    fn name(&self) -> &'static str {
        "rt"
    }

    fn default_network(&self) -> NetworkConfig {
        NetworkConfig::new(2, 7, 20, Activation::Relu, 0)
    }

    fn fit(&self, ds: &RegionDataset, settings: &SolverSettings, seed: u64) -> Result<FitOutcome> {
        let net = self.network(settings, seed);
        fit_rt(ds, &settings.rt, &net).map(FitOutcome::Rt)
    }
}

pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn InverseSolver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(SirSolver));
        reg.register(Box::new(RtSolver));
        reg
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self { solvers: BTreeMap::new() }
    }

    /// Replaces any solver already registered under the same name.
    pub fn register(&mut self, solver: Box<dyn InverseSolver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Result<&dyn InverseSolver> {
        self.solvers.get(name).map(|s| s.as_ref()).ok_or_else(|| {
            Error::Config(format!("unknown solver {name:?}; available: {}", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_registered() {
        let reg = SolverRegistry::default();
        assert_eq!(reg.names(), vec!["rt", "sir"]);
        assert_eq!(reg.get("sir").unwrap().default_network().output_dim, 3);
        assert_eq!(reg.get("rt").unwrap().default_network().activation, Activation::Relu);
    }

    #[test]
    fn unknown_name_is_config_error() {
        let err = SolverRegistry::default().get("seir").err().unwrap();
        assert!(matches!(err, Error::Config(m) if m.contains("rt, sir")));
    }

    #[test]
    fn seed_overrides_network_override() {
        let settings = SolverSettings {
            network: Some(NetworkConfig::new(3, 2, 5, Activation::Tanh, 99)),
            ..Default::default()
        };
        let net = SirSolver.network(&settings, 7);
        assert_eq!((net.hidden_layers, net.seed), (2, 7));
    }
}
