//! Experiment configuration: flat key-value sections, TOML on disk.
//!
//! dB quantities are accepted where the literature states them in dB (antenna
//! scalar, self-interference coupling, noise density, shadowing deviation)
//! and converted to linear scale at parse time; the analytic modules never
//! see dB. Rates enter in Gbps and become bits per one-second slot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelParams, PowerAllocation, Topology};
use crate::mgf_bounds::ArrivalSpec;
use crate::power::optimal_allocation;
use crate::sim::{Scenario, SlotSemantics};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {what}")]
    Invalid { what: String },
    #[error("allocation failed: {0}")]
    Power(#[from] crate::power::PowerError),
    #[error("channel model: {0}")]
    Channel(#[from] crate::channel::ChannelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelSection {
    pub alpha_db: f64,
    pub beta: f64,
    pub sigma_db: f64,
    pub kappa_db: f64,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_per_mhz: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            alpha_db: 70.0,
            beta: 2.45,
            sigma_db: 8.0,
            kappa_db: 70.0,
            bandwidth_hz: 500e6,
            noise_density_dbm_per_mhz: -114.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologySection {
    /// Relay count.
    pub n: usize,
    /// Hop length for equal spacing (meters); ignored when `lengths_m` given.
    pub hop_length_m: f64,
    /// Explicit hop lengths (n+1 entries) overriding equal spacing.
    pub lengths_m: Vec<f64>,
    /// Uniform self-interference coupling (dB, <= 0 in practice).
    pub mu_db: f64,
    /// Explicit per-relay couplings in dB, overriding `mu_db`.
    pub mu_db_list: Vec<f64>,
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection {
            n: 10,
            hop_length_m: 500.0,
            lengths_m: Vec::new(),
            mu_db: -80.0,
            mu_db_list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrivalSection {
    /// Sweep axis: sustained arrival rates in Gbps.
    pub rho_a_gbps: Vec<f64>,
    pub delta_b_bits: f64,
}

impl Default for ArrivalSection {
    fn default() -> Self {
        ArrivalSection { rho_a_gbps: vec![1.0], delta_b_bits: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    Optimal,
    Uniform,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationSection {
    pub mode: AllocationMode,
    pub p_tot_watts: f64,
    /// Per-node powers for `mode = "explicit"` (n+1 entries).
    pub powers_watts: Vec<f64>,
}

impl Default for AllocationSection {
    fn default() -> Self {
        AllocationSection { mode: AllocationMode::Optimal, p_tot_watts: 50.0, powers_watts: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsSection {
    /// Sweep axis: target violation probabilities.
    pub epsilon: Vec<f64>,
    /// Sweep axis: discretization step presets for the service MGF bound.
    pub delta: Vec<f64>,
    pub delay_cap_slots: u64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            epsilon: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            delta: vec![1e-2, 1e-3],
            delay_cap_slots: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    /// Coupling sweep in dB.
    pub mu_db: Vec<f64>,
    /// Relay-count sweep.
    pub n: Vec<usize>,
    /// Fixed source-destination separation; hops are L/(n+1).
    pub total_length_m: f64,
    /// Violation probability for the delay column.
    pub epsilon: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mu_db: (0..=24).map(|i| -130.0 + 2.5 * i as f64).collect(),
            n: vec![1, 2, 10, 20, 50],
            total_length_m: 5000.0,
            epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    pub slots: u64,
    pub warmup: u64,
    pub seed: u64,
    pub replications: u64,
    /// "cut-through" (matches the analytic model) or "store-and-forward".
    pub semantics: String,
    pub divergence_ceiling_bits: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            slots: 1_000_000,
            warmup: 10_000,
            seed: 1,
            replications: 8,
            semantics: "cut-through".into(),
            divergence_ceiling_bits: 1e12,
        }
    }
}

/// The whole experiment file; every section optional with defaults that
/// reproduce the reference outdoor deployment (11 hops of 500 m, -80 dB
/// coupling, 50 W budget, 500 MHz at 60 GHz).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    pub topology: TopologySection,
    pub arrival: ArrivalSection,
    pub allocation: AllocationSection,
    pub bounds: BoundsSection,
    pub sweep: SweepSection,
    pub sim: SimSection,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentConfig {
    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.arrival.rho_a_gbps.is_empty() {
            return Err(ConfigError::Invalid { what: "arrival.rho_a_gbps must not be empty".into() });
        }
        if self.bounds.epsilon.is_empty() || self.bounds.delta.is_empty() {
            return Err(ConfigError::Invalid { what: "bounds.epsilon and bounds.delta must not be empty".into() });
        }
        if self.sweep.mu_db.is_empty() || self.sweep.n.is_empty() {
            return Err(ConfigError::Invalid { what: "sweep.mu_db and sweep.n must not be empty".into() });
        }
        if self.bounds.epsilon.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(ConfigError::Invalid { what: "epsilon values must lie in (0,1)".into() });
        }
        if self.allocation.mode == AllocationMode::Explicit
            && self.allocation.powers_watts.len() != self.topology.n + 1
        {
            return Err(ConfigError::Invalid {
                what: format!(
                    "explicit allocation needs {} powers, got {}",
                    self.topology.n + 1,
                    self.allocation.powers_watts.len()
                ),
            });
        }
        if !self.topology.lengths_m.is_empty() && self.topology.lengths_m.len() != self.topology.n + 1 {
            return Err(ConfigError::Invalid {
                what: format!(
                    "lengths_m needs {} entries, got {}",
                    self.topology.n + 1,
                    self.topology.lengths_m.len()
                ),
            });
        }
        if !self.mu_db_list_ok() {
            return Err(ConfigError::Invalid {
                what: format!("mu_db_list needs {} entries", self.topology.n),
            });
        }
        self.semantics()?;
        Ok(())
    }

    fn mu_db_list_ok(&self) -> bool {
        self.topology.mu_db_list.is_empty() || self.topology.mu_db_list.len() == self.topology.n
    }

    pub fn semantics(&self) -> Result<SlotSemantics, ConfigError> {
        match self.sim.semantics.as_str() {
            "cut-through" => Ok(SlotSemantics::CutThrough),
            "store-and-forward" => Ok(SlotSemantics::StoreAndForward),
            other => Err(ConfigError::Invalid {
                what: format!("sim.semantics must be cut-through or store-and-forward, got {other}"),
            }),
        }
    }

    pub fn build_topology(&self) -> Topology {
        let lengths = if self.topology.lengths_m.is_empty() {
            vec![self.topology.hop_length_m; self.topology.n + 1]
        } else {
            self.topology.lengths_m.clone()
        };
        let mu = if self.topology.mu_db_list.is_empty() {
            vec![db_to_linear(self.topology.mu_db); self.topology.n]
        } else {
            self.topology.mu_db_list.iter().map(|d| db_to_linear(*d)).collect()
        };
        Topology { lengths_m: lengths, mu }
    }

    pub fn build_channel_params(&self) -> ChannelParams {
        ChannelParams::with_uniform_sigma(
            self.channel.alpha_db,
            self.channel.beta,
            self.channel.sigma_db,
            self.channel.kappa_db,
            self.channel.bandwidth_hz,
            self.channel.noise_density_dbm_per_mhz,
            self.topology.n + 1,
        )
    }

    pub fn build_allocation(
        &self,
        params: &ChannelParams,
        topology: &Topology,
    ) -> Result<PowerAllocation, ConfigError> {
        Ok(match self.allocation.mode {
            AllocationMode::Optimal => {
                optimal_allocation(params, topology, self.allocation.p_tot_watts)?.allocation()
            }
            AllocationMode::Uniform => {
                PowerAllocation::uniform(params, topology, self.allocation.p_tot_watts)
            }
            AllocationMode::Explicit => {
                PowerAllocation::from_watts(params, &self.allocation.powers_watts)
            }
        })
    }

    /// Assemble the full scenario at one arrival rate (bits per slot).
    pub fn build_scenario(&self, rho_a_bits: f64) -> Result<Scenario, ConfigError> {
        let topology = self.build_topology();
        let params = self.build_channel_params();
        let alloc = self.build_allocation(&params, &topology)?;
        Ok(Scenario {
            params,
            topology,
            alloc,
            arrival: ArrivalSpec { rho_a: rho_a_bits, delta_b: self.arrival.delta_b_bits },
        })
    }
}

/// Gbps on a one-second slot clock.
pub fn gbps_to_bits_per_slot(gbps: f64) -> f64 {
    gbps * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass_validation_and_match_reference_deployment() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let params = cfg.build_channel_params();
        let lam_db = 10.0 * params.lambda_tot(cfg.allocation.p_tot_watts).log10();
        assert!((lam_db - 134.0).abs() < 0.01);
        let topo = cfg.build_topology();
        assert_eq!(topo.hops(), 11);
        assert!((topo.mu[0] - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn toml_round_trip_is_idempotent() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let parsed = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, parsed);
        // And serializing the parse is byte-stable.
        assert_eq!(text, parsed.to_toml());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "[topology]\nn = 2\nhop_length_m = 800.0\n\n[arrival]\nrho_a_gbps = [0.5, 1.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.topology.n, 2);
        assert_eq!(cfg.channel.beta, 2.45);
        assert_eq!(cfg.arrival.rho_a_gbps.len(), 2);
    }

    #[test]
    fn empty_sweep_lists_rejected() {
        let err = ExperimentConfig::from_toml("[bounds]\nepsilon = []\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
        let err = ExperimentConfig::from_toml("[arrival]\nrho_a_gbps = []\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }

    #[test]
    fn explicit_allocation_length_checked() {
        let err = ExperimentConfig::from_toml(
            "[allocation]\nmode = \"explicit\"\npowers_watts = [1.0, 2.0]\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }

    #[test]
    fn uniform_allocation_splits_budget() {
        let mut cfg = ExperimentConfig::default();
        cfg.allocation.mode = AllocationMode::Uniform;
        let sc = cfg.build_scenario(1e9).unwrap();
        let n0 = sc.params.noise_power_watts();
        for lam in &sc.alloc.lambda {
            assert!((lam * n0 - 50.0 / 11.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_semantics_rejected() {
        let err = ExperimentConfig::from_toml("[sim]\nsemantics = \"psychic\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }
}
