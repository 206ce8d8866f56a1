//! JSON run configuration. Omitted fields fall back to the reference cell
//! (`N = 100`, `μ = λ = 50`, `ω = 0.5`, `M = 1`, `Γ = 5`, `ρ_BS = 200`,
//! `ρ_D2D = 1`) and an MDS[10,2] code.

use std::path::PathBuf;

use cellstore::{Estimator, ModelError, NetworkParams, StorageCode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridSpec;

/// A configuration problem located by its JSON field path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkBlock,
    pub code: CodeBlock,
    pub schedule: ScheduleBlock,
    pub simulation: SimulationBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkBlock {
    #[serde(alias = "N")]
    pub nodes: f64,
    /// Shared per-node arrival and departure rate.
    #[serde(alias = "mu")]
    pub churn_rate: f64,
    /// Requests per node per unit time.
    pub omega: f64,
    #[serde(alias = "M")]
    pub file_size: f64,
    #[serde(alias = "Gamma")]
    pub storage_budget: f64,
    pub rho_bs: f64,
    pub rho_d2d: f64,
}

impl Default for NetworkBlock {
    fn default() -> Self {
        Self {
            nodes: 100.0,
            churn_rate: 50.0,
            omega: 0.5,
            file_size: 1.0,
            storage_budget: 5.0,
            rho_bs: 200.0,
            rho_d2d: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum CodeBlock {
    Mds { n: u32, k: u32 },
    Replication { n: u32 },
    Msr { n: u32, k: u32, r: u32 },
    Mbr { n: u32, h: u32, r: u32 },
}

impl Default for CodeBlock {
    fn default() -> Self {
        CodeBlock::Mds { n: 10, k: 2 }
    }
}

/// Unit of the `delta` and `delta_grid` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DeltaUnit {
    /// Multiples of the mean node lifetime `1/μ`.
    #[default]
    MuDelta,
    /// Absolute time.
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleBlock {
    pub unit: DeltaUnit,
    /// Single repair interval, used by `simulate` when no grid is given.
    pub delta: f64,
    pub delta_grid: GridSpec,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        Self {
            unit: DeltaUnit::MuDelta,
            delta: 0.5,
            delta_grid: "log:1e-4:20:400".parse().expect("valid default grid"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub horizon_intervals: u64,
    pub seed: u64,
    pub replications: u32,
    pub estimator: Estimator,
    pub track_population: bool,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            horizon_intervals: 2000,
            seed: 0,
            replications: 1,
            estimator: Estimator::Direct,
            track_population: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "<root>".to_string()
        } else {
            path
        };
        ConfigError::new(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

fn network_error(e: ModelError) -> ConfigError {
    let field = match &e {
        ModelError::NotPositive { name, .. } | ModelError::Negative { name, .. } => match *name {
            "request_rate" => "omega",
            other => other,
        },
        ModelError::BudgetBelowOne(_) => "storage_budget",
        ModelError::BsCheaperThanD2d { .. } => "rho_bs",
        ModelError::InvalidCode(_) => return ConfigError::new("code", e.to_string()),
    };
    ConfigError::new(format!("network.{field}"), e.to_string())
}

impl RunConfig {
    /// Checks every block; the first problem found is reported.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.network_params()?;
        self.storage_code()?;
        if !(self.schedule.delta.is_finite() && self.schedule.delta > 0.0) {
            return Err(ConfigError::new(
                "schedule.delta",
                format!("must be positive, got {}", self.schedule.delta),
            ));
        }
        if self.simulation.horizon_intervals == 0 {
            return Err(ConfigError::new(
                "simulation.horizon_intervals",
                "must be at least 1",
            ));
        }
        if self.simulation.replications == 0 {
            return Err(ConfigError::new(
                "simulation.replications",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn network_params(&self) -> Result<NetworkParams, ConfigError> {
        let n = &self.network;
        NetworkParams::new(
            n.nodes,
            n.churn_rate,
            n.omega,
            n.file_size,
            n.storage_budget,
            n.rho_bs,
            n.rho_d2d,
        )
        .map_err(network_error)
    }

    pub fn storage_code(&self) -> Result<StorageCode, ConfigError> {
        let m = self.network.file_size;
        let code = match self.code {
            CodeBlock::Mds { n, k } => StorageCode::mds(n, k, m),
            CodeBlock::Replication { n } => StorageCode::replication(n, m),
            CodeBlock::Msr { n, k, r } => StorageCode::msr(n, k, r, m),
            CodeBlock::Mbr { n, h, r } => StorageCode::mbr(n, h, r, m),
        };
        code.map_err(|e| ConfigError::new("code", e.to_string()))
    }

    /// Converts schedule values in `unit` to absolute repair intervals.
    pub fn to_time(&self, values: &[f64], unit: DeltaUnit) -> Result<Vec<f64>, ConfigError> {
        match unit {
            DeltaUnit::Time => Ok(values.to_vec()),
            DeltaUnit::MuDelta => {
                let mu = self.network.churn_rate;
                if mu > 0.0 {
                    Ok(values.iter().map(|v| v / mu).collect())
                } else {
                    Err(ConfigError::new(
                        "schedule.unit",
                        "mu_delta needs a positive churn rate",
                    ))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellstore::CodeFamily;

    #[test]
    fn empty_document_is_reference_config() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.network_params().unwrap(), NetworkParams::default());
        assert_eq!(c.storage_code().unwrap().label(), "MDS[10,2,2]");
    }

    #[test]
    fn rho_order_is_checked() {
        let err = parse_config(r#"{"network":{"rho_bs":0.5,"rho_d2d":1}}"#).unwrap_err();
        assert_eq!(err.path, "network.rho_bs");
        assert!(err.to_string().contains("rho_bs < rho_d2d"), "{err}");
    }

    #[test]
    fn mbr_rate() {
        let c = parse_config(r#"{"code":{"family":"mbr","n":10,"h":3,"r":5}}"#).unwrap();
        let code = c.storage_code().unwrap();
        assert_eq!(code.family(), CodeFamily::Mbr);
        assert!((code.rate() - 0.24).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = parse_config(r#"{"network":{"rho":3}}"#).unwrap_err();
        assert_eq!(err.path, "network.rho");
        assert!(err.message.contains("unknown field"));
        let err = parse_config(r#"{"extra":1}"#).unwrap_err();
        assert!(err.message.contains("unknown field"));
        let err = parse_config(r#"{"schedule":{"delta_grid":"log:0:1:3"}}"#).unwrap_err();
        assert_eq!(err.path, "schedule.delta_grid");
        let err = parse_config(r#"{"simulation":{"seed":-1}}"#).unwrap_err();
        assert_eq!(err.path, "simulation.seed");
    }

    #[test]
    fn constraint_errors_carry_paths() {
        let err = parse_config(r#"{"network":{"omega":-1}}"#).unwrap_err();
        assert_eq!(err.path, "network.omega");
        let err = parse_config(r#"{"network":{"storage_budget":0.5}}"#).unwrap_err();
        assert_eq!(err.path, "network.storage_budget");
        let err = parse_config(r#"{"code":{"family":"msr","n":10,"k":4,"r":2}}"#).unwrap_err();
        assert_eq!(err.path, "code");
        let err = parse_config(r#"{"simulation":{"replications":0}}"#).unwrap_err();
        assert_eq!(err.path, "simulation.replications");
    }

    #[test]
    fn aliases_match_paper_symbols() {
        let c = parse_config(r#"{"network":{"N":50,"mu":2,"M":3,"Gamma":4}}"#).unwrap();
        assert_eq!(c.network.nodes, 50.0);
        assert_eq!(c.network.churn_rate, 2.0);
        assert_eq!(c.network.file_size, 3.0);
        assert_eq!(c.network.storage_budget, 4.0);
    }

    #[test]
    fn round_trip() {
        let text = r#"{
            "network": {"nodes": 80, "churn_rate": 0.3, "omega": 0.1, "rho_bs": 17.5},
            "code": {"family": "msr", "n": 10, "k": 2, "r": 9},
            "schedule": {"unit": "time", "delta": 0.37, "delta_grid": "lin:0:2:11"},
            "simulation": {"seed": 7, "replications": 4, "estimator": "weighted"},
            "output": {"path": "out.csv", "format": "csv"}
        }"#;
        let c = parse_config(text).unwrap();
        let again = parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        let d = RunConfig::default();
        assert_eq!(
            parse_config(&serde_json::to_string(&d).unwrap()).unwrap(),
            d
        );
    }
}
