//! Experiment configuration: one TOML file, one optional section per
//! subcommand. Unknown keys are rejected with the offending line.

use std::path::Path;

use mdenoise_core::bounds::DudleyConstants;
use mdenoise_core::datagen::ManifoldSpec;
use mdenoise_core::experiments::{CryoRunConfig, HypocycloidConfig, OracleEvalConfig};
use mdenoise_core::oracle::PlanConfig;
use mdenoise_core::projection::DenoiseConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub generate: GenerateConfig,
    pub denoise: DenoiseConfig,
    pub hypocycloid: HypocycloidConfig,
    pub oracle_eval: OracleEvalSection,
    pub cryoem: CryoRunConfig,
    pub bounds: BoundsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub manifold: ManifoldSpec,
    pub n0: usize,
    pub n1: usize,
    pub n: usize,
    pub sigma: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            manifold: ManifoldSpec::ellipse(),
            n0: 2000,
            n1: 12_000,
            n: 20_000,
            sigma: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperplaneSpec {
    pub normal: [f64; 2],
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleEvalSection {
    /// Noise level of the generated block; ignored with `--dataset`.
    pub sigma: f64,
    /// Explicit queries; random ones are drawn when empty.
    pub hyperplanes: Vec<HyperplaneSpec>,
    pub params: OracleEvalConfig,
}

impl Default for OracleEvalSection {
    fn default() -> Self {
        Self {
            sigma: 0.2,
            hyperplanes: Vec::new(),
            params: OracleEvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub ambient_dim: usize,
    pub d: u32,
    pub sigma: f64,
    pub c_m: f64,
    pub delta: f64,
    pub eta: f64,
    pub n: usize,
    pub gamma: f64,
    pub eps: f64,
    pub hull_points: f64,
    pub reach: f64,
    pub volume: f64,
    pub dudley: DudleyConstants,
    pub plan: PlanConfig,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            ambient_dim: 2,
            d: 1,
            sigma: 0.2,
            c_m: 0.2,
            delta: 0.05,
            eta: 0.1,
            n: 20_000,
            gamma: 3.0,
            eps: 0.1,
            hull_points: 2000.0,
            reach: 0.25,
            volume: 4.844_224_110_273_838,
            dudley: DudleyConstants::default(),
            plan: PlanConfig::default(),
        }
    }
}

pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(parse("").unwrap(), ConfigFile::default());
    }

    #[test]
    fn sections_override_fields() {
        let cfg = parse(
            "[generate]\nn = 500\nsigma = 0.1\n[generate.manifold]\nkind = \"circle\"\nradius = 2.0\n\
             [denoise]\nreduced_dim = 2\n[denoise.constants.plan]\na = 2.0\nc_d = 1.0\ncap = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.generate.n, 500);
        assert_eq!(
            cfg.generate.manifold,
            ManifoldSpec::Circle {
                radius: 2.0,
                ambient_dim: 2
            }
        );
        assert_eq!(cfg.denoise.reduced_dim, Some(2));
        assert_eq!(cfg.denoise.constants.plan.cap, 10);
    }

    #[test]
    fn unknown_key_names_its_line() {
        let err = parse("[denoise]\nd = 1\nmesh_size = 0.1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("mesh_size"), "{err}");
    }

    #[test]
    fn wrong_type_names_its_line() {
        let err = parse("[hypocycloid]\n\ncount = \"many\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn oracle_section_nests_params() {
        let cfg = parse(
            "[oracle_eval]\nsigma = 0.3\n[oracle_eval.params]\ndelta = 0.1\nqueries = 3\n[[oracle_eval.hyperplanes]]\nnormal = [1.0, 0.0]\noffset = 1.5\n",
        )
        .unwrap();
        assert_eq!(cfg.oracle_eval.params.delta, 0.1);
        assert_eq!(cfg.oracle_eval.params.queries, 3);
        assert_eq!(cfg.oracle_eval.hyperplanes.len(), 1);
    }
}
