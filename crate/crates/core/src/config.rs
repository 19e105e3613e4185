//! Campaign configuration file.
//!
//! TOML with five flat sections. Every key is optional and defaults to the
//! reference deployment; unknown keys are rejected. Angles are in degrees,
//! distances in meters, rates in bit/s.
//!
//! ```toml
//! [cell]
//! radius_m = 100.0
//! num_sectors = 6
//!
//! [budget]
//! tx_power_dbm_per_sector = 30.0
//! noise_density_dbm_hz = -174.0
//! system_bandwidth_hz = 1e9
//! num_subbands = 8
//! carrier_freq_ghz = 60.0
//! pathloss_exp = 2.0
//! sidelobe_level = 0.01
//! min_distance_m = 1.0
//!
//! [qos]
//! rmin_center_bps = 2e9
//! rmin_edge_bps = 1e9
//!
//! [algorithm]
//! algo = "proposed"            # proposed | no-protect | fixed:<deg>
//! beamwidths_deg = [3, 5, 10, 15, 20, 30]
//! beta_m = 3.0
//! delta_m = 3.0                # defaults to beta_m
//!
//! [sweep]
//! users = [20, 40, 60, 80, 100]
//! frames = 1000
//! seed = 1
//! workers = 0                  # 0 = one per core
//!
//! # optional: several arms compared on the same draws
//! [[sweep.arms]]
//! algo = "proposed"
//! delta_m = 1.5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{QosConfig, System};
use crate::channel::{ChannelError, LinkBudget};
use crate::geometry::{beams_per_sector, CellConfig};
use crate::scalar::Real;
use crate::simulator::{Arm, CampaignConfig, Scheme};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{key}: {message}")]
    Parse { key: String, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Dotted path of the offending key, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::Io { .. } => None,
            Self::Parse { key, .. } | Self::Invalid { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellSection {
    pub radius_m: f64,
    pub num_sectors: usize,
}

impl Default for CellSection {
    fn default() -> Self {
        let c = CellConfig::<f64>::default();
        Self {
            radius_m: c.radius_m,
            num_sectors: c.num_sectors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub tx_power_dbm_per_sector: f64,
    pub noise_density_dbm_hz: f64,
    pub system_bandwidth_hz: f64,
    pub num_subbands: usize,
    pub carrier_freq_ghz: f64,
    pub pathloss_exp: f64,
    pub sidelobe_level: f64,
    pub min_distance_m: f64,
}

impl Default for BudgetSection {
    fn default() -> Self {
        let b = LinkBudget::<f64>::default();
        Self {
            tx_power_dbm_per_sector: b.tx_power_dbm_per_sector,
            noise_density_dbm_hz: b.noise_density_dbm_hz,
            system_bandwidth_hz: b.system_bandwidth_hz,
            num_subbands: b.num_subbands,
            carrier_freq_ghz: b.carrier_freq_ghz,
            pathloss_exp: b.pathloss_exp,
            sidelobe_level: b.sidelobe_level,
            min_distance_m: b.min_distance_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosSection {
    pub rmin_center_bps: f64,
    pub rmin_edge_bps: f64,
}

impl Default for QosSection {
    fn default() -> Self {
        let q = QosConfig::<f64>::default();
        Self {
            rmin_center_bps: q.rmin_center_bps,
            rmin_edge_bps: q.rmin_edge_bps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSection {
    pub algo: String,
    pub beamwidths_deg: Vec<f64>,
    pub beta_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_m: Option<f64>,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            algo: "proposed".into(),
            beamwidths_deg: vec![3.0, 5.0, 10.0, 15.0, 20.0, 30.0],
            beta_m: 3.0,
            delta_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    pub algo: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub users: Vec<usize>,
    pub frames: usize,
    pub seed: u64,
    pub workers: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub arms: Vec<ArmSection>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            users: vec![20, 40, 60, 80, 100],
            frames: 1000,
            seed: 1,
            workers: 0,
            arms: Vec::new(),
        }
    }
}

/// Parsed configuration file, before validation. Also the config echo written to the manifest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub cell: CellSection,
    pub budget: BudgetSection,
    pub qos: QosSection,
    pub algorithm: AlgorithmSection,
    pub sweep: SweepSection,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                key: if key == "." { "<root>".into() } else { key },
                message: inner.message().trim().to_string(),
            }
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Fills `delta_m` defaults with `beta_m` so the echo is fully explicit.
    pub fn resolved(mut self) -> Self {
        let beta = self.algorithm.beta_m;
        self.algorithm.delta_m.get_or_insert(beta);
        for arm in &mut self.sweep.arms {
            arm.delta_m.get_or_insert(beta);
        }
        self
    }

    /// Validates every key and builds the campaign.
    pub fn to_campaign<T: Real>(&self) -> Result<CampaignConfig<T>, ConfigError> {
        let cell = &self.cell;
        if !(cell.radius_m > 0.0) || !cell.radius_m.is_finite() {
            return Err(ConfigError::invalid("cell.radius_m", "must be positive"));
        }
        if cell.num_sectors == 0 {
            return Err(ConfigError::invalid(
                "cell.num_sectors",
                "must be at least 1",
            ));
        }
        let b = &self.budget;
        let budget = LinkBudget {
            tx_power_dbm_per_sector: T::lit(b.tx_power_dbm_per_sector),
            noise_density_dbm_hz: T::lit(b.noise_density_dbm_hz),
            system_bandwidth_hz: T::lit(b.system_bandwidth_hz),
            num_subbands: b.num_subbands,
            carrier_freq_ghz: T::lit(b.carrier_freq_ghz),
            pathloss_exp: T::lit(b.pathloss_exp),
            sidelobe_level: T::lit(b.sidelobe_level),
            min_distance_m: T::lit(b.min_distance_m),
        };
        budget.validate().map_err(|e| {
            let field = match &e {
                ChannelError::SidelobeLevel(_) => "sidelobe_level",
                ChannelError::NonPositive { field, .. } | ChannelError::NonFinite { field, .. } => {
                    field
                }
                _ => "?",
            };
            ConfigError::invalid(format!("budget.{field}"), e.to_string())
        })?;
        let q = &self.qos;
        if !(q.rmin_edge_bps > 0.0) {
            return Err(ConfigError::invalid(
                "qos.rmin_edge_bps",
                "must be positive",
            ));
        }
        if !(q.rmin_center_bps > q.rmin_edge_bps) || !q.rmin_center_bps.is_finite() {
            return Err(ConfigError::invalid(
                "qos.rmin_center_bps",
                "must exceed qos.rmin_edge_bps",
            ));
        }

        let alg = &self.algorithm;
        if alg.beamwidths_deg.is_empty() {
            return Err(ConfigError::invalid(
                "algorithm.beamwidths_deg",
                "must not be empty",
            ));
        }
        let mut beamwidths = Vec::with_capacity(alg.beamwidths_deg.len());
        for (i, &deg) in alg.beamwidths_deg.iter().enumerate() {
            let theta = T::lit(deg.to_radians());
            beams_per_sector(theta, cell.num_sectors).map_err(|e| {
                ConfigError::invalid(format!("algorithm.beamwidths_deg[{i}]"), e.to_string())
            })?;
            beamwidths.push(theta);
        }
        if !(alg.beta_m >= 0.0) || !alg.beta_m.is_finite() {
            return Err(ConfigError::invalid("algorithm.beta_m", "must be >= 0"));
        }
        let beta = alg.beta_m;

        let mut arms = Vec::new();
        if self.sweep.arms.is_empty() {
            arms.push(parse_arm(
                &alg.algo,
                alg.delta_m,
                beta,
                cell.num_sectors,
                "algorithm",
            )?);
        } else {
            for (i, a) in self.sweep.arms.iter().enumerate() {
                arms.push(parse_arm(
                    &a.algo,
                    a.delta_m,
                    beta,
                    cell.num_sectors,
                    &format!("sweep.arms[{i}]"),
                )?);
            }
        }

        let s = &self.sweep;
        if s.frames == 0 {
            return Err(ConfigError::invalid("sweep.frames", "must be at least 1"));
        }
        if s.users.is_empty() {
            return Err(ConfigError::invalid("sweep.users", "must not be empty"));
        }
        let arms = arms
            .into_iter()
            .map(|(scheme, delta)| Arm::new(scheme, T::lit(delta)))
            .collect();
        Ok(CampaignConfig {
            system: System {
                cell: CellConfig::new(T::lit(cell.radius_m), cell.num_sectors)
                    .map_err(|e| ConfigError::invalid("cell", e.to_string()))?,
                budget,
                qos: QosConfig {
                    rmin_center_bps: T::lit(q.rmin_center_bps),
                    rmin_edge_bps: T::lit(q.rmin_edge_bps),
                },
            },
            beamwidths,
            beta: T::lit(beta),
            arms,
            user_counts: s.users.clone(),
            frames: s.frames,
            seed: s.seed,
            workers: s.workers,
        })
    }
}

/// Scheme of an `algo` string: `proposed`, `no-protect` or `fixed:<deg>`.
pub fn parse_scheme<T: Real>(algo: &str) -> Result<Scheme<T>, String> {
    match algo.trim() {
        "proposed" => Ok(Scheme::Proposed),
        "no-protect" => Ok(Scheme::NoProtect),
        other => match other.strip_prefix("fixed:") {
            Some(deg) => deg
                .trim()
                .parse::<f64>()
                .map(|d| Scheme::Fixed(T::lit(d.to_radians())))
                .map_err(|_| format!("bad fixed beamwidth `{deg}`")),
            None => Err(format!(
                "unknown algorithm `{other}` (expected proposed, no-protect or fixed:<deg>)"
            )),
        },
    }
}

fn parse_arm<T: Real>(
    algo: &str,
    delta: Option<f64>,
    beta: f64,
    num_sectors: usize,
    section: &str,
) -> Result<(Scheme<T>, f64), ConfigError> {
    let scheme =
        parse_scheme::<T>(algo).map_err(|m| ConfigError::invalid(format!("{section}.algo"), m))?;
    if let Scheme::Fixed(theta) = scheme {
        beams_per_sector(theta, num_sectors)
            .map_err(|e| ConfigError::invalid(format!("{section}.algo"), e.to_string()))?;
    }
    let delta = delta.unwrap_or(beta);
    let key = format!("{section}.delta_m");
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(ConfigError::invalid(key, "must be >= 0"));
    }
    if scheme != Scheme::NoProtect && delta > beta {
        return Err(ConfigError::invalid(
            key,
            format!("threshold {delta} m exceeds the uncertainty radius beta_m = {beta} m"),
        ));
    }
    Ok((scheme, delta))
}

/// Reads, validates and builds the campaign described by the file at `path`.
pub fn load_config<T: Real>(path: &Path) -> Result<CampaignConfig<T>, ConfigError> {
    ConfigFile::from_path(path)?.to_campaign()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn campaign(text: &str) -> Result<CampaignConfig<f64>, ConfigError> {
        ConfigFile::from_toml(text)?.to_campaign()
    }

    #[test]
    fn empty_file_is_reference_deployment() {
        let c = campaign("").unwrap();
        assert_eq!(c.system, System::default());
        let deg: Vec<f64> = c.beamwidths.iter().map(|t| t.to_degrees()).collect();
        for (a, b) in deg.iter().zip([3.0, 5.0, 10.0, 15.0, 20.0, 30.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(c.system.cell.radius_m, 100.0);
        assert_eq!(c.system.budget.num_subbands, 8);
        assert_eq!(c.system.budget.carrier_freq_ghz, 60.0);
        assert_eq!(c.system.qos.rmin_center_bps, 2e9);
        assert_eq!(c.system.qos.rmin_edge_bps, 1e9);
        assert_eq!(c.beta, 3.0);
        assert_eq!(c.arms, vec![Arm::new(Scheme::Proposed, 3.0)]);
        assert_eq!(c.user_counts, vec![20, 40, 60, 80, 100]);
        assert_eq!(c.frames, 1000);
    }

    #[test]
    fn threshold_above_uncertainty_rejected() {
        let err = campaign("[algorithm]\nbeta_m = 3.0\ndelta_m = 4.0\n").unwrap_err();
        assert_eq!(err.key(), Some("algorithm.delta_m"));
    }

    #[test]
    fn non_divisor_beamwidth_rejected() {
        let err = campaign("[algorithm]\nbeamwidths_deg = [10, 7]\n").unwrap_err();
        assert_eq!(err.key(), Some("algorithm.beamwidths_deg[1]"));
        let err = campaign("[algorithm]\nalgo = \"fixed:7\"\n").unwrap_err();
        assert_eq!(err.key(), Some("algorithm.algo"));
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let err = campaign("[budget]\nbandwidth = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert_eq!(err.key(), Some("budget.bandwidth"));
        assert!(err.to_string().contains("bandwidth"));
        let err = campaign("[bogus]\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn type_errors_name_the_key() {
        let err = campaign("[sweep]\nframes = \"many\"\n").unwrap_err();
        assert_eq!(err.key(), Some("sweep.frames"));
    }

    #[test]
    fn unit_violations() {
        assert_eq!(
            campaign("[cell]\nradius_m = -1\n").unwrap_err().key(),
            Some("cell.radius_m")
        );
        assert_eq!(
            campaign("[budget]\nsidelobe_level = 0.5\n")
                .unwrap_err()
                .key(),
            Some("budget.sidelobe_level")
        );
        assert_eq!(
            campaign("[budget]\nnum_subbands = 0\n").unwrap_err().key(),
            Some("budget.num_subbands")
        );
        assert_eq!(
            campaign("[qos]\nrmin_center_bps = 1e9\nrmin_edge_bps = 2e9\n")
                .unwrap_err()
                .key(),
            Some("qos.rmin_center_bps")
        );
        assert_eq!(
            campaign("[sweep]\nframes = 0\n").unwrap_err().key(),
            Some("sweep.frames")
        );
        assert_eq!(
            campaign("[algorithm]\nalgo = \"greedy\"\n")
                .unwrap_err()
                .key(),
            Some("algorithm.algo")
        );
    }

    #[test]
    fn arms_table() {
        let c = campaign(
            r#"
[algorithm]
beta_m = 3.0
[[sweep.arms]]
algo = "proposed"
[[sweep.arms]]
algo = "proposed"
delta_m = 1.5
[[sweep.arms]]
algo = "no-protect"
[[sweep.arms]]
algo = "fixed:10"
delta_m = 2
"#,
        )
        .unwrap();
        assert_eq!(c.arms.len(), 4);
        assert_eq!(c.arms[0].delta, 3.0);
        assert_eq!(c.arms[1].delta, 1.5);
        assert_eq!(c.arms[2].scheme, Scheme::NoProtect);
        assert_eq!(c.arms[3].label(), "fixed:10");
        let err = campaign("[[sweep.arms]]\nalgo = \"proposed\"\ndelta_m = 9\n").unwrap_err();
        assert_eq!(err.key(), Some("sweep.arms[0].delta_m"));
    }

    #[test]
    fn resolved_echo_round_trips() {
        let f = ConfigFile::from_toml("[algorithm]\nbeta_m = 1.0\n")
            .unwrap()
            .resolved();
        assert_eq!(f.algorithm.delta_m, Some(1.0));
        let text = toml::to_string(&f).unwrap();
        assert_eq!(ConfigFile::from_toml(&text).unwrap(), f);
    }

    #[test]
    fn single_precision_campaign() {
        let c: CampaignConfig<f32> = ConfigFile::default().to_campaign().unwrap();
        assert_eq!(c.beamwidths.len(), 6);
        assert!(c.validate().is_ok());
    }
}
