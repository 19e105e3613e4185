//! CSV and manifest output.
//!
//! | file                  | columns |
//! |-----------------------|---------|
//! | `fairness.csv`        | `K, algorithm, delta, beta, mean_gamma, stderr, mean_served, mean_outage, mean_excluded, gamma_frames, run_id` |
//! | `throughput.csv`      | `K, algorithm, delta, beta, mean_sumrate_gbps, stderr, mean_outage_fraction, qos_fraction, run_id` |
//! | `beamwidth_hist.csv`  | `K, algorithm, delta, theta_deg, selection_fraction, count, run_id` |
//! | `manifest.json`       | run record: tool version, run id, seed, timestamp, resolved config, output files |
//!
//! Numbers use Rust's shortest round-trip formatting; missing values are empty
//! fields. `delta` is empty for `no-protect`. `run_id` is a digest of the
//! resolved configuration and ties every row to the manifest that produced it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ConfigFile;
use crate::scalar::{clean_degrees, Real};
use crate::simulator::{AggregateMetrics, ArmSummary, Scheme};

pub const FAIRNESS_CSV: &str = "fairness.csv";
pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const BEAMWIDTH_CSV: &str = "beamwidth_hist.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessRow {
    #[serde(rename = "K")]
    pub users: usize,
    pub algorithm: String,
    pub delta: Option<f64>,
    pub beta: f64,
    pub mean_gamma: Option<f64>,
    pub stderr: Option<f64>,
    pub mean_served: f64,
    pub mean_outage: f64,
    pub mean_excluded: f64,
    pub gamma_frames: usize,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputRow {
    #[serde(rename = "K")]
    pub users: usize,
    pub algorithm: String,
    pub delta: Option<f64>,
    pub beta: f64,
    pub mean_sumrate_gbps: Option<f64>,
    pub stderr: Option<f64>,
    pub mean_outage_fraction: Option<f64>,
    pub qos_fraction: Option<f64>,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamwidthRow {
    #[serde(rename = "K")]
    pub users: usize,
    pub algorithm: String,
    pub delta: Option<f64>,
    pub theta_deg: f64,
    pub selection_fraction: f64,
    pub count: u64,
    pub run_id: String,
}

/// Run record written next to the CSVs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub run_id: String,
    pub seed: u64,
    pub created_unix_s: u64,
    pub scalar: String,
    pub config: ConfigFile,
    pub outputs: Vec<String>,
}

/// Digest of the resolved configuration; identical configs give identical ids.
///
/// The worker count is left out since it never changes the results.
pub fn run_id(config: &ConfigFile) -> String {
    let mut config = config.clone();
    config.sweep.workers = 0;
    let canonical = serde_json::to_vec(&config).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn arm_delta<T: Real>(s: &ArmSummary<T>) -> Option<f64> {
    match s.arm.scheme {
        Scheme::NoProtect => None,
        _ => Some(s.arm.delta.as_f64()),
    }
}

pub fn fairness_rows<T: Real>(
    agg: &AggregateMetrics<T>,
    beta: T,
    run_id: &str,
) -> Vec<FairnessRow> {
    agg.summaries
        .iter()
        .map(|s| FairnessRow {
            users: s.users,
            algorithm: s.arm.label(),
            delta: arm_delta(s),
            beta: beta.as_f64(),
            mean_gamma: s.gamma.mean.map(Real::as_f64),
            stderr: s.gamma.stderr.map(Real::as_f64),
            mean_served: s.mean_served.as_f64(),
            mean_outage: s.mean_outage.as_f64(),
            mean_excluded: s.mean_excluded.as_f64(),
            gamma_frames: s.gamma.count,
            run_id: run_id.to_string(),
        })
        .collect()
}

pub fn throughput_rows<T: Real>(
    agg: &AggregateMetrics<T>,
    beta: T,
    run_id: &str,
) -> Vec<ThroughputRow> {
    agg.summaries
        .iter()
        .map(|s| ThroughputRow {
            users: s.users,
            algorithm: s.arm.label(),
            delta: arm_delta(s),
            beta: beta.as_f64(),
            mean_sumrate_gbps: s.sum_rate_bps.mean.map(|r| r.as_f64() / 1e9),
            stderr: s.sum_rate_bps.stderr.map(|r| r.as_f64() / 1e9),
            mean_outage_fraction: s.mean_outage_fraction.map(Real::as_f64),
            qos_fraction: s.qos_fraction.map(Real::as_f64),
            run_id: run_id.to_string(),
        })
        .collect()
}

pub fn beamwidth_rows<T: Real>(agg: &AggregateMetrics<T>, run_id: &str) -> Vec<BeamwidthRow> {
    agg.summaries
        .iter()
        .flat_map(|s| {
            s.beamwidth_fractions()
                .into_iter()
                .zip(&s.beamwidth_counts)
                .map(move |((theta, frac), &(_, count))| BeamwidthRow {
                    users: s.users,
                    algorithm: s.arm.label(),
                    delta: arm_delta(s),
                    theta_deg: clean_degrees(theta),
                    selection_fraction: frac.as_f64(),
                    count,
                    run_id: run_id.to_string(),
                })
        })
        .collect()
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), ReportError> {
    let csv_err = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the three CSVs and the manifest into `out_dir`, creating it if needed.
pub fn emit_results<T: Real>(
    agg: &AggregateMetrics<T>,
    config: &ConfigFile,
    out_dir: &Path,
) -> Result<RunManifest, ReportError> {
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let id = run_id(config);
    let beta = T::lit(config.algorithm.beta_m);
    write_csv(&out_dir.join(FAIRNESS_CSV), &fairness_rows(agg, beta, &id))?;
    write_csv(
        &out_dir.join(THROUGHPUT_CSV),
        &throughput_rows(agg, beta, &id),
    )?;
    write_csv(&out_dir.join(BEAMWIDTH_CSV), &beamwidth_rows(agg, &id))?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        run_id: id,
        seed: config.sweep.seed,
        created_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        scalar: std::any::type_name::<T>().to_string(),
        config: config.clone(),
        outputs: [FAIRNESS_CSV, THROUGHPUT_CSV, BEAMWIDTH_CSV]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let path = out_dir.join(MANIFEST_JSON);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").map_err(|source| ReportError::Io { path, source })?;
    Ok(manifest)
}
