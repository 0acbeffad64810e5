// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//! End-to-end runs that write every artifact plus a manifest of content
//! hashes. Identical inputs, configuration and seed give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytics::{
    coverage_gaps, emerging_risk_report, horizon_table, liability_network, robustness_suite, write_emerging_csv,
    RobustnessConfig,
};
use crate::cascade::{mismatch_table, systemic_impact, write_summary_csv, CascadeConfig, CascadeSource, EnsembleMode};
use crate::community::{consensus_partition, nmi_vs_random, validate, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::netgen::{sample_ensemble, write_edge_list_csv, write_graphml, NodeAnnotations};
use crate::register::{impact_counts, synthesize_register, write_register_csv, RiskRegister, SyntheticSpec};
use crate::similarity::{similarity_matrix, Measure};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub measure: Measure,
    pub ensemble_size: usize,
    pub cascade_runs: usize,
    pub louvain_restarts: usize,
    pub seed: u64,
    pub ensemble_mode: EnsembleMode,
    /// Rows in the emerging-risk report.
    pub top_k: usize,
    /// Trials per sensitivity curve (robustness only).
    pub curve_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            measure: Measure::Cosine,
            ensemble_size: 1000,
            cascade_runs: 1000,
            louvain_restarts: DEFAULT_RESTARTS,
            seed: 0,
            ensemble_mode: EnsembleMode::PerRunResample,
            top_k: 5,
            curve_trials: 100,
        }
    }
}

impl RunConfig {
    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("ensemble size", self.ensemble_size),
            ("cascade runs", self.cascade_runs),
            ("restarts", self.louvain_restarts),
            ("curve trials", self.curve_trials),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub measure: Measure,
    pub config: RunConfig,
    pub outputs: Vec<OutputFile>,
}

/// Collects output files and their hashes.
struct OutputDir {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let digest = Sha256::digest(bytes);
        self.files.push(OutputFile {
            file: name.to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    fn write_with(&mut self, name: &str, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write(name, &buf)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn finish(mut self, command: &str, config: &RunConfig) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            measure: config.measure,
            config: config.clone(),
            outputs: std::mem::take(&mut self.files),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}

/// Error tagged with the pipeline stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

#[derive(Serialize)]
struct ImpactReport<'a> {
    seed: u64,
    measure: Measure,
    independent_counts: crate::register::ImpactCounts,
    mismatch: crate::cascade::MismatchCounts,
    config: &'a CascadeConfig,
}

#[derive(Serialize)]
struct HorizonReport<'a> {
    table: &'a crate::analytics::HorizonTable,
    rounded: Vec<Vec<f64>>,
    coverage_gaps: std::collections::BTreeMap<String, Vec<usize>>,
}

/// Full single-measure analysis.
pub fn analyze(register: &RiskRegister, config: &RunConfig, out: &Path) -> std::result::Result<Manifest, StageError> {
    config.check().stage("configuration")?;
    if register.is_empty() {
        return Err(Error::InvalidParameter("register has no risks".into())).stage("ingest");
    }
    let mut dir = OutputDir::create(out).stage("output")?;
    let ids = register.risk_ids();

    log::info!("similarity ({})", config.measure);
    let sim = similarity_matrix(register, config.measure);
    dir.write_with("similarity_matrix.csv", |b| sim.write_csv(b)).stage("similarity")?;

    log::info!("sampling {} networks", config.ensemble_size);
    let ensemble = sample_ensemble(&sim, config.ensemble_size, config.seed).stage("network generation")?;

    log::info!("module detection");
    let consensus = consensus_partition(&ensemble, config.seed, config.louvain_restarts);
    let partition = &consensus.partition;
    dir.write_with("partition.csv", |b| {
        let mut wtr = csv::Writer::from_writer(b);
        wtr.write_record(["risk_id", "module_id", "confidence"])?;
        for ((id, m), c) in ids.iter().zip(partition.assignment()).zip(&consensus.confidence) {
            wtr.write_record([id.to_string(), m.to_string(), c.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("partition.csv", e))?;
        Ok(())
    })
    .stage("module detection")?;

    log::info!("validation");
    let network = &ensemble.graphs[0];
    let mut report = validate(network, partition);
    report.nmi_vs_random = Some(nmi_vs_random(
        &ensemble,
        &consensus.members,
        config.seed,
        config.louvain_restarts,
    ));
    dir.write_json("validation.json", &report).stage("validation")?;

    log::info!("cascades ({} runs)", config.cascade_runs);
    let cascade_cfg = CascadeConfig {
        runs: config.cascade_runs,
        base_seed: config.seed,
        ensemble_mode: config.ensemble_mode,
    };
    let mut summary = systemic_impact(CascadeSource::Similarity(&sim), &ids, &cascade_cfg).stage("cascades")?;
    let counts = impact_counts(register);
    let classes = summary.classify(counts).stage("classification")?.to_vec();
    let mismatch = mismatch_table(&classes, register).stage("classification")?;
    dir.write_with("cascade_summary.csv", |b| write_summary_csv(&summary, register, b))
        .stage("cascades")?;
    dir.write_json(
        "impact_mismatch.json",
        &ImpactReport {
            seed: config.seed,
            measure: config.measure,
            independent_counts: counts,
            mismatch,
            config: &cascade_cfg,
        },
    )
    .stage("classification")?;

    let notes = NodeAnnotations {
        modules: Some(partition.assignment()),
        systemic_classes: Some(&classes),
    };
    dir.write_with("network_edges.csv", |b| write_edge_list_csv(network, &ids, b))
        .stage("network export")?;
    dir.write_with("network.graphml", |b| write_graphml(network, register, notes, b))
        .stage("network export")?;

    let horizon = horizon_table(register, partition).stage("horizon scanning")?;
    dir.write_with("horizon_table.csv", |b| horizon.write_csv(b)).stage("horizon scanning")?;
    dir.write("horizon_table.md", horizon.to_markdown().as_bytes()).stage("horizon scanning")?;
    dir.write_json(
        "horizon_table.json",
        &HorizonReport {
            table: &horizon,
            rounded: horizon.rounded(),
            coverage_gaps: coverage_gaps(&horizon),
        },
    )
    .stage("horizon scanning")?;

    let liability = liability_network(register, &summary.triggers).stage("liability network")?;
    dir.write_json("liability_network.json", &liability).stage("liability network")?;
    dir.write_with("liability_edges.csv", |b| liability.write_edges_csv(b))
        .stage("liability network")?;

    let emerging = emerging_risk_report(&summary, register, config.top_k).stage("emerging risks")?;
    dir.write_with("emerging_risks.csv", |b| write_emerging_csv(&emerging, b))
        .stage("emerging risks")?;

    dir.finish("analyze", config).stage("manifest")
}

/// Cross-measure robustness run.
pub fn robustness(
    register: &RiskRegister,
    measures: &[Measure],
    config: &RunConfig,
    out: &Path,
) -> std::result::Result<Manifest, StageError> {
    config.check().stage("configuration")?;
    let mut dir = OutputDir::create(out).stage("output")?;
    let rcfg = RobustnessConfig {
        ensemble_size: config.ensemble_size,
        cascade_runs: config.cascade_runs,
        restarts: config.louvain_restarts,
        seed: config.seed,
        ensemble_mode: config.ensemble_mode,
        curve_trials: config.curve_trials,
    };
    let report = robustness_suite(register, measures, &rcfg).stage("robustness")?;
    dir.write_with("mismatch_by_measure.csv", |b| report.write_mismatch_csv(b))
        .stage("robustness")?;
    dir.write_with("module_match.csv", |b| report.write_match_csv(b)).stage("robustness")?;
    dir.write_with("sensitivity_curves.csv", |b| report.write_sensitivity_csv(b))
        .stage("robustness")?;
    dir.write_json("robustness.json", &report).stage("robustness")?;
    dir.finish("robustness", config).stage("manifest")
}

/// Writes a synthetic register as canonical CSV and returns its planted classes.
pub fn synth(spec: &SyntheticSpec, out_file: &Path) -> std::result::Result<Vec<usize>, StageError> {
    let synthetic = synthesize_register(spec).stage("synthesis")?;
    let mut buf = Vec::new();
    write_register_csv(&synthetic.register, &mut buf).stage("synthesis")?;
    if let Some(parent) = out_file.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e)).stage("output")?;
    }
    fs::write(out_file, buf).map_err(|e| Error::io(out_file, e)).stage("output")?;
    Ok(synthetic.classes)
}
