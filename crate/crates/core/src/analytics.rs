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
//! Firm-level products and the cross-measure robustness harness.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::cascade::{
    mismatch_table, systemic_impact, CascadeConfig, CascadeSource, CascadeSummary, EnsembleMode, Mismatch,
    MismatchCounts, TriggerCounts,
};
use crate::community::{consensus_partition, match_fraction, Partition};
use crate::error::{Error, Result};
use crate::netgen::sample_ensemble;
use crate::register::{impact_counts, Impact, RiskRegister};
use crate::similarity::{sensitivity_curve, similarity_matrix, CurvePoint, Measure};

/// Share of each firm's reported risks falling in each module.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonTable {
    pub firms: Vec<String>,
    pub num_modules: usize,
    /// `counts[f][m]`: risks of firm `f` in module `m + 1`.
    pub counts: Vec<Vec<usize>>,
    /// Unrounded percentages, same layout as `counts`.
    pub percentages: Vec<Vec<f64>>,
}

impl HorizonTable {
    /// Percentages rounded to one decimal place, for display only.
    pub fn rounded(&self) -> Vec<Vec<f64>> {
        self.percentages
            .iter()
            .map(|row| row.iter().map(|p| (p * 10.0).round() / 10.0).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["firm_id".to_string()];
        header.extend((1..=self.num_modules).map(|m| format!("module_{m}")));
        wtr.write_record(&header)?;
        for (firm, row) in self.firms.iter().zip(self.rounded()) {
            let mut rec = vec![firm.clone()];
            rec.extend(row.iter().map(|p| format!("{p:.1}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<horizon writer>", e))?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Firm |");
        for m in 1..=self.num_modules {
            s.push_str(&format!(" Module {m} |"));
        }
        s.push_str("\n|---|");
        s.push_str(&"---:|".repeat(self.num_modules));
        s.push('\n');
        for (firm, row) in self.firms.iter().zip(self.rounded()) {
            s.push_str(&format!("| {firm} |"));
            for p in row {
                s.push_str(&format!(" {p:.1}% |"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn horizon_table(register: &RiskRegister, partition: &Partition) -> Result<HorizonTable> {
    if partition.n() != register.len() {
        return Err(Error::InvalidParameter(format!(
            "partition covers {} risks, register has {}",
            partition.n(),
            register.len()
        )));
    }
    let num_modules = partition.num_modules();
    let mut per_firm: BTreeMap<&str, Vec<usize>> =
        register.firms().iter().map(|f| (f.as_str(), vec![0; num_modules])).collect();
    for (r, &m) in register.risks().iter().zip(partition.assignment()) {
        per_firm.get_mut(r.firm_id.as_str()).expect("firm set covers every risk")[m - 1] += 1;
    }
    let mut table = HorizonTable {
        firms: Vec::new(),
        num_modules,
        counts: Vec::new(),
        percentages: Vec::new(),
    };
    for (firm, counts) in per_firm {
        let total: usize = counts.iter().sum();
        if total == 0 {
            log::warn!("firm {firm} reported no risks; left out of the horizon table");
            continue;
        }
        table.firms.push(firm.to_string());
        table.percentages.push(counts.iter().map(|&c| 100.0 * c as f64 / total as f64).collect());
        table.counts.push(counts);
    }
    Ok(table)
}

/// Modules (1-based) in which each firm identified no risk.
pub fn coverage_gaps(table: &HorizonTable) -> BTreeMap<String, Vec<usize>> {
    table
        .firms
        .iter()
        .zip(&table.counts)
        .map(|(firm, counts)| {
            let gaps = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == 0)
                .map(|(m, _)| m + 1)
                .collect();
            (firm.clone(), gaps)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiabilityLink {
    pub source: String,
    pub target: String,
    /// Direct triggering events per run from `source`'s risks to `target`'s.
    pub mean_events: f64,
    /// `mean_events` divided by the number of risks `source` reported.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirmDegree {
    pub firm: String,
    pub reported_risks: usize,
    pub in_degree: f64,
    pub out_degree: f64,
}

/// Directed firm-to-firm network of cascade triggering events. Only direct
/// events (a risk materialising its neighbour) are attributed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiabilityNetwork {
    pub firms: Vec<FirmDegree>,
    /// Cross-firm links with positive weight.
    pub links: Vec<LiabilityLink>,
    /// Within-firm event rates, reported but not part of the network.
    pub within_firm: Vec<LiabilityLink>,
}

impl LiabilityNetwork {
    pub fn write_edges_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["source", "target", "weight", "mean_events"])?;
        for l in &self.links {
            wtr.write_record([l.source.clone(), l.target.clone(), l.weight.to_string(), l.mean_events.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<liability writer>", e))?;
        Ok(())
    }
}

pub fn liability_network(register: &RiskRegister, triggers: &TriggerCounts) -> Result<LiabilityNetwork> {
    let n = register.len();
    if triggers.n() != n {
        return Err(Error::InvalidParameter(format!(
            "trigger counts cover {} risks, register has {n}",
            triggers.n()
        )));
    }
    let firms: Vec<&String> = register.firms().iter().collect();
    let firm_index: BTreeMap<&str, usize> = firms.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let of: Vec<usize> = register.risks().iter().map(|r| firm_index[r.firm_id.as_str()]).collect();
    let mut reported = vec![0usize; firms.len()];
    for &f in &of {
        reported[f] += 1;
    }

    let mut events = vec![vec![0u64; firms.len()]; firms.len()];
    for u in 0..n {
        for v in 0..n {
            let c = triggers.get(u, v);
            if c > 0 {
                events[of[u]][of[v]] += c;
            }
        }
    }
    let runs = triggers.runs().max(1) as f64;
    let mut links = Vec::new();
    let mut within_firm = Vec::new();
    let mut in_degree = vec![0.0; firms.len()];
    let mut out_degree = vec![0.0; firms.len()];
    for (i, row) in events.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let mean_events = count as f64 / runs;
            let link = LiabilityLink {
                source: firms[i].clone(),
                target: firms[j].clone(),
                mean_events,
                weight: mean_events / reported[i] as f64,
            };
            if i == j {
                within_firm.push(link);
            } else if count > 0 {
                out_degree[i] += link.weight;
                in_degree[j] += link.weight;
                links.push(link);
            }
        }
    }
    Ok(LiabilityNetwork {
        firms: firms
            .iter()
            .enumerate()
            .map(|(i, f)| FirmDegree {
                firm: (*f).clone(),
                reported_risks: reported[i],
                in_degree: in_degree[i],
                out_degree: out_degree[i],
            })
            .collect(),
        links,
        within_firm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmergingRiskRow {
    pub rank: usize,
    pub risk_id: u64,
    pub title: String,
    pub firm_id: String,
    pub mean_systemic_impact: f64,
    pub systemic_class: Impact,
    pub independent_impact: Impact,
    pub mismatch: Mismatch,
}

/// The `top_k` risks by systemic rank.
pub fn emerging_risk_report(
    summary: &CascadeSummary,
    register: &RiskRegister,
    top_k: usize,
) -> Result<Vec<EmergingRiskRow>> {
    let classes = summary
        .systemic_class
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("cascade summary has no systemic classes".into()))?;
    if top_k > register.len() {
        log::warn!("top_k {top_k} exceeds {} risks; clamping", register.len());
    }
    Ok(summary
        .by_rank()
        .into_iter()
        .take(top_k)
        .map(|i| {
            let r = &register.risks()[i];
            EmergingRiskRow {
                rank: summary.rank[i],
                risk_id: r.risk_id,
                title: r.title.clone(),
                firm_id: r.firm_id.clone(),
                mean_systemic_impact: summary.mean_impact[i],
                systemic_class: classes[i],
                independent_impact: r.independent_impact,
                mismatch: Mismatch::of(classes[i], r.independent_impact),
            }
        })
        .collect())
}

pub fn write_emerging_csv<W: Write>(rows: &[EmergingRiskRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "rank",
        "risk_id",
        "title",
        "firm_id",
        "mean_systemic_impact",
        "systemic_class",
        "independent_impact",
        "mismatch",
    ])?;
    for r in rows {
        wtr.write_record([
            r.rank.to_string(),
            r.risk_id.to_string(),
            r.title.clone(),
            r.firm_id.clone(),
            r.mean_systemic_impact.to_string(),
            r.systemic_class.to_string(),
            r.independent_impact.to_string(),
            r.mismatch.as_str().to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<emerging writer>", e))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RobustnessConfig {
    pub ensemble_size: usize,
    pub cascade_runs: usize,
    pub restarts: usize,
    pub seed: u64,
    pub ensemble_mode: EnsembleMode,
    pub curve_trials: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            ensemble_size: 1000,
            cascade_runs: 1000,
            restarts: crate::community::DEFAULT_RESTARTS,
            seed: 0,
            ensemble_mode: EnsembleMode::PerRunResample,
            curve_trials: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureOutcome {
    pub measure: Measure,
    pub mismatch: MismatchCounts,
    /// Share of risks in the same (aligned) module as under Cosine.
    pub match_fraction: f64,
    pub module_sizes: Vec<usize>,
    pub mean_confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityCurve {
    pub measure: Measure,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub config: RobustnessConfig,
    pub outcomes: Vec<MeasureOutcome>,
    pub curves: Vec<SensitivityCurve>,
}

impl RobustnessReport {
    pub fn outcome(&self, measure: Measure) -> Option<&MeasureOutcome> {
        self.outcomes.iter().find(|o| o.measure == measure)
    }

    pub fn write_mismatch_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["measure", "systemic_ge_independent", "systemic_lt_independent"])?;
        for o in &self.outcomes {
            wtr.write_record([
                o.measure.name().to_string(),
                o.mismatch.systemic_ge_independent.to_string(),
                o.mismatch.systemic_lt_independent.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<robustness writer>", e))?;
        Ok(())
    }

    pub fn write_match_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["measure", "match_fraction"])?;
        for o in &self.outcomes {
            wtr.write_record([o.measure.name().to_string(), o.match_fraction.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<robustness writer>", e))?;
        Ok(())
    }

    pub fn write_sensitivity_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["measure", "step", "mean_similarity"])?;
        for c in &self.curves {
            for p in &c.points {
                wtr.write_record([c.measure.name().to_string(), p.step.to_string(), p.mean_similarity.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<robustness writer>", e))?;
        Ok(())
    }
}

/// Reruns ensemble, consensus and cascades for every measure with identical
/// seeds, and compares each consensus with the Cosine one. Cosine is added
/// first if missing.
pub fn robustness_suite(
    register: &RiskRegister,
    measures: &[Measure],
    config: &RobustnessConfig,
) -> Result<RobustnessReport> {
    if register.is_empty() {
        return Err(Error::InvalidParameter("robustness needs a nonempty register".into()));
    }
    let mut ordered = vec![Measure::Cosine];
    let mut seen = BTreeSet::from([Measure::Cosine]);
    ordered.extend(measures.iter().copied().filter(|m| seen.insert(*m)));

    let counts = impact_counts(register);
    let ids = register.risk_ids();
    let mut reference: Option<Vec<usize>> = None;
    let mut outcomes = Vec::new();
    for measure in ordered {
        log::info!("robustness: {measure}");
        let sim = similarity_matrix(register, measure);
        let ensemble = sample_ensemble(&sim, config.ensemble_size, config.seed)?;
        let consensus = consensus_partition(&ensemble, config.seed, config.restarts);
        let cascade_cfg = CascadeConfig {
            runs: config.cascade_runs,
            base_seed: config.seed,
            ensemble_mode: config.ensemble_mode,
        };
        let mut summary = systemic_impact(CascadeSource::Similarity(&sim), &ids, &cascade_cfg)?;
        let classes = summary.classify(counts)?;
        let mismatch = mismatch_table(classes, register)?;
        let assignment = consensus.partition.assignment().to_vec();
        let reference = reference.get_or_insert_with(|| assignment.clone());
        outcomes.push(MeasureOutcome {
            measure,
            mismatch,
            match_fraction: match_fraction(reference, &assignment),
            module_sizes: consensus.partition.module_sizes(),
            mean_confidence: consensus.mean_confidence(),
        });
    }
    let curves = outcomes
        .iter()
        .map(|o| {
            Ok(SensitivityCurve {
                measure: o.measure,
                points: sensitivity_curve(register.num_tags().max(1), o.measure, config.curve_trials, config.seed)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RobustnessReport {
        config: *config,
        outcomes,
        curves,
    })
}
