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
//! Susceptible-infected cascades on risk networks.
//!
//! A cascade starts by materialising one seed risk. Every newly materialised
//! risk then makes a single attempt, per connecting edge, to materialise each
//! still-susceptible neighbour, succeeding with probability equal to the edge
//! weight. The cascade ends when a round produces no new materialisations.
//! Systemic impact of a risk is the mean number of other risks its cascades
//! materialise.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgen::{sample_graph, WeightedGraph};
use crate::register::{Impact, ImpactCounts, RiskRegister};
use crate::rng::{self, StreamRng};
use crate::similarity::SimilarityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleMode {
    /// Every run samples a fresh network, then transmits along its edges.
    PerRunResample,
    /// Every run uses the same network.
    FixedGraph,
}

impl EnsembleMode {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleMode::PerRunResample => "resample",
            EnsembleMode::FixedGraph => "fixed",
        }
    }
}

impl fmt::Display for EnsembleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resample" => Ok(EnsembleMode::PerRunResample),
            "fixed" => Ok(EnsembleMode::FixedGraph),
            other => Err(Error::InvalidParameter(format!("unknown ensemble mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub ensemble_mode: EnsembleMode,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            runs: 1000,
            base_seed: 0,
            ensemble_mode: EnsembleMode::PerRunResample,
        }
    }
}

/// Propagates one cascade from `seed_risk`, calling `on_trigger(u, v)` each
/// time risk `u` materialises risk `v`. Returns the number of materialised
/// risks other than the seed.
fn cascade_on(
    adj: &[Vec<(usize, f64)>],
    seed_risk: usize,
    rng: &mut StreamRng,
    mut on_trigger: impl FnMut(usize, usize),
) -> usize {
    let mut materialised = vec![false; adj.len()];
    materialised[seed_risk] = true;
    let mut frontier = vec![seed_risk];
    let mut count = 0;
    while !frontier.is_empty() {
        frontier.sort_unstable();
        let mut next = Vec::new();
        for &u in &frontier {
            for &(v, w) in &adj[u] {
                if materialised[v] {
                    continue;
                }
                if rng.gen::<f64>() < w {
                    materialised[v] = true;
                    on_trigger(u, v);
                    next.push(v);
                    count += 1;
                }
            }
        }
        frontier = next;
    }
    count
}

/// Single cascade on `g` seeded at node `seed_risk`.
pub fn run_cascade(g: &WeightedGraph, seed_risk: usize, seed: u64) -> Result<usize> {
    if seed_risk >= g.n() {
        return Err(Error::UnknownNode {
            node: seed_risk,
            n: g.n(),
        });
    }
    let mut rng = rng::stream(seed, &[rng::domain::CASCADE]);
    Ok(cascade_on(&g.adjacency(), seed_risk, &mut rng, |_, _| {}))
}

/// Where each run's network comes from.
#[derive(Clone, Copy, Debug)]
pub enum CascadeSource<'a> {
    /// Networks derived from a similarity matrix according to the config's
    /// ensemble mode: a fresh sample per run, or (fixed mode) the
    /// expected-weight network that links every similar pair.
    Similarity(&'a SimilarityMatrix),
    /// One given network for every run.
    Graph(&'a WeightedGraph),
}

/// Direct triggering events summed over all runs and all seeds:
/// `get(u, v)` counts how often risk `u` materialised risk `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriggerCounts {
    n: usize,
    runs: usize,
    counts: Vec<u64>,
}

impl TriggerCounts {
    pub fn new(n: usize, runs: usize) -> Self {
        TriggerCounts {
            n,
            runs,
            counts: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn get(&self, u: usize, v: usize) -> u64 {
        self.counts[u * self.n + v]
    }

    pub fn add(&mut self, u: usize, v: usize, count: u64) {
        self.counts[u * self.n + v] += count;
    }
}

#[derive(Clone, Debug)]
pub struct CascadeSummary {
    pub config: CascadeConfig,
    pub ids: Vec<u64>,
    pub mean_impact: Vec<f64>,
    /// Rank of every node, 1 = largest mean impact.
    pub rank: Vec<usize>,
    /// Set by [`CascadeSummary::classify`].
    pub systemic_class: Option<Vec<Impact>>,
    pub triggers: TriggerCounts,
}

impl CascadeSummary {
    /// Node indices in rank order.
    pub fn by_rank(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.rank.len()).collect();
        order.sort_by_key(|&i| self.rank[i]);
        order
    }

    /// Assigns systemic classes preserving the register's impact counts.
    pub fn classify(&mut self, counts: ImpactCounts) -> Result<&[Impact]> {
        let classes = classify(&self.rank, counts)?;
        Ok(self.systemic_class.insert(classes))
    }
}

/// Mean cascade size from every node over `config.runs` runs.
///
/// Run `r` uses one network for all seeds; the cascade from node `i` in run
/// `r` draws from its own stream, so results do not depend on thread count.
pub fn systemic_impact(source: CascadeSource<'_>, ids: &[u64], config: &CascadeConfig) -> Result<CascadeSummary> {
    if config.runs == 0 {
        return Err(Error::InvalidParameter("cascade runs must be >= 1".into()));
    }
    let n = match source {
        CascadeSource::Similarity(sim) => sim.n(),
        CascadeSource::Graph(g) => g.n(),
    };
    if ids.len() != n {
        return Err(Error::InvalidParameter(format!("{} ids for {n} nodes", ids.len())));
    }
    let fixed_adj = match (source, config.ensemble_mode) {
        (CascadeSource::Graph(g), _) => Some(g.adjacency()),
        (CascadeSource::Similarity(sim), EnsembleMode::FixedGraph) => {
            Some(WeightedGraph::from_similarity(sim).adjacency())
        }
        (CascadeSource::Similarity(_), EnsembleMode::PerRunResample) => None,
    };
    let base = config.base_seed;

    let one_run = |run: usize| -> (Vec<u64>, TriggerCounts) {
        let sampled;
        let adj = match (&fixed_adj, source) {
            (Some(adj), _) => adj,
            (None, CascadeSource::Similarity(sim)) => {
                sampled = sample_graph(sim, run_graph_seed(base, run)).adjacency();
                &sampled
            }
            (None, CascadeSource::Graph(_)) => unreachable!(),
        };
        let mut sizes = vec![0u64; n];
        let mut triggers = TriggerCounts::new(n, 1);
        for (seed_risk, size) in sizes.iter_mut().enumerate() {
            let mut rng = rng::stream(base, &[rng::domain::CASCADE, seed_risk as u64, run as u64]);
            *size = cascade_on(adj, seed_risk, &mut rng, |u, v| triggers.add(u, v, 1)) as u64;
        }
        (sizes, triggers)
    };

    let (totals, mut triggers) = (0..config.runs)
        .into_par_iter()
        .map(one_run)
        .reduce(
            || (vec![0u64; n], TriggerCounts::new(n, 0)),
            |(mut a, mut ta), (b, tb)| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                for (x, y) in ta.counts.iter_mut().zip(tb.counts) {
                    *x += y;
                }
                (a, ta)
            },
        );
    triggers.runs = config.runs;

    let mean_impact: Vec<f64> = totals.iter().map(|&t| t as f64 / config.runs as f64).collect();
    Ok(CascadeSummary {
        config: *config,
        ids: ids.to_vec(),
        rank: rank_by_impact(&mean_impact, ids),
        mean_impact,
        systemic_class: None,
        triggers,
    })
}

/// Mean cascade size from one node, using the same networks and streams as
/// [`systemic_impact`], so it equals that node's entry there.
pub fn mean_impact_of(source: CascadeSource<'_>, seed_risk: usize, config: &CascadeConfig) -> Result<f64> {
    if config.runs == 0 {
        return Err(Error::InvalidParameter("cascade runs must be >= 1".into()));
    }
    let n = match source {
        CascadeSource::Similarity(sim) => sim.n(),
        CascadeSource::Graph(g) => g.n(),
    };
    if seed_risk >= n {
        return Err(Error::UnknownNode { node: seed_risk, n });
    }
    let base = config.base_seed;
    let fixed_adj = match (source, config.ensemble_mode) {
        (CascadeSource::Graph(g), _) => Some(g.adjacency()),
        (CascadeSource::Similarity(sim), EnsembleMode::FixedGraph) => {
            Some(WeightedGraph::from_similarity(sim).adjacency())
        }
        (CascadeSource::Similarity(_), EnsembleMode::PerRunResample) => None,
    };
    let total: u64 = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng::stream(base, &[rng::domain::CASCADE, seed_risk as u64, run as u64]);
            let size = match (&fixed_adj, source) {
                (Some(adj), _) => cascade_on(adj, seed_risk, &mut rng, |_, _| {}),
                (None, CascadeSource::Similarity(sim)) => {
                    let adj = sample_graph(sim, run_graph_seed(base, run)).adjacency();
                    cascade_on(&adj, seed_risk, &mut rng, |_, _| {})
                }
                (None, CascadeSource::Graph(_)) => unreachable!(),
            };
            size as u64
        })
        .sum();
    Ok(total as f64 / config.runs as f64)
}

fn run_graph_seed(base: u64, run: usize) -> u64 {
    rng::derive_seed(base, &[rng::domain::CASCADE, rng::domain::GRAPH, run as u64])
}

/// Ranks by descending mean; ties go to the smaller risk id.
pub fn rank_by_impact(means: &[f64], ids: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(ids[a].cmp(&ids[b])));
    let mut rank = vec![0; means.len()];
    for (pos, &node) in order.iter().enumerate() {
        rank[node] = pos + 1;
    }
    rank
}

/// Labels the top `High` ranks High, the next `Medium` ranks Medium and the
/// rest Low, so class sizes equal `counts`.
pub fn classify(ranks: &[usize], counts: ImpactCounts) -> Result<Vec<Impact>> {
    let n = ranks.len();
    if counts.total() != n {
        return Err(Error::CountMismatch {
            counts: counts.total(),
            n,
        });
    }
    let mut seen = vec![false; n];
    for &r in ranks {
        if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
            return Err(Error::InvalidParameter(format!("ranks are not a permutation of 1..={n}")));
        }
    }
    Ok(ranks
        .iter()
        .map(|&r| {
            if r <= counts.high {
                Impact::High
            } else if r <= counts.high + counts.medium {
                Impact::Medium
            } else {
                Impact::Low
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mismatch {
    Greater,
    Equal,
    Less,
}

impl Mismatch {
    pub fn of(systemic: Impact, independent: Impact) -> Self {
        match systemic.cmp(&independent) {
            std::cmp::Ordering::Greater => Mismatch::Greater,
            std::cmp::Ordering::Equal => Mismatch::Equal,
            std::cmp::Ordering::Less => Mismatch::Less,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mismatch::Greater => "greater",
            Mismatch::Equal => "equal",
            Mismatch::Less => "less",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchCounts {
    pub systemic_ge_independent: usize,
    pub systemic_lt_independent: usize,
}

pub fn mismatch_table(systemic: &[Impact], register: &RiskRegister) -> Result<MismatchCounts> {
    if systemic.len() != register.len() {
        return Err(Error::CountMismatch {
            counts: systemic.len(),
            n: register.len(),
        });
    }
    let less = systemic
        .iter()
        .zip(register.risks())
        .filter(|(&s, r)| s < r.independent_impact)
        .count();
    Ok(MismatchCounts {
        systemic_ge_independent: systemic.len() - less,
        systemic_lt_independent: less,
    })
}

pub fn write_summary_csv<W: Write>(summary: &CascadeSummary, register: &RiskRegister, writer: W) -> Result<()> {
    let classes = summary
        .systemic_class
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("cascade summary has no systemic classes".into()))?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "risk_id",
        "title",
        "firm_id",
        "mean_systemic_impact",
        "rank",
        "systemic_class",
        "independent_impact",
        "mismatch",
    ])?;
    for (i, r) in register.risks().iter().enumerate() {
        wtr.write_record([
            r.risk_id.to_string(),
            r.title.clone(),
            r.firm_id.clone(),
            summary.mean_impact[i].to_string(),
            summary.rank[i].to_string(),
            classes[i].to_string(),
            r.independent_impact.to_string(),
            Mismatch::of(classes[i], r.independent_impact).as_str().to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<cascade summary writer>", e))?;
    Ok(())
}
