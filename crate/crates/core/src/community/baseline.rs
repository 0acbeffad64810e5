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
//! Random modular baselines for judging whether detected modules carry more
//! structure than chance.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{detect_modules, nmi, Partition};
use crate::netgen::{GraphEnsemble, WeightedGraph};
use crate::rng;

/// Planted-partition random graph shaped like `reference` on `g`.
///
/// Nodes are shuffled into planted modules with the reference module sizes.
/// Pairs inside a planted module link with `g`'s observed intra-module link
/// density (under `reference`), other pairs with the inter-module density.
/// Weights are drawn uniformly from `g`'s edge weights.
pub fn random_modular_baseline(reference: &Partition, g: &WeightedGraph, seed: u64) -> WeightedGraph {
    let n = g.n();
    let sizes = reference.module_sizes();
    let intra_pairs: usize = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let inter_pairs = n * n.saturating_sub(1) / 2 - intra_pairs;
    let intra_links: usize = reference.module_internal_links(g).iter().sum();
    let inter_links = g.num_edges() - intra_links;
    let density = |links: usize, pairs: usize| if pairs == 0 { 0.0 } else { links as f64 / pairs as f64 };
    let (p_in, p_out) = (density(intra_links, intra_pairs), density(inter_links, inter_pairs));

    let mut rng = rng::stream(seed, &[rng::domain::BASELINE]);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);
    let mut planted = vec![0; n];
    let mut cursor = 0;
    for (module, &size) in sizes.iter().enumerate() {
        for &node in &nodes[cursor..cursor + size] {
            planted[node] = module;
        }
        cursor += size;
    }

    let weights: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    let mut edges = Vec::new();
    if !weights.is_empty() {
        for i in 0..n {
            for j in i + 1..n {
                let p = if planted[i] == planted[j] { p_in } else { p_out };
                if rng.gen::<f64>() < p {
                    edges.push((i, j, weights[rng.gen_range(0..weights.len())]));
                }
            }
        }
    }
    WeightedGraph::new(n, edges).expect("baseline edges are canonical")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NmiSummary {
    pub mean: f64,
    pub stddev: f64,
    pub ensemble_size: usize,
}

/// NMI between each member's modules and the modules detected on its random
/// baseline counterpart, summarised over the ensemble. `stddev` is the sample
/// standard deviation (0 for a single member).
pub fn nmi_vs_random(ensemble: &GraphEnsemble, partitions: &[Partition], seed: u64, restarts: usize) -> NmiSummary {
    assert_eq!(ensemble.len(), partitions.len(), "one partition per ensemble member");
    let scores: Vec<f64> = ensemble
        .graphs
        .par_iter()
        .zip(partitions)
        .enumerate()
        .map(|(k, (g, p))| {
            let baseline = random_modular_baseline(p, g, rng::derive_seed(seed, &[rng::domain::BASELINE, k as u64]));
            let found = detect_modules(
                &baseline,
                rng::derive_seed(seed, &[rng::domain::LOUVAIN, rng::domain::BASELINE, k as u64]),
                restarts,
            );
            nmi(found.assignment(), p.assignment())
        })
        .collect();
    let count = scores.len();
    let mean = scores.iter().sum::<f64>() / count.max(1) as f64;
    let stddev = if count > 1 {
        (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    NmiSummary {
        mean,
        stddev,
        ensemble_size: count,
    }
}
