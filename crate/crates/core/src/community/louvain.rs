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
//! Louvain modularity optimisation for weighted undirected graphs.
//!
//! Each restart shuffles the node sweep order once per level. A node moves only
//! when the best neighbouring module improves modularity by more than
//! [`MIN_GAIN`] over staying; among equally good neighbours the lowest module
//! id wins. Levels are aggregated until a level produces no move.

use rand::seq::SliceRandom;

use super::{modularity, Partition};
use crate::netgen::WeightedGraph;
use crate::rng::{self, StreamRng};

pub const DEFAULT_RESTARTS: usize = 10;

const MIN_GAIN: f64 = 1e-12;

/// Graph at one aggregation level: adjacency without self-loops plus the
/// self-loop weight of every (super)node.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn from_graph(g: &WeightedGraph) -> Self {
        Level {
            adj: g.adjacency(),
            self_loops: vec![0.0; g.n()],
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    fn degrees(&self) -> Vec<f64> {
        self.adj
            .iter()
            .zip(&self.self_loops)
            .map(|(nbrs, s)| nbrs.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect()
    }

    /// Local moving phase. Returns the module of every node and whether any
    /// node changed module.
    fn move_nodes(&self, two_m: f64, rng: &mut StreamRng) -> (Vec<usize>, bool) {
        let n = self.n();
        let degree = self.degrees();
        let mut module: Vec<usize> = (0..n).collect();
        let mut total = degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut link_to = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        loop {
            let mut moved = false;
            for &node in &order {
                let own = module[node];
                let k = degree[node];
                for &(nbr, w) in &self.adj[node] {
                    let c = module[nbr];
                    if link_to[c] == 0.0 {
                        touched.push(c);
                    }
                    link_to[c] += w;
                }
                total[own] -= k;
                let gain = |c: usize, w: f64| w - total[c] * k / two_m;
                let own_gain = gain(own, link_to[own]);

                touched.sort_unstable();
                touched.dedup();
                let mut best = own;
                let mut best_gain = f64::NEG_INFINITY;
                for &c in touched.iter().filter(|&&c| c != own) {
                    let g = gain(c, link_to[c]);
                    if g > best_gain {
                        best_gain = g;
                        best = c;
                    }
                }
                if best != own && best_gain > own_gain + MIN_GAIN {
                    module[node] = best;
                    moved = true;
                } else {
                    best = own;
                }
                total[best] += k;

                for &c in &touched {
                    link_to[c] = 0.0;
                }
                link_to[own] = 0.0;
                touched.clear();
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        (module, any_move)
    }

    /// Collapses every module into one node. Returns the new level and the
    /// contiguous module index of every current node.
    fn aggregate(&self, module: &[usize]) -> (Level, Vec<usize>) {
        let (index, count) = super::canonical_labels(module);
        let mut self_loops = vec![0.0; count];
        let mut weights: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for (u, nbrs) in self.adj.iter().enumerate() {
            let cu = index[u];
            self_loops[cu] += self.self_loops[u];
            for &(v, w) in nbrs {
                if v < u {
                    continue;
                }
                let cv = index[v];
                if cu == cv {
                    self_loops[cu] += w;
                } else {
                    *weights[cu].entry(cv).or_default() += w;
                    *weights[cv].entry(cu).or_default() += w;
                }
            }
        }
        let adj = weights.into_iter().map(|m| m.into_iter().collect()).collect();
        (Level { adj, self_loops }, index)
    }
}

fn louvain_run(g: &WeightedGraph, rng: &mut StreamRng) -> Vec<usize> {
    let two_m = 2.0 * g.total_weight();
    let mut labels: Vec<usize> = (0..g.n()).collect();
    let mut level = Level::from_graph(g);
    loop {
        let (module, moved) = level.move_nodes(two_m, rng);
        if !moved {
            return labels;
        }
        let (next, index) = level.aggregate(&module);
        for l in labels.iter_mut() {
            *l = index[*l];
        }
        level = next;
    }
}

/// Best of `restarts` randomised Louvain runs (at least one).
///
/// A graph without edges yields singleton modules with `q = 0`.
pub fn detect_modules(g: &WeightedGraph, seed: u64, restarts: usize) -> Partition {
    if g.total_weight() <= 0.0 {
        return Partition::singletons(g.n());
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = rng::stream(seed, &[rng::domain::LOUVAIN, restart as u64]);
        let labels = louvain_run(g, &mut rng);
        let q = modularity(g, &labels).expect("graph has positive weight");
        if best.as_ref().map_or(true, |(bq, _)| q > *bq) {
            best = Some((q, labels));
        }
    }
    let (q, labels) = best.expect("at least one restart");
    if q < 0.0 {
        // never worse than a single module over all linked nodes
        let strengths = g.strengths();
        let merged: Vec<usize> = (0..g.n()).map(|i| if strengths[i] > 0.0 { 0 } else { i + 1 }).collect();
        return Partition::from_labels(&merged, 0.0);
    }
    Partition::from_labels(&labels, q)
}
