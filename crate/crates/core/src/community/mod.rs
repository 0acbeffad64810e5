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
//! Module (community) detection by weighted modularity maximisation, ensemble
//! consensus and statistical validation of the resulting modules.

mod baseline;
mod consensus;
mod louvain;
mod modularity;
mod nmi;
mod validate;

use std::collections::HashMap;

use serde::Serialize;

use crate::netgen::WeightedGraph;

pub use baseline::{nmi_vs_random, random_modular_baseline, NmiSummary};
pub use consensus::{align_labels, consensus_of, consensus_partition, match_fraction, Consensus};
pub use louvain::{detect_modules, DEFAULT_RESTARTS};
pub use modularity::modularity;
pub use nmi::nmi;
pub use validate::{validate, ModuleResolution, Suitability, ValidationReport};

/// Assignment of every node to one module. Module ids run from 1 and are
/// ordered by descending module size (ties: smallest member node first).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    assignment: Vec<usize>,
    pub q: f64,
}

impl Partition {
    /// Relabels arbitrary labels into the canonical 1-based, size-ordered ids.
    pub fn from_labels(labels: &[usize], q: f64) -> Self {
        let mut groups: HashMap<usize, (usize, usize)> = HashMap::new();
        for (node, &label) in labels.iter().enumerate() {
            let entry = groups.entry(label).or_insert((0, node));
            entry.0 += 1;
        }
        let mut order: Vec<(usize, usize, usize)> =
            groups.into_iter().map(|(label, (size, first))| (label, size, first)).collect();
        order.sort_by_key(|&(_, size, first)| (std::cmp::Reverse(size), first));
        let new_id: HashMap<usize, usize> = order
            .iter()
            .enumerate()
            .map(|(rank, &(label, _, _))| (label, rank + 1))
            .collect();
        Partition {
            assignment: labels.iter().map(|l| new_id[l]).collect(),
            q,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (1..=n).collect(),
            q: 0.0,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_modules(&self) -> usize {
        self.assignment.iter().copied().max().unwrap_or(0)
    }

    /// Sizes indexed by module id - 1.
    pub fn module_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_modules()];
        for &m in &self.assignment {
            sizes[m - 1] += 1;
        }
        sizes
    }

    /// Unweighted count of edges inside each module, indexed by module id - 1.
    pub fn module_internal_links(&self, g: &WeightedGraph) -> Vec<usize> {
        let mut links = vec![0; self.num_modules()];
        for e in g.edges() {
            let m = self.assignment[e.source];
            if m == self.assignment[e.target] {
                links[m - 1] += 1;
            }
        }
        links
    }
}

/// Relabels to `0..k` in order of first appearance.
pub(crate) fn canonical_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabels_by_descending_size() {
        let p = Partition::from_labels(&[7, 3, 3, 9, 3, 7], 0.0);
        assert_eq!(p.assignment(), &[2, 1, 1, 3, 1, 2]);
        assert_eq!(p.module_sizes(), vec![3, 2, 1]);
    }

    #[test]
    fn equal_sizes_order_by_first_node() {
        let p = Partition::from_labels(&[5, 2, 5, 2], 0.0);
        assert_eq!(p.assignment(), &[1, 2, 1, 2]);
    }
}
