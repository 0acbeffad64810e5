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
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::netgen::WeightedGraph;

/// Weighted Newman-Girvan modularity of a labelling.
///
/// Computed per module as `w_in / m - (K / 2m)^2` where `w_in` is the weight
/// inside the module and `K` its summed weighted degree; this equals the
/// pairwise sum `(1/2m) sum_ij (A_ij - k_i k_j / 2m) delta(c_i, c_j)`.
pub fn modularity(g: &WeightedGraph, assignment: &[usize]) -> Result<f64> {
    if assignment.len() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "assignment covers {} nodes, graph has {}",
            assignment.len(),
            g.n()
        )));
    }
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::ModularityUndefined);
    }
    let mut inside: HashMap<usize, f64> = HashMap::new();
    let mut degree: HashMap<usize, f64> = HashMap::new();
    for e in g.edges() {
        let (cu, cv) = (assignment[e.source], assignment[e.target]);
        if cu == cv {
            *inside.entry(cu).or_default() += e.weight;
        }
        *degree.entry(cu).or_default() += e.weight;
        *degree.entry(cv).or_default() += e.weight;
    }
    let mut modules: Vec<usize> = degree.keys().copied().collect();
    modules.sort_unstable();
    Ok(modules
        .into_iter()
        .map(|c| {
            let k = degree[&c] / (2.0 * m);
            inside.get(&c).copied().unwrap_or(0.0) / m - k * k
        })
        .sum())
}
