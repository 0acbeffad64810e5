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
//! Consensus modules across a graph ensemble.
//!
//! Member partitions live in unrelated label spaces, so each one is first
//! aligned to a reference (the highest-modularity member) by greedy
//! maximum-overlap matching. Unmatched modules receive fresh labels that are
//! never reused. Every node then takes its most frequent aligned label.
//!
//! All tie-breaks use the smallest node index of a module, never raw label
//! values, so the result does not depend on how members number their modules.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use super::{canonical_labels, detect_modules, modularity, Partition};
use crate::netgen::GraphEnsemble;
use crate::rng;

/// Maps `target` labels into the label space of `reference`.
///
/// Reference modules are numbered `0..R` by first appearance. Target modules
/// matched to a reference module take its number; the rest take consecutive
/// values from `next_fresh`.
pub fn align_labels(target: &[usize], reference: &[usize], next_fresh: &mut usize) -> Vec<usize> {
    let (t, t_count) = canonical_labels(target);
    let (r, r_count) = canonical_labels(reference);
    let mut overlap: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in t.iter().zip(&r) {
        *overlap.entry((a, b)).or_default() += 1;
    }
    let mut pairs: Vec<((usize, usize), usize)> = overlap.into_iter().collect();
    pairs.sort_by_key(|&((a, b), count)| (Reverse(count), a, b));

    let mut mapped: Vec<Option<usize>> = vec![None; t_count];
    let mut taken = vec![false; r_count];
    for ((a, b), _) in pairs {
        if mapped[a].is_none() && !taken[b] {
            mapped[a] = Some(b);
            taken[b] = true;
        }
    }
    let mapped: Vec<usize> = mapped
        .into_iter()
        .map(|m| {
            m.unwrap_or_else(|| {
                *next_fresh += 1;
                *next_fresh - 1
            })
        })
        .collect();
    t.into_iter().map(|a| mapped[a]).collect()
}

/// Share of nodes whose module in `other`, after alignment, equals their
/// module in `reference`.
pub fn match_fraction(reference: &[usize], other: &[usize]) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    let (r, r_count) = canonical_labels(reference);
    let mut fresh = r_count;
    let aligned = align_labels(other, reference, &mut fresh);
    let hits = aligned.iter().zip(&r).filter(|(a, b)| a == b).count();
    hits as f64 / reference.len() as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct Consensus {
    pub partition: Partition,
    /// Fraction of members that put each node in its consensus module.
    pub confidence: Vec<f64>,
    #[serde(skip)]
    pub members: Vec<Partition>,
}

impl Consensus {
    pub fn mean_confidence(&self) -> f64 {
        if self.confidence.is_empty() {
            return 1.0;
        }
        self.confidence.iter().sum::<f64>() / self.confidence.len() as f64
    }
}

/// Consensus of already computed member partitions. `q` is left at 0.
pub fn consensus_of(members: &[Partition]) -> (Partition, Vec<f64>) {
    assert!(!members.is_empty(), "consensus needs at least one partition");
    let reference_idx = members
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.q > members[best].q { i } else { best });
    let reference = members[reference_idx].assignment();
    let n = reference.len();
    let (_, r_count) = canonical_labels(reference);
    let mut fresh = r_count;

    let mut votes: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); n];
    for member in members {
        let aligned = align_labels(member.assignment(), reference, &mut fresh);
        for (node, label) in aligned.into_iter().enumerate() {
            *votes[node].entry(label).or_default() += 1;
        }
    }
    let total = members.len() as f64;
    let (labels, confidence): (Vec<usize>, Vec<f64>) = votes
        .into_iter()
        .map(|v| {
            let (label, count) = v
                .into_iter()
                .fold((usize::MAX, 0), |best, (l, c)| if c > best.1 { (l, c) } else { best });
            (label, count as f64 / total)
        })
        .unzip();
    (Partition::from_labels(&labels, 0.0), confidence)
}

/// Detects modules on every ensemble member and forms their consensus.
///
/// The consensus `q` is the mean modularity of the consensus assignment over
/// members with at least one edge (0 if there are none).
pub fn consensus_partition(ensemble: &GraphEnsemble, seed: u64, restarts: usize) -> Consensus {
    let members: Vec<Partition> = ensemble
        .graphs
        .par_iter()
        .enumerate()
        .map(|(k, g)| {
            let member_seed = rng::derive_seed(seed, &[rng::domain::LOUVAIN, k as u64]);
            detect_modules(g, member_seed, restarts)
        })
        .collect();
    let (mut partition, confidence) = consensus_of(&members);
    let qs: Vec<f64> = ensemble
        .graphs
        .iter()
        .filter_map(|g| modularity(g, partition.assignment()).ok())
        .collect();
    partition.q = if qs.is_empty() {
        0.0
    } else {
        qs.iter().sum::<f64>() / qs.len() as f64
    };
    Consensus {
        partition,
        confidence,
        members,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::sample_ensemble;
    use crate::similarity::{Measure, SimilarityMatrix};
    use proptest::prelude::*;

    fn block_sim(blocks: &[usize], inside: f64, across: f64) -> SimilarityMatrix {
        let labels: Vec<usize> = blocks
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat(b).take(size))
            .collect();
        let n = labels.len();
        let values = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (i == j, labels[i] == labels[j]) {
                        (true, _) => 0.0,
                        (false, true) => inside,
                        (false, false) => across,
                    })
                    .collect()
            })
            .collect();
        SimilarityMatrix::from_values((1..=n as u64).collect(), values, Measure::Cosine).unwrap()
    }

    #[test]
    fn alignment_matches_overlap() {
        let reference = [5, 5, 5, 8, 8, 8];
        let mut fresh = 2;
        let aligned = align_labels(&[2, 2, 2, 1, 1, 3], &reference, &mut fresh);
        assert_eq!(aligned, vec![0, 0, 0, 1, 1, 2]);
        assert_eq!(fresh, 3);
        assert!((match_fraction(&reference, &[2, 2, 2, 1, 1, 3]) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(match_fraction(&reference, &[0, 0, 0, 4, 4, 4]), 1.0);
    }

    #[test]
    fn identical_members_give_full_confidence() {
        let sim = block_sim(&[5, 5], 1.0, 0.0);
        let ens = sample_ensemble(&sim, 6, 1).unwrap();
        let c = consensus_partition(&ens, 2, 3);
        assert_eq!(c.partition.assignment(), &[1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
        assert!(c.confidence.iter().all(|&f| f == 1.0));
        assert!((c.partition.q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_similarity_gives_singletons() {
        let sim = block_sim(&[4], 0.0, 0.0);
        let ens = sample_ensemble(&sim, 3, 1).unwrap();
        let c = consensus_partition(&ens, 2, 2);
        assert_eq!(c.partition.assignment(), &[1, 2, 3, 4]);
        assert_eq!(c.partition.q, 0.0);
    }

    #[test]
    fn noisy_blocks_are_recovered() {
        let sim = block_sim(&[8, 8, 8], 0.7, 0.05);
        let ens = sample_ensemble(&sim, 40, 9).unwrap();
        let c = consensus_partition(&ens, 3, 5);
        let truth: Vec<usize> = (0..24).map(|i| i / 8).collect();
        assert_eq!(super::super::nmi(c.partition.assignment(), &truth), 1.0);
        assert!(c.mean_confidence() > 0.8);
    }

    proptest! {
        #[test]
        fn consensus_ignores_member_labels(
            raw in prop::collection::vec(prop::collection::vec(0usize..4, 12), 1..6),
            perm_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let members: Vec<Partition> = raw
                .iter()
                .enumerate()
                .map(|(i, l)| Partition::from_labels(l, i as f64 * 0.01))
                .collect();
            let mut rng = crate::rng::stream(perm_seed, &[]);
            let permuted: Vec<Partition> = members
                .iter()
                .map(|p| {
                    let mut perm: Vec<usize> = (0..=p.num_modules()).collect();
                    perm.shuffle(&mut rng);
                    let labels: Vec<usize> = p.assignment().iter().map(|&m| perm[m] + 100).collect();
                    Partition { assignment: labels, q: p.q }
                })
                .collect();
            let (a, ca) = consensus_of(&members);
            let (b, cb) = consensus_of(&permuted);
            prop_assert_eq!(a.assignment(), b.assignment());
            prop_assert_eq!(ca, cb);
        }
    }
}
