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

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalised mutual information of two labellings of the same nodes:
/// `2 I(X;Y) / (H(X) + H(Y))`. Two single-module labellings score 1.
pub fn nmi(left: &[usize], right: &[usize]) -> f64 {
    assert_eq!(left.len(), right.len(), "labellings must cover the same nodes");
    if left.is_empty() {
        return 1.0;
    }
    let n = left.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut lc: HashMap<usize, usize> = HashMap::new();
    let mut rc: HashMap<usize, usize> = HashMap::new();
    for (&a, &b) in left.iter().zip(right) {
        *joint.entry((a, b)).or_default() += 1;
        *lc.entry(a).or_default() += 1;
        *rc.entry(b).or_default() += 1;
    }
    let hl = entropy(lc.values().copied(), n);
    let hr = entropy(rc.values().copied(), n);
    if hl + hr == 0.0 {
        return 1.0;
    }
    let mut cells: Vec<(&(usize, usize), &usize)> = joint.iter().collect();
    cells.sort_unstable();
    let mi: f64 = cells
        .into_iter()
        .map(|(&(a, b), &nab)| {
            let nab = nab as f64;
            (nab / n) * (nab * n / (lc[&a] as f64 * rc[&b] as f64)).ln()
        })
        .sum();
    (2.0 * mi / (hl + hr)).clamp(0.0, 1.0)
}
