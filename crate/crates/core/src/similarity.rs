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
//! Type 1 (positive-match only) binary similarity measures and the pairwise
//! similarity matrix of a register.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::register::RiskRegister;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    Cosine,
    Dice,
    Jaccard,
    LanceWilliams,
    Sorgenfrei,
    /// Deliberately insensitive measure that grows minimally with overlap.
    MinimalTest,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Cosine,
        Measure::Dice,
        Measure::Jaccard,
        Measure::LanceWilliams,
        Measure::Sorgenfrei,
        Measure::MinimalTest,
    ];

    /// Short name used on the command line and in output files.
    pub fn name(self) -> &'static str {
        match self {
            Measure::Cosine => "cosine",
            Measure::Dice => "dice",
            Measure::Jaccard => "jaccard",
            Measure::LanceWilliams => "lancewilliams",
            Measure::Sorgenfrei => "sorgenfrei",
            Measure::MinimalTest => "mintest",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown measure '{s}'")))
    }
}

/// Positive-match counts of a vector pair. Shared absences are never counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchCounts {
    /// Present in both.
    pub a: u32,
    /// Present only in the first.
    pub b: u32,
    /// Present only in the second.
    pub c: u32,
}

pub fn match_counts(u: &[bool], v: &[bool]) -> Result<MatchCounts> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(counts_unchecked(u, v))
}

fn counts_unchecked(u: &[bool], v: &[bool]) -> MatchCounts {
    let mut m = MatchCounts::default();
    for (&x, &y) in u.iter().zip(v) {
        match (x, y) {
            (true, true) => m.a += 1,
            (true, false) => m.b += 1,
            (false, true) => m.c += 1,
            (false, false) => {}
        }
    }
    m
}

impl MatchCounts {
    /// Similarity under `measure`, in [0, 1].
    ///
    /// If either vector has no positives the value is 0 for every measure.
    pub fn similarity(self, measure: Measure) -> f64 {
        let MatchCounts { a, b, c } = self;
        if a + b == 0 || a + c == 0 || a == 0 {
            return 0.0;
        }
        let (a, b, c) = (a as f64, b as f64, c as f64);
        match measure {
            Measure::Cosine => a / ((a + b) * (a + c)).sqrt(),
            Measure::Dice => 2.0 * a / (2.0 * a + b + c),
            Measure::Jaccard => a / (a + b + c),
            // 1 - (b+c)/(2a+b+c), with the numerator combined exactly
            Measure::LanceWilliams => {
                let total = 2.0 * a + b + c;
                (total - (b + c)) / total
            }
            Measure::Sorgenfrei => a * a / ((a + b) * (a + c)),
            Measure::MinimalTest => {
                let total = a + b + c;
                let ratio = if b + c == 0.0 { f64::INFINITY } else { a / (b + c) };
                ratio.min(total) / total
            }
        }
    }
}

/// Similarity of two binary vectors under `measure`.
pub fn similarity(u: &[bool], v: &[bool], measure: Measure) -> Result<f64> {
    Ok(match_counts(u, v)?.similarity(measure))
}

/// Symmetric n x n similarity matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<u64>,
    values: Vec<f64>,
    measure: Measure,
}

impl SimilarityMatrix {
    /// Builds a matrix from explicit values. The diagonal is forced to 0.
    pub fn from_values(ids: Vec<u64>, values: Vec<Vec<f64>>, measure: Measure) -> Result<Self> {
        let n = ids.len();
        if values.len() != n || values.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter(format!("similarity matrix must be {n}x{n}")));
        }
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = values[i][j];
                if i == j {
                    continue;
                }
                if !(0.0..=1.0).contains(&v) || v != values[j][i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) = {v} is not a symmetric value in [0,1]"
                    )));
                }
                flat[i * n + j] = v;
            }
        }
        Ok(SimilarityMatrix {
            ids,
            values: flat,
            measure,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    /// Sum of the strict upper triangle: the expected edge count of a sampled graph.
    pub fn expected_edge_count(&self) -> f64 {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["risk_id".to_string()];
        header.extend(self.ids.iter().map(u64::to_string));
        wtr.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.to_string()];
            row.extend(self.row(i).iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<similarity writer>", e))?;
        Ok(())
    }
}

/// Pairwise similarity of every pair of register rows.
pub fn similarity_matrix(register: &RiskRegister, measure: Measure) -> SimilarityMatrix {
    let risks = register.risks();
    let n = risks.len();
    for r in risks.iter().filter(|r| r.positives() == 0) {
        log::warn!(
            "risk {} has no characteristics; its similarity to every other risk is 0",
            r.risk_id
        );
    }
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, slot) in row.iter_mut().enumerate() {
            if i != j {
                *slot = counts_unchecked(&risks[i].characteristics, &risks[j].characteristics)
                    .similarity(measure);
            }
        }
    });
    SimilarityMatrix {
        ids: register.risk_ids(),
        values,
        measure,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_similarity: f64,
}

/// Mean similarity between a vector that starts all-zero and gains one random
/// positive per step and an all-ones target of the same length.
pub fn sensitivity_curve(length: usize, measure: Measure, trials: usize, seed: u64) -> Result<Vec<CurvePoint>> {
    if length == 0 || trials == 0 {
        return Err(Error::InvalidParameter(
            "sensitivity curve needs length >= 1 and trials >= 1".into(),
        ));
    }
    let target = vec![true; length];
    let mut sums = vec![0.0; length + 1];
    for trial in 0..trials {
        let mut rng = rng::stream(seed, &[rng::domain::CURVE, measure as u64, trial as u64]);
        let mut order: Vec<usize> = (0..length).collect();
        order.shuffle(&mut rng);
        let mut current = vec![false; length];
        sums[0] += counts_unchecked(&current, &target).similarity(measure);
        for (step, &pos) in order.iter().enumerate() {
            current[pos] = true;
            sums[step + 1] += counts_unchecked(&current, &target).similarity(measure);
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(step, s)| CurvePoint {
            step,
            mean_similarity: s / trials as f64,
        })
        .collect())
}
