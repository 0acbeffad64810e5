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
use serde::Serialize;

use super::{NmiSummary, Partition};
use crate::netgen::{graph_stats, WeightedGraph};

/// Whether the configuration null model is usable: `k_max < sqrt(2L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Suitability {
    pub k_max: f64,
    pub sqrt_2l: f64,
    pub pass: bool,
}

/// Resolution-limit check of one module: self-consistent iff `l_s >= sqrt(2L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModuleResolution {
    pub module: usize,
    pub l_s: usize,
    pub sqrt_2l: f64,
    pub self_consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub suitability: Suitability,
    pub resolution: Vec<ModuleResolution>,
    pub inter_module_links: usize,
    pub nmi_vs_random: Option<NmiSummary>,
}

pub fn validate(g: &WeightedGraph, p: &Partition) -> ValidationReport {
    let stats = graph_stats(g);
    let internal = p.module_internal_links(g);
    let resolution = internal
        .iter()
        .enumerate()
        .map(|(i, &l_s)| ModuleResolution {
            module: i + 1,
            l_s,
            sqrt_2l: stats.sqrt_2l,
            self_consistent: l_s as f64 >= stats.sqrt_2l,
        })
        .collect();
    ValidationReport {
        suitability: Suitability {
            k_max: stats.k_max,
            sqrt_2l: stats.sqrt_2l,
            pass: stats.k_max < stats.sqrt_2l,
        },
        resolution,
        inter_module_links: stats.links - internal.iter().sum::<usize>(),
        nmi_vs_random: None,
    }
}
