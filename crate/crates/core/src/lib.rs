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

//! Risk networks built from tagged risk registers.
//!
//! The pipeline turns a register of risks (each described by binary
//! characteristic tags, the reporting firm and a qualitative impact) into an
//! ensemble of probabilistic weighted networks, then derives:
//!
//! - modules (risk classes) by weighted modularity maximisation, with a
//!   consensus over the ensemble and statistical validation,
//! - systemic impact of every risk from Monte Carlo susceptible-infected
//!   cascades, turned into High/Medium/Low classes that preserve the
//!   register's own impact counts,
//! - firm-level products: horizon-scanning coverage, the liability network
//!   and an emerging-risk report,
//! - a robustness harness that reruns everything under other binary
//!   similarity measures.

pub mod analytics;
pub mod cascade;
pub mod community;
pub mod error;
pub mod netgen;
pub mod pipeline;
pub mod register;
pub mod rng;
pub mod similarity;

pub use error::{Error, Result};
pub use netgen::{GraphEnsemble, WeightedGraph};
pub use register::{Impact, RiskRecord, RiskRegister};
pub use similarity::{Measure, SimilarityMatrix};
