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
//! Probabilistic weighted networks sampled from a similarity matrix.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::register::{Impact, RiskRegister};
use crate::rng;
use crate::similarity::{Measure, SimilarityMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Undirected weighted graph stored as a sorted edge list with `source < target`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    /// Validates and canonicalises an edge list: endpoints are ordered,
    /// self-loops, duplicates and weights outside (0, 1] are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut out: Vec<Edge> = Vec::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::UnknownNode { node: u.max(v), n });
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop on node {u}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidParameter(format!("edge ({u},{v}) weight {w} outside (0, 1]")));
            }
            out.push(Edge {
                source: u.min(v),
                target: u.max(v),
                weight: w,
            });
        }
        out.sort_by_key(|e| (e.source, e.target));
        if let Some(pair) = out.windows(2).find(|p| (p[0].source, p[0].target) == (p[1].source, p[1].target)) {
            return Err(Error::InvalidParameter(format!(
                "duplicate edge ({},{})",
                pair[0].source, pair[0].target
            )));
        }
        Ok(WeightedGraph { n, edges: out })
    }

    pub fn empty(n: usize) -> Self {
        WeightedGraph { n, edges: Vec::new() }
    }

    /// Every positive similarity entry as an edge: the expected-weight graph.
    pub fn from_similarity(sim: &SimilarityMatrix) -> Self {
        let n = sim.n();
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let w = sim.get(i, j);
                (w > 0.0).then_some(Edge {
                    source: i,
                    target: j,
                    weight: w,
                })
            })
            .collect();
        WeightedGraph { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Adjacency lists with neighbours in ascending order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.source].push((e.target, e.weight));
            adj[e.target].push((e.source, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        adj
    }

    /// Weighted degree of every node.
    pub fn strengths(&self) -> Vec<f64> {
        let mut k = vec![0.0; self.n];
        for e in &self.edges {
            k[e.source] += e.weight;
            k[e.target] += e.weight;
        }
        k
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Copy with every weight multiplied by `factor`. Weights may leave (0, 1].
    pub fn scaled(&self, factor: f64) -> WeightedGraph {
        WeightedGraph {
            n: self.n,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    weight: e.weight * factor,
                    ..*e
                })
                .collect(),
        }
    }
}

/// Samples one network: pair `(i, j)` is linked with probability `sim[i][j]`
/// and, when linked, carries weight `sim[i][j]`.
pub fn sample_graph(sim: &SimilarityMatrix, seed: u64) -> WeightedGraph {
    let mut rng = rng::stream(seed, &[rng::domain::GRAPH]);
    let n = sim.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = sim.get(i, j);
            let draw: f64 = rng.gen();
            if draw < p {
                edges.push(Edge {
                    source: i,
                    target: j,
                    weight: p,
                });
            }
        }
    }
    WeightedGraph { n, edges }
}

#[derive(Clone, Debug)]
pub struct GraphEnsemble {
    pub graphs: Vec<WeightedGraph>,
    pub measure: Measure,
    pub base_seed: u64,
}

impl GraphEnsemble {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.graphs.first().map_or(0, WeightedGraph::n)
    }
}

/// Seed of ensemble member `index`.
pub fn member_seed(base_seed: u64, index: usize) -> u64 {
    rng::derive_seed(base_seed, &[rng::domain::GRAPH, index as u64])
}

pub fn sample_ensemble(sim: &SimilarityMatrix, size: usize, base_seed: u64) -> Result<GraphEnsemble> {
    if size == 0 {
        return Err(Error::InvalidParameter("ensemble size must be >= 1".into()));
    }
    let graphs = (0..size)
        .into_par_iter()
        .map(|k| sample_graph(sim, member_seed(base_seed, k)))
        .collect();
    Ok(GraphEnsemble {
        graphs,
        measure: sim.measure(),
        base_seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    /// Number of links.
    pub links: usize,
    /// Maximum weighted degree.
    pub k_max: f64,
    /// Total edge weight, half the adjacency sum.
    pub total_weight: f64,
    pub sqrt_2l: f64,
}

pub fn graph_stats(g: &WeightedGraph) -> GraphStats {
    let links = g.num_edges();
    GraphStats {
        links,
        k_max: g.strengths().into_iter().fold(0.0, f64::max),
        total_weight: g.total_weight(),
        sqrt_2l: (2.0 * links as f64).sqrt(),
    }
}

/// `source,target,weight` with endpoints written as risk ids.
pub fn write_edge_list_csv<W: Write>(g: &WeightedGraph, ids: &[u64], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["source", "target", "weight"])?;
    for e in g.edges() {
        wtr.write_record([ids[e.source].to_string(), ids[e.target].to_string(), e.weight.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<edge list writer>", e))?;
    Ok(())
}

/// Optional per-node annotations for GraphML export.
#[derive(Clone, Copy, Debug, Default)]
pub struct NodeAnnotations<'a> {
    pub modules: Option<&'a [usize]>,
    pub systemic_classes: Option<&'a [Impact]>,
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn write_graphml<W: Write>(
    g: &WeightedGraph,
    register: &RiskRegister,
    notes: NodeAnnotations<'_>,
    mut w: W,
) -> Result<()> {
    let io = |e| Error::io("<graphml writer>", e);
    let keys = [
        ("risk_id", "node", "long"),
        ("title", "node", "string"),
        ("firm_id", "node", "string"),
        ("independent_impact", "node", "string"),
        ("module", "node", "int"),
        ("systemic_impact", "node", "string"),
        ("weight", "edge", "double"),
    ];
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).map_err(io)?;
    writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#).map_err(io)?;
    for (name, domain, ty) in keys {
        writeln!(w, r#"  <key id="{name}" for="{domain}" attr.name="{name}" attr.type="{ty}"/>"#).map_err(io)?;
    }
    writeln!(w, r#"  <graph id="risk_network" edgedefault="undirected">"#).map_err(io)?;
    for (i, r) in register.risks().iter().enumerate() {
        writeln!(w, r#"    <node id="n{i}">"#).map_err(io)?;
        writeln!(w, r#"      <data key="risk_id">{}</data>"#, r.risk_id).map_err(io)?;
        writeln!(w, r#"      <data key="title">{}</data>"#, xml_escape(&r.title)).map_err(io)?;
        writeln!(w, r#"      <data key="firm_id">{}</data>"#, xml_escape(&r.firm_id)).map_err(io)?;
        writeln!(w, r#"      <data key="independent_impact">{}</data>"#, r.independent_impact).map_err(io)?;
        if let Some(modules) = notes.modules {
            writeln!(w, r#"      <data key="module">{}</data>"#, modules[i]).map_err(io)?;
        }
        if let Some(classes) = notes.systemic_classes {
            writeln!(w, r#"      <data key="systemic_impact">{}</data>"#, classes[i]).map_err(io)?;
        }
        writeln!(w, "    </node>").map_err(io)?;
    }
    for (k, e) in g.edges().iter().enumerate() {
        writeln!(
            w,
            r#"    <edge id="e{k}" source="n{}" target="n{}"><data key="weight">{}</data></edge>"#,
            e.source, e.target, e.weight
        )
        .map_err(io)?;
    }
    writeln!(w, "  </graph>\n</graphml>").map_err(io)?;
    Ok(())
}
