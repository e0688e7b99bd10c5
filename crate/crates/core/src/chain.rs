//! Trust chains over the directed graph of direct-interaction relationships.
//!
//! An edge `from -> to` for a service exists when `from` holds interaction
//! history with `to` for that service. Chains are simple paths of at least two
//! edges; each edge is weighted by its positive-interaction ratio times its
//! satisfaction level, and a chain's recommended trust is the weight-averaged
//! direct trust of its edges.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::DirectTrustTable;
use crate::trust::{
    aggregate_recommendations, chain_trust, edge_weight, resolve_trust_degree, ChainEdge,
    DecayParams, ReputationFactor, Resolution, TrustChain, TrustDegree, TrustError,
};

pub const MIN_CHAIN_LENGTH: usize = 2;
pub const MAX_CHAIN_LENGTH_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("source and target are both {0}; reflexive trust needs no chain")]
    SameEndpoints(String),
    #[error("max chain length {0} is outside 2..=8")]
    MaxLength(usize),
    #[error("unknown entity {0}")]
    UnknownNode(String),
    #[error("self edge on {0}")]
    SelfEdge(String),
    #[error("duplicate edge {from} -> {to} for {service}")]
    DuplicateEdge {
        from: String,
        to: String,
        service: String,
    },
    #[error("graph parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Trust(#[from] TrustError),
}

pub type Result<T> = std::result::Result<T, ChainError>;

/// Evidence carried by one directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub n_positive: u64,
    pub n_total: u64,
    pub sl: f64,
    pub direct_trust: TrustDegree,
}

impl GraphEdge {
    pub fn new(n_positive: u64, n_total: u64, sl: f64, direct_trust: TrustDegree) -> Result<Self> {
        // edge_weight performs the count and sl checks.
        edge_weight(n_positive, n_total, sl)?;
        Ok(GraphEdge {
            n_positive,
            n_total,
            sl,
            direct_trust,
        })
    }

    pub fn weight(&self) -> f64 {
        edge_weight(self.n_positive, self.n_total, self.sl).expect("validated on construction")
    }
}

type EdgeKey = (String, String, String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrustGraph {
    nodes: BTreeSet<String>,
    edges: BTreeMap<EdgeKey, GraphEdge>,
}

impl TrustGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: impl Into<String>) {
        self.nodes.insert(id.into());
    }

    /// Adds an edge, registering both endpoints as nodes.
    pub fn add_edge(&mut self, from: &str, to: &str, service: &str, edge: GraphEdge) -> Result<()> {
        if from == to {
            return Err(ChainError::SelfEdge(from.to_owned()));
        }
        let key = (from.to_owned(), to.to_owned(), service.to_owned());
        if self.edges.contains_key(&key) {
            return Err(ChainError::DuplicateEdge {
                from: key.0,
                to: key.1,
                service: key.2,
            });
        }
        self.nodes.insert(from.to_owned());
        self.nodes.insert(to.to_owned());
        self.edges.insert(key, edge);
        Ok(())
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn edge(&self, from: &str, to: &str, service: &str) -> Option<&GraphEdge> {
        self.edges
            .get(&(from.to_owned(), to.to_owned(), service.to_owned()))
    }

    /// `(from, to, service, edge)` in key order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, &str, &GraphEdge)> {
        self.edges
            .iter()
            .map(|((f, t, s), e)| (f.as_str(), t.as_str(), s.as_str(), e))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Builds the graph induced by the given Direct Trust Tables at `t_now`.
    ///
    /// Each table entry becomes an edge whose direct trust is evaluated with
    /// the trustee's reputation factor and whose satisfaction level is the
    /// entry's mean interaction score.
    pub fn from_tables<'a, F>(
        tables: impl IntoIterator<Item = &'a DirectTrustTable>,
        t_now: f64,
        params: DecayParams,
        reputation_of: F,
    ) -> Result<Self>
    where
        F: Fn(&str) -> ReputationFactor,
    {
        let mut graph = TrustGraph::new();
        for table in tables {
            graph.add_node(table.owner());
            for ((trustee, service), entry) in table.entries() {
                let dt = crate::trust::direct_trust(
                    entry.history(),
                    t_now,
                    params,
                    reputation_of(trustee),
                )?;
                let sl = entry.mean_score().expect("entries are never empty");
                let edge = GraphEdge::new(entry.n_positive(), entry.n_total(), sl, dt)?;
                graph.add_edge(table.owner(), trustee, service, edge)?;
            }
        }
        Ok(graph)
    }

    fn successors(&self, service: &str) -> BTreeMap<&str, Vec<(&str, &GraphEdge)>> {
        let mut adj: BTreeMap<&str, Vec<(&str, &GraphEdge)>> = BTreeMap::new();
        for ((from, to, s), e) in &self.edges {
            if s == service {
                adj.entry(from.as_str()).or_default().push((to.as_str(), e));
            }
        }
        adj
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            nodes: self.nodes.iter().cloned().collect(),
            edges: self
                .edges()
                .map(|(from, to, service, e)| EdgeDoc {
                    from: from.to_owned(),
                    to: to.to_owned(),
                    service: service.to_owned(),
                    n_p: e.n_positive,
                    n: e.n_total,
                    sl: e.sl,
                    dt: e.direct_trust,
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("graph serialises");
        out.push('\n');
        out
    }

    /// Parses a graph fixture. Edge endpoints must be listed in `nodes`.
    pub fn from_json(document: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(document).map_err(|e| ChainError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut graph = TrustGraph::new();
        for n in doc.nodes {
            graph.add_node(n);
        }
        for e in doc.edges {
            for end in [&e.from, &e.to] {
                if !graph.contains_node(end) {
                    return Err(ChainError::UnknownNode(end.clone()));
                }
            }
            let edge = GraphEdge::new(e.n_p, e.n, e.sl, e.dt)?;
            graph.add_edge(&e.from, &e.to, &e.service, edge)?;
        }
        Ok(graph)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: Vec<String>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: String,
    to: String,
    service: String,
    n_p: u64,
    n: u64,
    sl: f64,
    dt: TrustDegree,
}

fn check_query(source: &str, target: &str, max_len: usize) -> Result<()> {
    if source == target {
        return Err(ChainError::SameEndpoints(source.to_owned()));
    }
    if !(MIN_CHAIN_LENGTH..=MAX_CHAIN_LENGTH_LIMIT).contains(&max_len) {
        return Err(ChainError::MaxLength(max_len));
    }
    Ok(())
}

/// Every simple path from `source` to `target` over `service` edges with
/// between 2 and `max_len` edges.
///
/// Sorted by descending total edge weight, ties broken by the node sequence.
pub fn discover_chains(
    graph: &TrustGraph,
    source: &str,
    target: &str,
    service: &str,
    max_len: usize,
) -> Result<Vec<TrustChain>> {
    check_query(source, target, max_len)?;
    let adj = graph.successors(service);
    let mut found = Vec::new();
    let mut path: Vec<(&str, &str, &GraphEdge)> = Vec::new();
    let mut on_path: BTreeSet<&str> = BTreeSet::from([source]);
    let mut stack = vec![(source, 0usize)];

    // Iterative DFS: each frame is (node, index of next successor to try).
    while let Some(frame) = stack.last_mut() {
        let node = frame.0;
        let succ = adj.get(node).map(Vec::as_slice).unwrap_or(&[]);
        if frame.1 >= succ.len() || path.len() == max_len {
            stack.pop();
            if let Some((_, to, _)) = path.pop() {
                on_path.remove(to);
            }
            continue;
        }
        let (to, edge) = succ[frame.1];
        frame.1 += 1;
        if on_path.contains(to) {
            continue;
        }
        if to == target {
            if path.len() + 1 >= MIN_CHAIN_LENGTH {
                let mut hops = path.clone();
                hops.push((node, to, edge));
                found.push(build_chain(&hops, max_len)?);
            }
            continue;
        }
        path.push((node, to, edge));
        on_path.insert(to);
        stack.push((to, 0));
    }

    let mut keyed: Vec<(f64, Vec<String>, TrustChain)> = found
        .into_iter()
        .map(|c| {
            let nodes = c.nodes().into_iter().map(str::to_owned).collect();
            (c.total_weight(), nodes, c)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, _, c)| c).collect())
}

fn build_chain(hops: &[(&str, &str, &GraphEdge)], max_len: usize) -> Result<TrustChain> {
    let edges = hops
        .iter()
        .map(|(from, to, e)| ChainEdge::new(*from, *to, e.weight(), e.direct_trust))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(TrustChain::new(edges, max_len)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub td: TrustDegree,
    /// Chains that contributed, i.e. those with a positive total weight.
    pub chain_count: usize,
}

/// Recommended trust of `target` as seen from `source`, aggregated over all
/// chains. Chains whose edges all weigh zero carry no information and are
/// skipped; `None` when nothing is left.
pub fn evaluate_recommendation(
    graph: &TrustGraph,
    source: &str,
    target: &str,
    service: &str,
    max_len: usize,
) -> Result<Option<Recommendation>> {
    let chains = discover_chains(graph, source, target, service, max_len)?;
    let mut per_chain = Vec::with_capacity(chains.len());
    for chain in &chains {
        let w = chain.total_weight();
        if w > 0.0 {
            per_chain.push((chain_trust(chain)?, w));
        }
    }
    if per_chain.is_empty() {
        return Ok(None);
    }
    Ok(Some(Recommendation {
        td: aggregate_recommendations(&per_chain)?,
        chain_count: per_chain.len(),
    }))
}

/// Resolves the trust degree of `target` for `service` from `source`'s point
/// of view using only the graph: the direct edge if there is one, otherwise
/// the chains, otherwise ignorance.
pub fn resolve_in_graph(
    graph: &TrustGraph,
    source: &str,
    target: &str,
    service: &str,
    max_len: usize,
) -> Result<Resolution> {
    check_query(source, target, max_len)?;
    for id in [source, target] {
        if !graph.contains_node(id) {
            return Err(ChainError::UnknownNode(id.to_owned()));
        }
    }
    if let Some(edge) = graph.edge(source, target, service) {
        return Ok(resolve_trust_degree(
            edge.n_total,
            0,
            Some(edge.direct_trust),
            None,
        )?);
    }
    let rec = evaluate_recommendation(graph, source, target, service, max_len)?;
    let n_r = rec.map_or(0, |r| r.chain_count as u64);
    Ok(resolve_trust_degree(0, n_r, None, rec.map(|r| r.td))?)
}
