use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

/// On-disk DAG layout: `{"nodes": [..], "edges": [[parent, child], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagSpec {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

/// A validated causal DAG over named nodes.
///
/// Nodes are addressed by their index in declaration order. Parent lists are
/// sorted by index and the topological order is cached at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DagSpec", into = "DagSpec")]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self> {
        let names: Vec<String> = nodes.iter().map(|n| n.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(RcaError::InvalidInput("node names must be non-empty".into()));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(RcaError::InvalidInput(format!("duplicate node '{name}'")));
            }
        }
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| RcaError::UnknownNode(name.into()));
        let mut edge_set = BTreeSet::new();
        for (p, c) in edges {
            let (p, c) = (lookup(p.as_ref())?, lookup(c.as_ref())?);
            if p == c {
                return Err(RcaError::CyclicGraph { node: names[p].clone() });
            }
            edge_set.insert((p, c));
        }
        let mut parents = vec![Vec::new(); names.len()];
        let mut children = vec![Vec::new(); names.len()];
        for &(p, c) in &edge_set {
            parents[c].push(p);
            children[p].push(c);
        }
        let topo = topological_order(&names, &children)?;
        Ok(Dag { names, index, parents, children, topo })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn node(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| RcaError::UnknownNode(name.into()))
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn is_root(&self, node: usize) -> bool {
        self.parents[node].is_empty()
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents.iter().enumerate().flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
    }

    /// Strict ancestors of `node`, sorted by index.
    pub fn ancestors(&self, node: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut stack = self.parents[node].clone();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend_from_slice(&self.parents[v]);
            }
        }
        (0..self.len()).filter(|&v| seen[v]).collect()
    }

    pub fn spec(&self) -> DagSpec {
        DagSpec {
            nodes: self.names.clone(),
            edges: self
                .edges()
                .map(|(p, c)| (self.names[p].clone(), self.names[c].clone()))
                .collect(),
        }
    }
}

impl TryFrom<DagSpec> for Dag {
    type Error = RcaError;

    fn try_from(spec: DagSpec) -> Result<Self> {
        Dag::new(&spec.nodes, &spec.edges)
    }
}

impl From<Dag> for DagSpec {
    fn from(dag: Dag) -> Self {
        dag.spec()
    }
}

/// Kahn's algorithm; among ready nodes the lowest index goes first, so a
/// DAG declared in causal order keeps that order.
pub fn topological_order(names: &[String], children: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = names.len();
    let mut indegree = vec![0usize; n];
    for cs in children {
        for &c in cs {
            indegree[c] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&v| indegree[v] > 0).expect("some node left unsorted");
        return Err(RcaError::CyclicGraph { node: names[stuck].clone() });
    }
    Ok(order)
}
