//! Directed observation graphs. An edge `(i, j)` means agent `i` measures
//! agent `j`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl ObservationGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Graph(format!("edge ({i},{j}) out of range for {n} agents")));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop at {i}")));
            }
            set.insert((i, j));
        }
        Ok(Self { n, edges: set })
    }

    /// Every agent observes every other agent.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
        Self::new(n, edges).expect("complete graph is valid")
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_neighbors(i).count()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(_, j)| j == i).count()
    }

    /// Unordered vertex pairs joined by at least one directed edge, as `(min, max)`.
    pub fn undirected_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect()
    }

    /// Connectivity of the underlying undirected graph.
    pub fn is_connected(&self) -> bool {
        pairs_connected(self.n, &self.undirected_pairs())
    }

    /// Vertices that are observed by someone but observe nobody.
    pub fn count_passive_sinks(&self) -> usize {
        (0..self.n)
            .filter(|&v| self.in_degree(v) >= 1 && self.out_degree(v) == 0)
            .count()
    }

    /// Unit-weight Laplacian of the underlying undirected graph.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for (i, j) in self.undirected_pairs() {
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }

    /// Algebraic connectivity: second-smallest Laplacian eigenvalue of the
    /// undirected graph. Exactly zero when the graph is disconnected.
    pub fn fiedler_value(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::Graph("Fiedler value needs at least two vertices".into()));
        }
        if !self.is_connected() {
            return Ok(0.0);
        }
        let e = symmetric_eigen(&self.laplacian())?;
        Ok(e.values[1].max(0.0))
    }
}

fn pairs_connected(n: usize, pairs: &BTreeSet<(usize, usize)>) -> bool {
    if n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in pairs {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

/// Removes `⌊fraction · E⌋` undirected pairs (both directions together),
/// E being the number of undirected pairs, while keeping the graph connected.
///
/// Candidates are visited once in random order and skipped when they are
/// bridges. Removing edges only ever creates bridges, so when fewer pairs
/// than requested are removed no further removal was possible.
pub fn remove_random_edges_keep_connected<R: Rng + ?Sized>(
    g: &ObservationGraph,
    fraction: f64,
    rng: &mut R,
) -> Result<ObservationGraph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!("fraction {fraction} outside [0, 1]")));
    }
    if !g.is_connected() {
        return Err(Error::Graph("input graph is disconnected".into()));
    }
    let mut pairs = g.undirected_pairs();
    let target = (fraction * pairs.len() as f64).floor() as usize;
    let mut order: Vec<(usize, usize)> = pairs.iter().copied().collect();
    order.shuffle(rng);
    let mut removed = 0;
    for pair in order {
        if removed == target {
            break;
        }
        pairs.remove(&pair);
        if pairs_connected(g.n, &pairs) {
            removed += 1;
        } else {
            pairs.insert(pair);
        }
    }
    let edges = g.edges().filter(|&(i, j)| pairs.contains(&(i.min(j), i.max(j))));
    ObservationGraph::new(g.n, edges)
}
