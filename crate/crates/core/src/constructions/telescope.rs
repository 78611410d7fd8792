use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mspace::{FiniteMetricSpace, Point};

/// A vertex `(i, x, y)` with `d(x, y) <= i`.
pub type Vertex = (u64, Point, Point);

/// Telescope graph truncated at level `i_max`. Each block
/// `b_{i,x} = {(i, x, y)}` is a path starting at `(i, x, x)` and continuing
/// in ascending `y`; `(i, x, y)` is joined to `(i, y, x)`, and `(i, x, x)`
/// to `(i + 1, x, x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TelescopeGraph {
    i_max: u64,
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    adjacency: Vec<Vec<usize>>,
}

/// `{"vertices": [[i, x, y], ..], "edges": [[v, w], ..]}` with point ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub vertices: Vec<(u64, String, String)>,
    pub edges: Vec<(usize, usize)>,
}

impl TelescopeGraph {
    fn from_parts(vertices: Vec<Vertex>, edges: &[(usize, usize)]) -> Result<Self> {
        let index: HashMap<Vertex, usize> = vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        if index.len() != vertices.len() {
            return Err(Error::Schema("repeated telescope vertex".into()));
        }
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for &(a, b) in edges {
            if a >= vertices.len() || b >= vertices.len() || a == b {
                return Err(Error::Schema(format!("bad telescope edge [{a}, {b}]")));
            }
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for ns in &mut adjacency {
            ns.sort_unstable();
        }
        let i_max = vertices.iter().map(|v| v.0).max().unwrap_or(0);
        Ok(Self { i_max, vertices, index, adjacency })
    }

    pub fn i_max(&self) -> u64 {
        self.i_max
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_index(&self, v: Vertex) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Edges `(v, w)` with `v < w`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(v, ns)| ns.iter().filter(move |&&w| v < w).map(move |&w| (v, w)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `hist[k]` = number of vertices of degree `k`.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.max_degree() + 1];
        for ns in &self.adjacency {
            hist[ns.len()] += 1;
        }
        hist
    }

    /// `φ(x) = (0, x, x)`.
    pub fn embedding(&self, x: Point) -> Option<usize> {
        self.vertex_index((0, x, x))
    }

    /// Path distances from `source`; `u64::MAX` marks unreachable vertices.
    pub fn bfs(&self, source: usize) -> Vec<u64> {
        let mut dist = vec![u64::MAX; self.len()];
        let mut queue = VecDeque::from([source]);
        dist[source] = 0;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if dist[w] == u64::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn to_doc(&self, space: &FiniteMetricSpace) -> GraphDoc {
        GraphDoc {
            vertices: self
                .vertices
                .iter()
                .map(|&(i, x, y)| (i, space.id(x).to_string(), space.id(y).to_string()))
                .collect(),
            edges: self.edges(),
        }
    }

    pub fn from_doc(doc: &GraphDoc, space: &FiniteMetricSpace) -> Result<Self> {
        let vertices = doc
            .vertices
            .iter()
            .map(|(i, x, y)| Ok((*i, space.index_of(x)?, space.index_of(y)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(vertices, &doc.edges)
    }
}

pub fn telescope_graph(space: &FiniteMetricSpace, i_max: u64) -> TelescopeGraph {
    let n = space.len();
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut index = HashMap::new();
    for i in 0..=i_max {
        for x in 0..n {
            let block = std::iter::once(x).chain((0..n).filter(|&y| y != x && space.d(x, y) <= i));
            let mut prev = None;
            for y in block {
                let v = vertices.len();
                vertices.push((i, x, y));
                index.insert((i, x, y), v);
                if let Some(p) = prev {
                    edges.push((p, v));
                }
                prev = Some(v);
            }
        }
        for x in 0..n {
            for y in x + 1..n {
                if space.d(x, y) <= i {
                    edges.push((index[&(i, x, y)], index[&(i, y, x)]));
                }
            }
            if i > 0 {
                edges.push((index[&(i - 1, x, x)], index[&(i, x, x)]));
            }
        }
    }
    TelescopeGraph::from_parts(vertices, &edges).expect("telescope construction is well formed")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelescopeReport {
    pub radius: u64,
    /// Level used for the forward bound, `R + 1`.
    pub level: u64,
    /// Largest ball of radius `level`.
    pub ball_bound: usize,
    pub max_degree: usize,
    pub degree_ok: bool,
    pub forward_bound: u64,
    pub forward_worst: u64,
    pub forward_witness: Option<(Point, Point)>,
    /// The bound is `R^2 / 2`, compared as `2 d <= R^2`.
    pub backward_bound: f64,
    pub backward_worst: u64,
    pub backward_witness: Option<(Point, Point)>,
}

impl TelescopeReport {
    pub fn passes(&self) -> bool {
        self.degree_ok && self.forward_witness.is_none() && self.backward_witness.is_none()
    }
}

/// Checks `d(x, y) <= R ⇒ d_Γ(φx, φy) <= 2i + 2N − 1` with `i = R + 1` and
/// `N` the largest `i`-ball, and `d_Γ(φx, φy) <= R ⇒ d(x, y) <= R²/2`, over
/// all pairs.
pub fn telescope_check(space: &FiniteMetricSpace, graph: &TelescopeGraph, r: u64) -> Result<TelescopeReport> {
    let level = r + 1;
    if graph.i_max() < level {
        return Err(Error::TooShallow(format!(
            "graph stops at level {} but R = {r} needs level {level}",
            graph.i_max()
        )));
    }
    let n = space.len();
    let phi = (0..n)
        .map(|x| {
            graph
                .embedding(x)
                .ok_or_else(|| Error::Schema(format!("graph lacks the vertex (0, {0}, {0})", space.id(x))))
        })
        .collect::<Result<Vec<_>>>()?;
    let ball_bound = space.max_ball_size(level);
    let forward_bound = 2 * level + 2 * ball_bound as u64 - 1;
    let (mut forward_worst, mut forward_witness) = (0, None);
    let (mut backward_worst, mut backward_witness) = (0, None);
    for x in 0..n {
        let dist = graph.bfs(phi[x]);
        for y in 0..n {
            let dg = dist[phi[y]];
            if space.d(x, y) <= r {
                forward_worst = forward_worst.max(dg);
                if dg > forward_bound && forward_witness.is_none() {
                    forward_witness = Some((x, y));
                }
            }
            if dg <= r {
                backward_worst = backward_worst.max(space.d(x, y));
                if 2 * space.d(x, y) > r * r && backward_witness.is_none() {
                    backward_witness = Some((x, y));
                }
            }
        }
    }
    let max_degree = graph.max_degree();
    Ok(TelescopeReport {
        radius: r,
        level,
        ball_bound,
        max_degree,
        degree_ok: max_degree <= 3,
        forward_bound,
        forward_worst,
        forward_witness,
        backward_bound: (r * r) as f64 / 2.0,
        backward_worst,
        backward_witness,
    })
}
