use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::mspace::FiniteMetricSpace;

/// Largest component size `gamma_u` enumerates.
pub const GAMMA_MAX_VERTICES: usize = 7;

const MAX_DEGREE: u32 = 3;

/// A graph on at most 8 vertices as adjacency bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SmallGraph {
    adj: Vec<u8>,
}

impl SmallGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        assert!(n <= 8, "small graphs have at most 8 vertices");
        let mut adj = vec![0u8; n];
        for &(a, b) in edges {
            if a != b {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        Self { adj }
    }

    pub fn order(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: usize) -> u32 {
        self.adj[v].count_ones()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a] >> b & 1 == 1
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.order();
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| self.has_edge(a, b)).collect()
    }

    pub fn max_degree(&self) -> u32 {
        (0..self.order()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Edge distances; `u64::MAX` between components.
    pub fn distances(&self) -> Vec<Vec<u64>> {
        let n = self.order();
        (0..n)
            .map(|s| {
                let mut dist = vec![u64::MAX; n];
                dist[s] = 0;
                let mut queue = VecDeque::from([s]);
                while let Some(v) = queue.pop_front() {
                    for w in 0..n {
                        if self.has_edge(v, w) && dist[w] == u64::MAX {
                            dist[w] = dist[v] + 1;
                            queue.push_back(w);
                        }
                    }
                }
                dist
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.order() == 0 || self.distances()[0].iter().all(|&d| d != u64::MAX)
    }

    fn code_under(&self, perm: &[usize]) -> u64 {
        let n = perm.len();
        let mut code = 0u64;
        for i in 0..n {
            for j in i + 1..n {
                code = code << 1 | self.has_edge(perm[i], perm[j]) as u64;
            }
        }
        code
    }

    /// Relabelling minimising the upper-triangle code among orderings with
    /// non-increasing degree. Isomorphic graphs get equal canonical forms.
    pub fn canonical(&self) -> (u64, SmallGraph) {
        let n = self.order();
        let mut degrees: Vec<u32> = (0..n).map(|v| self.degree(v)).collect();
        degrees.sort_unstable_by(|a, b| b.cmp(a));
        let mut best: Option<(u64, Vec<usize>)> = None;
        let mut perm = Vec::with_capacity(n);
        let mut used = vec![false; n];
        self.search(&degrees, &mut perm, &mut used, &mut best);
        let (code, perm) = best.expect("at least one ordering exists");
        let mut pos = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            pos[v] = k;
        }
        let edges: Vec<(usize, usize)> = self.edges().into_iter().map(|(a, b)| (pos[a], pos[b])).collect();
        (code, SmallGraph::new(n, &edges))
    }

    fn search(&self, degrees: &[u32], perm: &mut Vec<usize>, used: &mut [bool], best: &mut Option<(u64, Vec<usize>)>) {
        let k = perm.len();
        if k == degrees.len() {
            let code = self.code_under(perm);
            if best.as_ref().is_none_or(|(c, _)| code < *c) {
                *best = Some((code, perm.clone()));
            }
            return;
        }
        for v in 0..degrees.len() {
            if !used[v] && self.degree(v) == degrees[k] {
                used[v] = true;
                perm.push(v);
                self.search(degrees, perm, used, best);
                perm.pop();
                used[v] = false;
            }
        }
    }
}

/// Connected graphs with maximum degree 3 on `n` vertices, one per
/// isomorphism class, keyed by canonical code.
///
/// Every connected graph has a vertex whose removal leaves it connected, so
/// extending each class on `n − 1` vertices by one new vertex reaches all
/// classes on `n`.
pub fn connected_cubic_classes(n_max: usize) -> Result<Vec<Vec<SmallGraph>>> {
    if n_max > GAMMA_MAX_VERTICES {
        return Err(Error::CapExceeded(format!(
            "components of up to {n_max} vertices requested, the limit is {GAMMA_MAX_VERTICES}"
        )));
    }
    let mut levels: Vec<Vec<SmallGraph>> = Vec::new();
    if n_max == 0 {
        return Ok(levels);
    }
    levels.push(vec![SmallGraph::new(1, &[])]);
    for n in 2..=n_max {
        let mut found: BTreeMap<u64, SmallGraph> = BTreeMap::new();
        for g in &levels[n - 2] {
            let open: Vec<usize> = (0..n - 1).filter(|&v| g.degree(v) < MAX_DEGREE).collect();
            for mask in 1u32..(1 << open.len()) {
                if mask.count_ones() > MAX_DEGREE {
                    continue;
                }
                let mut edges = g.edges();
                edges.extend(open.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &v)| (v, n - 1)));
                let (code, canon) = SmallGraph::new(n, &edges).canonical();
                found.entry(code).or_insert(canon);
            }
        }
        levels.push(found.into_values().collect());
    }
    Ok(levels)
}

/// One component of `Γ_u` and the index of its first point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaComponent {
    pub graph: SmallGraph,
    pub offset: usize,
    pub diameter: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaU {
    pub space: FiniteMetricSpace,
    pub components: Vec<GammaComponent>,
}

/// Disjoint union of the connected graphs of maximum degree 3 with at most
/// `n_max` vertices, ordered by size and canonical code. Points of
/// components `k` and `l` (1-based) lie at distance
/// `diam_k + diam_l + max(k, l)`, so component `k` is at least `k` away from
/// every other one.
pub fn gamma_u(n_max: usize) -> Result<GammaU> {
    if n_max == 0 {
        return Err(Error::OutOfRange { what: "n_max", detail: "at least one vertex is needed".into() });
    }
    let graphs: Vec<SmallGraph> = connected_cubic_classes(n_max)?.into_iter().flatten().collect();
    let mut components = Vec::with_capacity(graphs.len());
    let mut offset = 0;
    let mut local = Vec::with_capacity(graphs.len());
    for graph in graphs {
        let dist = graph.distances();
        let diameter = dist.iter().flatten().copied().max().unwrap_or(0);
        let size = graph.order();
        components.push(GammaComponent { graph, offset, diameter });
        local.push(dist);
        offset += size;
    }
    let total = offset;
    let mut owner = Vec::with_capacity(total);
    let mut ids = Vec::with_capacity(total);
    for (k, c) in components.iter().enumerate() {
        for v in 0..c.graph.order() {
            owner.push((k, v));
            ids.push(format!("g{}.{}", k + 1, v));
        }
    }
    let mut flat = vec![0u64; total * total];
    for (a, &(ka, va)) in owner.iter().enumerate() {
        for (b, &(kb, vb)) in owner.iter().enumerate() {
            flat[a * total + b] = if ka == kb {
                local[ka][va][vb]
            } else {
                components[ka].diameter + components[kb].diameter + (ka.max(kb) + 1) as u64
            };
        }
    }
    Ok(GammaU { space: FiniteMetricSpace::from_trusted(ids, flat, 1), components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use std::collections::HashSet;

    /// All labelled graphs, filtered, deduplicated by full permutation search.
    fn brute_force_count(n: usize) -> usize {
        let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
        let mut seen = HashSet::new();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e).collect();
            let g = SmallGraph::new(n, &edges);
            if g.max_degree() > 3 || !g.is_connected() {
                continue;
            }
            let code = (0..n).permutations(n).map(|p| g.code_under(&p)).min().unwrap();
            seen.insert(code);
        }
        seen.len()
    }

    #[test]
    fn class_counts_match_brute_force() {
        let levels = connected_cubic_classes(5).unwrap();
        let counts: Vec<usize> = levels.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 10]);
        for (n, &c) in counts.iter().enumerate() {
            assert_eq!(c, brute_force_count(n + 1), "n = {}", n + 1);
        }
    }

    #[test]
    fn larger_class_counts() {
        let counts: Vec<usize> = connected_cubic_classes(7).unwrap().iter().map(Vec::len).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 10, 29, 64]);
    }

    #[test]
    fn small_unions() {
        assert_eq!(gamma_u(1).unwrap().components.len(), 1);
        let g2 = gamma_u(2).unwrap();
        assert_eq!(g2.components.len(), 2);
        assert_eq!(g2.components[1].graph.edges(), vec![(0, 1)]);
        let g3 = gamma_u(3).unwrap();
        let shapes: Vec<(usize, usize)> =
            g3.components.iter().map(|c| (c.graph.order(), c.graph.edges().len())).collect();
        assert_eq!(shapes, vec![(1, 0), (2, 1), (3, 2), (3, 3)]);
        assert_eq!(g3.space.len(), 9);
        assert!(matches!(gamma_u(8), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn metric_is_valid_and_spaced() {
        let g = gamma_u(4).unwrap();
        let s = &g.space;
        let doc = s.to_doc();
        assert!(FiniteMetricSpace::new(doc.points, doc.dist, 1).is_ok());
        for (k, c) in g.components.iter().enumerate() {
            let inside = c.offset..c.offset + c.graph.order();
            let gap = (0..s.len())
                .filter(|p| !inside.contains(p))
                .flat_map(|p| inside.clone().map(move |q| s.d(p, q)))
                .min()
                .unwrap();
            assert!(gap >= k as u64 + 1);
            assert!(c.graph.is_connected() && c.graph.max_degree() <= 3);
        }
    }

    #[test]
    fn canonical_form_is_label_invariant() {
        let path = SmallGraph::new(4, &[(0, 1), (1, 2), (2, 3)]);
        let shuffled = SmallGraph::new(4, &[(2, 0), (0, 3), (3, 1)]);
        assert_eq!(path.canonical(), shuffled.canonical());
        let star = SmallGraph::new(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_ne!(path.canonical().0, star.canonical().0);
    }
}
