//! Finite uniformly discrete metric spaces.
//!
//! Distances are exact nonnegative integers measured in user units; `scale`
//! records how many units make up one unit of length. All thresholds
//! (balls, neighbourhoods, separation) are compared exactly.

use std::collections::HashMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a point inside its space.
pub type Point = usize;

/// On-disk form of a space: `{"points":[..], "dist":[[..]], "scale":int}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub points: Vec<String>,
    pub dist: Vec<Vec<u64>>,
    pub scale: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricSpace {
    points: Vec<String>,
    index: HashMap<String, Point>,
    dist: Vec<u64>,
    scale: u64,
}

impl FiniteMetricSpace {
    /// Validates every metric axiom and uniform discreteness.
    pub fn new(points: Vec<String>, dist: Vec<Vec<u64>>, scale: u64) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Schema("space has no points".into()));
        }
        if scale == 0 {
            return Err(Error::Schema("scale must be positive".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::Schema(format!("dist must be a {n}x{n} matrix")));
        }
        let index = Self::build_index(&points)?;
        for x in 0..n {
            if dist[x][x] != 0 {
                return Err(Error::NonzeroDiagonal(points[x].clone()));
            }
            for y in x + 1..n {
                if dist[x][y] != dist[y][x] {
                    return Err(Error::Asymmetric(points[x].clone(), points[y].clone()));
                }
                if dist[x][y] == 0 {
                    return Err(Error::NotUniformlyDiscrete(
                        points[x].clone(),
                        points[y].clone(),
                    ));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if dist[x][z] > dist[x][y] + dist[y][z] {
                        return Err(Error::Triangle {
                            x: points[x].clone(),
                            y: points[y].clone(),
                            z: points[z].clone(),
                        });
                    }
                }
            }
        }
        let flat = dist.into_iter().flatten().collect();
        Ok(Self { points, index, dist: flat, scale })
    }

    /// Builds a space whose metric axioms hold by construction (word metrics,
    /// shortest-path metrics, product metrics). Checked in debug builds only.
    pub(crate) fn from_trusted(points: Vec<String>, dist: Vec<u64>, scale: u64) -> Self {
        let n = points.len();
        debug_assert_eq!(dist.len(), n * n);
        debug_assert!((0..n).all(|x| dist[x * n + x] == 0));
        debug_assert!((0..n).all(|x| (0..n).all(|y| dist[x * n + y] == dist[y * n + x])));
        let index = Self::build_index(&points).expect("trusted constructor with duplicate ids");
        Self { points, index, dist, scale }
    }

    fn build_index(points: &[String]) -> Result<HashMap<String, Point>> {
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate point id `{p}`")));
            }
        }
        Ok(index)
    }

    pub fn from_doc(doc: SpaceDoc) -> Result<Self> {
        Self::new(doc.points, doc.dist, doc.scale)
    }

    pub fn to_doc(&self) -> SpaceDoc {
        let n = self.len();
        SpaceDoc {
            points: self.points.clone(),
            dist: self.dist.chunks(n).map(<[u64]>::to_vec).collect(),
            scale: self.scale,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpaceDoc = serde_json::from_str(text)?;
        Self::from_doc(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("space documents always serialize")
    }

    /// The path `p0 - p1 - ... - p(n-1)` with `d(p_i, p_j) = |i - j|`.
    pub fn path(n: usize) -> Self {
        assert!(n > 0, "path needs at least one point");
        let points = (0..n).map(|i| format!("p{i}")).collect();
        let dist = (0..n)
            .flat_map(|i| (0..n).map(move |j| i.abs_diff(j) as u64))
            .collect();
        Self::from_trusted(points, dist, 1)
    }

    /// The cycle `C_n` with its graph metric.
    pub fn cycle(n: usize) -> Self {
        assert!(n > 0, "cycle needs at least one point");
        let points = (0..n).map(|i| format!("c{i}")).collect();
        let dist = (0..n)
            .flat_map(|i| {
                (0..n).map(move |j| {
                    let d = i.abs_diff(j);
                    d.min(n - d) as u64
                })
            })
            .collect();
        Self::from_trusted(points, dist, 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn ids(&self) -> &[String] {
        &self.points
    }

    pub fn id(&self, p: Point) -> &str {
        &self.points[p]
    }

    pub fn index_of(&self, id: &str) -> Result<Point> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    #[inline]
    pub fn d(&self, x: Point, y: Point) -> u64 {
        self.dist[x * self.len() + y]
    }

    pub fn diameter(&self) -> u64 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    /// `{y : d(x, y) <= r}` in index order.
    pub fn ball(&self, x: Point, r: u64) -> Vec<Point> {
        (0..self.len()).filter(|&y| self.d(x, y) <= r).collect()
    }

    pub fn ball_by_id(&self, id: &str, r: u64) -> Result<Vec<Point>> {
        Ok(self.ball(self.index_of(id)?, r))
    }

    pub fn max_ball_size(&self, r: u64) -> usize {
        (0..self.len())
            .map(|x| (0..self.len()).filter(|&y| self.d(x, y) <= r).count())
            .max()
            .unwrap_or(0)
    }

    /// Pairs at distance `< r` (`strict`) or `<= r`.
    pub fn diag_neighborhood(&self, r: u64, strict: bool) -> Vec<(Point, Point)> {
        let n = self.len();
        (0..n)
            .cartesian_product(0..n)
            .filter(|&(x, y)| {
                let d = self.d(x, y);
                if strict {
                    d < r
                } else {
                    d <= r
                }
            })
            .collect()
    }

    /// Greedy colouring in input order: same-coloured distinct points are at
    /// distance `> r`. Each point takes the smallest colour not used inside
    /// its closed `r`-ball.
    pub fn greedy_separation(&self, r: u64) -> Coloring {
        let n = self.len();
        let mut colors = vec![0usize; n];
        for x in 0..n {
            let taken: Vec<usize> = (0..x)
                .filter(|&y| self.d(x, y) <= r)
                .map(|y| colors[y])
                .collect();
            colors[x] = (1..).find(|c| !taken.contains(c)).unwrap();
        }
        Coloring { colors }
    }

    /// The subspace on `subset`, keeping ids and scale.
    pub fn restrict(&self, subset: &[Point]) -> FiniteMetricSpace {
        let points = subset.iter().map(|&p| self.points[p].clone()).collect();
        let dist = subset
            .iter()
            .flat_map(|&x| subset.iter().map(move |&y| (x, y)))
            .map(|(x, y)| self.d(x, y))
            .collect();
        Self::from_trusted(points, dist, self.scale)
    }

    /// Shortest-path metric of a weighted graph given as a dense matrix where
    /// `None` means "no edge". Fails if the graph is disconnected.
    pub fn from_weighted_graph(
        points: Vec<String>,
        weights: &[Vec<Option<u64>>],
        scale: u64,
    ) -> Result<Self> {
        let n = points.len();
        const INF: u64 = u64::MAX / 4;
        let mut d = vec![INF; n * n];
        for x in 0..n {
            d[x * n + x] = 0;
            for y in 0..n {
                if x != y {
                    if let Some(w) = weights[x][y] {
                        if w == 0 {
                            return Err(Error::NotUniformlyDiscrete(
                                points[x].clone(),
                                points[y].clone(),
                            ));
                        }
                        d[x * n + y] = d[x * n + y].min(w);
                    }
                }
            }
        }
        for k in 0..n {
            for x in 0..n {
                for y in 0..n {
                    let via = d[x * n + k] + d[k * n + y];
                    if via < d[x * n + y] {
                        d[x * n + y] = via;
                    }
                }
            }
        }
        if d.iter().any(|&v| v >= INF) {
            return Err(Error::Schema("graph is disconnected".into()));
        }
        Ok(Self::from_trusted(points, d, scale))
    }
}

/// Colour classes are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    colors: Vec<usize>,
}

impl Coloring {
    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn count(&self) -> usize {
        self.colors.iter().copied().max().unwrap_or(0)
    }

    /// `classes()[c - 1]` holds the points of colour `c`, in index order.
    pub fn classes(&self) -> Vec<Vec<Point>> {
        let mut out = vec![Vec::new(); self.count()];
        for (p, &c) in self.colors.iter().enumerate() {
            out[c - 1].push(p);
        }
        out
    }
}

/// A nondecreasing step function on distances, defined for every `r >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFunction {
    steps: Vec<(u64, u64)>,
}

impl StepFunction {
    /// `samples` are `(argument, value)` pairs; the function at `r` is the
    /// largest value whose argument is `<= r`. Must contain argument 0.
    fn from_samples(mut samples: Vec<(u64, u64)>) -> Self {
        samples.sort_unstable();
        let mut steps: Vec<(u64, u64)> = Vec::new();
        let mut running = 0;
        for (arg, val) in samples {
            running = running.max(val);
            match steps.last_mut() {
                Some(last) if last.0 == arg => last.1 = running,
                _ => steps.push((arg, running)),
            }
        }
        debug_assert!(steps.first().is_some_and(|s| s.0 == 0));
        Self { steps }
    }

    pub fn eval(&self, r: u64) -> u64 {
        let i = self.steps.partition_point(|&(arg, _)| arg <= r);
        if i == 0 {
            0
        } else {
            self.steps[i - 1].1
        }
    }

    /// Breakpoints `(argument, value)`.
    pub fn steps(&self) -> &[(u64, u64)] {
        &self.steps
    }
}

/// Finite-scale uniform embedding data for a map between finite spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlData {
    /// `forward(r) = max{d_Y(φx, φy) : d_X(x, y) <= r}`
    pub forward: StepFunction,
    /// `backward(s) = max{d_X(x, y) : d_Y(φx, φy) <= s}`
    pub backward: StepFunction,
    pub injective: bool,
}

impl ControlData {
    /// Exhaustive over all ordered pairs of an `n`-point domain.
    pub fn from_distances(
        n: usize,
        dx: impl Fn(Point, Point) -> u64,
        dy: impl Fn(Point, Point) -> u64,
    ) -> Self {
        let mut fwd = Vec::with_capacity(n * n);
        let mut bwd = Vec::with_capacity(n * n);
        let mut injective = true;
        for x in 0..n {
            for y in 0..n {
                let (a, b) = (dx(x, y), dy(x, y));
                if x != y && b == 0 {
                    injective = false;
                }
                fwd.push((a, b));
                bwd.push((b, a));
            }
        }
        Self {
            forward: StepFunction::from_samples(fwd),
            backward: StepFunction::from_samples(bwd),
            injective,
        }
    }
}

/// Control functions of `phi: X -> Y` (`phi[x]` is a point of `Y`).
pub fn control_functions(
    phi: &[Point],
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
) -> Result<ControlData> {
    check_map(phi, x.len(), y.len())?;
    Ok(ControlData::from_distances(
        x.len(),
        |a, b| x.d(a, b),
        |a, b| y.d(phi[a], phi[b]),
    ))
}

pub(crate) fn check_map(phi: &[Point], domain: usize, target: usize) -> Result<()> {
    if phi.len() != domain {
        return Err(Error::BadMap(format!(
            "map has {} values for a domain of {domain} points",
            phi.len()
        )));
    }
    if let Some((x, &v)) = phi.iter().enumerate().find(|(_, &v)| v >= target) {
        return Err(Error::BadMap(format!(
            "point {x} maps to index {v}, target has {target} points"
        )));
    }
    Ok(())
}

/// One block `X_i × {i²}` of a [`FinSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinBlock {
    /// 1-based block number `i`.
    pub index: usize,
    pub offset: u64,
    /// Points of the original space, in index order.
    pub members: Vec<Point>,
    /// Points of the union space occupied by this block.
    pub range: std::ops::Range<Point>,
}

#[derive(Debug, Clone)]
pub struct FinSpace {
    pub space: FiniteMetricSpace,
    pub blocks: Vec<FinBlock>,
}

impl FinSpace {
    /// Distance between blocks `i` and `j` (1-based) in the union space.
    pub fn block_distance(&self, i: usize, j: usize) -> u64 {
        let (a, b) = (&self.blocks[i - 1], &self.blocks[j - 1]);
        a.range
            .clone()
            .cartesian_product(b.range.clone())
            .map(|(p, q)| self.space.d(p, q))
            .min()
            .unwrap_or(0)
    }

    pub fn block_of(&self, p: Point) -> &FinBlock {
        let i = self.blocks.partition_point(|b| b.range.end <= p);
        &self.blocks[i]
    }
}

/// The disjoint union of the first `k` nonempty subsets of `x`, ordered by
/// cardinality and then lexicographically by sorted ids, with block `i`
/// placed at height `i²` under the ℓ¹ product metric.
pub fn fin_space(x: &FiniteMetricSpace, k: usize) -> Result<FinSpace> {
    let n = x.len();
    let available = if n >= usize::BITS as usize {
        usize::MAX
    } else {
        (1usize << n) - 1
    };
    if k == 0 || k > available {
        return Err(Error::OutOfRange {
            what: "K",
            detail: format!("{k} not in 1..={available}"),
        });
    }
    let mut by_id: Vec<Point> = (0..n).collect();
    by_id.sort_by(|&a, &b| x.id(a).cmp(x.id(b)));

    let subsets: Vec<Vec<Point>> = (1..=n)
        .flat_map(|c| by_id.iter().copied().combinations(c))
        .take(k)
        .collect();

    let mut points = Vec::new();
    let mut owner = Vec::new();
    let mut blocks = Vec::with_capacity(k);
    for (b, subset) in subsets.iter().enumerate() {
        let i = b + 1;
        let mut members = subset.clone();
        members.sort_unstable();
        let start = points.len();
        for &p in &members {
            points.push(format!("{}#{i}", x.id(p)));
            owner.push((p, (i * i) as u64));
        }
        blocks.push(FinBlock {
            index: i,
            offset: (i * i) as u64,
            members,
            range: start..points.len(),
        });
    }
    let dist = owner
        .iter()
        .flat_map(|&(p, hp)| {
            owner
                .iter()
                .map(move |&(q, hq)| x.d(p, q) + x.scale() * hp.abs_diff(hq))
        })
        .collect();
    Ok(FinSpace {
        space: FiniteMetricSpace::from_trusted(points, dist, x.scale()),
        blocks,
    })
}
