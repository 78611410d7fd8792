use std::collections::HashMap;

use serde::Serialize;

use super::MapDoc;
use crate::error::{Error, Result};
use crate::group::FiniteGroup;

/// `φ_i: X_i -> G` with point ids for the domain and group element indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointMap {
    pub domain: Vec<String>,
    pub values: Vec<usize>,
}

impl PointMap {
    pub fn from_doc(doc: &MapDoc, group: &FiniteGroup) -> Result<Self> {
        let values = doc
            .values
            .iter()
            .map(|v| {
                group
                    .elements()
                    .iter()
                    .position(|e| e == v)
                    .ok_or_else(|| Error::BadMap(format!("`{v}` is not a group element")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { domain: doc.domain.clone(), values })
    }
}

/// Number of final agreeing terms that certifies a sequence as stable.
pub const DEFAULT_MIN_TAIL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LimitEmbedding {
    /// Points of the largest domain, in its order.
    pub points: Vec<String>,
    /// `g[x][y]` = the stable value of `φ_i(x)⁻¹ φ_i(y)`.
    pub g: Vec<Vec<usize>>,
    /// `ψ(x) = g[x₀][x]` with `x₀` the first point.
    pub psi: Vec<usize>,
    pub unit: bool,
    pub inverse: bool,
    pub cocycle: bool,
    pub cocycle_witness: Option<(usize, usize, usize)>,
    /// `|ψ(x)⁻¹ ψ(y)| = |g_xy|` for all pairs.
    pub isometric: bool,
}

impl LimitEmbedding {
    pub fn passes(&self) -> bool {
        self.unit && self.inverse && self.cocycle && self.isometric
    }
}

/// Stabilised differences of a nested family of maps into `group`. A pair
/// counts as stable when its last `min_tail` terms agree; otherwise the pair
/// is reported.
pub fn limit_embedding(group: &FiniteGroup, family: &[PointMap], min_tail: usize) -> Result<LimitEmbedding> {
    let last = family.last().ok_or_else(|| Error::Precondition("the family is empty".into()))?;
    let mut positions: Vec<HashMap<&str, usize>> = Vec::with_capacity(family.len());
    for (k, map) in family.iter().enumerate() {
        if map.domain.len() != map.values.len() {
            return Err(Error::BadMap(format!(
                "map {k} has {} domain points and {} values",
                map.domain.len(),
                map.values.len()
            )));
        }
        if let Some(&v) = map.values.iter().find(|&&v| v >= group.order()) {
            return Err(Error::BadMap(format!("map {k} sends a point to element {v} outside the group")));
        }
        let pos: HashMap<&str, usize> = map.domain.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        if pos.len() != map.domain.len() {
            return Err(Error::BadMap(format!("map {k} repeats a domain point")));
        }
        if let Some(prev) = positions.last() {
            if let Some(id) = prev.keys().find(|id| !pos.contains_key(*id)) {
                return Err(Error::Precondition(format!("domain {k} drops `{id}`; domains must be nested")));
            }
        }
        positions.push(pos);
    }

    let points = last.domain.clone();
    let n = points.len();
    let mut g = vec![vec![group.identity(); n]; n];
    for x in 0..n {
        for y in 0..n {
            let seq: Vec<usize> = family
                .iter()
                .zip(&positions)
                .filter_map(|(map, pos)| {
                    let (a, b) = (pos.get(points[x].as_str())?, pos.get(points[y].as_str())?);
                    Some(group.mul(group.inv(map.values[*a]), map.values[*b]))
                })
                .collect();
            let value = *seq.last().expect("the last map contains every point");
            let tail = seq.iter().rev().take_while(|&&v| v == value).count();
            if tail < min_tail {
                return Err(Error::NotStabilizing(points[x].clone(), points[y].clone()));
            }
            g[x][y] = value;
        }
    }

    let e = group.identity();
    let unit = (0..n).all(|x| g[x][x] == e);
    let inverse = (0..n).all(|x| (0..n).all(|y| g[y][x] == group.inv(g[x][y])));
    let mut cocycle_witness = None;
    'outer: for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if group.mul(g[x][y], g[y][z]) != g[x][z] {
                    cocycle_witness = Some((x, y, z));
                    break 'outer;
                }
            }
        }
    }
    let psi: Vec<usize> = (0..n).map(|x| g[0][x]).collect();
    let len = group.lengths();
    let isometric =
        (0..n).all(|x| (0..n).all(|y| len[group.mul(group.inv(psi[x]), psi[y])] == len[g[x][y]]));
    Ok(LimitEmbedding {
        points,
        g,
        psi,
        unit,
        inverse,
        cocycle: cocycle_witness.is_none(),
        cocycle_witness,
        isometric,
    })
}
