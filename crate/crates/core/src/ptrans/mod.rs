//! Partial bijections, partial translations and cotranslations.
//!
//! A pair `(x, y)` in `s` means `s` sends `y` to `x`: `s.apply(y) == Some(x)`.
//! Composition follows operator order, so the matrix of `s.compose(t)` is the
//! product of the matrices of `s` and `t`.

mod atlas;
mod build;
mod kappa;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mspace::{FiniteMetricSpace, Point};

pub use atlas::{verify_atlas, Atlas, AtlasReport, Chart, ChartDoc, ChartReport};
pub use build::{build_atlas_coloring, pullback_atlas};
pub use kappa::{kappa_search, KappaOutcome, SearchCaps};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PartialBijection {
    pairs: Vec<(Point, Point)>,
    forward: BTreeMap<Point, Point>,
    backward: BTreeMap<Point, Point>,
}

impl fmt::Debug for PartialBijection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs.iter()).finish()
    }
}

impl PartialBijection {
    /// Validates that both coordinate projections are injective.
    pub fn new(pairs: impl IntoIterator<Item = (Point, Point)>) -> Result<Self> {
        let mut pairs: Vec<(Point, Point)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut forward = BTreeMap::new();
        let mut backward = BTreeMap::new();
        for &(x, y) in &pairs {
            if let Some(prev) = backward.insert(x, y) {
                return Err(Error::NotInjective(format!(
                    "({x}, {prev}) and ({x}, {y}) share a first coordinate"
                )));
            }
            if let Some(prev) = forward.insert(y, x) {
                return Err(Error::NotInjective(format!(
                    "({prev}, {y}) and ({x}, {y}) share a second coordinate"
                )));
            }
        }
        Ok(Self { pairs, forward, backward })
    }

    /// For pair lists that are injective by construction.
    pub(crate) fn from_sorted_unchecked(pairs: Vec<(Point, Point)>) -> Self {
        let pb = Self::new(pairs);
        debug_assert!(pb.is_ok(), "constructed relation is not a partial bijection");
        pb.unwrap()
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// The identity on `0..n`.
    pub fn identity(n: usize) -> Self {
        Self::diagonal(0..n)
    }

    /// The identity on the given points.
    pub fn diagonal(points: impl IntoIterator<Item = Point>) -> Self {
        Self::from_sorted_unchecked(points.into_iter().map(|p| (p, p)).collect())
    }

    pub fn pairs(&self) -> &[(Point, Point)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, x: Point, y: Point) -> bool {
        self.backward.get(&x) == Some(&y)
    }

    /// The image of `y`, i.e. the `x` with `(x, y)` in the relation.
    #[inline]
    pub fn apply(&self, y: Point) -> Option<Point> {
        self.forward.get(&y).copied()
    }

    #[inline]
    pub fn apply_inverse(&self, x: Point) -> Option<Point> {
        self.backward.get(&x).copied()
    }

    /// Points on which [`apply`](Self::apply) is defined.
    pub fn domain(&self) -> impl Iterator<Item = Point> + '_ {
        self.forward.keys().copied()
    }

    pub fn range(&self) -> impl Iterator<Item = Point> + '_ {
        self.backward.keys().copied()
    }

    pub fn inverse(&self) -> Self {
        Self {
            pairs: {
                let mut p: Vec<_> = self.pairs.iter().map(|&(x, y)| (y, x)).collect();
                p.sort_unstable();
                p
            },
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }

    /// `{(x, z) : (x, y) ∈ self, (y, z) ∈ other}`: apply `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let pairs = other
            .pairs
            .iter()
            .filter_map(|&(y, z)| self.apply(y).map(|x| (x, z)))
            .collect();
        Self::from_sorted_unchecked(pairs)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        let (small, big) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.pairs.iter().all(|&(x, y)| !big.contains(x, y))
    }

    /// Largest `d(x, y)` over the pairs, 0 when empty.
    pub fn displacement(&self, space: &FiniteMetricSpace) -> u64 {
        self.pairs.iter().map(|&(x, y)| space.d(x, y)).max().unwrap_or(0)
    }

    pub(crate) fn max_point(&self) -> Option<Point> {
        self.pairs.iter().map(|&(x, y)| x.max(y)).max()
    }
}

impl Serialize for PartialBijection {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PartialBijection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<(Point, Point)>::deserialize(deserializer)?;
        Self::new(pairs).map_err(serde::de::Error::custom)
    }
}

/// Validates `pairs` as a partial translation of `space` and returns its
/// displacement bound.
pub fn check_translation(space: &FiniteMetricSpace, pairs: &[(Point, Point)]) -> Result<u64> {
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= space.len() || y >= space.len()) {
        return Err(Error::OutOfRange {
            what: "pair",
            detail: format!("({x}, {y}) in a space of {} points", space.len()),
        });
    }
    Ok(PartialBijection::new(pairs.iter().copied())?.displacement(space))
}

/// Whether `(σx, σy) ∈ t` for every `t` in `family` and every `(x, y) ∈ t`
/// on which `σ` is defined at both coordinates.
pub fn check_cotranslation(sigma: &PartialBijection, family: &[PartialBijection]) -> bool {
    family.iter().all(|t| {
        t.pairs().iter().all(|&(x, y)| match (sigma.apply(x), sigma.apply(y)) {
            (Some(sx), Some(sy)) => t.contains(sx, sy),
            _ => true,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{canonical_translation, left_multiplication, FiniteGroup};
    use proptest::prelude::*;

    fn pb(pairs: &[(Point, Point)]) -> PartialBijection {
        PartialBijection::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn composition_examples() {
        let t = pb(&[(0, 1)]);
        assert_eq!(t.compose(&t.inverse()), pb(&[(0, 0)]));
        let s = pb(&[(0, 2), (3, 1)]);
        assert_eq!(s.compose(&PartialBijection::identity(4)), s);
        assert_eq!(PartialBijection::identity(4).compose(&s), s);
        let g = FiniteGroup::cyclic(5);
        let t1 = canonical_translation(&g, 1);
        assert_eq!(t1.compose(&t1), canonical_translation(&g, 2));
    }

    #[test]
    fn inverse_examples() {
        let t = pb(&[(0, 1)]);
        assert_eq!(t.inverse(), pb(&[(1, 0)]));
        assert_eq!(t.inverse().inverse(), t);
        assert_eq!(t.apply(1), Some(0));
        assert_eq!(t.apply_inverse(0), Some(1));
    }

    #[test]
    fn injectivity_enforced() {
        assert!(matches!(PartialBijection::new([(0, 1), (0, 2)]), Err(Error::NotInjective(_))));
        assert!(matches!(PartialBijection::new([(0, 1), (2, 1)]), Err(Error::NotInjective(_))));
        let json = "[[0,1],[1,2]]";
        let t: PartialBijection = serde_json::from_str(json).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), json);
        assert!(serde_json::from_str::<PartialBijection>("[[0,1],[0,2]]").is_err());
    }

    #[test]
    fn translation_examples() {
        let x4 = FiniteMetricSpace::path(4);
        let diag: Vec<_> = (0..4).map(|i| (i, i)).collect();
        assert_eq!(check_translation(&x4, &diag).unwrap(), 0);
        assert_eq!(check_translation(&x4, &[(0, 3)]).unwrap(), 3);
        assert_eq!(check_translation(&x4, &[(0, 1), (1, 0)]).unwrap(), 1);
        assert_eq!(check_translation(&x4, &[]).unwrap(), 0);
        assert!(check_translation(&x4, &[(0, 1), (0, 2)]).is_err());
        assert!(check_translation(&x4, &[(0, 9)]).is_err());
    }

    #[test]
    fn cotranslation_examples() {
        let g = FiniteGroup::cyclic(5);
        let family: Vec<_> = [0, 1, 4].iter().map(|&e| canonical_translation(&g, e)).collect();
        assert!(check_cotranslation(&PartialBijection::identity(5), &family));
        for h in 0..5 {
            assert!(check_cotranslation(&left_multiplication(&g, h), &family));
        }
        let swap = pb(&[(0, 1), (1, 0)]);
        assert!(!check_cotranslation(&swap, &[pb(&[(0, 1)])]));
    }

    fn arb_pb(n: usize) -> impl Strategy<Value = PartialBijection> {
        let points: Vec<usize> = (0..n).collect();
        (
            proptest::sample::subsequence(points.clone(), 0..=n),
            Just(points).prop_shuffle(),
        )
            .prop_map(|(dom, img)| {
                PartialBijection::new(dom.iter().zip(&img).map(|(&y, &x)| (x, y))).unwrap()
            })
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in arb_pb(6), b in arb_pb(6), c in arb_pb(6)) {
            prop_assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
        }

        #[test]
        fn inverse_reverses_composition(a in arb_pb(6), b in arb_pb(6)) {
            prop_assert_eq!(a.compose(&b).inverse(), b.inverse().compose(&a.inverse()));
            prop_assert_eq!(a.inverse().inverse(), a.clone());
            let id = PartialBijection::identity(6);
            prop_assert_eq!(id.compose(&a), a.clone());
            prop_assert_eq!(a.compose(&id), a);
        }

        #[test]
        fn compose_matches_pointwise(a in arb_pb(6), b in arb_pb(6)) {
            let c = a.compose(&b);
            for z in 0..6 {
                prop_assert_eq!(c.apply(z), b.apply(z).and_then(|y| a.apply(y)));
            }
        }
    }
}
