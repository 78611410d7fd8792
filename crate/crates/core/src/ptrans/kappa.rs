//! Minimal multiplicity constant over all charts at one radius.
//!
//! Exact mode is a branch-and-bound over covers of the strict neighbourhood
//! of the diagonal by disjoint partial translations, and, for each cover,
//! over cotranslation systems satisfying transitivity. Covers are enumerated
//! as restricted-growth strings, which removes the symmetry of relabelling
//! translations; cotranslation slots are likewise opened in order only. The
//! search stops as soon as the global lower bound `k = 1` is met.

use serde::Serialize;

use super::atlas::verify_chart;
use super::{pullback_atlas, Chart, PartialBijection};
use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::mspace::{FiniteMetricSpace, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchCaps {
    /// Largest space accepted by exact mode.
    pub exact_size: usize,
    /// Search nodes (covers plus cotranslation assignments) before giving up.
    pub max_nodes: u64,
}

impl Default for SearchCaps {
    fn default() -> Self {
        Self { exact_size: 6, max_nodes: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KappaOutcome {
    Exact { k: usize, witness: Chart, nodes: u64 },
    Bounds { lower: usize, upper: usize, witness: Chart },
}

impl KappaOutcome {
    pub fn upper(&self) -> usize {
        match self {
            Self::Exact { k, .. } => *k,
            Self::Bounds { upper, .. } => *upper,
        }
    }

    pub fn witness(&self) -> &Chart {
        match self {
            Self::Exact { witness, .. } | Self::Bounds { witness, .. } => witness,
        }
    }
}

/// `exact = false` gives the bound mode: a pullback along `p_i ↦ i` into
/// `Z_m` with `m = |X|·diam + 1`, and the trivial lower bound 1.
pub fn kappa_search(
    space: &FiniteMetricSpace,
    radius: u64,
    caps: &SearchCaps,
    exact: bool,
) -> Result<KappaOutcome> {
    if radius == 0 {
        return Err(Error::OutOfRange { what: "R", detail: "must be positive".into() });
    }
    if !exact {
        return bound_mode(space, radius);
    }
    if space.len() > caps.exact_size {
        return Err(Error::CapExceeded(format!(
            "exact mode accepts at most {} points, got {}",
            caps.exact_size,
            space.len()
        )));
    }
    let mut search = CoverSearch::new(space, radius, caps.max_nodes);
    search.run()?;
    let (k, witness) = search.best.expect("the singleton cover always admits a system");
    let report = verify_chart(space, &witness)?;
    debug_assert!(report.passes() && report.k == k);
    if !report.passes() || report.k != k {
        return Err(Error::Precondition(format!("search witness failed re-verification: {report:?}")));
    }
    Ok(KappaOutcome::Exact { k, witness, nodes: search.nodes })
}

fn bound_mode(space: &FiniteMetricSpace, radius: u64) -> Result<KappaOutcome> {
    let m = space.len() * space.diameter().max(1) as usize + 1;
    let phi: Vec<usize> = (0..space.len()).collect();
    let atlas = pullback_atlas(space, &FiniteGroup::cyclic(m), &phi, &[radius])?;
    let witness = atlas.charts()[0].clone();
    let report = verify_chart(space, &witness)?;
    if !report.passes() {
        return Err(Error::Precondition(format!("pullback witness failed verification: {report:?}")));
    }
    Ok(KappaOutcome::Bounds { lower: 1, upper: report.k, witness })
}

const NONE: u32 = u32::MAX;

struct CoverSearch<'a> {
    space: &'a FiniteMetricSpace,
    radius: u64,
    /// Pairs with `d < R` first (mandatory), then the rest (optional).
    pairs: Vec<(Point, Point)>,
    mandatory: usize,
    blocks: Vec<Vec<(Point, Point)>>,
    nodes: u64,
    max_nodes: u64,
    best: Option<(usize, Chart)>,
}

impl<'a> CoverSearch<'a> {
    fn new(space: &'a FiniteMetricSpace, radius: u64, max_nodes: u64) -> Self {
        let n = space.len();
        let all = (0..n).flat_map(|x| (0..n).map(move |y| (x, y)));
        let (mut pairs, optional): (Vec<_>, Vec<_>) = all.partition(|&(x, y)| space.d(x, y) < radius);
        let mandatory = pairs.len();
        pairs.extend(optional);
        Self { space, radius, pairs, mandatory, blocks: Vec::new(), nodes: 0, max_nodes, best: None }
    }

    fn done(&self) -> bool {
        matches!(self.best, Some((1, _)))
    }

    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(Error::CapExceeded(format!("more than {} search nodes", self.max_nodes)));
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        self.extend(0)
    }

    fn fits(block: &[(Point, Point)], (x, y): (Point, Point)) -> bool {
        block.iter().all(|&(a, b)| a != x && b != y)
    }

    fn extend(&mut self, i: usize) -> Result<()> {
        if self.done() {
            return Ok(());
        }
        self.tick()?;
        if i == self.pairs.len() {
            return self.leaf();
        }
        let p = self.pairs[i];
        if i >= self.mandatory {
            self.extend(i + 1)?;
        }
        self.blocks.push(vec![p]);
        self.extend(i + 1)?;
        self.blocks.pop();
        for b in 0..self.blocks.len() {
            if self.done() {
                break;
            }
            if Self::fits(&self.blocks[b], p) {
                self.blocks[b].push(p);
                self.extend(i + 1)?;
                self.blocks[b].pop();
            }
        }
        Ok(())
    }

    fn leaf(&mut self) -> Result<()> {
        let bound = match &self.best {
            Some((k, _)) => k - 1,
            None => usize::MAX,
        };
        let translations: Vec<PartialBijection> = self
            .blocks
            .iter()
            .map(|b| PartialBijection::from_sorted_unchecked(b.clone()))
            .collect();
        let n = self.space.len();
        if let Some((k, sigma)) = min_multiplicity(n, &translations, bound, &mut self.nodes, self.max_nodes)? {
            let mut translations = translations;
            translations.sort();
            self.best = Some((k, Chart { radius: self.radius, translations, cotranslations: sigma }));
        }
        Ok(())
    }
}

/// A cotranslation under construction: `map[x] = σx`, `inv[x'] = x`.
#[derive(Clone)]
struct Slot {
    map: Vec<u32>,
    inv: Vec<u32>,
}

impl Slot {
    fn empty(n: usize) -> Self {
        Self { map: vec![NONE; n], inv: vec![NONE; n] }
    }

    fn satisfies(&self, moves: &[(Point, Point)]) -> bool {
        moves.iter().all(|&(a, b)| self.map[a] == b as u32)
    }

    /// Moves not yet present, or `None` if they clash with the slot.
    fn missing(&self, moves: &[(Point, Point)]) -> Option<Vec<(Point, Point)>> {
        let mut out = Vec::new();
        for &(a, b) in moves {
            match (self.map[a], self.inv[b]) {
                (NONE, NONE) => out.push((a, b)),
                (v, w) if v == b as u32 && w == a as u32 => {}
                _ => return None,
            }
        }
        Some(out)
    }

    fn to_pb(&self) -> PartialBijection {
        PartialBijection::from_sorted_unchecked(
            self.map
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != NONE)
                .map(|(x, &v)| (v as usize, x))
                .collect(),
        )
    }
}

/// `owner[x·n + y]` = translation holding `(x, y)`.
fn is_cotranslation(slot: &Slot, translations: &[PartialBijection], owner: &[u32], n: usize) -> bool {
    translations.iter().enumerate().all(|(ti, t)| {
        t.pairs().iter().all(|&(x, y)| {
            let (a, b) = (slot.map[x], slot.map[y]);
            a == NONE || b == NONE || owner[a as usize * n + b as usize] == ti as u32
        })
    })
}

/// Smallest `k <= bound` for which some cotranslation system makes the
/// translations satisfy transitivity, with the system itself.
fn min_multiplicity(
    n: usize,
    translations: &[PartialBijection],
    bound: usize,
    nodes: &mut u64,
    max_nodes: u64,
) -> Result<Option<(usize, Vec<PartialBijection>)>> {
    let mut owner = vec![NONE; n * n];
    for (ti, t) in translations.iter().enumerate() {
        for &(x, y) in t.pairs() {
            owner[x * n + y] = ti as u32;
        }
    }
    let mut reqs: Vec<Vec<(Point, Point)>> = Vec::new();
    for t in translations {
        for &(x, y) in t.pairs() {
            for &(xp, yp) in t.pairs() {
                let mut moves = vec![(x, xp), (y, yp)];
                moves.sort_unstable();
                moves.dedup();
                reqs.push(moves);
            }
        }
    }
    reqs.sort();
    reqs.dedup();
    // each requirement alone must already be a valid cotranslation
    for r in &reqs {
        let mut slot = Slot::empty(n);
        match slot.missing(r) {
            Some(m) if m.len() == r.len() => {
                for &(a, b) in r {
                    slot.map[a] = b as u32;
                    slot.inv[b] = a as u32;
                }
            }
            _ => return Ok(None),
        }
        if !is_cotranslation(&slot, translations, &owner, n) {
            return Ok(None);
        }
    }

    let ctx = SystemSearch { n, translations, owner: &owner, reqs: &reqs, max_nodes };
    let top = bound.min(reqs.len().max(1));
    for k in 1..=top {
        let mut slots = Vec::new();
        let mut counts = vec![0usize; n * n];
        if ctx.assign(0, k, &mut slots, &mut counts, nodes)? {
            let mut sigma: Vec<PartialBijection> = slots.iter().map(Slot::to_pb).collect();
            sigma.sort();
            sigma.dedup();
            return Ok(Some((k, sigma)));
        }
    }
    Ok(None)
}

struct SystemSearch<'a> {
    n: usize,
    translations: &'a [PartialBijection],
    owner: &'a [u32],
    reqs: &'a [Vec<(Point, Point)>],
    max_nodes: u64,
}

impl SystemSearch<'_> {
    fn assign(
        &self,
        i: usize,
        k: usize,
        slots: &mut Vec<Slot>,
        counts: &mut Vec<usize>,
        nodes: &mut u64,
    ) -> Result<bool> {
        *nodes += 1;
        if *nodes > self.max_nodes {
            return Err(Error::CapExceeded(format!("more than {} search nodes", self.max_nodes)));
        }
        if i == self.reqs.len() {
            return Ok(true);
        }
        let req = &self.reqs[i];
        if slots.iter().any(|s| s.satisfies(req)) {
            return self.assign(i + 1, k, slots, counts, nodes);
        }
        let n = self.n;
        for si in 0..=slots.len() {
            if si == slots.len() {
                slots.push(Slot::empty(n));
            }
            if let Some(missing) = slots[si].missing(req) {
                if missing.iter().all(|&(a, b)| counts[a * n + b] < k) {
                    for &(a, b) in &missing {
                        slots[si].map[a] = b as u32;
                        slots[si].inv[b] = a as u32;
                        counts[a * n + b] += 1;
                    }
                    if is_cotranslation(&slots[si], self.translations, self.owner, n)
                        && self.assign(i + 1, k, slots, counts, nodes)?
                    {
                        return Ok(true);
                    }
                    for &(a, b) in &missing {
                        slots[si].map[a] = NONE;
                        slots[si].inv[b] = NONE;
                        counts[a * n + b] -= 1;
                    }
                }
            }
            if si + 1 == slots.len() && slots[si].map.iter().all(|&v| v == NONE) {
                slots.pop();
                break;
            }
        }
        Ok(false)
    }
}
