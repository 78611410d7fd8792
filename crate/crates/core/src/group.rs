//! Finite groups given by multiplication tables, their word metrics, and the
//! canonical free atlas built from right translations.

use std::collections::VecDeque;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mspace::FiniteMetricSpace;
use crate::ptrans::{Atlas, Chart, PartialBijection};

/// On-disk form: `{"elements":[..], "table":[[..]], "generators":[..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub elements: Vec<String>,
    pub table: Vec<Vec<usize>>,
    pub generators: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    elements: Vec<String>,
    table: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
    generators: Vec<usize>,
}

impl FiniteGroup {
    pub fn new(elements: Vec<String>, table: Vec<Vec<usize>>, generators: Vec<usize>) -> Result<Self> {
        let n = elements.len();
        if n == 0 {
            return Err(Error::Schema("group has no elements".into()));
        }
        if table.len() != n || table.iter().any(|r| r.len() != n) {
            return Err(Error::Schema(format!("table must be {n}x{n}")));
        }
        if table.iter().flatten().any(|&v| v >= n) {
            return Err(Error::Schema("table entry out of range".into()));
        }
        if elements.iter().duplicates().next().is_some() {
            return Err(Error::Schema("duplicate element id".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row.iter().duplicates().next().is_some() {
                return Err(Error::NotBijectionRow(i));
            }
        }
        for j in 0..n {
            if (0..n).map(|i| table[i][j]).duplicates().next().is_some() {
                return Err(Error::NotBijectionColumn(j));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or(Error::NoIdentity)?;
        for a in 0..n {
            for b in 0..n {
                let ab = table[a][b];
                for c in 0..n {
                    if table[ab][c] != table[a][table[b][c]] {
                        return Err(Error::NotAssociative(a, b, c));
                    }
                }
            }
        }
        // Latin square plus identity: every row contains the identity once.
        let inverse: Vec<usize> = (0..n)
            .map(|g| (0..n).find(|&h| table[g][h] == identity).unwrap())
            .collect();
        let flat: Vec<usize> = table.into_iter().flatten().collect();

        let mut gens = generators;
        gens.sort_unstable();
        gens.dedup();
        if let Some(&g) = gens.iter().find(|&&g| g >= n) {
            return Err(Error::OutOfRange {
                what: "generator",
                detail: format!("index {g} in a group of order {n}"),
            });
        }
        if gens.contains(&identity) {
            return Err(Error::IdentityGenerator);
        }
        if let Some(&g) = gens.iter().find(|&&g| !gens.contains(&inverse[g])) {
            return Err(Error::AsymmetricGenerators(g));
        }
        let group = Self { elements, table: flat, identity, inverse, generators: gens };
        let reached = group.word_lengths().iter().filter(|l| l.is_some()).count();
        if reached != n {
            return Err(Error::NotGenerating { reached, order: n });
        }
        Ok(group)
    }

    pub fn from_doc(doc: GroupDoc) -> Result<Self> {
        Self::new(doc.elements, doc.table, doc.generators)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn to_doc(&self) -> GroupDoc {
        GroupDoc {
            elements: self.elements.clone(),
            table: self.table.chunks(self.order()).map(<[usize]>::to_vec).collect(),
            generators: self.generators.clone(),
        }
    }

    fn from_mul(elements: Vec<String>, mul: impl Fn(usize, usize) -> usize, gens: Vec<usize>) -> Self {
        let n = elements.len();
        let table = (0..n).map(|a| (0..n).map(|b| mul(a, b)).collect()).collect();
        Self::new(elements, table, gens).expect("built-in family is a group")
    }

    /// `Z_n` with generators `±1`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n > 0);
        let gens = if n == 1 { vec![] } else { vec![1, n - 1] };
        Self::from_mul((0..n).map(|i| i.to_string()).collect(), |a, b| (a + b) % n, gens)
    }

    /// Dihedral group of order `2m`; `r^k s^e` sits at index `k + m·e`.
    /// Generators are `r`, `r⁻¹` and `s`.
    pub fn dihedral(m: usize) -> Self {
        assert!(m >= 2, "dihedral groups need m >= 2");
        let names = (0..2 * m)
            .map(|i| if i < m { format!("r{i}") } else { format!("r{}s", i - m) })
            .collect();
        let mul = |a: usize, b: usize| {
            let (ka, ea) = (a % m, a / m);
            let (kb, eb) = (b % m, b / m);
            let k = if ea == 0 { ka + kb } else { ka + m - kb } % m;
            k + m * ((ea + eb) % 2)
        };
        Self::from_mul(names, mul, vec![1, m - 1, m])
    }

    /// Symmetric group on `k` letters, permutations in lexicographic order,
    /// product `(a·b)(i) = a(b(i))`, adjacent transpositions as generators.
    pub fn symmetric(k: usize) -> Self {
        assert!(k >= 1);
        let perms: Vec<Vec<usize>> = (0..k).permutations(k).collect();
        let index = |p: &[usize]| perms.iter().position(|q| q == p).unwrap();
        let names = perms.iter().map(|p| p.iter().join("")).collect();
        let gens = (0..k.saturating_sub(1))
            .map(|i| {
                let mut p: Vec<usize> = (0..k).collect();
                p.swap(i, i + 1);
                index(&p)
            })
            .collect();
        let n = perms.len();
        let products: Vec<usize> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| {
                let c: Vec<usize> = perms[b].iter().map(|&i| perms[a][i]).collect();
                index(&c)
            })
            .collect();
        Self::from_mul(names, |a, b| products[a * n + b], gens)
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order() + b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.elements
            .iter()
            .position(|e| e == id)
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    /// Word length of every element by breadth-first search; `None` for
    /// elements outside the generated subgroup.
    fn word_lengths(&self) -> Vec<Option<u64>> {
        let mut len = vec![None; self.order()];
        len[self.identity] = Some(0);
        let mut queue = VecDeque::from([self.identity]);
        while let Some(g) = queue.pop_front() {
            let l = len[g].unwrap();
            for &s in &self.generators {
                let h = self.mul(g, s);
                if len[h].is_none() {
                    len[h] = Some(l + 1);
                    queue.push_back(h);
                }
            }
        }
        len
    }

    /// `|g|` for every element.
    pub fn lengths(&self) -> Vec<u64> {
        self.word_lengths().into_iter().map(Option::unwrap).collect()
    }

    /// Left-invariant word metric `d(g, h) = |g⁻¹h|`.
    pub fn word_metric(&self) -> FiniteMetricSpace {
        let len = self.lengths();
        let n = self.order();
        let dist = (0..n)
            .flat_map(|g| (0..n).map(move |h| (g, h)))
            .map(|(g, h)| len[self.mul(self.inv(g), h)])
            .collect();
        FiniteMetricSpace::from_trusted(self.elements.clone(), dist, 1)
    }
}

/// `t_g = {(h, hg) : h ∈ G}`.
pub fn canonical_translation(g: &FiniteGroup, elem: usize) -> PartialBijection {
    PartialBijection::from_sorted_unchecked(
        (0..g.order()).map(|h| (h, g.mul(h, elem))).sorted().collect(),
    )
}

/// `σ_h`, left multiplication `x ↦ hx`, stored as pairs `(hx, x)`.
pub fn left_multiplication(g: &FiniteGroup, h: usize) -> PartialBijection {
    PartialBijection::from_sorted_unchecked(
        (0..g.order()).map(|x| (g.mul(h, x), x)).sorted().collect(),
    )
}

/// The canonical atlas: `T_R = {t_g : |g| < R}` and `Σ_R = {σ_h : h ∈ G}`.
pub fn canonical_atlas(g: &FiniteGroup, radii: &[u64]) -> Result<Atlas> {
    if let Some(&r) = radii.iter().find(|&&r| r == 0) {
        return Err(Error::OutOfRange { what: "R", detail: format!("{r} must be positive") });
    }
    let len = g.lengths();
    let sigma: Vec<PartialBijection> = (0..g.order()).map(|h| left_multiplication(g, h)).collect();
    let charts = radii
        .iter()
        .map(|&r| Chart {
            radius: r,
            translations: (0..g.order())
                .filter(|&e| len[e] < r)
                .map(|e| canonical_translation(g, e))
                .collect(),
            cotranslations: sigma.clone(),
        })
        .collect();
    Ok(Atlas::new(charts))
}
