use serde::{Deserialize, Serialize};

use super::PartialBijection;
use crate::error::{Error, Result};
use crate::mspace::{FiniteMetricSpace, Point};

/// One radius of an atlas: disjoint translations `T_R` and cotranslations `Σ_R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    pub radius: u64,
    pub translations: Vec<PartialBijection>,
    pub cotranslations: Vec<PartialBijection>,
}

/// Chart document: `{"R":int, "translations":[[[x,y],..],..], "cotranslations":[..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDoc {
    #[serde(rename = "R")]
    pub radius: u64,
    pub translations: Vec<PartialBijection>,
    pub cotranslations: Vec<PartialBijection>,
}

impl From<ChartDoc> for Chart {
    fn from(d: ChartDoc) -> Self {
        Chart { radius: d.radius, translations: d.translations, cotranslations: d.cotranslations }
    }
}

impl From<&Chart> for ChartDoc {
    fn from(c: &Chart) -> Self {
        ChartDoc {
            radius: c.radius,
            translations: c.translations.clone(),
            cotranslations: c.cotranslations.clone(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AtlasDoc {
    Many(Vec<ChartDoc>),
    One(ChartDoc),
}

/// Charts ordered by radius.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Atlas {
    charts: Vec<Chart>,
}

impl Atlas {
    pub fn new(mut charts: Vec<Chart>) -> Self {
        charts.sort_by_key(|c| c.radius);
        Self { charts }
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, radius: u64) -> Option<&Chart> {
        self.charts.iter().find(|c| c.radius == radius)
    }

    /// Accepts either an array of chart documents or a single one.
    pub fn from_json(text: &str) -> Result<Self> {
        let charts = match serde_json::from_str::<AtlasDoc>(text) {
            Ok(AtlasDoc::Many(v)) => v,
            Ok(AtlasDoc::One(c)) => vec![c],
            // re-parse strictly for a useful message
            Err(_) => serde_json::from_str::<Vec<ChartDoc>>(text)?,
        };
        Ok(Self::new(charts.into_iter().map(Chart::from).collect()))
    }

    pub fn to_json(&self) -> String {
        let docs: Vec<ChartDoc> = self.charts.iter().map(ChartDoc::from).collect();
        serde_json::to_string(&docs).expect("atlas documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChartReport {
    pub radius: u64,
    pub translations: usize,
    pub cotranslations: usize,
    pub max_displacement: u64,
    /// Every pair at distance `< R` lies in some translation.
    pub axiom1: bool,
    pub uncovered: Option<(Point, Point)>,
    /// Every member of `Σ_R` is a cotranslation for `T_R`.
    pub cotranslations_valid: bool,
    pub bad_cotranslation: Option<usize>,
    /// Always true on finite data; `k` is the witness.
    pub axiom2: bool,
    pub k: usize,
    pub axiom3: bool,
    pub axiom3_witness: Option<((Point, Point), (Point, Point))>,
    pub free: bool,
    pub globally_controlled: bool,
    /// A pair whose cotranslation orbit is not a partial bijection.
    pub control_witness: Option<(Point, Point)>,
}

impl ChartReport {
    pub fn passes(&self) -> bool {
        self.axiom1 && self.cotranslations_valid && self.axiom2 && self.axiom3
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtlasReport {
    pub charts: Vec<ChartReport>,
}

impl AtlasReport {
    pub fn passes(&self) -> bool {
        self.charts.iter().all(ChartReport::passes)
    }

    pub fn free(&self) -> bool {
        self.charts.iter().all(|c| c.free)
    }

    pub fn globally_controlled(&self) -> bool {
        self.charts.iter().all(|c| c.globally_controlled)
    }
}

pub fn verify_atlas(space: &FiniteMetricSpace, atlas: &Atlas) -> Result<AtlasReport> {
    let charts = atlas
        .charts()
        .iter()
        .map(|c| verify_chart(space, c))
        .collect::<Result<_>>()?;
    Ok(AtlasReport { charts })
}

const NONE: u32 = u32::MAX;

pub(crate) fn verify_chart(space: &FiniteMetricSpace, chart: &Chart) -> Result<ChartReport> {
    let n = space.len();
    let r = chart.radius;
    let malformed = |detail: String| Error::MalformedChart { radius: r, detail };

    for (kind, list) in [("translation", &chart.translations), ("cotranslation", &chart.cotranslations)] {
        if let Some(i) = list.iter().position(|t| t.max_point().is_some_and(|p| p >= n)) {
            return Err(malformed(format!("{kind} {i} refers to a point outside the space")));
        }
    }

    // owner[x·n + y] = index of the translation containing (x, y)
    let mut owner = vec![NONE; n * n];
    for (ti, t) in chart.translations.iter().enumerate() {
        for &(x, y) in t.pairs() {
            let slot = &mut owner[x * n + y];
            if *slot != NONE {
                return Err(malformed(format!(
                    "translations {} and {ti} overlap at ({}, {})",
                    *slot,
                    space.id(x),
                    space.id(y)
                )));
            }
            *slot = ti as u32;
        }
    }

    let uncovered = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .find(|&(x, y)| space.d(x, y) < r && owner[x * n + y] == NONE);

    let mut sigmas: Vec<&PartialBijection> = chart.cotranslations.iter().collect();
    sigmas.sort();
    sigmas.dedup();
    let maps: Vec<Vec<u32>> = sigmas
        .iter()
        .map(|s| {
            let mut m = vec![NONE; n];
            for &(x, y) in s.pairs() {
                m[y] = x as u32;
            }
            m
        })
        .collect();

    let bad_cotranslation = maps.iter().position(|m| {
        chart.translations.iter().enumerate().any(|(ti, t)| {
            t.pairs().iter().any(|&(x, y)| {
                let (sx, sy) = (m[x], m[y]);
                sx != NONE && sy != NONE && owner[sx as usize * n + sy as usize] != ti as u32
            })
        })
    });
    // report the index in the caller's list
    let bad_cotranslation = bad_cotranslation
        .map(|i| chart.cotranslations.iter().position(|s| s == sigmas[i]).unwrap());

    // moves[x·n + x'] = cotranslations sending x to x'
    let mut moves: Vec<Vec<u32>> = vec![Vec::new(); n * n];
    for (si, m) in maps.iter().enumerate() {
        for (x, &xp) in m.iter().enumerate() {
            if xp != NONE {
                moves[x * n + xp as usize].push(si as u32);
            }
        }
    }
    let k = moves.iter().map(Vec::len).max().unwrap_or(0);

    let mut axiom3_witness = None;
    'outer: for t in &chart.translations {
        for &(x, y) in t.pairs() {
            for &(xp, yp) in t.pairs() {
                let ok = moves[x * n + xp]
                    .iter()
                    .any(|&si| maps[si as usize][y] == yp as u32);
                if !ok {
                    axiom3_witness = Some(((x, y), (xp, yp)));
                    break 'outer;
                }
            }
        }
    }

    let control_witness = orbit_violation(n, &maps);

    Ok(ChartReport {
        radius: r,
        translations: chart.translations.len(),
        cotranslations: chart.cotranslations.len(),
        max_displacement: chart.translations.iter().map(|t| t.displacement(space)).max().unwrap_or(0),
        axiom1: uncovered.is_none(),
        uncovered,
        cotranslations_valid: bad_cotranslation.is_none(),
        bad_cotranslation,
        axiom2: true,
        k,
        axiom3: axiom3_witness.is_none(),
        axiom3_witness,
        free: k == 1,
        globally_controlled: control_witness.is_none(),
        control_witness,
    })
}

/// First `(x, y)` whose orbit `{(σx, σy)}` fails injectivity of a projection.
fn orbit_violation(n: usize, maps: &[Vec<u32>]) -> Option<(Point, Point)> {
    // stamped scratch arrays: first[a] = (stamp, b) records (a, b) in the orbit
    let mut first = vec![(0u32, 0u32); n];
    let mut second = vec![(0u32, 0u32); n];
    let mut stamp = 0u32;
    for x in 0..n {
        for y in 0..n {
            stamp += 1;
            for m in maps {
                let (a, b) = (m[x], m[y]);
                if a == NONE || b == NONE {
                    continue;
                }
                let fa = &mut first[a as usize];
                if fa.0 == stamp && fa.1 != b {
                    return Some((x, y));
                }
                *fa = (stamp, b);
                let sb = &mut second[b as usize];
                if sb.0 == stamp && sb.1 != a {
                    return Some((x, y));
                }
                *sb = (stamp, a);
            }
        }
    }
    None
}
