use std::collections::HashMap;

use itertools::Itertools;

use super::{Atlas, Chart, PartialBijection};
use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::mspace::{check_map, control_functions, FiniteMetricSpace, Point};

fn check_radii(radii: &[u64]) -> Result<()> {
    match radii.iter().find(|&&r| r == 0) {
        Some(_) => Err(Error::OutOfRange { what: "R", detail: "radii must be positive".into() }),
        None => Ok(()),
    }
}

/// Colouring construction. Colour classes are `2R`-separated in the strict
/// sense (same colour implies `d > 2R`), so each
/// `t_ij = {(x, y) ∈ X_i × X_j : d(x, y) <= R}` is a partial translation.
/// For `i <= j` one cycle through `t_ij` (pairs sorted by first coordinate)
/// acts on `X_i ∪ X_j`; `Σ_R` collects all its powers.
pub fn build_atlas_coloring(space: &FiniteMetricSpace, radii: &[u64]) -> Result<Atlas> {
    check_radii(radii)?;
    let charts = radii.iter().map(|&r| coloring_chart(space, r)).collect();
    Ok(Atlas::new(charts))
}

fn coloring_chart(space: &FiniteMetricSpace, r: u64) -> Chart {
    let coloring = space.greedy_separation(2 * r);
    let classes = coloring.classes();
    let m = classes.len();
    let mut t: Vec<Vec<Vec<(Point, Point)>>> = vec![vec![Vec::new(); m]; m];
    for (i, xi) in classes.iter().enumerate() {
        for (j, xj) in classes.iter().enumerate() {
            t[i][j] = xi
                .iter()
                .cartesian_product(xj)
                .filter(|&(&x, &y)| space.d(x, y) <= r)
                .map(|(&x, &y)| (x, y))
                .collect();
        }
    }

    let translations = t
        .iter()
        .flatten()
        .filter(|pairs| !pairs.is_empty())
        .map(|pairs| PartialBijection::from_sorted_unchecked(pairs.clone()))
        .collect();

    let mut cotranslations = Vec::new();
    for i in 0..m {
        for j in i..m {
            let cycle = &t[i][j];
            let len = cycle.len();
            for power in 0..len {
                // (x, y) ↦ (x', y') where (x', y') is `power` steps ahead
                let pairs = (0..len).flat_map(|p| {
                    let (x, y) = cycle[p];
                    let (xp, yp) = cycle[(p + power) % len];
                    [(xp, x), (yp, y)]
                });
                cotranslations.push(PartialBijection::from_sorted_unchecked(pairs.collect()));
            }
        }
    }
    cotranslations.sort();
    cotranslations.dedup();

    Chart { radius: r, translations, cotranslations }
}

/// Pullback of the canonical structure of `group` along an injection
/// `phi: X -> G`. For each `R` with `S = forward(R)`,
/// `T_R = {g⋄ : |g| <= S}` where `g⋄ = {(x, y) : φ(x)g = φ(y)}`, and `Σ_R`
/// holds the partial maps `x ↦ x'` with `hφ(x) = φ(x')`.
pub fn pullback_atlas(
    space: &FiniteMetricSpace,
    group: &FiniteGroup,
    phi: &[usize],
    radii: &[u64],
) -> Result<Atlas> {
    check_radii(radii)?;
    check_map(phi, space.len(), group.order())?;
    let mut preimage: HashMap<usize, Point> = HashMap::with_capacity(phi.len());
    for (x, &g) in phi.iter().enumerate() {
        if let Some(prev) = preimage.insert(g, x) {
            return Err(Error::NotInjective(format!(
                "`{}` and `{}` both map to `{}`",
                space.id(prev),
                space.id(x),
                group.elements()[g]
            )));
        }
    }
    let control = control_functions(phi, space, &group.word_metric())?;
    let len = group.lengths();

    let diamond = |g: usize| -> PartialBijection {
        let pairs = (0..space.len())
            .filter_map(|x| preimage.get(&group.mul(phi[x], g)).map(|&y| (x, y)))
            .collect();
        PartialBijection::from_sorted_unchecked(pairs)
    };
    let mut cotranslations: Vec<PartialBijection> = (0..group.order())
        .map(|h| {
            let pairs = (0..space.len())
                .filter_map(|x| preimage.get(&group.mul(h, phi[x])).map(|&xp| (xp, x)))
                .collect();
            PartialBijection::from_sorted_unchecked(pairs)
        })
        .filter(|s| !s.is_empty())
        .collect();
    cotranslations.sort();
    cotranslations.dedup();

    let charts = radii
        .iter()
        .map(|&r| {
            let s = control.forward.eval(r);
            Chart {
                radius: r,
                translations: (0..group.order())
                    .filter(|&g| len[g] <= s)
                    .map(diamond)
                    .filter(|t| !t.is_empty())
                    .collect(),
                cotranslations: cotranslations.clone(),
            }
        })
        .collect();
    Ok(Atlas::new(charts))
}
