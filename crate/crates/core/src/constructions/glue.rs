use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mspace::{FiniteMetricSpace, Point};
use crate::roe::{positive_type_check, propagation, variation_check, Entry, Kernel, PsdReport, VariationReport, C64};

/// A block `X_i` of a partition and its local kernel `u_i`, indexed in the
/// order of `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueBlock {
    pub points: Vec<Point>,
    pub kernel: Kernel,
}

/// `{"blocks": [{"points": [ids], "entries": [[..]]}, ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueDoc {
    pub blocks: Vec<GlueBlockDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueBlockDoc {
    pub points: Vec<String>,
    pub entries: Vec<Vec<Entry>>,
}

impl GlueDoc {
    pub fn to_blocks(&self, space: &FiniteMetricSpace, tol: f64) -> Result<Vec<GlueBlock>> {
        self.blocks
            .iter()
            .map(|b| {
                Ok(GlueBlock {
                    points: b.points.iter().map(|id| space.index_of(id)).collect::<Result<_>>()?,
                    kernel: Kernel::from_entries(&b.entries, tol)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueReport {
    /// Blocks within `R` of another block, fused into one all-ones block.
    pub fused: Vec<usize>,
    pub positive: PsdReport,
    pub variation: VariationReport,
    pub propagation: u64,
    /// `max(propagation of unfused u_i, diameter of the fused blocks)`.
    pub propagation_bound: u64,
    #[serde(skip)]
    pub kernel: Kernel,
}

impl GlueReport {
    pub fn passes(&self) -> bool {
        self.positive.positive && self.variation.holds && self.propagation <= self.propagation_bound
    }
}

/// Glues local kernels on a partition of `space`: `v = 1` on pairs inside
/// the fused blocks, `v = u_i` inside an unfused block `X_i`, and `0`
/// elsewhere. Each block kernel must be positive with `(R, eps)`-variation.
pub fn glue_local_kernel(
    space: &FiniteMetricSpace,
    blocks: &[GlueBlock],
    r: u64,
    eps: f64,
    tol: f64,
) -> Result<GlueReport> {
    let n = space.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.kernel.dim() != block.points.len() {
            return Err(Error::DimensionMismatch(block.kernel.dim(), block.points.len()));
        }
        for &p in &block.points {
            if p >= n {
                return Err(Error::BadMap(format!("block {b} names point index {p}")));
            }
            if owner[p].replace(b).is_some() {
                return Err(Error::OverlappingBlocks(space.id(p).to_string()));
            }
        }
        let local = space.restrict(&block.points);
        let u = block.kernel.clone().with_tol(tol);
        let psd = positive_type_check(&u)?;
        let var = variation_check(&local, &u, r, eps)?;
        if !psd.positive || !var.holds {
            return Err(Error::Precondition(format!(
                "block {b} kernel is not positive with (R, eps)-variation (least eigenvalue {:e}, worst variation {:e})",
                psd.least_eigenvalue, var.worst
            )));
        }
    }
    if let Some(p) = owner.iter().position(Option::is_none) {
        return Err(Error::Precondition(format!("`{}` lies in no block", space.id(p))));
    }

    let gap = |a: &GlueBlock, b: &GlueBlock| {
        a.points.iter().flat_map(|&x| b.points.iter().map(move |&y| space.d(x, y))).min().unwrap_or(u64::MAX)
    };
    let fused: Vec<usize> = (0..blocks.len())
        .filter(|&i| (0..blocks.len()).any(|j| j != i && gap(&blocks[i], &blocks[j]) <= r))
        .collect();
    let is_fused = |b: usize| fused.binary_search(&b).is_ok();

    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut local = vec![0usize; n];
    for block in blocks {
        for (k, &p) in block.points.iter().enumerate() {
            local[p] = k;
        }
    }
    for x in 0..n {
        for y in 0..n {
            let (bx, by) = (owner[x].unwrap(), owner[y].unwrap());
            m[(x, y)] = if is_fused(bx) && is_fused(by) {
                C64::new(1.0, 0.0)
            } else if bx == by {
                blocks[bx].kernel.get(local[x], local[y])
            } else {
                C64::new(0.0, 0.0)
            };
        }
    }
    let kernel = Kernel::new(m, tol)?;
    let fused_points: Vec<Point> = fused.iter().flat_map(|&b| blocks[b].points.iter().copied()).collect();
    let fused_diameter = fused_points
        .iter()
        .flat_map(|&x| fused_points.iter().map(move |&y| space.d(x, y)))
        .max()
        .unwrap_or(0);
    let local_reach = (0..blocks.len())
        .filter(|&b| !is_fused(b))
        .map(|b| propagation(&space.restrict(&blocks[b].points), &blocks[b].kernel.clone().with_tol(tol)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    Ok(GlueReport {
        fused,
        positive: positive_type_check(&kernel)?,
        variation: variation_check(space, &kernel, r, eps)?,
        propagation: propagation(space, &kernel)?,
        propagation_bound: local_reach.max(fused_diameter),
        kernel,
    })
}
