//! Kernels on finite spaces, which double as operators on `l²(X)`.
//!
//! On a finite space every matrix has finite propagation, so the uniform Roe
//! algebra is the full matrix algebra and one dense type serves for both
//! kernels and operators. Nothing here models norm completions.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mspace::{FiniteMetricSpace, Point};
use crate::ptrans::{verify_atlas, Atlas, Chart, PartialBijection};

pub type C64 = Complex<f64>;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    entries: DMatrix<C64>,
    tol: f64,
    hermitian: bool,
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl Kernel {
    pub fn new(entries: DMatrix<C64>, tol: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(entries.nrows(), entries.ncols()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Schema("kernel has a non-finite entry".into()));
        }
        if !(tol >= 0.0) {
            return Err(Error::OutOfRange { what: "tol", detail: format!("{tol}") });
        }
        let hermitian = hermitian_deviation(&entries) <= tol;
        Ok(Self { entries, tol, hermitian })
    }

    pub fn from_real(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        Self::new(m.map(|v| C64::new(v, 0.0)), tol)
    }

    pub fn from_fn(n: usize, f: impl Fn(Point, Point) -> C64) -> Self {
        Self::new(DMatrix::from_fn(n, n, f), DEFAULT_TOL).expect("square by construction")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |x, y| if x == y { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn ones(n: usize) -> Self {
        Self::from_fn(n, |_, _| C64::new(1.0, 0.0))
    }

    /// `E_{ij}`, sending `δ_j` to `δ_i`.
    pub fn matrix_unit(n: usize, i: Point, j: Point) -> Self {
        Self::from_fn(n, |x, y| C64::new(if (x, y) == (i, j) { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self.hermitian = hermitian_deviation(&self.entries) <= tol;
        self
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    #[inline]
    pub fn get(&self, x: Point, y: Point) -> C64 {
        self.entries[(x, y)]
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint(), tol: self.tol, hermitian: self.hermitian }
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Self::new(&self.entries * &other.entries, self.tol)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Self::new(&self.entries - &other.entries, self.tol)
    }

    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.entries)
    }

    pub fn to_doc(&self, space_ref: &str) -> KernelDoc {
        let n = self.dim();
        KernelDoc {
            space: space_ref.to_string(),
            entries: (0..n)
                .map(|x| (0..n).map(|y| Entry::Complex([self.get(x, y).re, self.get(x, y).im])).collect())
                .collect(),
        }
    }

    pub fn from_entries(entries: &[Vec<Entry>], tol: f64) -> Result<Self> {
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) {
            return Err(Error::Schema(format!("kernel entries must be {n}x{n}")));
        }
        Self::new(DMatrix::from_fn(n, n, |x, y| entries[x][y].value()), tol)
    }
}

/// A kernel entry: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(r) => C64::new(r, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// Kernel document: `{"space": ref, "entries": [[[re, im], ..], ..]}`; the
/// space reference is resolved by the caller.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDoc {
    pub space: String,
    pub entries: Vec<Vec<Entry>>,
}

fn check_dim(space: &FiniteMetricSpace, k: &Kernel) -> Result<()> {
    if space.len() != k.dim() {
        return Err(Error::DimensionMismatch(space.len(), k.dim()));
    }
    Ok(())
}

/// Smallest `R` with `|T(x, y)| <= tol` whenever `d(x, y) > R`.
pub fn propagation(space: &FiniteMetricSpace, t: &Kernel) -> Result<u64> {
    check_dim(space, t)?;
    let n = t.dim();
    let mut r = 0;
    for x in 0..n {
        for y in 0..n {
            if t.get(x, y).norm() > t.tol() {
                r = r.max(space.d(x, y));
            }
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub positive: bool,
    pub least_eigenvalue: f64,
    /// `max_i ‖A v_i − λ_i v_i‖` of the eigendecomposition used.
    pub residual: f64,
}

/// Eigendecomposition of the hermitian part with a residual check.
fn certified_eigen(m: &DMatrix<C64>, tol: f64) -> Result<(SymmetricEigen<C64, nalgebra::Dyn>, f64)> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h.clone());
    let mut residual = 0.0f64;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let r = &h * v - v * C64::new(lambda, 0.0);
        residual = residual.max(r.norm());
    }
    let scale = operator_scale(&h);
    let allowed = tol.max(f64::EPSILON * 64.0) * scale.max(1.0);
    if residual > allowed {
        return Err(Error::UncertifiedEigen { residual, tol: allowed });
    }
    Ok((eig, residual))
}

/// Cheap upper bound for the operator norm (max absolute row sum).
fn operator_scale(m: &DMatrix<C64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn positive_type_check(u: &Kernel) -> Result<PsdReport> {
    if !u.is_hermitian() {
        return Err(Error::NotHermitian(hermitian_deviation(u.entries())));
    }
    if u.dim() == 0 {
        return Ok(PsdReport { positive: true, least_eigenvalue: 0.0, residual: 0.0 });
    }
    let (eig, residual) = certified_eigen(u.entries(), u.tol())?;
    let least = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PsdReport { positive: least >= -u.tol(), least_eigenvalue: least, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationReport {
    pub holds: bool,
    /// Largest `|1 − u(x, y)|` over pairs with `d(x, y) <= R`.
    pub worst: f64,
    pub witness: Option<(Point, Point)>,
}

/// Whether `|u(x, y) − 1| < eps` for every pair with `d(x, y) <= R`.
pub fn variation_check(space: &FiniteMetricSpace, u: &Kernel, r: u64, eps: f64) -> Result<VariationReport> {
    check_dim(space, u)?;
    let mut worst = 0.0f64;
    let mut at = None;
    for x in 0..u.dim() {
        for y in 0..u.dim() {
            if space.d(x, y) <= r {
                let dev = (u.get(x, y) - C64::new(1.0, 0.0)).norm();
                if dev > worst || at.is_none() {
                    worst = worst.max(dev);
                    at = Some((x, y));
                }
            }
        }
    }
    let holds = worst < eps;
    Ok(VariationReport { holds, worst, witness: if holds { None } else { at } })
}

/// Entrywise product `u ∘ T`.
pub fn schur_multiply(u: &Kernel, t: &Kernel) -> Result<Kernel> {
    u.same_dim(t)?;
    Kernel::new(u.entries().component_mul(t.entries()), t.tol())
}

/// `x ↦ T(x, x)`.
pub fn diag_restrict(t: &Kernel) -> Vec<C64> {
    (0..t.dim()).map(|x| t.get(x, x)).collect()
}

/// 0/1 matrix with ones at the pairs of `t`, i.e. the partial isometry
/// `δ_y ↦ δ_x` for `(x, y) ∈ t`.
pub fn translation_isometry(t: &PartialBijection, n: usize) -> Kernel {
    Kernel::from_fn(n, |x, y| C64::new(if t.contains(x, y) { 1.0 } else { 0.0 }, 0.0))
}

/// `T` with every entry off the pairs of `t` set to zero.
pub fn translation_fiber(t: &PartialBijection, op: &Kernel) -> Kernel {
    Kernel::from_fn(op.dim(), |x, y| if t.contains(x, y) { op.get(x, y) } else { C64::new(0.0, 0.0) })
        .with_tol(op.tol())
}

pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn frobenius_dot(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(p, q)| p.conj() * q).sum()
}

/// Orthonormal (Frobenius) basis with twice-applied Gram–Schmidt.
struct SpanBasis {
    basis: Vec<DMatrix<C64>>,
    tol: f64,
}

impl SpanBasis {
    fn try_add(&mut self, m: &DMatrix<C64>) -> bool {
        let scale = m.norm();
        if scale <= self.tol {
            return false;
        }
        let mut r = m.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let c = frobenius_dot(b, &r);
                r -= b * c;
            }
        }
        let rn = r.norm();
        if rn <= self.tol * scale.max(1.0) {
            return false;
        }
        self.basis.push(r / C64::new(rn, 0.0));
        true
    }
}

/// Dimension of the (non-unital) *-algebra generated by `gens`, computed as
/// the stable span of all words in the generators and their adjoints.
pub fn algebra_dimension(gens: &[Kernel], cap: usize, tol: f64) -> Result<usize> {
    let Some(first) = gens.first() else { return Ok(0) };
    let n = first.dim();
    if let Some(g) = gens.iter().find(|g| g.dim() != n) {
        return Err(Error::DimensionMismatch(n, g.dim()));
    }
    if n > cap {
        return Err(Error::CapExceeded(format!("{n} points exceeds the cap of {cap}")));
    }
    let letters: Vec<DMatrix<C64>> = gens
        .iter()
        .flat_map(|g| [g.entries().clone(), g.entries().adjoint()])
        .collect();
    let mut span = SpanBasis { basis: Vec::new(), tol };
    let mut frontier = Vec::new();
    for l in &letters {
        if span.try_add(l) {
            frontier.push(span.basis.len() - 1);
        }
    }
    while let Some(i) = frontier.pop() {
        for l in &letters {
            let word = l * &span.basis[i];
            if span.try_add(&word) {
                frontier.push(span.basis.len() - 1);
            }
            if span.basis.len() > n * n {
                return Err(Error::NoConvergence(n * n));
            }
        }
    }
    Ok(span.basis.len())
}

#[derive(Debug, Clone, Serialize)]
pub struct ClaimReport {
    pub radius: u64,
    pub least_eigenvalue: f64,
    pub psd: bool,
    /// First pair with `d(x, y) <= R` whose block misses `⟨δ_x, t_xy δ_y⟩ = 1`.
    pub entry_witness: Option<(Point, Point)>,
    /// First covered pair with `d(x, y) <= R` whose block is not the matrix
    /// of the translation containing it.
    pub fiber_witness: Option<(Point, Point)>,
    /// Distinct blocks among pairs with `d(x, y) <= R`.
    pub distinct_blocks: usize,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

impl ClaimReport {
    pub fn passes(&self) -> bool {
        self.psd && self.entry_witness.is_none() && self.fiber_witness.is_none()
    }

    /// Block `t_xy` as an `n × n` matrix.
    pub fn block(&self, x: Point, y: Point, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |a, b| self.matrix[(x * n + a, y * n + b)])
    }
}

/// Assembles `(t_xy) = (s_x* s_y)` where `s_x δ_{x'} = δ_σ` for the unique
/// `σ` with `σx = x'`. The block matrix equals `SᵀS` for the 0/1 matrix
/// `S[σ, (x, x')] = [σx = x']`.
pub fn claim_matrix(space: &FiniteMetricSpace, chart: &Chart, tol: f64) -> Result<ClaimReport> {
    let report = verify_atlas(space, &Atlas::new(vec![chart.clone()]))?;
    let rep = &report.charts[0];
    if !rep.passes() {
        return Err(Error::Precondition(format!("chart at R={} fails the axioms", chart.radius)));
    }
    if !rep.free {
        return Err(Error::NotFree(rep.k));
    }
    let n = space.len();
    let mut sigma = chart.cotranslations.clone();
    sigma.sort();
    sigma.dedup();
    let mut s = DMatrix::<f64>::zeros(sigma.len(), n * n);
    for (si, sg) in sigma.iter().enumerate() {
        for &(xp, x) in sg.pairs() {
            s[(si, x * n + xp)] = 1.0;
        }
    }
    let full = s.transpose() * &s;
    let least = if full.is_empty() {
        0.0
    } else {
        let eig = SymmetricEigen::new(full.clone());
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    };

    let block = |x: Point, y: Point| DMatrix::from_fn(n, n, |a, b| full[(x * n + a, y * n + b)]);
    let mut entry_witness = None;
    let mut fiber_witness = None;
    let mut distinct: Vec<DMatrix<f64>> = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if space.d(x, y) > chart.radius {
                continue;
            }
            let b = block(x, y);
            if b[(x, y)] != 1.0 && entry_witness.is_none() {
                entry_witness = Some((x, y));
            }
            if let Some(t) = chart.translations.iter().find(|t| t.contains(x, y)) {
                let expected = DMatrix::from_fn(n, n, |a, c| if t.contains(a, c) { 1.0 } else { 0.0 });
                if b != expected && fiber_witness.is_none() {
                    fiber_witness = Some((x, y));
                }
            }
            if !distinct.contains(&b) {
                distinct.push(b);
            }
        }
    }
    Ok(ClaimReport {
        radius: chart.radius,
        least_eigenvalue: least,
        psd: least >= -tol,
        entry_witness,
        fiber_witness,
        distinct_blocks: distinct.len(),
        matrix: full,
    })
}

/// Hermitian square root of a positive kernel by eigendecomposition;
/// eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn psd_sqrt(u: &Kernel) -> Result<DMatrix<C64>> {
    let rep = positive_type_check(u)?;
    if !rep.positive {
        return Err(Error::Precondition(format!(
            "kernel is not positive type (least eigenvalue {:e})",
            rep.least_eigenvalue
        )));
    }
    let (eig, _) = certified_eigen(u.entries(), u.tol())?;
    let roots = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.adjoint())
}
