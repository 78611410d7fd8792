use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mspace::{check_map, control_functions, FiniteMetricSpace, Point};
use crate::roe::{propagation, Kernel, C64};

/// A surjection `f: X -> Y` with each fibre enumerated by ascending point
/// index: `π(x)` is the 1-based position of `x` in `f⁻¹(f(x))` and `N(y)`
/// the fibre size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Surjection {
    f: Vec<Point>,
    fibres: Vec<Vec<Point>>,
    pi: Vec<usize>,
}

impl Surjection {
    pub fn new(f: Vec<Point>, target: &FiniteMetricSpace) -> Result<Self> {
        check_map(&f, f.len(), target.len())?;
        let mut fibres = vec![Vec::new(); target.len()];
        let mut pi = vec![0; f.len()];
        for (x, &y) in f.iter().enumerate() {
            fibres[y].push(x);
            pi[x] = fibres[y].len();
        }
        if let Some(y) = fibres.iter().position(Vec::is_empty) {
            return Err(Error::NotSurjective(target.id(y).to_string()));
        }
        Ok(Self { f, fibres, pi })
    }

    pub fn map(&self) -> &[Point] {
        &self.f
    }

    pub fn apply(&self, x: Point) -> Point {
        self.f[x]
    }

    pub fn multiplicity(&self, y: Point) -> usize {
        self.fibres[y].len()
    }

    pub fn position(&self, x: Point) -> usize {
        self.pi[x]
    }

    pub fn fibre(&self, y: Point) -> &[Point] {
        &self.fibres[y]
    }

    pub fn domain_len(&self) -> usize {
        self.f.len()
    }

    pub fn target_len(&self) -> usize {
        self.fibres.len()
    }

    /// `(x, j) ↦ (f(x), π(x) + j N(f(x)))`.
    pub fn interleave(&self, x: Point, j: i64) -> (Point, i64) {
        let y = self.f[x];
        (y, self.pi[x] as i64 + j * self.fibres[y].len() as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterleaveReport {
    pub window: i64,
    /// `((x, j), (y, k))` for every `x` and `|j| <= J`.
    pub mapping: Vec<((Point, i64), (Point, i64))>,
    pub injective: bool,
    pub collision: Option<((Point, i64), (Point, i64))>,
    /// Per target point, the slot range `[1 − J N(y), N(y) + J N(y)]`.
    pub ranges: Vec<(Point, i64, i64)>,
    /// The image is exactly the union of the slot ranges, each slot `k`
    /// hit by the fibre member with `π(x) ≡ k mod N(y)`.
    pub image_exact: bool,
    pub image_witness: Option<(Point, i64)>,
}

impl InterleaveReport {
    pub fn passes(&self) -> bool {
        self.injective && self.image_exact
    }
}

pub fn morita_interleave(f: &Surjection, window: i64) -> Result<InterleaveReport> {
    if window < 0 {
        return Err(Error::OutOfRange { what: "J", detail: format!("window must be nonnegative, got {window}") });
    }
    let mut mapping = Vec::new();
    let mut seen = HashSet::new();
    let mut collision = None;
    let mut owner = std::collections::HashMap::new();
    for x in 0..f.domain_len() {
        for j in -window..=window {
            let slot = f.interleave(x, j);
            if !seen.insert(slot) && collision.is_none() {
                collision = Some((owner[&slot], (x, j)));
            }
            owner.entry(slot).or_insert((x, j));
            mapping.push(((x, j), slot));
        }
    }
    let mut ranges = Vec::with_capacity(f.target_len());
    let mut image_witness = None;
    for y in 0..f.target_len() {
        let n = f.multiplicity(y) as i64;
        let (lo, hi) = (1 - window * n, n + window * n);
        ranges.push((y, lo, hi));
        for k in lo..=hi {
            let x = f.fibre(y)[(k - 1).rem_euclid(n) as usize];
            let predicted = owner.get(&(y, k)).copied();
            let expected = ((k - f.position(x) as i64) % n == 0).then(|| (x, (k - f.position(x) as i64) / n));
            if predicted.is_none() || predicted != expected {
                image_witness.get_or_insert((y, k));
            }
        }
    }
    let in_range = |&(y, k): &(Point, i64)| ranges[y].1 <= k && k <= ranges[y].2;
    if let Some(&(_, slot)) = mapping.iter().find(|(_, s)| !in_range(s)) {
        image_witness.get_or_insert(slot);
    }
    Ok(InterleaveReport {
        window,
        injective: collision.is_none(),
        collision,
        mapping,
        ranges,
        image_exact: image_witness.is_none(),
        image_witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugationReport {
    /// Members of `X_{n,i}` and `X_{n',i'}`.
    pub rows: Vec<Point>,
    pub cols: Vec<Point>,
    pub source_propagation: u64,
    pub propagation: u64,
    /// Forward control of `f` at the source propagation.
    pub control_bound: u64,
    /// Largest fibre radius in `X`.
    pub fibre_radius: u64,
    pub bound: u64,
    pub holds: bool,
    #[serde(skip)]
    pub conjugate: Kernel,
}

fn part(f: &Surjection, n: usize, i: usize) -> Result<Vec<Point>> {
    if n == 0 || i == 0 || i > n {
        return Err(Error::OutOfRange { what: "(n, i)", detail: format!("need 1 <= i <= n, got ({n}, {i})") });
    }
    Ok((0..f.domain_len()).filter(|&x| f.multiplicity(f.apply(x)) == n && f.position(x) == i).collect())
}

/// `S = P_{n,i} T P_{n',i'}` moved to `Y` by the isometries `V_i: δ_x ↦ δ_{f(x)}`
/// of `X_{n,i} = {x : N(f(x)) = n, π(x) = i}`. The propagation of
/// `V_i S V_{i'}*` is checked against the forward control of `f` at the
/// propagation of `T`, plus twice the largest fibre radius.
pub fn morita_conjugation_check(
    f: &Surjection,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    t: &Kernel,
    (n, i): (usize, usize),
    (n2, i2): (usize, usize),
) -> Result<ConjugationReport> {
    if t.dim() != x.len() {
        return Err(Error::DimensionMismatch(t.dim(), x.len()));
    }
    if f.target_len() != y.len() || f.domain_len() != x.len() {
        return Err(Error::BadMap("surjection does not match the given spaces".into()));
    }
    let rows = part(f, n, i)?;
    let cols = part(f, n2, i2)?;
    let mut m = DMatrix::<C64>::zeros(y.len(), y.len());
    for &a in &rows {
        for &b in &cols {
            m[(f.apply(a), f.apply(b))] = t.get(a, b);
        }
    }
    let conjugate = Kernel::new(m, t.tol())?;
    let source_propagation = propagation(x, t)?;
    let propagation = propagation(y, &conjugate)?;
    let control = control_functions(f.map(), x, y)?;
    let control_bound = control.forward.eval(source_propagation);
    let fibre_radius = (0..f.target_len())
        .map(|v| {
            let fib = f.fibre(v);
            fib.iter().map(|&c| fib.iter().map(|&p| x.d(c, p)).max().unwrap_or(0)).min().unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    let bound = control_bound + 2 * fibre_radius;
    Ok(ConjugationReport {
        rows,
        cols,
        source_propagation,
        propagation,
        control_bound,
        fibre_radius,
        bound,
        holds: propagation <= bound,
        conjugate,
    })
}
