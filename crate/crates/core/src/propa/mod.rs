//! Property A certificates in eight forms, their verification, and the
//! conversions between forms.
//!
//! A certificate fixes one finite family (sets, vectors or a kernel) together
//! with the parameters it claims: radius `R`, variation `eps`, support radius
//! `S` and, for the weak forms, the mass defect `delta`.

mod convert;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::mspace::{FiniteMetricSpace, Point};
use crate::roe::{positive_type_check, propagation, variation_check, Entry, Kernel, KernelDoc, C64};

pub use convert::{
    kernel_to_vectors, l1_to_l2, truncate_normalize, vectors_to_kernel, yusets_to_l1, BoundCheck,
    Conversion,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    YuSets,
    L1,
    L2,
    L2Delta,
    L2DeltaWeak,
    Hilbert,
    KernelReal,
    KernelRoe,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::YuSets,
        Variant::L1,
        Variant::L2,
        Variant::L2Delta,
        Variant::L2DeltaWeak,
        Variant::Hilbert,
        Variant::KernelReal,
        Variant::KernelRoe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::YuSets => "yu-sets",
            Variant::L1 => "l1",
            Variant::L2 => "l2",
            Variant::L2Delta => "l2-delta",
            Variant::L2DeltaWeak => "l2-delta-weak",
            Variant::Hilbert => "hilbert",
            Variant::KernelReal => "kernel-real",
            Variant::KernelRoe => "kernel-roe",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::MalformedCertificate(format!("unknown variant `{name}`")))
    }

    fn is_kernel(self) -> bool {
        matches!(self, Variant::KernelReal | Variant::KernelRoe)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "R")]
    pub r: u64,
    pub eps: f64,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// `A_x ⊂ X × N` as `(point, level)` lists.
    Sets(Vec<Vec<(Point, u64)>>),
    /// `ξ_x`, over the points of the space or over an abstract basis.
    Vectors(Vec<DVector<C64>>),
    Kernel(Kernel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropACertificate {
    pub variant: Variant,
    pub params: Params,
    pub payload: Payload,
}

/// On-disk form: `{"variant":.., "params":{..}, "payload":..}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDoc {
    pub variant: Variant,
    pub params: Params,
    pub payload: Value,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedCertificate(msg.into())
}

fn entry_value(z: C64) -> Value {
    let num = |v: f64| serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null);
    if z.im == 0.0 {
        num(z.re)
    } else {
        Value::Array(vec![num(z.re), num(z.im)])
    }
}

fn parse_entry(v: &Value) -> Result<C64> {
    serde_json::from_value::<Entry>(v.clone())
        .map(Entry::value)
        .map_err(|e| malformed(format!("bad vector entry {v}: {e}")))
}

/// Point-keyed object whose keys are exactly the points of `space`.
fn point_object<'a>(space: &FiniteMetricSpace, v: &'a Value) -> Result<Vec<&'a Value>> {
    let obj = v.as_object().ok_or_else(|| malformed("payload must be an object keyed by point"))?;
    let mut out = vec![None; space.len()];
    for (k, val) in obj {
        let p = space.index_of(k).map_err(|_| malformed(format!("payload names unknown point `{k}`")))?;
        out[p] = Some(val);
    }
    out.into_iter()
        .enumerate()
        .map(|(p, v)| v.ok_or_else(|| malformed(format!("payload misses point `{}`", space.id(p)))))
        .collect()
}

impl PropACertificate {
    pub fn new(variant: Variant, params: Params, payload: Payload) -> Self {
        Self { variant, params, payload }
    }

    pub fn vectors(&self) -> Option<&[DVector<C64>]> {
        match &self.payload {
            Payload::Vectors(v) => Some(v),
            _ => None,
        }
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        match &self.payload {
            Payload::Kernel(k) => Some(k),
            _ => None,
        }
    }

    pub fn sets(&self) -> Option<&[Vec<(Point, u64)>]> {
        match &self.payload {
            Payload::Sets(s) => Some(s),
            _ => None,
        }
    }

    /// Parses a document against `space`. Kernel payloads carry their own
    /// space reference, which the caller is expected to have resolved to
    /// `space`.
    pub fn from_doc(doc: &CertificateDoc, space: &FiniteMetricSpace, tol: f64) -> Result<Self> {
        let payload = match doc.variant {
            Variant::YuSets => {
                let rows = point_object(space, &doc.payload)?;
                let sets = rows
                    .into_iter()
                    .map(|row| {
                        let items: Vec<(String, u64)> = serde_json::from_value(row.clone())
                            .map_err(|e| malformed(format!("set must be a list of [point, level]: {e}")))?;
                        items
                            .into_iter()
                            .map(|(id, level)| {
                                space
                                    .index_of(&id)
                                    .map(|p| (p, level))
                                    .map_err(|_| malformed(format!("unknown point `{id}` in a set")))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Payload::Sets(sets.into_iter().map(normalize_set).collect())
            }
            Variant::Hilbert => {
                let rows = point_object(space, &doc.payload)?;
                let mut parsed = Vec::with_capacity(rows.len());
                let mut dim = 0;
                for row in rows {
                    let obj = row.as_object().ok_or_else(|| malformed("hilbert vector must be an object"))?;
                    let mut entries = BTreeMap::new();
                    for (k, v) in obj {
                        let i: usize = k
                            .parse()
                            .map_err(|_| malformed(format!("hilbert basis key `{k}` is not an index")))?;
                        dim = dim.max(i + 1);
                        entries.insert(i, parse_entry(v)?);
                    }
                    parsed.push(entries);
                }
                Payload::Vectors(
                    parsed
                        .into_iter()
                        .map(|e| DVector::from_fn(dim, |i, _| e.get(&i).copied().unwrap_or_default()))
                        .collect(),
                )
            }
            v if v.is_kernel() => {
                let kd: KernelDoc = serde_json::from_value(doc.payload.clone())
                    .map_err(|e| malformed(format!("kernel payload: {e}")))?;
                let k = Kernel::from_entries(&kd.entries, tol)?;
                if k.dim() != space.len() {
                    return Err(malformed(format!(
                        "kernel is {0}x{0} but the space has {1} points",
                        k.dim(),
                        space.len()
                    )));
                }
                Payload::Kernel(k)
            }
            _ => {
                let rows = point_object(space, &doc.payload)?;
                let vecs = rows
                    .into_iter()
                    .map(|row| {
                        let obj = row.as_object().ok_or_else(|| malformed("vector must be an object"))?;
                        let mut v = DVector::<C64>::zeros(space.len());
                        for (k, val) in obj {
                            let p = space
                                .index_of(k)
                                .map_err(|_| malformed(format!("vector names unknown point `{k}`")))?;
                            v[p] = parse_entry(val)?;
                        }
                        Ok(v)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Payload::Vectors(vecs)
            }
        };
        Ok(Self { variant: doc.variant, params: doc.params, payload })
    }

    pub fn from_json(text: &str, space: &FiniteMetricSpace, tol: f64) -> Result<Self> {
        let doc: CertificateDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc, space, tol)
    }

    /// `space_ref` is written into kernel payloads.
    pub fn to_doc(&self, space: &FiniteMetricSpace, space_ref: &str) -> CertificateDoc {
        let payload = match &self.payload {
            Payload::Sets(sets) => Value::Object(
                sets.iter()
                    .enumerate()
                    .map(|(x, set)| {
                        let items = set
                            .iter()
                            .map(|&(p, l)| Value::Array(vec![Value::from(space.id(p)), Value::from(l)]))
                            .collect();
                        (space.id(x).to_string(), Value::Array(items))
                    })
                    .collect(),
            ),
            Payload::Vectors(vecs) => {
                let hilbert = self.variant == Variant::Hilbert;
                Value::Object(
                    vecs.iter()
                        .enumerate()
                        .map(|(x, v)| {
                            let entries: Map<String, Value> = v
                                .iter()
                                .enumerate()
                                .filter(|(_, z)| z.norm() != 0.0)
                                .map(|(i, &z)| {
                                    let key = if hilbert { i.to_string() } else { space.id(i).to_string() };
                                    (key, entry_value(z))
                                })
                                .collect();
                            (space.id(x).to_string(), Value::Object(entries))
                        })
                        .collect(),
                )
            }
            Payload::Kernel(k) => serde_json::to_value(k.to_doc(space_ref)).expect("kernel docs serialize"),
        };
        CertificateDoc { variant: self.variant, params: self.params, payload }
    }

    pub fn to_json(&self, space: &FiniteMetricSpace, space_ref: &str) -> String {
        serde_json::to_string(&self.to_doc(space, space_ref)).expect("certificate docs serialize")
    }
}

fn normalize_set(mut s: Vec<(Point, u64)>) -> Vec<(Point, u64)> {
    s.sort_unstable();
    s.dedup();
    s
}

/// Outcome of one clause of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    /// The worst measured quantity for this clause.
    pub value: f64,
    pub witness: Option<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertReport {
    pub variant: Variant,
    pub checks: Vec<Check>,
}

impl CertReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Running maximum with the point tuple where it occurs.
struct Worst {
    value: f64,
    at: Option<Vec<Point>>,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0, at: None }
    }

    fn see(&mut self, v: f64, at: &[Point]) {
        if self.at.is_none() || v > self.value {
            self.value = self.value.max(v);
            self.at = Some(at.to_vec());
        }
    }

    fn check(self, name: &'static str, pass: impl FnOnce(f64) -> bool) -> Check {
        let pass = pass(self.value);
        Check { name, pass, value: self.value, witness: if pass { None } else { self.at } }
    }
}

fn norm1(v: &DVector<C64>) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Largest norm of `ξ_x − ξ_y` over pairs with `d(x, y) <= R`.
pub(crate) fn vector_variation(
    space: &FiniteMetricSpace,
    vecs: &[DVector<C64>],
    r: u64,
    norm: impl Fn(&DVector<C64>) -> f64,
) -> (f64, Option<(Point, Point)>) {
    let mut worst = Worst::new();
    for x in 0..space.len() {
        for y in x + 1..space.len() {
            if space.d(x, y) <= r {
                worst.see(norm(&(&vecs[x] - &vecs[y])), &[x, y]);
            }
        }
    }
    (worst.value, worst.at.map(|v| (v[0], v[1])))
}

fn need_s(params: &Params) -> Result<u64> {
    params.s.ok_or_else(|| malformed("this variant needs the support radius S"))
}

fn need_delta(params: &Params) -> Result<f64> {
    match params.delta {
        Some(d) if (0.0..1.0).contains(&d) => Ok(d),
        Some(d) => Err(malformed(format!("delta must lie in [0, 1), got {d}"))),
        None => Err(malformed("this variant needs delta")),
    }
}

/// Checks every clause of the certificate's declared form.
pub fn verify_certificate(cert: &PropACertificate, space: &FiniteMetricSpace, tol: f64) -> Result<CertReport> {
    let n = space.len();
    let p = &cert.params;
    if !(p.eps > 0.0) {
        return Err(malformed(format!("eps must be positive, got {}", p.eps)));
    }
    let mut checks = Vec::new();
    match (&cert.payload, cert.variant) {
        (Payload::Sets(sets), Variant::YuSets) => {
            let s = need_s(p)?;
            if sets.len() != n {
                return Err(malformed(format!("{} sets for {n} points", sets.len())));
            }
            let mut empty = Worst::new();
            for (x, a) in sets.iter().enumerate() {
                empty.see(if a.is_empty() { 1.0 } else { 0.0 }, &[x]);
            }
            checks.push(empty.check("nonempty", |v| v == 0.0));
            let mut var = Worst::new();
            for x in 0..n {
                for y in x + 1..n {
                    if space.d(x, y) <= p.r {
                        var.see(set_ratio(&sets[x], &sets[y]), &[x, y]);
                    }
                }
            }
            checks.push(var.check("variation", |v| v < p.eps));
            let mut sup = Worst::new();
            for (x, a) in sets.iter().enumerate() {
                for &(y, _) in a {
                    sup.see(space.d(x, y) as f64, &[x, y]);
                }
            }
            checks.push(sup.check("support", |v| v <= s as f64));
        }
        (Payload::Vectors(vecs), v) if !v.is_kernel() && v != Variant::YuSets => {
            if vecs.len() != n {
                return Err(malformed(format!("{} vectors for {n} points", vecs.len())));
            }
            if v != Variant::Hilbert && vecs.iter().any(|x| x.len() != n) {
                return Err(malformed("vectors must be indexed by the points of the space"));
            }
            let l1 = v == Variant::L1;
            let norm = |x: &DVector<C64>| if l1 { norm1(x) } else { x.norm() };
            let mut unit = Worst::new();
            for (x, xi) in vecs.iter().enumerate() {
                unit.see((norm(xi) - 1.0).abs(), &[x]);
            }
            checks.push(unit.check("normalized", |d| d <= tol));
            let (worst, at) = vector_variation(space, vecs, p.r, norm);
            let pass = worst < p.eps;
            checks.push(Check {
                name: "variation",
                pass,
                value: worst,
                witness: if pass { None } else { at.map(|(a, b)| vec![a, b]) },
            });
            match v {
                Variant::L1 | Variant::L2 => {
                    let s = need_s(p)?;
                    checks.push(support_check(space, vecs, s, tol));
                }
                Variant::L2Delta => {
                    let s = need_s(p)?;
                    let delta = need_delta(p)?;
                    checks.push(ball_mass_check(space, vecs, s, delta, tol));
                }
                Variant::L2DeltaWeak => {
                    let s = need_s(p)?;
                    let delta = need_delta(p)?;
                    checks.push(ball_mass_check(space, vecs, s, delta, tol));
                    let mut ann = Worst::new();
                    for (x, xi) in vecs.iter().enumerate() {
                        let mass: f64 = (0..n)
                            .filter(|&z| space.d(x, z) > s && space.d(x, z) <= p.r + s)
                            .map(|z| xi[z].norm_sqr())
                            .sum();
                        ann.see(mass.sqrt(), &[x]);
                    }
                    checks.push(ann.check("annulus", |a| a <= p.eps));
                }
                Variant::Hilbert => {
                    let s = need_s(p)?;
                    let mut orth = Worst::new();
                    for x in 0..n {
                        for y in x + 1..n {
                            if space.d(x, y) > s {
                                orth.see(vecs[x].dotc(&vecs[y]).norm(), &[x, y]);
                            }
                        }
                    }
                    checks.push(orth.check("orthogonality", |o| o <= tol));
                }
                _ => unreachable!(),
            }
        }
        (Payload::Kernel(u), v) if v.is_kernel() => {
            if u.dim() != n {
                return Err(malformed(format!("kernel of size {} for {n} points", u.dim())));
            }
            let u = u.clone().with_tol(tol);
            let dev = (0..n)
                .flat_map(|x| (0..n).map(move |y| (x, y)))
                .map(|(x, y)| ((u.get(x, y) - u.get(y, x).conj()).norm(), x, y))
                .fold((0.0, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
            let herm = dev.0 <= tol;
            checks.push(Check {
                name: "hermitian",
                pass: herm,
                value: dev.0,
                witness: (!herm).then(|| vec![dev.1, dev.2]),
            });
            if herm {
                let psd = positive_type_check(&u)?;
                checks.push(Check {
                    name: "positive",
                    pass: psd.positive,
                    value: psd.least_eigenvalue,
                    witness: None,
                });
            }
            let var = variation_check(space, &u, p.r, p.eps)?;
            checks.push(Check {
                name: "variation",
                pass: var.holds,
                value: var.worst,
                witness: var.witness.map(|(a, b)| vec![a, b]),
            });
            if v == Variant::KernelReal {
                let mut imag = Worst::new();
                for x in 0..n {
                    for y in 0..n {
                        imag.see(u.get(x, y).im.abs(), &[x, y]);
                    }
                }
                checks.push(imag.check("real", |i| i <= tol));
                let s = need_s(p)?;
                let prop = propagation(space, &u)?;
                checks.push(Check { name: "propagation", pass: prop <= s, value: prop as f64, witness: None });
            }
        }
        _ => {
            return Err(malformed(format!("payload does not match variant {}", cert.variant)));
        }
    }
    Ok(CertReport { variant: cert.variant, checks })
}

/// `|A Δ B| / |A ∩ B|`, infinite for disjoint sets.
pub(crate) fn set_ratio(a: &[(Point, u64)], b: &[(Point, u64)]) -> f64 {
    let common = a.iter().filter(|e| b.binary_search(e).is_ok()).count();
    let sym = a.len() + b.len() - 2 * common;
    if common == 0 {
        if sym == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        sym as f64 / common as f64
    }
}

fn support_check(space: &FiniteMetricSpace, vecs: &[DVector<C64>], s: u64, tol: f64) -> Check {
    let mut sup = Worst::new();
    for (x, xi) in vecs.iter().enumerate() {
        let far = (0..space.len())
            .filter(|&z| space.d(x, z) > s && xi[z].norm() > tol)
            .map(|z| space.d(x, z))
            .max();
        sup.see(far.unwrap_or(0) as f64, &[x]);
    }
    sup.check("support", |v| v <= s as f64)
}

fn ball_mass_check(space: &FiniteMetricSpace, vecs: &[DVector<C64>], s: u64, delta: f64, tol: f64) -> Check {
    // record the defect 1 − ‖ξ_x|B_S(x)‖ so that larger is worse
    let mut mass = Worst::new();
    for (x, xi) in vecs.iter().enumerate() {
        let inside: f64 = space.ball(x, s).iter().map(|&z| xi[z].norm_sqr()).sum();
        mass.see(1.0 - inside.sqrt(), &[x]);
    }
    mass.check("ball-mass", |defect| defect <= delta + tol)
}

/// `ξ_x` = normalised indicator of `B_S(x)`, an `l2` certificate at radius
/// `R`. Without an explicit `eps` the measured variation is used, nudged up
/// so that the strict inequality holds.
pub fn ball_certificate(space: &FiniteMetricSpace, s: u64, r: u64, eps: Option<f64>) -> PropACertificate {
    let n = space.len();
    let vecs: Vec<DVector<C64>> = (0..n)
        .map(|x| {
            let ball = space.ball(x, s);
            let h = 1.0 / (ball.len() as f64).sqrt();
            let mut v = DVector::zeros(n);
            for z in ball {
                v[z] = C64::new(h, 0.0);
            }
            v
        })
        .collect();
    let eps = eps.unwrap_or_else(|| {
        let (worst, _) = vector_variation(space, &vecs, r, |v| v.norm());
        worst * (1.0 + 1e-9) + 1e-6
    });
    PropACertificate::new(
        Variant::L2,
        Params { r, eps, s: Some(s), delta: None },
        Payload::Vectors(vecs),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> DVector<C64> {
        DVector::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0))
    }

    #[test]
    fn constant_family_is_valid_for_tiny_eps() {
        let x = FiniteMetricSpace::path(5);
        let cert = PropACertificate::new(
            Variant::L2,
            Params { r: 3, eps: 1e-12, s: Some(x.diameter()), delta: None },
            Payload::Vectors(vec![uniform(5); 5]),
        );
        assert!(verify_certificate(&cert, &x, 1e-9).unwrap().passes());
    }

    #[test]
    fn deltas_fail_variation() {
        let x = FiniteMetricSpace::path(4);
        let deltas = (0..4).map(|i| DVector::from_fn(4, |j, _| C64::new((i == j) as u8 as f64, 0.0))).collect();
        let cert = PropACertificate::new(
            Variant::L2,
            Params { r: 1, eps: 1.0, s: Some(0), delta: None },
            Payload::Vectors(deltas),
        );
        let rep = verify_certificate(&cert, &x, 1e-9).unwrap();
        let var = rep.check("variation").unwrap();
        assert!(!var.pass);
        assert!((var.value - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(var.witness, Some(vec![0, 1]));
        assert!(rep.check("support").unwrap().pass);
    }

    #[test]
    fn ball_certificate_on_c12() {
        let c12 = FiniteMetricSpace::cycle(12);
        let cert = ball_certificate(&c12, 3, 1, Some(0.6));
        let rep = verify_certificate(&cert, &c12, 1e-9).unwrap();
        assert!(rep.passes(), "{rep:?}");
        let v = cert.vectors().unwrap();
        let diff = (&v[0] - &v[1]).norm_squared();
        assert!((diff - 2.0 / 7.0).abs() < 1e-12);
        // S = 0 gives point masses, S = diam the constant family
        let point = ball_certificate(&c12, 0, 1, None);
        assert_eq!(point.vectors().unwrap()[3][3], C64::new(1.0, 0.0));
        let flat = ball_certificate(&c12, 6, 1, None);
        assert!(flat.vectors().unwrap().iter().all(|v| v == &uniform(12)));
    }

    #[test]
    fn supported_certificates_verify_in_the_weaker_forms() {
        let c12 = FiniteMetricSpace::cycle(12);
        let mut cert = ball_certificate(&c12, 3, 1, Some(0.6));
        for (variant, delta) in [(Variant::L2Delta, 1e-6), (Variant::L2DeltaWeak, 0.0), (Variant::Hilbert, 0.0)] {
            cert.variant = variant;
            cert.params.delta = Some(delta);
            if variant == Variant::Hilbert {
                cert.params.s = Some(6);
            }
            let rep = verify_certificate(&cert, &c12, 1e-9).unwrap();
            assert!(rep.passes(), "{variant}: {rep:?}");
        }
    }

    #[test]
    fn yu_sets_clauses() {
        let c6 = FiniteMetricSpace::cycle(6);
        let sets: Vec<Vec<(Point, u64)>> =
            (0..6).map(|x| normalize_set(c6.ball(x, 1).into_iter().map(|p| (p, 1)).collect())).collect();
        // neighbours share 2 of 3 points: ratio 2 / 2 = 1
        let cert = PropACertificate::new(
            Variant::YuSets,
            Params { r: 1, eps: 1.5, s: Some(1), delta: None },
            Payload::Sets(sets.clone()),
        );
        let rep = verify_certificate(&cert, &c6, 1e-9).unwrap();
        assert!(rep.passes());
        assert_eq!(rep.check("variation").unwrap().value, 1.0);
        let mut bad = cert.clone();
        bad.params.s = Some(0);
        assert!(!verify_certificate(&bad, &c6, 1e-9).unwrap().check("support").unwrap().pass);
        let mut empty = sets;
        empty[2].clear();
        let cert = PropACertificate::new(Variant::YuSets, cert.params, Payload::Sets(empty));
        assert_eq!(
            verify_certificate(&cert, &c6, 1e-9).unwrap().check("nonempty").unwrap().witness,
            Some(vec![2])
        );
    }

    #[test]
    fn payload_must_match_variant() {
        let x = FiniteMetricSpace::path(2);
        let cert = PropACertificate::new(
            Variant::KernelReal,
            Params { r: 1, eps: 0.1, s: Some(1), delta: None },
            Payload::Vectors(vec![uniform(2); 2]),
        );
        assert!(matches!(verify_certificate(&cert, &x, 1e-9), Err(Error::MalformedCertificate(_))));
        let cert = PropACertificate::new(
            Variant::L2Delta,
            Params { r: 1, eps: 0.1, s: Some(1), delta: None },
            Payload::Vectors(vec![uniform(2); 2]),
        );
        assert!(matches!(verify_certificate(&cert, &x, 1e-9), Err(Error::MalformedCertificate(_))));
    }

    #[test]
    fn json_round_trips() {
        let c6 = FiniteMetricSpace::cycle(6);
        let l2 = ball_certificate(&c6, 1, 1, Some(0.9));
        let text = l2.to_json(&c6, "c6.json");
        let back = PropACertificate::from_json(&text, &c6, 1e-9).unwrap();
        assert_eq!(back.variant, Variant::L2);
        assert_eq!(back.params, l2.params);
        for (a, b) in back.vectors().unwrap().iter().zip(l2.vectors().unwrap()) {
            assert!((a - b).norm() < 1e-15);
        }

        let sets = PropACertificate::new(
            Variant::YuSets,
            Params { r: 1, eps: 1.5, s: Some(1), delta: None },
            Payload::Sets((0..6).map(|x| vec![(x, 1), ((x + 1) % 6, 2)]).map(normalize_set).collect()),
        );
        let back = PropACertificate::from_json(&sets.to_json(&c6, "c6.json"), &c6, 1e-9).unwrap();
        assert_eq!(back.sets(), sets.sets());

        let mut hil = l2.clone();
        hil.variant = Variant::Hilbert;
        let back = PropACertificate::from_json(&hil.to_json(&c6, "c6.json"), &c6, 1e-9).unwrap();
        assert_eq!(back.vectors().unwrap()[0].len(), 6);

        let k = PropACertificate::new(
            Variant::KernelRoe,
            Params { r: 1, eps: 0.5, s: None, delta: None },
            Payload::Kernel(Kernel::ones(6)),
        );
        let text = k.to_json(&c6, "c6.json");
        assert!(text.contains("\"space\":\"c6.json\""));
        let back = PropACertificate::from_json(&text, &c6, 1e-9).unwrap();
        assert_eq!(back.kernel().unwrap().entries(), Kernel::ones(6).entries());

        let missing = r#"{"variant":"l2","params":{"R":1,"eps":0.5,"S":1},"payload":{"c0":{}}}"#;
        assert!(matches!(PropACertificate::from_json(missing, &c6, 1e-9), Err(Error::MalformedCertificate(_))));
        let unknown = r#"{"variant":"l3","params":{"R":1,"eps":0.5},"payload":{}}"#;
        assert!(PropACertificate::from_json(unknown, &c6, 1e-9).is_err());
    }
}
