//! Conversions between certificate forms. Each one checks its input, builds
//! the new family, and measures the quantitative bound it relies on so that
//! the bound is observed on the instance rather than assumed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{
    norm1, set_ratio, vector_variation, verify_certificate, Params, Payload, PropACertificate, Variant,
};
use crate::error::{Error, Result};
use crate::mspace::FiniteMetricSpace;
use crate::roe::{operator_norm, psd_sqrt, Kernel, C64};

/// One measured quantity against the bound the conversion promises.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn below(name: &'static str, measured: f64, bound: f64) -> Self {
        Self { name, measured, bound, holds: measured < bound }
    }

    fn at_most(name: &'static str, measured: f64, bound: f64) -> Self {
        Self { name, measured, bound, holds: measured <= bound }
    }

    fn at_least(name: &'static str, measured: f64, bound: f64) -> Self {
        Self { name, measured, bound, holds: measured >= bound }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub cert: PropACertificate,
    pub checks: Vec<BoundCheck>,
}

impl Conversion {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn require(cert: &PropACertificate, space: &FiniteMetricSpace, tol: f64, allowed: &[Variant]) -> Result<()> {
    if !allowed.contains(&cert.variant) {
        let names: Vec<&str> = allowed.iter().map(|v| v.name()).collect();
        return Err(Error::Precondition(format!(
            "expected a {} certificate, got {}",
            names.join(" or "),
            cert.variant
        )));
    }
    let rep = verify_certificate(cert, space, tol)?;
    if !rep.passes() {
        let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        return Err(Error::Precondition(format!(
            "input {} certificate fails: {}",
            cert.variant,
            failed.join(", ")
        )));
    }
    Ok(())
}

fn pairs_within(space: &FiniteMetricSpace, r: u64) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n = space.len();
    (0..n).flat_map(move |x| (x + 1..n).map(move |y| (x, y))).filter(move |&(x, y)| space.d(x, y) <= r)
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// `ξ_x(y) = |A_x ∩ ({y} × N)| / |A_x|`, an `l1` certificate with `2 eps`.
/// Per pair `‖ξ_x − ξ_y‖_1 <= 2 |A_x Δ A_y| / max(|A_x|, |A_y|)` is measured.
pub fn yusets_to_l1(cert: &PropACertificate, space: &FiniteMetricSpace, tol: f64) -> Result<Conversion> {
    require(cert, space, tol, &[Variant::YuSets])?;
    let sets = cert.sets().expect("verified payload");
    let n = space.len();
    let vecs: Vec<DVector<C64>> = sets
        .iter()
        .map(|a| {
            let mut v = DVector::zeros(n);
            for &(y, _) in a {
                v[y] += real(1.0);
            }
            v / real(a.len() as f64)
        })
        .collect();
    let mut excess = f64::NEG_INFINITY;
    for (x, y) in pairs_within(space, cert.params.r) {
        let (a, b) = (&sets[x], &sets[y]);
        let common = a.iter().filter(|e| b.binary_search(e).is_ok()).count();
        let sym = (a.len() + b.len() - 2 * common) as f64;
        let rhs = 2.0 * sym / a.len().max(b.len()) as f64;
        excess = excess.max(norm1(&(&vecs[x] - &vecs[y])) - rhs);
        debug_assert!(set_ratio(a, b) >= rhs / 2.0);
    }
    let eps = 2.0 * cert.params.eps;
    let (worst, _) = vector_variation(space, &vecs, cert.params.r, norm1);
    let checks = vec![
        BoundCheck::at_most("pairwise", excess.max(0.0), tol),
        BoundCheck::below("variation", worst, eps),
    ];
    let params = Params { eps, delta: None, ..cert.params };
    Ok(Conversion { cert: PropACertificate::new(Variant::L1, params, Payload::Vectors(vecs)), checks })
}

/// `η_x = sqrt(ξ_x)` entrywise, an `l2` certificate with `sqrt(eps)`, using
/// `‖η_x − η_y‖_2^2 <= ‖ξ_x − ξ_y‖_1`.
pub fn l1_to_l2(cert: &PropACertificate, space: &FiniteMetricSpace, tol: f64) -> Result<Conversion> {
    require(cert, space, tol, &[Variant::L1])?;
    let vecs = cert.vectors().expect("verified payload");
    if vecs.iter().flatten().any(|z| z.im.abs() > tol || z.re < -tol) {
        return Err(Error::Precondition("l1 vectors must be nonnegative reals".into()));
    }
    let roots: Vec<DVector<C64>> =
        vecs.iter().map(|v| v.map(|z| real(z.re.max(0.0).sqrt()))).collect();
    let mut excess = f64::NEG_INFINITY;
    for (x, y) in pairs_within(space, cert.params.r) {
        let lhs = (&roots[x] - &roots[y]).norm_squared();
        excess = excess.max(lhs - norm1(&(&vecs[x] - &vecs[y])));
    }
    let eps = cert.params.eps.sqrt();
    let (worst, _) = vector_variation(space, &roots, cert.params.r, |v| v.norm());
    let checks = vec![
        BoundCheck::at_most("pairwise", excess.max(0.0), tol),
        BoundCheck::below("variation", worst, eps),
    ];
    let params = Params { eps, delta: None, ..cert.params };
    Ok(Conversion { cert: PropACertificate::new(Variant::L2, params, Payload::Vectors(roots)), checks })
}

/// Restricts each `ξ_x` of a weak certificate to `B_{R+S}(x)` and normalises,
/// giving an `l2` certificate with support `R + S` and variation
/// `6 eps / (1 − delta)`.
pub fn truncate_normalize(cert: &PropACertificate, space: &FiniteMetricSpace, tol: f64) -> Result<Conversion> {
    require(cert, space, tol, &[Variant::L2DeltaWeak])?;
    let p = cert.params;
    let (s, delta) = (p.s.expect("verified"), p.delta.expect("verified"));
    let reach = p.r + s;
    let vecs = cert.vectors().expect("verified payload");
    let mut least = f64::INFINITY;
    let cut: Vec<DVector<C64>> = vecs
        .iter()
        .enumerate()
        .map(|(x, xi)| {
            let zeta = DVector::from_fn(xi.len(), |z, _| if space.d(x, z) <= reach { xi[z] } else { real(0.0) });
            let norm = zeta.norm();
            least = least.min(norm);
            zeta / real(norm)
        })
        .collect();
    let eps = 6.0 * p.eps / (1.0 - delta);
    let (worst, _) = vector_variation(space, &cut, p.r, |v| v.norm());
    let checks = vec![
        BoundCheck::at_least("mass", least, 1.0 - delta),
        BoundCheck::below("variation", worst, eps),
    ];
    let params = Params { r: p.r, eps, s: Some(reach), delta: None };
    Ok(Conversion { cert: PropACertificate::new(Variant::L2, params, Payload::Vectors(cut)), checks })
}

/// `u(x, y) = Re⟨ξ_x, ξ_y⟩`, a real kernel with variation `eps^2 / 2` via
/// `‖ξ_x − ξ_y‖^2 = 2 − 2u(x, y)`. Propagation is `2S` for supported
/// vectors and `S` for the orthogonal form.
pub fn vectors_to_kernel(cert: &PropACertificate, space: &FiniteMetricSpace, tol: f64) -> Result<Conversion> {
    require(cert, space, tol, &[Variant::L2, Variant::Hilbert])?;
    let vecs = cert.vectors().expect("verified payload");
    let n = space.len();
    let u = DMatrix::from_fn(n, n, |x, y| real(vecs[x].dotc(&vecs[y]).re));
    let mut residual = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            let lhs = (&vecs[x] - &vecs[y]).norm_squared();
            residual = residual.max((lhs - (2.0 - 2.0 * u[(x, y)].re)).abs());
        }
    }
    let p = cert.params;
    let s = p.s.expect("verified");
    let s_out = if cert.variant == Variant::Hilbert { s } else { 2 * s };
    let eps = p.eps * p.eps / 2.0;
    let kernel = Kernel::new(u, tol)?;
    let worst = pairs_within(space, p.r)
        .map(|(x, y)| (kernel.get(x, y) - real(1.0)).norm())
        .fold(0.0, f64::max);
    let checks = vec![
        BoundCheck::at_most("identity", residual, 8.0 * tol.max(f64::EPSILON)),
        BoundCheck::below("variation", worst, eps),
    ];
    let params = Params { r: p.r, eps, s: Some(s_out), delta: None };
    Ok(Conversion { cert: PropACertificate::new(Variant::KernelReal, params, Payload::Kernel(kernel)), checks })
}

/// Builds vectors from a positive kernel: `v = sqrt(u)`, `w` is `v` with
/// entries beyond `s_target` zeroed, `ζ_x = w(·, x)` and `η_x = ζ_x / ‖ζ_x‖`.
///
/// With `eps' = max(eps, ‖u − v²‖ + ‖v² − w²‖)` the result is an `l2`
/// certificate at radius `R`, support `s_target` and variation
/// `2 sqrt(6 eps' / (1 − 2 eps'))`; `‖ζ_x‖^2 >= 1 − 2 eps'` is measured.
pub fn kernel_to_vectors(
    cert: &PropACertificate,
    space: &FiniteMetricSpace,
    s_target: u64,
    tol: f64,
) -> Result<Conversion> {
    if cert.params.eps >= 0.5 {
        return Err(Error::Precondition(format!("eps must be below 1/2, got {}", cert.params.eps)));
    }
    require(cert, space, tol, &[Variant::KernelReal, Variant::KernelRoe])?;
    let u = cert.kernel().expect("verified payload").clone().with_tol(tol);
    let n = space.len();
    let v = psd_sqrt(&u)?;
    let mut w = DMatrix::from_fn(n, n, |x, y| if space.d(x, y) <= s_target { v[(x, y)] } else { real(0.0) });
    w = (&w + w.adjoint()) * real(0.5);
    let v2 = &v * &v;
    let w2 = &w * &w;
    let residue = operator_norm(&(u.entries() - &v2));
    let gap = operator_norm(&(&v2 - &w2));
    let eps_prime = cert.params.eps.max(residue + gap);
    if eps_prime >= 0.5 {
        return Err(Error::TooShallow(format!(
            "S = {s_target} leaves ‖v² − w²‖ = {gap:.6} (clamping residue {residue:.3e}); it must stay below 1/2"
        )));
    }
    let mut least = f64::INFINITY;
    let etas: Vec<DVector<C64>> = (0..n)
        .map(|x| {
            let zeta: DVector<C64> = w.column(x).into_owned();
            let norm = zeta.norm();
            least = least.min(norm * norm);
            zeta / real(norm)
        })
        .collect();
    let eps = 2.0 * (6.0 * eps_prime / (1.0 - 2.0 * eps_prime)).sqrt();
    let (worst, _) = vector_variation(space, &etas, cert.params.r, |x| x.norm());
    let checks = vec![
        BoundCheck::at_most("truncation", gap, 0.5),
        BoundCheck::at_most("clamping", residue, tol.max(f64::EPSILON) * (n.max(1) as f64)),
        BoundCheck::at_least("mass", least, 1.0 - 2.0 * eps_prime),
        BoundCheck::below("variation", worst, eps),
    ];
    let params = Params { r: cert.params.r, eps, s: Some(s_target), delta: None };
    Ok(Conversion { cert: PropACertificate::new(Variant::L2, params, Payload::Vectors(etas)), checks })
}

#[cfg(test)]
mod tests {
    use super::super::ball_certificate;
    use super::*;
    use crate::mspace::Point;
    use crate::samples;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-9;

    fn ball_sets(space: &FiniteMetricSpace, s: u64, r: u64, eps: f64) -> PropACertificate {
        let sets = (0..space.len()).map(|x| space.ball(x, s).into_iter().map(|p| (p, 0)).collect()).collect();
        PropACertificate::new(Variant::YuSets, Params { r, eps, s: Some(s), delta: None }, Payload::Sets(sets))
    }

    #[test]
    fn yu_sets_on_c6() {
        let c6 = FiniteMetricSpace::cycle(6);
        let conv = yusets_to_l1(&ball_sets(&c6, 1, 1, 1.5), &c6, TOL).unwrap();
        assert!(conv.passes(), "{:?}", conv.checks);
        // neighbouring balls of size 3 share 2 points: ‖ξ_x − ξ_y‖_1 = 2/3
        assert!((conv.check("variation").unwrap().measured - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(conv.cert.params.eps, 3.0);
        let l2 = l1_to_l2(&conv.cert, &c6, TOL).unwrap();
        assert!(l2.passes());
        // ‖η_x − η_y‖^2 = 2/3 as well, the bound is attained
        let v = l2.cert.vectors().unwrap();
        assert!(((&v[0] - &v[1]).norm_squared() - 2.0 / 3.0).abs() < 1e-12);
        assert!(verify_certificate(&l2.cert, &c6, TOL).unwrap().passes());
    }

    #[test]
    fn yu_sets_with_multiplicity() {
        let x = FiniteMetricSpace::path(3);
        let sets: Vec<Vec<(Point, u64)>> = vec![
            vec![(0, 0), (0, 1), (1, 0)],
            vec![(0, 1), (1, 0), (2, 0)],
            vec![(1, 0), (2, 0), (2, 1)],
        ];
        let cert = PropACertificate::new(
            Variant::YuSets,
            Params { r: 1, eps: 2.5, s: Some(1), delta: None },
            Payload::Sets(sets),
        );
        let conv = yusets_to_l1(&cert, &x, TOL).unwrap();
        assert!(conv.passes());
        assert!((conv.cert.vectors().unwrap()[0][0].re - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ball_pipeline_on_c12() {
        let c12 = FiniteMetricSpace::cycle(12);
        let l2 = ball_certificate(&c12, 3, 1, Some(0.6));
        let k = vectors_to_kernel(&l2, &c12, TOL).unwrap();
        assert!(k.passes(), "{:?}", k.checks);
        let u = k.cert.kernel().unwrap();
        assert!((u.get(0, 1).re - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(k.cert.params.s, Some(6));
        assert!((k.cert.params.eps - 0.18).abs() < 1e-12);
        assert!(verify_certificate(&k.cert, &c12, TOL).unwrap().passes());
        let back = kernel_to_vectors(&k.cert, &c12, 6, TOL).unwrap();
        assert!(back.passes(), "{:?}", back.checks);
        assert!(verify_certificate(&back.cert, &c12, TOL).unwrap().passes());
    }

    #[test]
    fn hilbert_kernel_keeps_propagation() {
        let c12 = FiniteMetricSpace::cycle(12);
        let mut cert = ball_certificate(&c12, 2, 1, Some(0.8));
        cert.variant = Variant::Hilbert;
        cert.params.s = Some(4);
        let k = vectors_to_kernel(&cert, &c12, TOL).unwrap();
        assert_eq!(k.cert.params.s, Some(4));
        assert!(verify_certificate(&k.cert, &c12, TOL).unwrap().passes());
    }

    #[test]
    fn weak_certificate_truncation() {
        // ball vectors with a small tail spread over the whole cycle
        let c20 = FiniteMetricSpace::cycle(20);
        let base = ball_certificate(&c20, 3, 1, None);
        let tail = 0.05;
        let vecs: Vec<DVector<C64>> = base
            .vectors()
            .unwrap()
            .iter()
            .map(|v| {
                let w = v.map(|z| real(z.re + tail));
                let n = w.norm();
                w / real(n)
            })
            .collect();
        let (var, _) = vector_variation(&c20, &vecs, 1, |v| v.norm());
        let cert = PropACertificate::new(
            Variant::L2DeltaWeak,
            Params { r: 1, eps: var.max(0.2) + 1e-6, s: Some(3), delta: Some(0.2) },
            Payload::Vectors(vecs),
        );
        let rep = verify_certificate(&cert, &c20, TOL).unwrap();
        assert!(rep.passes(), "{rep:?}");
        let conv = truncate_normalize(&cert, &c20, TOL).unwrap();
        assert!(conv.passes(), "{:?}", conv.checks);
        assert_eq!(conv.cert.params.s, Some(4));
        assert!(verify_certificate(&conv.cert, &c20, TOL).unwrap().passes());
    }

    fn gaussian_profile(space: &FiniteMetricSpace, sigma: f64) -> Vec<DVector<C64>> {
        let n = space.len();
        (0..n)
            .map(|x| {
                let v = DVector::from_fn(n, |z, _| {
                    let d = space.d(x, z) as f64;
                    real((-d * d / (2.0 * sigma * sigma)).exp())
                });
                let norm = v.norm();
                v / real(norm)
            })
            .collect()
    }

    #[test]
    fn gaussian_profile_on_c20() {
        let c20 = FiniteMetricSpace::cycle(20);
        let vecs = gaussian_profile(&c20, 2.0);
        let (var, _) = vector_variation(&c20, &vecs, 1, |v| v.norm());
        let annulus = (0..20)
            .map(|x| (0..20).filter(|&z| c20.d(x, z) == 3).map(|z| vecs[x][z].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let eps = var.max(annulus) + 1e-6;
        let cert = PropACertificate::new(
            Variant::L2DeltaWeak,
            Params { r: 1, eps, s: Some(2), delta: Some(0.5) },
            Payload::Vectors(vecs),
        );
        assert!(verify_certificate(&cert, &c20, TOL).unwrap().passes());
        let conv = truncate_normalize(&cert, &c20, TOL).unwrap();
        assert!(conv.passes(), "{:?}", conv.checks);
        assert!((conv.cert.params.eps - 12.0 * eps).abs() < 1e-12);
        assert!(verify_certificate(&conv.cert, &c20, TOL).unwrap().passes());

        // the Gram kernel of the same vectors goes back through the square root
        let mut l2 = cert.clone();
        l2.variant = Variant::L2;
        l2.params = Params { r: 1, eps, s: Some(10), delta: None };
        let k = vectors_to_kernel(&l2, &c20, TOL).unwrap();
        assert!(k.passes());
        let back = kernel_to_vectors(&k.cert, &c20, 10, TOL).unwrap();
        assert!(back.passes(), "{:?}", back.checks);
        assert!(verify_certificate(&back.cert, &c20, TOL).unwrap().passes());
        // no room at all: w is diagonal and far from v
        assert!(matches!(kernel_to_vectors(&k.cert, &c20, 0, TOL), Err(Error::TooShallow(_))));
    }

    #[test]
    fn trivial_kernels() {
        let x = FiniteMetricSpace::path(4);
        let id = PropACertificate::new(
            Variant::KernelRoe,
            Params { r: 0, eps: 0.1, s: None, delta: None },
            Payload::Kernel(Kernel::identity(4)),
        );
        let conv = kernel_to_vectors(&id, &x, 0, TOL).unwrap();
        for (p, v) in conv.cert.vectors().unwrap().iter().enumerate() {
            assert!((v[p] - real(1.0)).norm() < 1e-12 && (v.norm() - 1.0).abs() < 1e-12);
        }
        let ones = PropACertificate::new(
            Variant::KernelRoe,
            Params { r: 3, eps: 0.1, s: None, delta: None },
            Payload::Kernel(Kernel::ones(4)),
        );
        let conv = kernel_to_vectors(&ones, &x, 3, TOL).unwrap();
        assert!(conv.passes());
        assert!(conv.check("truncation").unwrap().measured < 1e-12);
        for v in conv.cert.vectors().unwrap() {
            assert!(v.iter().all(|z| (z.re - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn singleton_sets_give_point_masses() {
        let x = FiniteMetricSpace::path(3);
        let sets = (0..3).map(|p| vec![(p, 1)]).collect();
        let cert = PropACertificate::new(
            Variant::YuSets,
            Params { r: 0, eps: 0.5, s: Some(0), delta: None },
            Payload::Sets(sets),
        );
        let conv = yusets_to_l1(&cert, &x, TOL).unwrap();
        for (p, v) in conv.cert.vectors().unwrap().iter().enumerate() {
            assert_eq!(v[p], real(1.0));
        }
        let l2 = l1_to_l2(&conv.cert, &x, TOL).unwrap();
        assert_eq!(l2.cert.vectors(), conv.cert.vectors());
        let k = vectors_to_kernel(&l2.cert, &x, TOL).unwrap();
        assert_eq!(k.cert.kernel().unwrap().entries(), Kernel::identity(3).entries());
    }

    #[test]
    fn preconditions() {
        let c6 = FiniteMetricSpace::cycle(6);
        let l2 = ball_certificate(&c6, 1, 1, Some(0.9));
        assert!(matches!(yusets_to_l1(&l2, &c6, TOL), Err(Error::Precondition(_))));
        assert!(matches!(truncate_normalize(&l2, &c6, TOL), Err(Error::Precondition(_))));
        let too_small = ball_certificate(&c6, 1, 1, Some(0.1));
        assert!(matches!(vectors_to_kernel(&too_small, &c6, TOL), Err(Error::Precondition(_))));
        let k = PropACertificate::new(
            Variant::KernelReal,
            Params { r: 1, eps: 0.7, s: Some(3), delta: None },
            Payload::Kernel(Kernel::ones(6)),
        );
        assert!(matches!(kernel_to_vectors(&k, &c6, 3, TOL), Err(Error::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_kernels_round_trip(seed in any::<u64>(), n in 2usize..9, rank in 1usize..4, t in 0.0f64..0.2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let space = samples::random_space(&mut rng, n, 4);
            // unit diagonal, then pulled towards the all-ones kernel
            let g = samples::random_psd(&mut rng, n, rank);
            let d: Vec<f64> = (0..n).map(|i| g[(i, i)].re.max(1e-12).sqrt()).collect();
            let u = Kernel::from_fn(n, |x, y| real(1.0 - t) + g[(x, y)] * real(t / (d[x] * d[y])));
            let worst = (0..n)
                .flat_map(|x| (0..n).map(move |y| (x, y)))
                .filter(|&(x, y)| space.d(x, y) <= 1)
                .map(|(x, y)| (u.get(x, y) - real(1.0)).norm())
                .fold(0.0, f64::max);
            let cert = PropACertificate::new(
                Variant::KernelRoe,
                Params { r: 1, eps: worst + 1e-6, s: None, delta: None },
                Payload::Kernel(u),
            );
            prop_assume!(verify_certificate(&cert, &space, TOL).unwrap().passes());
            match kernel_to_vectors(&cert, &space, space.diameter(), TOL) {
                Ok(conv) => prop_assert!(conv.passes(), "{:?}", conv.checks),
                Err(Error::TooShallow(_)) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn ball_vectors_satisfy_identity(n in 3usize..30, s in 0u64..5) {
            let c = FiniteMetricSpace::cycle(n);
            let cert = ball_certificate(&c, s, 1, None);
            let conv = vectors_to_kernel(&cert, &c, TOL).unwrap();
            prop_assert!(conv.passes(), "{:?}", conv.checks);
        }
    }
}
