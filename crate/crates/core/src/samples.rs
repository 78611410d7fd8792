//! Seeded random instances for tests, the acceptance suite and the CLI.

use nalgebra::DMatrix;
use nalgebra::Complex;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::mspace::{FiniteMetricSpace, Point};

/// Shortest-path metric of a complete graph with integer weights in
/// `1..=max_dist`, so every distance lies in `1..=max_dist`.
pub fn random_space<R: Rng>(rng: &mut R, n: usize, max_dist: u64) -> FiniteMetricSpace {
    assert!(n > 0 && max_dist > 0);
    let mut w = vec![vec![None; n]; n];
    for x in 0..n {
        for y in x + 1..n {
            let d = rng.gen_range(1..=max_dist);
            w[x][y] = Some(d);
            w[y][x] = Some(d);
        }
    }
    FiniteMetricSpace::from_weighted_graph((0..n).map(|i| format!("v{i}")).collect(), &w, 1)
        .expect("complete graphs are connected")
}

/// Gram matrix of `rank` random complex vectors, scaled to unit diagonal
/// average.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize) -> DMatrix<Complex<f64>> {
    let v = DMatrix::from_fn(rank.max(1), n, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let g = v.adjoint() * v;
    let trace: f64 = (0..n).map(|i| g[(i, i)].re).sum();
    g / Complex::from(trace / n as f64)
}

/// A surjection from a domain of at least `targets` points onto
/// `0..targets`, each fibre of size `1..=max_mult`, in shuffled order.
pub fn random_surjection<R: Rng>(rng: &mut R, targets: usize, max_mult: usize) -> Vec<Point> {
    let mut f: Vec<Point> = (0..targets)
        .flat_map(|y| std::iter::repeat(y).take(rng.gen_range(1..=max_mult)))
        .collect();
    f.shuffle(rng);
    f
}

/// An injection of `0..n` into `0..m`.
pub fn random_injection<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    assert!(n <= m);
    rand::seq::index::sample(rng, m, n).into_vec()
}
