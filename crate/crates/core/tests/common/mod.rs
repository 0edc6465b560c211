#![allow(dead_code)]

use krylov_denoise::graph::{build_graph, normalized_laplacian, NormalizedLaplacian, PixelGraph, WeightParams};
use krylov_denoise::image::{HoleMask, ImageGray};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random guide image with a few flat regions so weights span (0, 1].
pub fn random_guide(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageGray {
    let levels: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..255.0)).collect();
    ImageGray::from_fn(w, h, |x, y| {
        let region = (x * 4 / w + 2 * (y * 2 / h)) % 4;
        levels[region] + rng.random_range(-12.0..12.0)
    })
    .unwrap()
}

pub fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_patch(
    seed: u64,
    w: usize,
    h: usize,
    hole_fraction: f64,
) -> (ImageGray, HoleMask, PixelGraph, NormalizedLaplacian) {
    let mut r = rng(seed);
    let guide = random_guide(&mut r, w, h);
    let mask = HoleMask::new(w, h, (0..w * h).map(|_| r.random_bool(hole_fraction)).collect()).unwrap();
    let g = build_graph(&guide, &mask, &WeightParams::default()).unwrap();
    let l = normalized_laplacian(&g);
    (guide, mask, g, l)
}

/// Connected graph on `n` nodes: a random spanning tree plus extra edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> PixelGraph {
    let mut edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for j in 1..n {
        let i = rng.random_range(0..j);
        seen.insert((i, j));
        edges.push((i, j, rng.random_range(0.1..1.0)));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if i != j && seen.insert((i, j)) {
            edges.push((i, j, rng.random_range(0.1..1.0)));
        }
    }
    PixelGraph::from_edges(n, edges).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `|a - b|_inf / max(|b|_inf, tiny)`.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    max_abs_diff(a, b) / inf_norm(b).max(f64::MIN_POSITIVE)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Chebyshev polynomial of the first kind by the three-term recurrence.
pub fn chebyshev_t(k: usize, z: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, z);
    if k == 0 {
        return t0;
    }
    for _ in 1..k {
        let t2 = 2.0 * z * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}

/// Minimizer of `x^T L x - 2 x^T f` over `x0 + span{r0, ..., L^{k-1} r0}`,
/// computed with an explicitly orthonormalized basis and a dense solve.
pub fn krylov_brute_force(l: &DMatrix<f64>, x0: &[f64], f: &[f64], k: usize) -> Vec<f64> {
    let n = x0.len();
    let x0 = DVector::from_column_slice(x0);
    let f = DVector::from_column_slice(f);
    let r0 = &f - l * &x0;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut v = r0.clone();
    for _ in 0..k {
        let mut q = v.clone();
        for _ in 0..2 {
            for b in &basis {
                q -= b * b.dot(&q);
            }
        }
        let norm = q.norm();
        if norm <= 1e-12 * v.norm().max(1e-300) {
            break;
        }
        q /= norm;
        v = l * &q;
        basis.push(q);
    }
    if basis.is_empty() {
        return x0.as_slice().to_vec();
    }
    let q = DMatrix::from_columns(&basis);
    let proj = q.transpose() * l * &q;
    let rhs = q.transpose() * &r0;
    let c = proj.lu().solve(&rhs).expect("projected operator is nonsingular");
    let x = x0 + q * c;
    assert_eq!(x.len(), n);
    x.as_slice().to_vec()
}
