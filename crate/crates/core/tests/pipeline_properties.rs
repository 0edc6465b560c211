mod common;

use common::*;
use krylov_denoise::dibr::median_fill;
use krylov_denoise::filters::{FilterKind, FilterSpec};
use krylov_denoise::image::{HoleMask, ImageGray};
use krylov_denoise::pipeline::*;
use krylov_denoise::WeightParams;
use rand::seq::SliceRandom;
use rand::Rng;

fn scene(seed: u64, w: usize, h: usize, holes: f64) -> (ImageGray, ImageGray, HoleMask) {
    let mut r = rng(seed);
    let guide = random_guide(&mut r, w, h);
    let noisy = ImageGray::from_fn(w, h, |x, y| guide.get(x, y) + r.random_range(-15.0..15.0)).unwrap();
    let mask = HoleMask::new(w, h, (0..w * h).map(|_| r.random_bool(holes)).collect()).unwrap();
    (noisy, guide, mask)
}

#[test]
fn patches_are_independent_of_processing_order() {
    let (noisy, guide, mask) = scene(1, 150, 90, 0.03);
    let weights = WeightParams::default();
    for kind in FilterKind::ALL {
        let spec = FilterSpec::new(kind);
        let (full, _) = denoise(&noisy, &guide, &mask, &spec, &weights, 32).unwrap();
        let grid = PatchGrid::new(150, 90, 32).unwrap();
        let mut order: Vec<usize> = (0..grid.patches.len()).collect();
        order.shuffle(&mut rng(kind as u64));
        let mut tiles = vec![None; order.len()];
        for i in order {
            let p = grid.patches[i];
            let crop = |img: &ImageGray| img.crop(p.x0, p.y0, p.w, p.h).unwrap();
            tiles[i] = Some(
                denoise_patch(
                    &crop(&noisy),
                    &crop(&guide),
                    &mask.crop(p.x0, p.y0, p.w, p.h).unwrap(),
                    &spec,
                    &weights,
                )
                .unwrap(),
            );
        }
        let tiles: Vec<ImageGray> = tiles.into_iter().map(Option::unwrap).collect();
        let merged = median_fill(&merge_patches(&grid, &tiles).unwrap(), &mask).unwrap();
        assert_eq!(merged, full, "{kind}");
    }
}

#[test]
fn all_hole_patch_passes_input_through() {
    let (noisy, guide, _) = scene(2, 20, 20, 0.0);
    let mask = HoleMask::full(20, 20).unwrap();
    for kind in FilterKind::ALL {
        let out = denoise_patch(&noisy, &guide, &mask, &FilterSpec::new(kind), &WeightParams::default()).unwrap();
        assert_eq!(out, noisy, "{kind}");
    }
}

#[test]
fn jbf_is_normalized_neighbour_average() {
    let (noisy, guide, mask) = scene(3, 16, 16, 0.05);
    let sigma_r = 10.0;
    let out = denoise_patch(
        &noisy,
        &guide,
        &mask,
        &FilterSpec::new(FilterKind::Jbf),
        &WeightParams::default(),
    )
    .unwrap();
    for y in 0..16usize {
        for x in 0..16usize {
            if mask.is_hole(x, y) {
                assert_eq!(out.get(x, y), noisy.get(x, y));
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if !(0..16).contains(&nx) || !(0..16).contains(&ny) || mask.is_hole(nx as usize, ny as usize) {
                    continue;
                }
                let d = guide.get(x, y) - guide.get(nx as usize, ny as usize);
                let wgt = (-d * d / (2.0 * sigma_r * sigma_r)).exp();
                num += wgt * noisy.get(nx as usize, ny as usize);
                den += wgt;
            }
            let want = if den > 0.0 { num / den } else { noisy.get(x, y) };
            assert!((out.get(x, y) - want).abs() <= 1e-9 * want.abs().max(1.0), "({x},{y})");
        }
    }
}

#[test]
fn thread_count_never_changes_output() {
    let (clean, guide, mask) = scene(4, 130, 70, 0.02);
    let noise = NoiseSpec { sigma: 10.0, seed: 99 };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let noisy = add_gaussian_noise(&clean, &noise).unwrap();
                let (out, mut rep) = denoise(
                    &noisy,
                    &guide,
                    &mask,
                    &FilterSpec::new(FilterKind::KCg),
                    &WeightParams::default(),
                    64,
                )
                .unwrap();
                rep.noise = Some(noise);
                rep.evaluate(&clean, &noisy, &out).unwrap();
                (out, rep.to_csv(), rep.to_text())
            })
    };
    let a = run(1);
    for t in [2, 3, 8] {
        assert_eq!(run(t), a);
    }
}

#[test]
fn noise_statistics() {
    let img = ImageGray::filled(512, 512, 128.0).unwrap();
    let noisy = add_gaussian_noise(&img, &NoiseSpec { sigma: 10.0, seed: 7 }).unwrap();
    let n = noisy.len() as f64;
    let mean = noisy.samples().iter().sum::<f64>() / n;
    let var = noisy.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var.sqrt() - 10.0).abs() <= 0.2, "std {}", var.sqrt());
    assert!((mean - 128.0).abs() <= 0.1);
    assert_eq!(
        add_gaussian_noise(&img, &NoiseSpec { sigma: 10.0, seed: 7 }).unwrap(),
        noisy
    );
    assert_ne!(
        add_gaussian_noise(&img, &NoiseSpec { sigma: 10.0, seed: 8 }).unwrap(),
        noisy
    );
}

#[test]
fn psnr_is_symmetric() {
    let mut r = rng(5);
    for _ in 0..20 {
        let a = ImageGray::from_fn(9, 7, |_, _| r.random_range(0.0..255.0)).unwrap();
        let b = ImageGray::from_fn(9, 7, |_, _| r.random_range(0.0..255.0)).unwrap();
        assert_eq!(psnr(&a, &b, 255.0).unwrap(), psnr(&b, &a, 255.0).unwrap());
    }
}

#[test]
fn split_merge_round_trip() {
    let (img, _, _) = scene(6, 100, 70, 0.0);
    let (grid, tiles) = split_patches(&img, 64).unwrap();
    let dims: Vec<(usize, usize)> = grid.patches.iter().map(|p| (p.w, p.h)).collect();
    assert_eq!(dims, vec![(64, 64), (36, 64), (64, 6), (36, 6)]);
    assert_eq!(merge_patches(&grid, &tiles).unwrap(), img);
    assert!(split_patches(&img, 7).is_err());
}
