mod common;

use common::{random_tensor, rng};
use isin::colormap::{build_colormap, one_hot, render_s};
use isin::tensor::Tensor;
use rand::Rng;

/// Independent greedy scan in unit-cube coordinates: the chosen set starts
/// as {black}; every round recomputes each grid point's distance to the
/// whole chosen set and keeps the first strict maximum.
fn oracle_palette(k: usize) -> Vec<[f64; 3]> {
    let grid: Vec<[f64; 3]> = (0..17)
        .flat_map(|r| (0..17).flat_map(move |g| (0..17).map(move |b| [r as f64 / 16.0, g as f64 / 16.0, b as f64 / 16.0])))
        .collect();
    let mut chosen = vec![[0.0; 3]];
    for _ in 0..k {
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for p in &grid {
            let d = chosen.iter().map(|c| dist(p, c)).fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, *p);
            }
        }
        chosen.push(best.1);
    }
    chosen.remove(0);
    chosen
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn min_pairwise(rows: &[[f64; 3]]) -> f64 {
    let mut all = rows.to_vec();
    all.push([0.0; 3]);
    let mut m = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            m = m.min(dist(&all[i], &all[j]));
        }
    }
    m
}

#[test]
fn single_part_is_white() {
    assert_eq!(build_colormap(1).unwrap().rows(), &[[1.0, 1.0, 1.0]]);
}

#[test]
fn second_color_maximizes_distance_to_black_and_white() {
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for r in 0..17 {
        for g in 0..17 {
            for b in 0..17 {
                let p = [r as f64 / 16.0, g as f64 / 16.0, b as f64 / 16.0];
                let d = dist(&p, &[0.0; 3]).min(dist(&p, &[1.0; 3]));
                if d > best.0 {
                    best = (d, p);
                }
            }
        }
    }
    assert_eq!(build_colormap(2).unwrap().rows()[1], best.1);
}

#[test]
fn palettes_match_greedy_oracle() {
    for k in [1, 2, 3, 4, 5, 8, 12] {
        let cmap = build_colormap(k).unwrap();
        let oracle = oracle_palette(k);
        assert_eq!(cmap.rows(), &oracle[..], "k={k}");
        assert_eq!(min_pairwise(cmap.rows()), min_pairwise(&oracle));
        assert!(min_pairwise(cmap.rows()) > 0.0);
    }
}

#[test]
fn out_of_range_part_counts_fail() {
    assert!(build_colormap(0).is_err());
    assert!(build_colormap(65).is_err());
    assert!(build_colormap(64).is_ok());
}

fn random_volume(seed: u64, h: usize, w: usize, c: usize) -> Tensor<f64> {
    let mut r = rng(seed);
    let raw = random_tensor(&mut r, &[h, w, c]);
    let mut data = Vec::with_capacity(raw.len());
    for px in raw.data().chunks(c) {
        let e: Vec<f64> = px.iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        data.extend(e.iter().map(|v| v / s));
    }
    Tensor::new(&[h, w, c], data).unwrap()
}

#[test]
fn rendering_is_linear() {
    let cmap = build_colormap(3).unwrap();
    for seed in 0..5 {
        let p = random_volume(seed, 3, 4, 4);
        let q = random_volume(seed + 100, 3, 4, 4);
        let alpha = rng(seed).gen_range(0.0..1.0);
        let mix = Tensor::new(
            &[3, 4, 4],
            p.data().iter().zip(q.data()).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect(),
        )
        .unwrap();
        let (rp, rq, rm) = (
            render_s(&p, &cmap).unwrap(),
            render_s(&q, &cmap).unwrap(),
            render_s(&mix, &cmap).unwrap(),
        );
        for ((a, b), m) in rp.data().iter().zip(rq.data()).zip(rm.data()) {
            assert!((alpha * a + (1.0 - alpha) * b - m).abs() < 1e-12);
        }
    }
}

#[test]
fn hard_assignments_render_to_distinct_colors() {
    let k = 6;
    let cmap = build_colormap(k).unwrap();
    let labels: Vec<u8> = (0..=k as u8).collect();
    let s = render_s(&one_hot::<f64>(&labels, 1, k + 1, k + 1), &cmap).unwrap();
    let px: Vec<&[f64]> = s.data().chunks(3).collect();
    assert_eq!(px[0], &[0.0, 0.0, 0.0]);
    for i in 0..px.len() {
        for j in i + 1..px.len() {
            assert_ne!(px[i], px[j]);
        }
    }
}
