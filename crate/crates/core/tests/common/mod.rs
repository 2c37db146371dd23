//! Helpers shared by the integration tests: random instances and
//! brute-force oracles written independently of the library code paths.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tumor_saliency::anatomy::{nc_adjacency, Depth};
use tumor_saliency::eval::PrecisionRecall;
use tumor_saliency::imaging::{BinaryMask, GrayImage, ScalarMap};
use tumor_saliency::maps::SimilarityModel;
use tumor_saliency::solver::SaliencyProblem;
use tumor_saliency::superpixel::{build_region_graph, renumber, split_connected, RegionSet};

/// Voronoi partition of a 12x12 image into 2..=`max_regions` connected
/// regions with noisy intensities.
pub fn random_regions(seed: u64, max_regions: usize) -> RegionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (12usize, 12usize);
    loop {
        let k = rng.random_range(2..=max_regions);
        let sites: Vec<(f64, f64, f64)> = (0..k)
            .map(|_| (rng.random_range(0.0..12.0), rng.random_range(0.0..12.0), rng.random_range(0.0..1.0)))
            .collect();
        let raw: Vec<usize> = (0..w * h)
            .map(|p| {
                let (x, y) = ((p % w) as f64, (p / w) as f64);
                let d = |s: &(f64, f64, f64)| (s.0 - x).powi(2) + (s.1 - y).powi(2);
                (0..k).min_by(|&a, &b| d(&sites[a]).total_cmp(&d(&sites[b]))).unwrap()
            })
            .collect();
        let labels = renumber(&split_connected(&raw, w, h));
        let n = labels.iter().max().unwrap() + 1;
        if n < 2 || n > max_regions {
            continue;
        }
        let spread = rng.random_range(0.0..0.3);
        let data = (0..w * h)
            .map(|p| (sites[raw[p]].2 + rng.random_range(-spread..=spread)).clamp(0.0, 1.0))
            .collect();
        return build_region_graph(&labels, &GrayImage::new(w, h, data).unwrap()).unwrap();
    }
}

/// Best path-minimum of `t` per region over every simple path from every
/// seed, by depth-first enumeration.
pub fn enumerate_nc(graph: &RegionSet, seeds: &[usize], sigma1_sq: f64, depth: Depth) -> Vec<f64> {
    fn walk(
        g: &RegionSet,
        seed: usize,
        u: usize,
        t: f64,
        on_path: &mut [bool],
        best: &mut [f64],
        (sigma1_sq, depth): (f64, Depth),
    ) {
        best[u] = best[u].max(t);
        for &v in g.neighbors(u) {
            if !on_path[v] {
                let e = nc_adjacency(g, v, u, seed, sigma1_sq, depth);
                on_path[v] = true;
                walk(g, seed, v, t.min(e.mu_t), on_path, best, (sigma1_sq, depth));
                on_path[v] = false;
            }
        }
    }
    let mut best = vec![0.0; graph.len()];
    for &k in seeds {
        let mut on_path = vec![false; graph.len()];
        on_path[k] = true;
        walk(graph, k, k, 1.0, &mut on_path, &mut best, (sigma1_sq, depth));
    }
    best
}

pub fn random_seeds(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Vec<usize> {
    let k = rng.random_range(1..=n.min(max));
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    ids.truncate(k);
    ids
}

/// Random problem with `borders` border regions and cues in `[0.01, 1)`.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, borders: usize) -> SaliencyProblem {
    let mut cue = || (0..n).map(|_| rng.random_range(0.01..1.0)).collect::<Vec<f64>>();
    let (w, d, t) = (cue(), cue(), cue());
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = if rng.random_bool(0.7) { rng.random_range(0.0..1.0) } else { 0.0 };
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let mut border = vec![false; n];
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    for &i in &ids[..borders] {
        border[i] = true;
    }
    SaliencyProblem::new(&w, &d, &t, SimilarityModel::from_dense(n, q, 0.5), border, 4.0, 40.0, 1e-6).unwrap()
}

/// Random saliency map / ground-truth pair with exact threshold values,
/// saturated pixels and occasional empty inputs mixed in.
pub fn random_pair(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (ScalarMap, BinaryMask) {
    let mode = rng.random_range(0..6);
    let data: Vec<f64> = (0..w * h)
        .map(|_| match mode {
            0 => 0.0,
            1 => f64::from(rng.random_range(0u8..=255)) / 255.0,
            2 => if rng.random_bool(0.2) { 1.0 } else { rng.random_range(0.0..0.1) },
            _ => rng.random_range(0.0..1.0),
        })
        .collect();
    let fill = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.05..0.8) };
    let gt: Vec<bool> = (0..w * h).map(|_| rng.random_bool(fill)).collect();
    (ScalarMap::new(w, h, data).unwrap(), BinaryMask::new(w, h, gt).unwrap())
}

/// Counts-based precision and recall of a selection.
pub fn brute_pr(selected: &[bool], gt: &[bool]) -> PrecisionRecall {
    let sel = selected.iter().filter(|&&b| b).count();
    let truth = gt.iter().filter(|&&b| b).count();
    let hit = selected.iter().zip(gt).filter(|(a, b)| **a && **b).count();
    let precision = match (sel, truth) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => hit as f64 / sel as f64,
    };
    let recall = match (truth, sel) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => hit as f64 / truth as f64,
    };
    PrecisionRecall { precision, recall }
}

pub fn brute_f(p: f64, r: f64) -> f64 {
    let den = 0.3 * p + r;
    if den == 0.0 { 0.0 } else { (1.0 + 0.3) * p * r / den }
}

/// Adaptive mask by direct comparison.
pub fn brute_adaptive(map: &ScalarMap) -> Vec<bool> {
    let n = map.data.len() as f64;
    let mean = map.data.iter().sum::<f64>() / n;
    if map.data.iter().all(|&v| v == 0.0) {
        return vec![false; map.data.len()];
    }
    let th = (2.0 * mean).min(1.0 - 1e-12);
    map.data.iter().map(|&v| v >= th).collect()
}

pub fn brute_mae(map: &ScalarMap, gt: &BinaryMask) -> f64 {
    let mut sum = 0.0;
    for (&s, &g) in map.data.iter().zip(gt.data()) {
        sum += (s - if g { 1.0 } else { 0.0 }).abs();
    }
    sum / map.data.len() as f64
}

/// Curve point `t` from scratch: pixels with `s * 255 >= t`.
pub fn brute_curve(map: &ScalarMap, gt: &BinaryMask) -> Vec<PrecisionRecall> {
    (0..256)
        .map(|t| {
            let sel: Vec<bool> = map.data.iter().map(|&s| s * 255.0 >= t as f64).collect();
            brute_pr(&sel, gt.data())
        })
        .collect()
}
