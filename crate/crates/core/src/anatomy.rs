//! Neutro-Connectedness over the region graph and horizontal layer
//! decomposition.
//!
//! Connectedness between adjacent regions has two channels: a degree
//! `mu_t` (intensity similarity, optionally damped by the vertical distance
//! to the tree root) and a confidence `mu_c` (the lower homogeneity of the
//! pair). Region-to-seed connectedness is the strongest (max-min) path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{label_color, write_rgb, GrayImage};
use crate::maps::ZParams;
use crate::superpixel::RegionSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcEdge {
    pub mu_t: f64,
    pub mu_c: f64,
}

/// Depth damping of the connectedness degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Depth {
    Disabled,
    /// `sigma2_sq`; each seed is its own depth anchor.
    Enabled(f64),
}

/// Intensity similarity `exp(-|I(i) - I(j)| / sigma1_sq)`.
pub fn similarity(graph: &RegionSet, i: usize, j: usize, sigma1_sq: f64) -> f64 {
    let r = graph.regions();
    (-(r[i].mean_intensity - r[j].mean_intensity).abs() / sigma1_sq).exp()
}

/// Connectedness of adjacent regions `i`, `j` inside the tree rooted at `k`.
///
/// The depth factor compares `row(i)` with `row(k)`; during propagation `i`
/// is the region being reached.
pub fn nc_adjacency(
    graph: &RegionSet,
    i: usize,
    j: usize,
    k: usize,
    sigma1_sq: f64,
    depth: Depth,
) -> NcEdge {
    let r = graph.regions();
    let depth_factor = match depth {
        Depth::Disabled => 1.0,
        Depth::Enabled(s2) => (-(r[i].row() - r[k].row()).abs() / s2).exp(),
    };
    NcEdge {
        mu_t: similarity(graph, i, j, sigma1_sq) * depth_factor,
        mu_c: r[i].homogeneity.min(r[j].homogeneity),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcMap {
    pub t: Vec<f64>,
    pub c: Vec<f64>,
    /// Predecessor along the strongest path; `None` for seeds and
    /// unreachable regions.
    pub parent: Vec<Option<usize>>,
    /// Seed whose path won, `None` if unreachable.
    pub origin: Vec<Option<usize>>,
    pub seeds: Vec<usize>,
}

#[derive(PartialEq)]
struct Entry {
    t: f64,
    c: f64,
    id: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.c.total_cmp(&other.c))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn better(t: f64, c: f64, than_t: f64, than_c: f64) -> bool {
    t > than_t || (t == than_t && c > than_c)
}

/// Best-first max-min propagation from `sources`, all starting at `(1, 1)`.
///
/// `edge(u, v)` gives the connectedness of stepping from `u` into `v`.
pub fn widest_paths(
    n: usize,
    neighbors: impl Fn(usize) -> Vec<usize>,
    edge: impl Fn(usize, usize) -> NcEdge,
    sources: &[usize],
) -> (Vec<f64>, Vec<f64>, Vec<Option<usize>>) {
    let mut t = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut parent = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        t[s] = 1.0;
        c[s] = 1.0;
        heap.push(Entry { t: 1.0, c: 1.0, id: s });
    }
    while let Some(Entry { t: tu, c: cu, id: u }) = heap.pop() {
        if done[u] || tu != t[u] || cu != c[u] {
            continue;
        }
        done[u] = true;
        for v in neighbors(u) {
            if done[v] {
                continue;
            }
            let e = edge(u, v);
            let (tv, cv) = (tu.min(e.mu_t), cu.min(e.mu_c));
            let tie_lower_parent =
                tv == t[v] && cv == c[v] && parent[v].is_some_and(|p: usize| u < p);
            if better(tv, cv, t[v], c[v]) || tie_lower_parent {
                t[v] = tv;
                c[v] = cv;
                parent[v] = Some(u);
                heap.push(Entry { t: tv, c: cv, id: v });
            }
        }
    }
    (t, c, parent)
}

fn single_seed(graph: &RegionSet, seed: usize, sigma1_sq: f64, depth: Depth) -> NcMap {
    let (t, c, parent) = widest_paths(
        graph.len(),
        |u| graph.neighbors(u).to_vec(),
        |u, v| nc_adjacency(graph, v, u, seed, sigma1_sq, depth),
        &[seed],
    );
    let origin = t.iter().map(|&x| (x > 0.0).then_some(seed)).collect();
    NcMap {
        t,
        c,
        parent,
        origin,
        seeds: vec![seed],
    }
}

/// Strongest-path connectedness of every region to the seed set.
///
/// With depth enabled each seed anchors its own depth term and the
/// per-seed maps are combined by `(t, c)`, then the smaller seed id.
pub fn nc_propagate(
    graph: &RegionSet,
    seeds: &[usize],
    sigma1_sq: f64,
    depth: Depth,
) -> Result<NcMap> {
    if seeds.is_empty() {
        return Err(Error::Contract("connectedness needs at least one seed".into()));
    }
    if let Some(&bad) = seeds.iter().find(|&&s| s >= graph.len()) {
        return Err(Error::Contract(format!("seed {bad} is not a region")));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    match depth {
        Depth::Disabled => {
            let (t, c, parent) = widest_paths(
                graph.len(),
                |u| graph.neighbors(u).to_vec(),
                |u, v| nc_adjacency(graph, v, u, v, sigma1_sq, Depth::Disabled),
                &seeds,
            );
            // Origin: follow parents back to a seed.
            let origin = (0..graph.len())
                .map(|mut v| {
                    if t[v] == 0.0 {
                        return None;
                    }
                    while let Some(p) = parent[v] {
                        v = p;
                    }
                    Some(v)
                })
                .collect();
            Ok(NcMap {
                t,
                c,
                parent,
                origin,
                seeds,
            })
        }
        Depth::Enabled(_) => {
            let maps: Vec<NcMap> = seeds
                .iter()
                .map(|&s| single_seed(graph, s, sigma1_sq, depth))
                .collect();
            let mut out = maps[0].clone();
            out.seeds = seeds.clone();
            for m in &maps[1..] {
                for v in 0..graph.len() {
                    if better(m.t[v], m.c[v], out.t[v], out.c[v]) {
                        out.t[v] = m.t[v];
                        out.c[v] = m.c[v];
                        out.parent[v] = m.parent[v];
                        out.origin[v] = m.origin[v];
                    }
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Top,
    Middle,
    Bottom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub regions: Vec<usize>,
    pub root: usize,
    pub root_row: f64,
    pub mean_row: f64,
    /// Local Z parameters; filled by the foreground map.
    pub local: Option<ZParams>,
    pub weight: f64,
    pub part: Part,
    /// 1 dark, -1 bright, 0 ordinary; filled by the foreground map.
    pub dark_flag: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerModel {
    pub layer_of: Vec<usize>,
    /// Ordered top to bottom by mean region row.
    pub layers: Vec<Layer>,
    pub sigma2_sq: f64,
    pub adaptation_steps: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    pub sigma1_sq: f64,
    pub sigma2_sq_init: f64,
    pub coverage_frac: f64,
    /// Consecutive left-boundary roots whose depth-free strongest path is
    /// at least this strong share one depth anchor.
    pub root_link: f64,
    pub min_layers: usize,
    pub max_layers: usize,
    pub max_adaptation: usize,
    pub sigma2_step: f64,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            sigma1_sq: 0.5,
            sigma2_sq_init: 0.2,
            coverage_frac: 0.75,
            root_link: 0.9,
            min_layers: 3,
            max_layers: 5,
            max_adaptation: 8,
            sigma2_step: 0.05,
            sigma2_min: 0.05,
            sigma2_max: 0.4,
        }
    }
}

impl LayerModel {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Every region in one middle layer of weight 1.
    pub fn single_layer(graph: &RegionSet, sigma2_sq: f64) -> Self {
        let regions: Vec<usize> = (0..graph.len()).collect();
        let root = graph
            .regions()
            .iter()
            .filter(|r| r.left_border)
            .chain(graph.regions())
            .map(|r| r.id)
            .next()
            .unwrap_or(0);
        let mean_row = mean_row(graph, &regions);
        Self {
            layer_of: vec![0; graph.len()],
            layers: vec![Layer {
                regions,
                root,
                root_row: graph.regions().get(root).map_or(0.5, |r| r.row()),
                mean_row,
                local: None,
                weight: 1.0,
                part: Part::Middle,
                dark_flag: 0,
            }],
            sigma2_sq,
            adaptation_steps: 0,
            fallback: true,
        }
    }

    /// Color overlay of layers on the grayscale image.
    pub fn write_overlay(&self, graph: &RegionSet, img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
        let mut rgb = Vec::with_capacity(graph.labels().len() * 3);
        for (p, &l) in graph.labels().iter().enumerate() {
            let color = label_color(self.layer_of[l] + 1);
            let g = img.data()[p];
            for ch in color {
                rgb.push((0.5 * f64::from(ch) + 0.5 * 255.0 * g).round() as u8);
            }
        }
        write_rgb(graph.width(), graph.height(), rgb, path)
    }
}

fn mean_row(graph: &RegionSet, ids: &[usize]) -> f64 {
    ids.iter().map(|&i| graph.regions()[i].row()).sum::<f64>() / ids.len().max(1) as f64
}

#[derive(Debug, Clone)]
struct Group {
    root: usize,
    members: Vec<usize>,
}

/// Assigns every region to the root of maximal `(t, c)`, ties to the
/// topmost root. Roots keep themselves.
fn assign(graph: &RegionSet, roots: &[usize], sigma1_sq: f64, depth: Depth) -> Vec<Group> {
    let regions = graph.regions();
    let maps: Vec<NcMap> = roots
        .iter()
        .map(|&k| single_seed(graph, k, sigma1_sq, depth))
        .collect();
    let mut groups: Vec<Group> = roots
        .iter()
        .map(|&k| Group {
            root: k,
            members: Vec::new(),
        })
        .collect();
    for v in 0..graph.len() {
        let owner = match roots.iter().position(|&k| k == v) {
            Some(g) => g,
            None => (0..roots.len())
                .max_by(|&a, &b| {
                    let (ma, mb) = (&maps[a], &maps[b]);
                    ma.t[v]
                        .total_cmp(&mb.t[v])
                        .then(ma.c[v].total_cmp(&mb.c[v]))
                        // Higher root wins: smaller row compares greater.
                        .then(regions[roots[b]].row().total_cmp(&regions[roots[a]].row()))
                        .then(roots[b].cmp(&roots[a]))
                })
                .expect("at least one root"),
        };
        groups[owner].members.push(v);
    }
    groups
}

/// Folds groups whose column coverage is at most `frac * width` into the
/// group with the nearest root row, narrowest first.
fn merge_narrow(graph: &RegionSet, mut groups: Vec<Group>, frac: f64) -> Vec<Group> {
    let limit = frac * graph.width() as f64;
    let row = |g: &Group| graph.regions()[g.root].row();
    loop {
        if groups.len() <= 1 {
            return groups;
        }
        let coverage: Vec<usize> = groups
            .iter()
            .map(|g| graph.column_coverage(g.members.iter().copied()))
            .collect();
        let narrow = (0..groups.len())
            .filter(|&g| coverage[g] as f64 <= limit)
            .min_by(|&a, &b| {
                coverage[a]
                    .cmp(&coverage[b])
                    .then(row(&groups[a]).total_cmp(&row(&groups[b])))
                    .then(groups[a].root.cmp(&groups[b].root))
            });
        let Some(src) = narrow else {
            return groups;
        };
        let src_row = row(&groups[src]);
        let dst = (0..groups.len())
            .filter(|&g| g != src)
            .min_by(|&a, &b| {
                (row(&groups[a]) - src_row)
                    .abs()
                    .total_cmp(&(row(&groups[b]) - src_row).abs())
                    .then(row(&groups[a]).total_cmp(&row(&groups[b])))
                    .then(groups[a].root.cmp(&groups[b].root))
            })
            .expect("two or more groups");
        let moved = std::mem::take(&mut groups[src].members);
        groups[dst].members.extend(moved);
        groups.remove(src);
    }
}

/// Splits the row-sorted roots into runs joined by strongest paths of at
/// least `link` (depth disabled); each run is represented by its median root.
fn link_roots(graph: &RegionSet, roots: &[usize], sigma1_sq: f64, link: f64) -> Vec<usize> {
    let mut runs: Vec<Vec<usize>> = vec![vec![roots[0]]];
    for pair in roots.windows(2) {
        let m = single_seed(graph, pair[0], sigma1_sq, Depth::Disabled);
        if m.t[pair[1]] >= link {
            runs.last_mut().expect("non-empty").push(pair[1]);
        } else {
            runs.push(vec![pair[1]]);
        }
    }
    runs.iter().map(|r| r[(r.len() - 1) / 2]).collect()
}

fn finish(graph: &RegionSet, groups: Vec<Group>, sigma2_sq: f64, steps: usize) -> LayerModel {
    let regions = graph.regions();
    let mut layers: Vec<Layer> = groups
        .into_iter()
        .map(|mut g| {
            g.members.sort_unstable();
            Layer {
                mean_row: mean_row(graph, &g.members),
                root_row: regions[g.root].row(),
                root: g.root,
                regions: g.members,
                local: None,
                weight: 1.0,
                part: Part::Middle,
                dark_flag: 0,
            }
        })
        .collect();
    layers.sort_by(|a, b| a.mean_row.total_cmp(&b.mean_row).then(a.root_row.total_cmp(&b.root_row)));
    let mut layer_of = vec![0; graph.len()];
    for (li, l) in layers.iter().enumerate() {
        for &r in &l.regions {
            layer_of[r] = li;
        }
    }
    LayerModel {
        layer_of,
        layers,
        sigma2_sq,
        adaptation_steps: steps,
        fallback: false,
    }
}

/// Splits the image into horizontal layers grown from left-boundary roots.
///
/// Roots first compete without the depth term; groups that fail the
/// width-coverage test are merged, and each surviving group nominates one
/// left-boundary representative. The representatives then regrow their
/// trees with depth damping, again followed by the coverage merge. The
/// depth scale is adapted while the layer count is outside the target range.
pub fn decompose_layers(graph: &RegionSet, cfg: &LayerConfig) -> Result<LayerModel> {
    if graph.len() < 3 {
        return Err(Error::Layering(format!(
            "{} regions, at least 3 needed",
            graph.len()
        )));
    }
    let mut roots: Vec<usize> = graph
        .regions()
        .iter()
        .filter(|r| r.left_border)
        .map(|r| r.id)
        .collect();
    if roots.is_empty() {
        return Err(Error::Layering("no left-boundary region".into()));
    }
    let regions = graph.regions();
    roots.sort_by(|&a, &b| regions[a].row().total_cmp(&regions[b].row()).then(a.cmp(&b)));

    let anchors = link_roots(graph, &roots, cfg.sigma1_sq, cfg.root_link);

    let grow = |s2: f64| {
        merge_narrow(
            graph,
            assign(graph, &anchors, cfg.sigma1_sq, Depth::Enabled(s2)),
            cfg.coverage_frac,
        )
    };
    let mut sigma2 = cfg.sigma2_sq_init.clamp(cfg.sigma2_min, cfg.sigma2_max);
    let mut groups = grow(sigma2);
    let mut steps = 0;
    while steps < cfg.max_adaptation {
        let next = if groups.len() > cfg.max_layers && sigma2 - cfg.sigma2_step >= cfg.sigma2_min - 1e-12 {
            sigma2 - cfg.sigma2_step
        } else if groups.len() < cfg.min_layers
            && sigma2 < cfg.sigma2_sq_init - 1e-12
            && sigma2 + cfg.sigma2_step <= cfg.sigma2_max + 1e-12
        {
            sigma2 + cfg.sigma2_step
        } else {
            break;
        };
        sigma2 = next.clamp(cfg.sigma2_min, cfg.sigma2_max);
        groups = grow(sigma2);
        steps += 1;
    }
    Ok(finish(graph, groups, sigma2, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::GrayImage;
    use crate::phantom::{generate_phantom, PhantomSpec};
    use crate::superpixel::{build_region_graph, quick_shift_segment, QuickShiftConfig};
    use crate::testutil::{block_regions, random_regions};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every simple path from every seed; per region the best `t` and the
    /// best confidence among paths reaching that `t`.
    fn enumerate_paths(graph: &RegionSet, seeds: &[usize], sigma1_sq: f64, depth: Depth) -> Vec<(f64, f64)> {
        fn walk(
            graph: &RegionSet,
            seed: usize,
            u: usize,
            value: (f64, f64),
            on_path: &mut Vec<bool>,
            found: &mut Vec<Vec<(f64, f64)>>,
            sigma1_sq: f64,
            depth: Depth,
        ) {
            found[u].push(value);
            for &v in graph.neighbors(u) {
                if on_path[v] {
                    continue;
                }
                let e = nc_adjacency(graph, v, u, seed, sigma1_sq, depth);
                on_path[v] = true;
                walk(graph, seed, v, (value.0.min(e.mu_t), value.1.min(e.mu_c)), on_path, found, sigma1_sq, depth);
                on_path[v] = false;
            }
        }
        let mut found = vec![Vec::new(); graph.len()];
        for &k in seeds {
            let mut on_path = vec![false; graph.len()];
            on_path[k] = true;
            walk(graph, k, k, (1.0, 1.0), &mut on_path, &mut found, sigma1_sq, depth);
        }
        found
            .into_iter()
            .map(|vals| {
                let t = vals.iter().map(|v| v.0).fold(0.0, f64::max);
                let c = vals.iter().filter(|v| v.0 == t).map(|v| v.1).fold(0.0, f64::max);
                if vals.is_empty() { (0.0, 0.0) } else { (t, c) }
            })
            .collect()
    }

    /// Each recorded parent reproduces both channels of its child.
    fn check_chain(graph: &RegionSet, map: &NcMap, depth: Depth) {
        for v in 0..graph.len() {
            match map.parent[v] {
                None => {
                    if map.t[v] > 0.0 {
                        assert!(map.seeds.contains(&v));
                        assert_eq!((map.t[v], map.c[v]), (1.0, 1.0));
                    }
                }
                Some(p) => {
                    let k = map.origin[v].unwrap();
                    let e = nc_adjacency(graph, v, p, k, 0.5, depth);
                    assert_eq!(map.t[v], map.t[p].min(e.mu_t));
                    assert_eq!(map.c[v], map.c[p].min(e.mu_c));
                    assert!(map.t[v] <= map.t[p]);
                    assert_eq!(map.origin[p], Some(k));
                }
            }
        }
    }

    fn check_against_paths(graph: &RegionSet, seeds: &[usize], depth: Depth) {
        let map = nc_propagate(graph, seeds, 0.5, depth).unwrap();
        let oracle = enumerate_paths(graph, seeds, 0.5, depth);
        for v in 0..graph.len() {
            assert_eq!(map.t[v], oracle[v].0, "t of region {v}");
            assert!(map.c[v] <= oracle[v].1, "c of region {v}");
        }
        match depth {
            Depth::Disabled => check_chain(graph, &map, depth),
            // Anchored trees: chains hold per seed, the merge picks the best.
            Depth::Enabled(_) => {
                for v in 0..graph.len() {
                    if let Some(k) = map.origin[v] {
                        let own = nc_propagate(graph, &[k], 0.5, depth).unwrap();
                        check_chain(graph, &own, depth);
                        assert_eq!((map.t[v], map.c[v], map.parent[v]), (own.t[v], own.c[v], own.parent[v]));
                    }
                }
            }
        }
    }

    #[test]
    fn adjacency_examples() {
        let g = block_regions(&[&[0.2, 0.2], &[0.7, 0.2]], 4);
        let e = nc_adjacency(&g, 1, 0, 0, 0.5, Depth::Enabled(0.2));
        assert_eq!(e.mu_t, 1.0);
        // Region 2 sits below its anchor 2, so only intensity counts.
        let e = nc_adjacency(&g, 2, 3, 2, 0.5, Depth::Enabled(0.2));
        assert!((e.mu_t - (-1.0f64).exp()).abs() < 1e-12);
        assert!((e.mu_t - 0.3679).abs() < 1e-4);
        let e = nc_adjacency(&g, 2, 0, 0, 0.5, Depth::Enabled(0.2));
        // Row gap 0.5 on a scale of 0.2.
        assert!((e.mu_t - (-1.0f64).exp() * (-2.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn confidence_is_the_weaker_homogeneity() {
        // Alternating pixels: std 0.35 gives h = 0.3, std 0.05 gives h = 0.9.
        let (w, h) = (8, 4);
        let data = (0..w * h)
            .map(|p| {
                let odd = (p % w + p / w) % 2 == 1;
                match (p % w < 4, odd) {
                    (true, true) => 0.85,
                    (true, false) => 0.15,
                    (false, true) => 0.55,
                    (false, false) => 0.45,
                }
            })
            .collect();
        let labels: Vec<usize> = (0..w * h).map(|p| usize::from(p % w >= 4)).collect();
        let g = build_region_graph(&labels, &GrayImage::new(w, h, data).unwrap()).unwrap();
        let e = nc_adjacency(&g, 0, 1, 0, 0.5, Depth::Disabled);
        assert!((g.regions()[0].homogeneity - 0.3).abs() < 1e-12);
        assert!((g.regions()[1].homogeneity - 0.9).abs() < 1e-12);
        assert_eq!(e.mu_c, g.regions()[0].homogeneity);
    }

    fn edge_table(pairs: &[(usize, usize, f64)]) -> impl Fn(usize, usize) -> NcEdge + '_ {
        move |u, v| {
            let mu_t = pairs
                .iter()
                .find(|(a, b, _)| (*a == u && *b == v) || (*a == v && *b == u))
                .map(|p| p.2)
                .unwrap();
            NcEdge { mu_t, mu_c: 1.0 }
        }
    }

    fn neighbor_table(n: usize, pairs: &[(usize, usize, f64)]) -> impl Fn(usize) -> Vec<usize> + '_ {
        move |u| {
            (0..n)
                .filter(|&v| pairs.iter().any(|(a, b, _)| (*a == u && *b == v) || (*a == v && *b == u)))
                .collect()
        }
    }

    #[test]
    fn path_minimum_and_strongest_path() {
        let chain = [(0, 1, 0.9), (1, 2, 0.5)];
        let (t, c, parent) = widest_paths(3, neighbor_table(3, &chain), edge_table(&chain), &[0]);
        assert_eq!(t, vec![1.0, 0.9, 0.5]);
        assert_eq!(c, vec![1.0; 3]);
        assert_eq!(parent, vec![None, Some(0), Some(1)]);

        // Two routes to region 3 with bottlenecks 0.4 and 0.7.
        let two = [(0, 1, 0.4), (1, 3, 0.9), (0, 2, 0.8), (2, 3, 0.7)];
        let (t, _, parent) = widest_paths(4, neighbor_table(4, &two), edge_table(&two), &[0]);
        assert_eq!(t[3], 0.7);
        assert_eq!(parent[3], Some(2));
    }

    #[test]
    fn unreachable_regions_get_zero() {
        let pairs = [(0, 1, 0.6)];
        let (t, c, parent) = widest_paths(3, neighbor_table(3, &pairs), edge_table(&pairs), &[0]);
        assert_eq!((t[2], c[2], parent[2]), (0.0, 0.0, None));
    }

    #[test]
    fn seeds_are_fully_connected() {
        let g = block_regions(&[&[0.1, 0.9, 0.4], &[0.3, 0.6, 0.2]], 4);
        let m = nc_propagate(&g, &[4, 1], 0.5, Depth::Disabled).unwrap();
        for s in [1, 4] {
            assert_eq!((m.t[s], m.c[s], m.parent[s], m.origin[s]), (1.0, 1.0, None, Some(s)));
        }
        assert!(matches!(nc_propagate(&g, &[], 0.5, Depth::Disabled), Err(Error::Contract(_))));
        assert!(matches!(nc_propagate(&g, &[9], 0.5, Depth::Disabled), Err(Error::Contract(_))));
    }

    #[test]
    fn matches_path_enumeration_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..60 {
            let g = random_regions(seed, 8);
            let n = g.len();
            let k = rng.random_range(1..=n.min(3));
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut rng);
            let seeds = &ids[..k];
            check_against_paths(&g, seeds, Depth::Disabled);
            check_against_paths(&g, seeds, Depth::Enabled(0.2));
            check_against_paths(&g, &seeds[..1], Depth::Enabled(0.05));
        }
    }

    proptest! {
        #[test]
        fn raising_an_edge_never_lowers_connectedness(
            weights in prop::collection::vec(0.0..1.0f64, 28),
            pick in 0usize..28,
            boost in 0.0..1.0f64,
            n in 3usize..=8,
            density in 0.3..1.0f64,
        ) {
            let mut pairs = Vec::new();
            let mut idx = 0;
            for a in 0..n {
                for b in a + 1..n {
                    if weights[idx] < density || b == a + 1 {
                        pairs.push((a, b, weights[idx]));
                    }
                    idx += 1;
                }
            }
            let (t0, _, _) = widest_paths(n, neighbor_table(n, &pairs), edge_table(&pairs), &[0]);
            let e = pick % pairs.len();
            pairs[e].2 = (pairs[e].2 + boost).min(1.0);
            let (t1, _, _) = widest_paths(n, neighbor_table(n, &pairs), edge_table(&pairs), &[0]);
            for v in 0..n {
                prop_assert!(t1[v] >= t0[v]);
            }
        }
    }

    fn phantom_graph(spec: &PhantomSpec) -> (RegionSet, GrayImage, Vec<usize>) {
        let (img, _) = generate_phantom(spec).unwrap();
        let g = quick_shift_segment(&img, &QuickShiftConfig::default()).unwrap();
        (g, img, spec.band_of_rows())
    }

    #[test]
    fn four_bands_give_one_layer_per_band() {
        for seed in 1..=3 {
            four_bands(seed);
        }
    }

    fn four_bands(seed: u64) {
        let spec = PhantomSpec::banded(4, 256, 256, 0.05, seed);
        let (g, _, rows) = phantom_graph(&spec);
        let m = decompose_layers(&g, &LayerConfig::default()).unwrap();
        assert_eq!(m.len(), 4);
        assert!(!m.fallback);
        let mut votes = vec![[0usize; 4]; m.len()];
        for (p, &l) in g.labels().iter().enumerate() {
            votes[m.layer_of[l]][rows[p / g.width()]] += 1;
        }
        let majority: Vec<usize> = votes
            .iter()
            .map(|v| (0..4).max_by_key(|&b| v[b]).unwrap())
            .collect();
        assert_eq!(majority, vec![0, 1, 2, 3]);
        for l in &m.layers {
            assert!(g.column_coverage(l.regions.iter().copied()) as f64 > 0.75 * g.width() as f64);
        }
    }

    #[test]
    fn many_bands_lower_the_depth_scale() {
        let spec = PhantomSpec::banded(7, 256, 256, 0.05, 3);
        let (g, _, _) = phantom_graph(&spec);
        let m = decompose_layers(&g, &LayerConfig::default()).unwrap();
        assert!(m.sigma2_sq < 0.2);
        assert!(m.adaptation_steps > 0);
        assert!(m.sigma2_sq >= 0.05 - 1e-12);
    }

    #[test]
    fn decomposition_ignores_region_numbering() {
        let spec = PhantomSpec { tumor: None, ..PhantomSpec::default() };
        let (g, img, _) = phantom_graph(&spec);
        let base = decompose_layers(&g, &LayerConfig::default()).unwrap();
        assert_eq!(base, decompose_layers(&g, &LayerConfig::default()).unwrap());
        let mut perm: Vec<usize> = (0..g.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(11));
        let labels: Vec<usize> = g.labels().iter().map(|&l| perm[l]).collect();
        let g2 = build_region_graph(&labels, &img).unwrap();
        let m2 = decompose_layers(&g2, &LayerConfig::default()).unwrap();
        let pixels = |g: &RegionSet, m: &LayerModel| -> Vec<usize> {
            g.labels().iter().map(|&l| m.layer_of[l]).collect()
        };
        assert_eq!(pixels(&g, &base), pixels(&g2, &m2));
    }

    #[test]
    fn uniform_blocks_collapse_to_one_layer() {
        let g = block_regions(&[&[0.5; 3], &[0.5; 3], &[0.5; 3]], 4);
        let m = decompose_layers(&g, &LayerConfig::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.layers[0].regions.len(), 9);
        assert_eq!(m.adaptation_steps, 0);
    }

    #[test]
    fn too_few_regions_is_a_layering_error() {
        let g = block_regions(&[&[0.2, 0.8]], 8);
        assert!(matches!(decompose_layers(&g, &LayerConfig::default()), Err(Error::Layering(_))));
        let single = LayerModel::single_layer(&g, 0.2);
        assert_eq!((single.len(), single.layers[0].weight, single.fallback), (1, 1.0, true));
    }

    #[test]
    fn every_region_has_one_layer() {
        for seed in 0..20 {
            let g = random_regions(100 + seed, 8);
            if g.len() < 3 {
                continue;
            }
            let m = decompose_layers(&g, &LayerConfig::default()).unwrap();
            let mut seen = vec![0; g.len()];
            for (li, l) in m.layers.iter().enumerate() {
                for &r in &l.regions {
                    seen[r] += 1;
                    assert_eq!(m.layer_of[r], li);
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            for w in m.layers.windows(2) {
                assert!(w[0].mean_row <= w[1].mean_row);
            }
        }
    }
}
