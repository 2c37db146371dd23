//! Quick-shift superpixels and the region adjacency graph.
//!
//! Every pixel is linked to its nearest neighbour of higher density in the
//! joint `(x, y, scale * intensity)` space; the resulting forest defines the
//! raw segments. Segments are then split into 4-connected pieces and pieces
//! smaller than [`MIN_REGION_PIXELS`] are folded into their most similar
//! neighbour.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{label_color, write_rgb, GrayImage};

pub const MIN_REGION_PIXELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuickShiftConfig {
    pub kernel_sigma: f64,
    pub max_dist: f64,
    /// `None` selects `10 * min(width, height) / 256`.
    pub intensity_scale: Option<f64>,
}

impl Default for QuickShiftConfig {
    fn default() -> Self {
        Self {
            kernel_sigma: 3.0,
            max_dist: 10.0,
            intensity_scale: None,
        }
    }
}

impl QuickShiftConfig {
    pub fn scale_for(&self, width: usize, height: usize) -> f64 {
        self.intensity_scale
            .unwrap_or(10.0 * width.min(height) as f64 / 256.0)
    }

    fn validate(&self, scale: f64) -> Result<()> {
        if !(self.kernel_sigma > 0.0 && self.max_dist > 0.0 && scale > 0.0) {
            return Err(Error::Contract(format!(
                "quick-shift parameters must be positive: {self:?}, scale {scale}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: usize,
    pub mean_intensity: f64,
    /// Centroid `(x, y)` in `[0,1]^2`, measured at pixel centres.
    pub centroid: (f64, f64),
    pub pixel_count: usize,
    pub homogeneity: f64,
    pub border: bool,
    pub left_border: bool,
    column_bits: Vec<u64>,
}

impl Region {
    /// Normalized row of the centroid.
    pub fn row(&self) -> f64 {
        self.centroid.1
    }

    pub fn column_bits(&self) -> &[u64] {
        &self.column_bits
    }
}

/// Superpixel partition with per-region features and 4-adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    regions: Vec<Region>,
    adjacency: Vec<Vec<usize>>,
}

impl RegionSet {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.mean_intensity).collect()
    }

    pub fn border_ids(&self) -> Vec<usize> {
        self.regions.iter().filter(|r| r.border).map(|r| r.id).collect()
    }

    /// Number of image columns touched by the union of `ids`.
    pub fn column_coverage(&self, ids: impl IntoIterator<Item = usize>) -> usize {
        let words = self.width.div_ceil(64);
        let mut acc = vec![0u64; words];
        for id in ids {
            for (a, b) in acc.iter_mut().zip(&self.regions[id].column_bits) {
                *a |= *b;
            }
        }
        acc.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Spreads a per-region vector back onto the pixel grid.
    pub fn rasterize(&self, values: &[f64]) -> Vec<f64> {
        self.labels.iter().map(|&l| values[l]).collect()
    }

    pub fn write_label_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut rgb = Vec::with_capacity(self.labels.len() * 3);
        for &l in &self.labels {
            rgb.extend_from_slice(&label_color(l));
        }
        write_rgb(self.width, self.height, rgb, path)
    }
}

/// Homogeneity proxy: `1 - clamp(std / 0.5, 0, 1)`.
pub fn homogeneity(std_dev: f64) -> f64 {
    1.0 - (std_dev / 0.5).clamp(0.0, 1.0)
}

/// Normalized Parzen density at every pixel.
///
/// The kernel sum is divided by the sum of the purely spatial weights over
/// the same (image-clipped) window, so a constant image has density exactly
/// 1 everywhere and all pixels tie.
pub fn density(img: &GrayImage, sigma: f64, scale: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let radius = (3.0 * sigma).ceil() as isize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let side = (2 * radius + 1) as usize;
    let mut spatial = vec![0.0; side * side];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let idx = ((dy + radius) as usize) * side + (dx + radius) as usize;
            spatial[idx] = (-((dx * dx + dy * dy) as f64) * inv).exp();
        }
    }
    let data = img.data();
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let center = data[(y as usize) * w + x as usize];
            let (mut num, mut den) = (0.0, 0.0);
            for yy in (y - radius).max(0)..=(y + radius).min(h as isize - 1) {
                let row = (yy as usize) * w;
                let srow = ((yy - y + radius) as usize) * side;
                for xx in (x - radius).max(0)..=(x + radius).min(w as isize - 1) {
                    let sw = spatial[srow + (xx - x + radius) as usize];
                    let di = scale * (data[row + xx as usize] - center);
                    num += sw * (-di * di * inv).exp();
                    den += sw;
                }
            }
            out[(y as usize) * w + x as usize] = num / den;
        }
    }
    out
}

/// Raw quick-shift forest: `parent[i] == i` marks a mode.
///
/// `j` outranks `i` when its density is larger, or equal with a lower
/// linear index. Among outranking pixels within `max_dist` in feature
/// space the nearest wins, lowest index on ties.
pub fn quick_shift_forest(img: &GrayImage, cfg: &QuickShiftConfig) -> Result<Vec<usize>> {
    let scale = cfg.scale_for(img.width(), img.height());
    cfg.validate(scale)?;
    let dens = density(img, cfg.kernel_sigma, scale);
    let (w, h) = (img.width(), img.height());
    let data = img.data();
    let reach = cfg.max_dist.floor() as isize;
    let max_sq = cfg.max_dist * cfg.max_dist;
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = (y as usize) * w + x as usize;
            let (di, ii) = (dens[i], data[i]);
            let mut best: Option<(f64, usize)> = None;
            for yy in (y - reach).max(0)..=(y + reach).min(h as isize - 1) {
                for xx in (x - reach).max(0)..=(x + reach).min(w as isize - 1) {
                    let j = (yy as usize) * w + xx as usize;
                    let dj = dens[j];
                    if !(dj > di || (dj == di && j < i)) {
                        continue;
                    }
                    let dz = scale * (data[j] - ii);
                    let d2 = ((xx - x) * (xx - x) + (yy - y) * (yy - y)) as f64 + dz * dz;
                    if d2 > max_sq {
                        continue;
                    }
                    if best.is_none_or(|(bd, bj)| d2 < bd || (d2 == bd && j < bj)) {
                        best = Some((d2, j));
                    }
                }
            }
            if let Some((_, j)) = best {
                parent[i] = j;
            }
        }
    }
    Ok(parent)
}

/// Labels each pixel with the index of its mode.
pub fn forest_roots(parent: &[usize]) -> Vec<usize> {
    let mut root = vec![usize::MAX; parent.len()];
    let mut stack = Vec::new();
    for start in 0..parent.len() {
        let mut cur = start;
        while root[cur] == usize::MAX && parent[cur] != cur {
            stack.push(cur);
            cur = parent[cur];
        }
        let r = if root[cur] == usize::MAX { cur } else { root[cur] };
        root[cur] = r;
        for s in stack.drain(..) {
            root[s] = r;
        }
    }
    root
}

/// Splits label classes into 4-connected components, numbered in raster
/// order of their first pixel.
pub fn split_connected(labels: &[usize], width: usize, height: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; labels.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if out[start] != usize::MAX {
            continue;
        }
        out[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if out[q] == usize::MAX && labels[q] == labels[p] {
                    out[q] = next;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        next += 1;
    }
    out
}

fn for_each_edge(width: usize, height: usize, mut f: impl FnMut(usize, usize)) {
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            if x + 1 < width {
                f(p, p + 1);
            }
            if y + 1 < height {
                f(p, p + width);
            }
        }
    }
}

/// Folds components under `min_pixels` into the adjacent component with the
/// closest mean intensity, smallest component first. Input labels must be
/// 4-connected components; output is renumbered in raster order.
pub fn merge_small(labels: &[usize], img: &GrayImage, min_pixels: usize) -> Vec<usize> {
    let n = labels.iter().max().map_or(0, |m| m + 1);
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (p, &l) in labels.iter().enumerate() {
        sum[l] += img.data()[p];
        count[l] += 1;
    }
    // Second pass around the means.
    let mut sq_dev = vec![0.0; n];
    for (p, &l) in labels.iter().enumerate() {
        let d = img.data()[p] - sum[l] / count[l] as f64;
        sq_dev[l] += d * d;
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for_each_edge(img.width(), img.height(), |a, b| {
        let (la, lb) = (labels[a], labels[b]);
        if la != lb {
            adj[la].insert(lb);
            adj[lb].insert(la);
        }
    });
    let mut owner: Vec<usize> = (0..n).collect();
    let mut alive: BTreeSet<(usize, usize)> = (0..n)
        .filter(|&i| count[i] < min_pixels)
        .map(|i| (count[i], i))
        .collect();
    while let Some((_, small)) = alive.pop_first() {
        if count[small] >= min_pixels || adj[small].is_empty() {
            continue;
        }
        let mean = sum[small] / count[small] as f64;
        let target = *adj[small]
            .iter()
            .min_by(|&&a, &&b| {
                let da = (sum[a] / count[a] as f64 - mean).abs();
                let db = (sum[b] / count[b] as f64 - mean).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("non-empty adjacency");
        alive.remove(&(count[target], target));
        sum[target] += sum[small];
        count[target] += count[small];
        owner[small] = target;
        let moved = std::mem::take(&mut adj[small]);
        for nb in moved {
            adj[nb].remove(&small);
            if nb != target {
                adj[nb].insert(target);
                adj[target].insert(nb);
            }
        }
        if count[target] < min_pixels {
            alive.insert((count[target], target));
        }
    }
    let resolve = |mut l: usize| {
        while owner[l] != l {
            l = owner[l];
        }
        l
    };
    let merged: Vec<usize> = labels.iter().map(|&l| resolve(l)).collect();
    renumber(&merged)
}

/// Renumbers labels `0..k` in raster order of first appearance.
pub fn renumber(labels: &[usize]) -> Vec<usize> {
    let max = labels.iter().max().map_or(0, |m| m + 1);
    let mut map = vec![usize::MAX; max];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}

/// Quick-shift segmentation followed by fragment splitting, small-region
/// merging and feature extraction.
pub fn quick_shift_segment(img: &GrayImage, cfg: &QuickShiftConfig) -> Result<RegionSet> {
    let parent = quick_shift_forest(img, cfg)?;
    let roots = forest_roots(&parent);
    let pieces = split_connected(&roots, img.width(), img.height());
    let merged = merge_small(&pieces, img, MIN_REGION_PIXELS);
    build_region_graph(&merged, img)
}

/// Computes region features and adjacency for a label grid whose labels are
/// exactly `0..N`.
pub fn build_region_graph(labels: &[usize], img: &GrayImage) -> Result<RegionSet> {
    let (w, h) = (img.width(), img.height());
    if labels.len() != w * h {
        return Err(Error::Contract(format!(
            "label grid has {} entries for a {w}x{h} image",
            labels.len()
        )));
    }
    let n = labels.iter().max().map_or(0, |m| m + 1);
    let words = w.div_ceil(64);
    let mut count = vec![0usize; n];
    let mut sum = vec![0.0; n];
    let mut sx = vec![0.0; n];
    let mut sy = vec![0.0; n];
    let mut border = vec![false; n];
    let mut left = vec![false; n];
    let mut cols = vec![vec![0u64; words]; n];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let l = labels[p];
            let v = img.data()[p];
            count[l] += 1;
            sum[l] += v;
            sx[l] += x as f64;
            sy[l] += y as f64;
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                border[l] = true;
            }
            if x == 0 {
                left[l] = true;
            }
            cols[l][x / 64] |= 1u64 << (x % 64);
        }
    }
    if let Some(empty) = count.iter().position(|&c| c == 0) {
        return Err(Error::Internal(format!("region {empty} owns no pixels")));
    }
    // Second pass around the means.
    let mut sq_dev = vec![0.0; n];
    for (p, &l) in labels.iter().enumerate() {
        let d = img.data()[p] - sum[l] / count[l] as f64;
        sq_dev[l] += d * d;
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for_each_edge(w, h, |a, b| {
        let (la, lb) = (labels[a], labels[b]);
        if la != lb {
            adj[la].insert(lb);
            adj[lb].insert(la);
        }
    });
    let regions = (0..n)
        .zip(cols)
        .map(|(i, column_bits)| {
            let c = count[i] as f64;
            let mean = sum[i] / c;
            let var = sq_dev[i] / c;
            Region {
                id: i,
                mean_intensity: mean.clamp(0.0, 1.0),
                centroid: ((sx[i] / c + 0.5) / w as f64, (sy[i] / c + 0.5) / h as f64),
                pixel_count: count[i],
                homogeneity: homogeneity(var.sqrt()),
                border: border[i],
                left_border: left[i],
                column_bits,
            }
        })
        .collect();
    Ok(RegionSet {
        width: w,
        height: h,
        labels: labels.to_vec(),
        regions,
        adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
    })
}
