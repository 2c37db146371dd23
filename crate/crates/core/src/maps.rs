//! Cue maps: foreground `W`, distance `D`, background `T`, and the pairwise
//! smoothness weights.

use crate::anatomy::{nc_propagate, Depth, LayerModel, Part};
use crate::error::Result;
use crate::imaging::ScalarMap;
use crate::superpixel::RegionSet;

/// Breakpoints of the Z-shaped function, `a <= b <= c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZParams {
    a: f64,
    b: f64,
    c: f64,
}

impl ZParams {
    /// Orders the breakpoints: `c` is raised to `a` if needed and `b` is
    /// clamped into `[a, c]`.
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        let c = c.max(a);
        Self {
            a,
            b: b.clamp(a, c),
            c,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Piecewise-quadratic decreasing map from intensity to foreground weight.
pub fn z_function(intensity: f64, p: &ZParams) -> f64 {
    let ZParams { a, b, c } = *p;
    if intensity <= a {
        return 1.0;
    }
    if intensity > c || c == a {
        return 0.0;
    }
    let v = if intensity <= b {
        1.0 - (intensity - a).powi(2) / ((c - a) * (b - a))
    } else {
        (intensity - c).powi(2) / ((c - a) * (c - b))
    };
    v.clamp(0.0, 1.0)
}

/// Value at 1-indexed rank `ceil(num * n / den)` of an ascending list.
pub fn percentile(sorted: &[f64], num: usize, den: usize) -> f64 {
    let n = sorted.len();
    let rank = (num * n).div_ceil(den).max(1);
    sorted[rank.min(n) - 1]
}

fn mean_below(values: &[f64], bound: f64) -> Option<f64> {
    let (s, k) = values
        .iter()
        .filter(|&&v| v < bound)
        .fold((0.0, 0usize), |(s, k), &v| (s + v, k + 1));
    (k > 0).then(|| s / k as f64)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GlobalParams {
    pub fn z(&self) -> ZParams {
        ZParams::new(self.a, self.b, self.c)
    }
}

/// Global breakpoints over all region intensities. With `cg_literal` the
/// upper breakpoint is the 60th percentile minus `a`.
pub fn global_params(intensities: &[f64], cg_literal: bool) -> GlobalParams {
    let s = sorted(intensities);
    let a = percentile(&s, 1, 10);
    let p60 = percentile(&s, 6, 10);
    let c = if cg_literal { p60 - a } else { p60 };
    let b = mean_below(&s, c).unwrap_or(a);
    GlobalParams { a, b, c }
}

/// Raw local `(a_i, b_i, c_i)` of one layer.
pub fn local_params(intensities: &[f64]) -> (f64, f64, f64) {
    let s = sorted(intensities);
    let a = percentile(&s, 1, 10);
    let c = percentile(&s, 6, 10);
    let b = mean_below(&s, c).unwrap_or(a);
    (a, b, c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialLayerFg {
    pub flag: i8,
    pub fg: Vec<f64>,
    /// Locals as stored back into the layer model.
    pub local: ZParams,
}

/// Initial foreground of one layer from its region intensities.
pub fn fg_layer_initial(intensities: &[f64], globals: &GlobalParams) -> InitialLayerFg {
    let (a, b, c) = local_params(intensities);
    if b - globals.a < 0.1 * (globals.c - globals.a) {
        let local = ZParams::new(a, b, c);
        InitialLayerFg {
            flag: 1,
            fg: intensities.iter().map(|&v| z_function(v, &local)).collect(),
            local,
        }
    } else if a > globals.c {
        InitialLayerFg {
            flag: -1,
            fg: vec![0.0; intensities.len()],
            local: ZParams::new(a, b, c),
        }
    } else {
        let local = ZParams::new(a.min(globals.a), b, c.min(globals.c));
        let z = globals.z();
        InitialLayerFg {
            flag: 0,
            fg: intensities.iter().map(|&v| z_function(v, &z)).collect(),
            local,
        }
    }
}

/// Top/bottom weight `max((i - floor(L/2))^2, 1)` for 1-indexed layer `i`.
pub fn edge_layer_weight(i: usize, layer_num: usize) -> f64 {
    let d = i as f64 - (layer_num / 2) as f64;
    (d * d).max(1.0)
}

/// Middle weight `exp(-sqrt(L) / (2 (loop_e - loop_s + 1)))`.
pub fn middle_layer_weight(layer_num: usize, loop_s: usize, loop_e: usize) -> f64 {
    let span = (loop_e + 1).saturating_sub(loop_s).max(1) as f64;
    (-(layer_num as f64).sqrt() / (2.0 * span)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Foreground {
    /// Per-region foreground before layer weighting.
    pub fg: Vec<f64>,
    /// `fg * layer weight`, clamped to `[0,1]`.
    pub w: Vec<f64>,
    pub globals: GlobalParams,
    pub loop_s: usize,
    pub loop_e: usize,
}

/// Final foreground map and layer weights. Updates flags, parts, locals
/// and weights in `layers`.
pub fn fg_final(graph: &RegionSet, layers: &mut LayerModel, cg_literal: bool) -> Foreground {
    let intensity = graph.intensities();
    let globals = global_params(&intensity, cg_literal);
    let layer_num = layers.len();
    let layer_values = |l: &crate::anatomy::Layer, src: &[f64]| -> Vec<f64> {
        l.regions.iter().map(|&r| src[r]).collect()
    };

    let initial: Vec<InitialLayerFg> = layers
        .layers
        .iter()
        .map(|l| fg_layer_initial(&layer_values(l, &intensity), &globals))
        .collect();
    for (l, init) in layers.layers.iter_mut().zip(&initial) {
        l.dark_flag = init.flag;
        l.local = Some(init.local);
    }
    let flags: Vec<i8> = initial.iter().map(|i| i.flag).collect();
    let other_dark = |i: usize| (0..layer_num).any(|j| j != i && flags[j] == 1);

    // 1-indexed walk bounds.
    let half = layer_num.div_ceil(2).max(1);
    let mut loop_e = layer_num;
    let mut loop_s = 1;
    let mut weight = vec![None; layer_num];
    let mut i = layer_num;
    while i >= half && i >= 1 {
        let k = i - 1;
        if flags[k] == 1 && other_dark(k) {
            weight[k] = Some(edge_layer_weight(i, layer_num));
            loop_e -= 1;
            i -= 1;
        } else {
            // A lone dark layer among bright ones also stops here and is
            // re-mapped as a middle layer below.
            break;
        }
    }
    let mut i = 1;
    while i <= half && i <= loop_e {
        let k = i - 1;
        if flags[k] == 1 && other_dark(k) {
            weight[k] = Some(edge_layer_weight(i, layer_num));
            loop_s += 1;
            i += 1;
        } else {
            break;
        }
    }

    let mut fg = vec![0.0; graph.len()];
    for (k, l) in layers.layers.iter().enumerate() {
        if weight[k].is_some() {
            for (&r, &v) in l.regions.iter().zip(&initial[k].fg) {
                fg[r] = v;
            }
        }
    }

    // Middle part: shadow layers are pushed to full brightness before the
    // global breakpoints are recomputed.
    let mut shifted = intensity.clone();
    for (k, l) in layers.layers.iter().enumerate() {
        if weight[k].is_none() && flags[k] == 1 && l.root_row > 2.0 / 3.0 {
            for &r in &l.regions {
                shifted[r] = 1.0;
            }
        }
    }
    let shifted_globals = global_params(&shifted, cg_literal);
    let mid_weight = if layers.fallback {
        1.0
    } else {
        middle_layer_weight(layer_num, loop_s, loop_e)
    };
    for (k, l) in layers.layers.iter_mut().enumerate() {
        if let Some(wt) = weight[k] {
            l.weight = wt;
            l.part = if k + 1 > loop_e { Part::Bottom } else { Part::Top };
            continue;
        }
        let stored = l.local.expect("locals set above");
        let values = layer_values(l, &shifted);
        let params = if flags[k] == 1 {
            let a = shifted_globals.a.max(stored.a());
            let c = shifted_globals.c.max(stored.c());
            ZParams::new(a, 0.5 * (a + c), c)
        } else {
            let a = shifted_globals.a.min(stored.a());
            let c = shifted_globals.c.min(stored.c());
            ZParams::new(a, mean_below(&values, c).unwrap_or(a), c)
        };
        for (&r, &v) in l.regions.iter().zip(&values) {
            fg[r] = z_function(v, &params);
        }
        l.local = Some(params);
        l.weight = mid_weight;
        l.part = Part::Middle;
    }

    let w = (0..graph.len())
        .map(|r| (fg[r] * layers.layers[layers.layer_of[r]].weight).clamp(0.0, 1.0))
        .collect();
    Foreground {
        fg,
        w,
        globals,
        loop_s,
        loop_e,
    }
}

/// Foreground-weighted centre in normalized pixel-centre coordinates.
///
/// `literal` divides by the sum of coordinates instead of the sum of
/// weights (kept for audit; the result is clamped to the unit square).
pub fn adaptive_center(w: &ScalarMap, literal: bool) -> (f64, f64) {
    let (width, height) = (w.width as f64, w.height as f64);
    let (mut sx, mut sy, mut sw, mut cx, mut cy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, &v) in w.data.iter().enumerate() {
        let x = ((p % w.width) as f64 + 0.5) / width;
        let y = ((p / w.width) as f64 + 0.5) / height;
        sx += x * v;
        sy += y * v;
        sw += v;
        cx += x;
        cy += y;
    }
    if sw <= 0.0 {
        return (0.5, 0.5);
    }
    if literal {
        ((sx / cx).clamp(0.0, 1.0), (sy / cy).clamp(0.0, 1.0))
    } else {
        (sx / sw, sy / sw)
    }
}

/// `d_i = exp(-|centroid_i - ac| / sigma3_sq)`.
pub fn distance_map(graph: &RegionSet, ac: (f64, f64), sigma3_sq: f64) -> Vec<f64> {
    graph
        .regions()
        .iter()
        .map(|r| {
            let (dx, dy) = (r.centroid.0 - ac.0, r.centroid.1 - ac.1);
            (-(dx * dx + dy * dy).sqrt() / sigma3_sq).exp()
        })
        .collect()
}

/// `t_i = nc_i^2 * layer weight`, with `nc` the depth-free connectedness to
/// the border regions.
pub fn background_map(graph: &RegionSet, layers: &LayerModel, sigma1_sq: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let nc = nc_propagate(graph, &graph.border_ids(), sigma1_sq, Depth::Disabled)?;
    let t = (0..graph.len())
        .map(|r| (nc.t[r] * nc.t[r] * layers.layers[layers.layer_of[r]].weight).clamp(0.0, 1.0))
        .collect();
    Ok((t, nc.t))
}

/// Dense symmetric smoothness weights `q_ij = r_ij * Dist_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityModel {
    n: usize,
    q: Vec<f64>,
    pub sigma1_sq: f64,
}

impl SimilarityModel {
    pub fn from_dense(n: usize, q: Vec<f64>, sigma1_sq: f64) -> Self {
        assert_eq!(q.len(), n * n, "dense weights must be n x n");
        Self { n, q, sigma1_sq }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_dense(n, vec![0.0; n * n], 0.5)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn dense(&self) -> &[f64] {
        &self.q
    }
}

pub fn smoothness_weights(graph: &RegionSet, sigma1_sq: f64) -> SimilarityModel {
    let r = graph.regions();
    let n = r.len();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let (dx, dy) = (r[i].centroid.0 - r[j].centroid.0, r[i].centroid.1 - r[j].centroid.1);
            let sim = (-(r[i].mean_intensity - r[j].mean_intensity).abs() / sigma1_sq).exp();
            let v = sim * (-(dx * dx + dy * dy).sqrt() / sigma1_sq).exp();
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    SimilarityModel::from_dense(n, q, sigma1_sq)
}

/// The three data-term cues per region.
#[derive(Debug, Clone, PartialEq)]
pub struct CueMaps {
    pub w: Vec<f64>,
    pub d: Vec<f64>,
    pub t: Vec<f64>,
    pub ac: (f64, f64),
}
