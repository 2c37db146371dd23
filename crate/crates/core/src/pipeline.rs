//! End-to-end processing of single images and directories.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::anatomy::{decompose_layers, LayerModel};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{self, PrCurve, ScoreReport};
use crate::imaging::{self, BinaryMask, GrayImage, ScalarMap, MIN_SIDE};
use crate::maps::{self, CueMaps, Foreground};
use crate::solver::{self, SolveReport};
use crate::superpixel::{quick_shift_segment, RegionSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub regions: usize,
    pub layer_count: usize,
    pub sigma2_sq: f64,
    pub adaptation_steps: usize,
    pub layer_fallback: bool,
    pub solver_iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub objective: f64,
    pub seconds: f64,
}

/// Everything computed for one image.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub graph: RegionSet,
    pub layers: LayerModel,
    pub foreground: Foreground,
    pub cues: CueMaps,
    pub solve: SolveReport,
    /// Per-pixel saliency.
    pub saliency: ScalarMap,
    pub diagnostics: Diagnostics,
}

/// Runs every stage on an in-memory image.
pub fn analyze(img: &GrayImage, cfg: &PipelineConfig) -> Result<Analysis> {
    let start = Instant::now();
    if img.width() < MIN_SIDE || img.height() < MIN_SIDE {
        return Err(Error::Format(format!(
            "image is {}x{}, at least {MIN_SIDE}x{MIN_SIDE} required",
            img.width(),
            img.height()
        ))
        .in_stage("load"));
    }
    let graph = quick_shift_segment(img, &cfg.superpixel).map_err(|e| e.in_stage("superpixel"))?;
    if graph.len() < 2 {
        return Err(Error::Internal("segmentation produced a single region".into()).in_stage("superpixel"));
    }
    let mut layers = match decompose_layers(&graph, &cfg.layers) {
        Ok(l) => l,
        Err(Error::Layering(_)) => LayerModel::single_layer(&graph, cfg.layers.sigma2_sq_init),
        Err(e) => return Err(e.in_stage("layers")),
    };
    let foreground = maps::fg_final(&graph, &mut layers, cfg.cg_literal);
    let w_pixels = ScalarMap::new(graph.width(), graph.height(), graph.rasterize(&foreground.w))
        .map_err(|e| e.in_stage("foreground"))?;
    let ac = maps::adaptive_center(&w_pixels, cfg.ac_literal);
    let d = maps::distance_map(&graph, ac, cfg.sigma3_sq);
    let (t, _) = maps::background_map(&graph, &layers, cfg.layers.sigma1_sq).map_err(|e| e.in_stage("background"))?;
    let cues = CueMaps {
        w: foreground.w.clone(),
        d,
        t,
        ac,
    };
    let sim = maps::smoothness_weights(&graph, cfg.layers.sigma1_sq);
    let mut problem =
        solver::assemble_problem_with_floor(&cues, &sim, &graph, cfg.alpha, cfg.gamma, cfg.epsilon_log)
            .map_err(|e| e.in_stage("assembly"))?;
    problem.unit_sum_row = cfg.unit_sum_row;
    let solve = solver::solve_ipm(&problem, &cfg.solver).map_err(|e| e.in_stage("solve"))?;
    let saliency = ScalarMap::new(graph.width(), graph.height(), solve.saliency.rasterize(&graph))
        .map_err(|e| e.in_stage("rasterize"))?;
    let diagnostics = Diagnostics {
        regions: graph.len(),
        layer_count: layers.len(),
        sigma2_sq: layers.sigma2_sq,
        adaptation_steps: layers.adaptation_steps,
        layer_fallback: layers.fallback,
        solver_iterations: solve.iterations,
        converged: solve.converged,
        residual: solve.residual,
        objective: solve.objective,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(Analysis {
        graph,
        layers,
        foreground,
        cues,
        solve,
        saliency,
        diagnostics,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub analysis: Analysis,
    pub score: Option<ScoreReport>,
    pub curve: Option<PrCurve>,
    pub saliency_path: PathBuf,
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Scores an in-memory result.
pub fn score_analysis(a: &Analysis, gt: &BinaryMask) -> Result<(ScoreReport, PrCurve)> {
    Ok((eval::score(&a.saliency, gt)?, eval::pr_curve(&a.saliency, gt)?))
}

fn write_debug(a: &Analysis, img: &GrayImage, dir: &Path, stem: &str) -> Result<()> {
    a.graph.write_label_png(dir.join(format!("{stem}_labels.png")))?;
    a.layers.write_overlay(&a.graph, img, dir.join(format!("{stem}_layers.png")))?;
    for (name, values) in [("w", &a.cues.w), ("d", &a.cues.d), ("t", &a.cues.t)] {
        let map = ScalarMap::new(a.graph.width(), a.graph.height(), a.graph.rasterize(values))?;
        imaging::write_saliency(&map, dir.join(format!("{stem}_{name}.png")))?;
    }
    Ok(())
}

/// Loads, analyzes and writes one image; scores it when `gt` is given.
pub fn run_pipeline(image: &Path, gt: Option<&Path>, cfg: &PipelineConfig) -> Result<RunOutput> {
    let img = imaging::load_image(image).map_err(|e| e.in_stage("load"))?;
    let mask = gt
        .map(|p| imaging::load_mask(p).map_err(|e| e.in_stage("load")))
        .transpose()?;
    if let Some(m) = &mask {
        if !m.same_shape(img.width(), img.height()) {
            return Err(Error::Contract("ground truth and image sizes differ".into()).in_stage("load"));
        }
    }
    let analysis = analyze(&img, cfg)?;
    let dir = &cfg.output_dir;
    let stem = stem_of(image);
    let write = |e: Error| e.in_stage("write");
    ensure_dir(dir).map_err(write)?;
    let saliency_path = dir.join(format!("{stem}_saliency.png"));
    imaging::write_saliency(&analysis.saliency, &saliency_path).map_err(write)?;
    if cfg.emit_debug {
        write_debug(&analysis, &img, dir, &stem).map_err(write)?;
    }
    if cfg.write_trace {
        analysis
            .solve
            .write_trace_csv(dir.join(format!("{stem}_trace.csv")))
            .map_err(write)?;
    }
    let (score, curve) = match &mask {
        Some(m) => {
            let (s, c) = score_analysis(&analysis, m).map_err(|e| e.in_stage("score"))?;
            if cfg.write_curves {
                eval::write_curve_csv(&c, dir.join(format!("{stem}_curve.csv"))).map_err(write)?;
            }
            (Some(s), Some(c))
        }
        None => (None, None),
    };
    Ok(RunOutput {
        analysis,
        score,
        curve,
        saliency_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub file: String,
    pub score: Option<ScoreReport>,
    pub mean_saliency: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    /// Sorted by file name.
    pub images: Vec<ImageResult>,
    /// Means over images with ground truth.
    pub mean: Option<ScoreReport>,
    pub mean_saliency: f64,
    pub curve: Option<PrCurve>,
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "pgm" | "pnm")
    )
}

/// Images in `dir` paired with their ground truth, sorted by name.
pub fn discover(dir: &Path, cfg: &PipelineConfig) -> Result<Vec<(PathBuf, Option<PathBuf>)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for e in entries {
        let e = e.map_err(|e| Error::io(dir, e))?;
        let p = e.path();
        if p.is_file() && is_image(&p) {
            names.push(e.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    let gt_names: std::collections::BTreeSet<String> = names.iter().map(|n| cfg.gt_name(n)).collect();
    let pairs: Vec<_> = names
        .iter()
        .filter(|n| !gt_names.contains(*n))
        .map(|n| {
            let gt = dir.join(cfg.gt_name(n));
            (dir.join(n), gt.is_file().then_some(gt))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::Usage(format!("no images found in {}", dir.display())));
    }
    Ok(pairs)
}

/// Processes every image of `dir` in parallel and writes `scores.csv`,
/// `summary.csv` and `curve.csv` into the output directory.
pub fn batch_evaluate(dir: &Path, cfg: &PipelineConfig) -> Result<BatchSummary> {
    let pairs = discover(dir, cfg)?;
    let runs: Vec<Result<RunOutput>> = pairs
        .par_iter()
        .map(|(img, gt)| run_pipeline(img, gt.as_deref(), cfg))
        .collect();
    let mut images = Vec::with_capacity(runs.len());
    let mut curves = Vec::new();
    for ((path, _), run) in pairs.iter().zip(runs) {
        let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let run = run.map_err(|e| match e {
            Error::Stage { stage, source } => Error::Stage {
                stage,
                source: Box::new(Error::Internal(format!("{file}: {source}"))),
            },
            other => other,
        })?;
        if let Some(c) = run.curve {
            curves.push(c);
        }
        images.push(ImageResult {
            file,
            score: run.score,
            mean_saliency: run.analysis.saliency.mean(),
            diagnostics: run.analysis.diagnostics,
        });
    }
    let scored: Vec<ScoreReport> = images.iter().filter_map(|i| i.score).collect();
    let mean = (!scored.is_empty()).then(|| {
        let k = scored.len() as f64;
        ScoreReport {
            precision: scored.iter().map(|s| s.precision).sum::<f64>() / k,
            recall: scored.iter().map(|s| s.recall).sum::<f64>() / k,
            f_measure: scored.iter().map(|s| s.f_measure).sum::<f64>() / k,
            mae: scored.iter().map(|s| s.mae).sum::<f64>() / k,
        }
    });
    let mean_saliency = images.iter().map(|i| i.mean_saliency).sum::<f64>() / images.len() as f64;
    let curve = eval::mean_curve(&curves);

    let out = &cfg.output_dir;
    ensure_dir(out)?;
    let rows: Vec<_> = images
        .iter()
        .map(|i| (i.file.clone(), i.score, i.mean_saliency))
        .collect();
    eval::write_scores_csv(&rows, out.join("scores.csv"))?;
    let summary_rows = vec![("mean".to_string(), mean, mean_saliency)];
    eval::write_scores_csv(&summary_rows, out.join("summary.csv"))?;
    if let Some(c) = &curve {
        eval::write_curve_csv(c, out.join("curve.csv"))?;
    }
    Ok(BatchSummary {
        images,
        mean,
        mean_saliency,
        curve,
    })
}
