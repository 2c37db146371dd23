//! Flat `key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::path::{Path, PathBuf};

use crate::anatomy::LayerConfig;
use crate::error::{Error, Result};
use crate::solver::{NewtonSystem, SolverConfig, DEFAULT_ALPHA, DEFAULT_EPSILON_LOG, DEFAULT_GAMMA};
use crate::superpixel::QuickShiftConfig;

/// `(line, key, value)` triples in file order.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: `{v}` is not a finite number")))
}

pub(crate) fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x = parse_f64(key, v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Config(format!("{key} must be positive, got {v}")))
    }
}

pub(crate) fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: `{v}` is not a non-negative integer")))
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: `{v}` is not a boolean"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub sigma3_sq: f64,
    pub epsilon_log: f64,
    pub superpixel: QuickShiftConfig,
    /// Carries `sigma1_sq` and `sigma2_sq_init`.
    pub layers: LayerConfig,
    pub solver: SolverConfig,
    /// Upper global breakpoint as the 60th percentile minus the 10th.
    pub cg_literal: bool,
    /// Adaptive centre normalized by the coordinate sum.
    pub ac_literal: bool,
    /// Extra equality row `sum s = 1` in the QP.
    pub unit_sum_row: bool,
    pub emit_debug: bool,
    pub write_trace: bool,
    pub write_curves: bool,
    /// Ground-truth file name pattern; `{stem}` and `{ext}` are substituted.
    pub gt_pattern: String,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            sigma3_sq: 0.1,
            epsilon_log: DEFAULT_EPSILON_LOG,
            superpixel: QuickShiftConfig::default(),
            layers: LayerConfig::default(),
            solver: SolverConfig::default(),
            cg_literal: true,
            ac_literal: false,
            unit_sum_row: false,
            emit_debug: false,
            write_trace: false,
            write_curves: true,
            gt_pattern: "{stem}_GT.{ext}".into(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Documented keys, with the default shown in `--help` style listings.
pub const KEYS: &[(&str, &str)] = &[
    ("alpha", "data-term weight (4)"),
    ("gamma", "foreground log weight, alpha times beta (40)"),
    ("sigma1_sq", "intensity similarity scale (0.5)"),
    ("sigma2_sq_init", "initial depth scale for layering (0.2)"),
    ("sigma3_sq", "distance-map scale (0.1)"),
    ("epsilon_log", "floor applied to cues before logs (1e-6)"),
    ("kernel_sigma", "quick-shift Parzen width in pixels (3)"),
    ("max_dist", "quick-shift link distance in pixels (10)"),
    ("intensity_scale", "quick-shift intensity weight, `auto` = 10*min(w,h)/256"),
    ("coverage_frac", "minimum layer column coverage (0.75)"),
    ("root_link", "strongest-path strength joining adjacent roots (0.9)"),
    ("min_layers", "target minimum layer count (3)"),
    ("max_layers", "target maximum layer count (5)"),
    ("max_adaptation", "cap on depth-scale adaptation steps (8)"),
    ("sigma2_step", "depth-scale adaptation step (0.05)"),
    ("sigma2_min", "lower clamp of the depth scale (0.05)"),
    ("sigma2_max", "upper clamp of the depth scale (0.4)"),
    ("tol", "residual norm sum for convergence (1e-6)"),
    ("max_iter", "interior-point iteration cap (200)"),
    ("barrier_mu", "barrier update factor (10)"),
    ("newton_system", "`reduced` or `full` (reduced)"),
    ("eliminate_border", "drop border variables from the Newton system (true)"),
    ("cg_literal", "upper global breakpoint as p60 - p10 (true)"),
    ("ac_literal", "adaptive centre divided by coordinate sum (false)"),
    ("unit_sum_row", "add the equality sum s = 1 (false)"),
    ("emit_debug", "write label, layer and cue images (false)"),
    ("write_trace", "write the solver iteration trace (false)"),
    ("write_curves", "write P-R curve files when ground truth exists (true)"),
    ("gt_pattern", "ground-truth file name pattern ({stem}_GT.{ext})"),
    ("output_dir", "directory for results (out)"),
];

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, k, v) in parse_kv(text)? {
            cfg.set(&k, &v)
                .map_err(|e| Error::Config(format!("line {line}: {}", e.root())))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one override.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = parse_positive(key, v)?,
            "gamma" => self.gamma = parse_positive(key, v)?,
            "sigma1_sq" => self.layers.sigma1_sq = parse_positive(key, v)?,
            "sigma2_sq_init" => self.layers.sigma2_sq_init = parse_positive(key, v)?,
            "sigma3_sq" => self.sigma3_sq = parse_positive(key, v)?,
            "epsilon_log" => self.epsilon_log = parse_positive(key, v)?,
            "kernel_sigma" => self.superpixel.kernel_sigma = parse_positive(key, v)?,
            "max_dist" => self.superpixel.max_dist = parse_positive(key, v)?,
            "intensity_scale" => {
                self.superpixel.intensity_scale = if v == "auto" {
                    None
                } else {
                    Some(parse_positive(key, v)?)
                }
            }
            "coverage_frac" => self.layers.coverage_frac = parse_positive(key, v)?,
            "root_link" => self.layers.root_link = parse_positive(key, v)?,
            "min_layers" => self.layers.min_layers = parse_usize(key, v)?,
            "max_layers" => self.layers.max_layers = parse_usize(key, v)?,
            "max_adaptation" => self.layers.max_adaptation = parse_usize(key, v)?,
            "sigma2_step" => self.layers.sigma2_step = parse_positive(key, v)?,
            "sigma2_min" => self.layers.sigma2_min = parse_positive(key, v)?,
            "sigma2_max" => self.layers.sigma2_max = parse_positive(key, v)?,
            "tol" => self.solver.tol = parse_positive(key, v)?,
            "max_iter" => self.solver.max_iter = parse_usize(key, v)?,
            "barrier_mu" => self.solver.barrier_mu = parse_positive(key, v)?,
            "newton_system" => {
                self.solver.system = match v {
                    "full" => NewtonSystem::Full,
                    "reduced" => NewtonSystem::Reduced,
                    _ => return Err(Error::Config(format!("{key}: expected `full` or `reduced`"))),
                }
            }
            "eliminate_border" => self.solver.eliminate_border = parse_bool(key, v)?,
            "cg_literal" => self.cg_literal = parse_bool(key, v)?,
            "ac_literal" => self.ac_literal = parse_bool(key, v)?,
            "unit_sum_row" => self.unit_sum_row = parse_bool(key, v)?,
            "emit_debug" => self.emit_debug = parse_bool(key, v)?,
            "write_trace" => self.write_trace = parse_bool(key, v)?,
            "write_curves" => self.write_curves = parse_bool(key, v)?,
            "gt_pattern" => self.gt_pattern = v.to_string(),
            "output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.layers;
        if l.min_layers == 0 || l.min_layers > l.max_layers {
            return Err(Error::Config("need 1 <= min_layers <= max_layers".into()));
        }
        if l.sigma2_min > l.sigma2_max {
            return Err(Error::Config("sigma2_min exceeds sigma2_max".into()));
        }
        if l.coverage_frac >= 1.0 {
            return Err(Error::Config("coverage_frac must be below 1".into()));
        }
        if l.root_link > 1.0 {
            return Err(Error::Config("root_link must be at most 1".into()));
        }
        if self.epsilon_log >= 1.0 {
            return Err(Error::Config("epsilon_log must be below 1".into()));
        }
        if !self.gt_pattern.contains("{stem}") {
            return Err(Error::Config("gt_pattern must contain {stem}".into()));
        }
        Ok(())
    }

    /// Ground-truth file name for an image file name.
    pub fn gt_name(&self, image_file: &str) -> String {
        let (stem, ext) = image_file.rsplit_once('.').unwrap_or((image_file, ""));
        self.gt_pattern.replace("{stem}", stem).replace("{ext}", ext)
    }
}
