use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tumor_saliency::config::{self, PipelineConfig};
use tumor_saliency::imaging::{write_mask, write_saliency, ScalarMap};
use tumor_saliency::phantom::{generate_phantom, PhantomSpec};
use tumor_saliency::pipeline::{batch_evaluate, run_pipeline};
use tumor_saliency::Error;

#[derive(Parser)]
#[command(name = "tumor-saliency", version, about = "Tumor saliency estimation for breast ultrasound images")]
struct Cli {
    /// Also write label, layer and W/D/T cue images.
    #[arg(long, global = true)]
    emit_debug: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one configuration key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate saliency for one image.
    Run {
        image: PathBuf,
        /// Ground-truth mask; enables scoring.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Process every image of a directory; masks are found by name pattern.
    Batch {
        dir: PathBuf,
        /// Ground-truth name pattern, e.g. `{stem}_mask.{ext}`.
        #[arg(long)]
        gt_pattern: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Render a synthetic phantom and its mask.
    Phantom {
        /// Phantom spec file; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// File stem for the outputs.
        #[arg(long, default_value = "phantom")]
        name: String,
    },
    /// List configuration keys.
    Keys,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Usage(_) | Error::Config(_) | Error::Spec(_) => 1,
        Error::Io { .. } | Error::Format(_) => 2,
        _ => 3,
    }
}

fn load_config(common: &Common, emit_debug: bool) -> Result<PipelineConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects key=value, got `{o}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.emit_debug |= emit_debug;
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_score(s: &tumor_saliency::eval::ScoreReport) -> String {
    format!(
        "precision={:.4} recall={:.4} f_measure={:.4} mae={:.4}",
        s.precision, s.recall, s.f_measure, s.mae
    )
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { image, gt, common } => {
            let cfg = load_config(&common, cli.emit_debug)?;
            let out = run_pipeline(&image, gt.as_deref(), &cfg)?;
            let d = &out.analysis.diagnostics;
            println!("saliency: {}", out.saliency_path.display());
            println!(
                "regions={} layers={} sigma2_sq={:.3} adaptation_steps={} fallback={} iterations={} converged={} residual={:.3e} seconds={:.2}",
                d.regions, d.layer_count, d.sigma2_sq, d.adaptation_steps, d.layer_fallback,
                d.solver_iterations, d.converged, d.residual, d.seconds
            );
            if !d.converged {
                eprintln!("warning: solver stopped without reaching the residual tolerance");
            }
            if let Some(s) = &out.score {
                println!("{}", fmt_score(s));
            }
        }
        Command::Batch { dir, gt_pattern, common } => {
            let mut cfg = load_config(&common, cli.emit_debug)?;
            if let Some(p) = gt_pattern {
                cfg.set("gt_pattern", &p)?;
                cfg.validate()?;
            }
            let summary = batch_evaluate(&dir, &cfg)?;
            for i in &summary.images {
                let score = i.score.as_ref().map(fmt_score).unwrap_or_else(|| "no ground truth".into());
                println!(
                    "{}: {} mean_saliency={:.4} layers={} converged={}",
                    i.file, score, i.mean_saliency, i.diagnostics.layer_count, i.diagnostics.converged
                );
            }
            if let Some(m) = &summary.mean {
                println!("mean: {}", fmt_score(m));
            }
            println!("results: {}", cfg.output_dir.display());
        }
        Command::Phantom { spec, out, name } => {
            let spec = match spec {
                Some(p) => PhantomSpec::from_text(&config::read_text(&p)?)?,
                None => PhantomSpec::default(),
            };
            let (img, mask) = generate_phantom(&spec)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let image_path = out.join(format!("{name}.png"));
            let map = ScalarMap::new(img.width(), img.height(), img.data().to_vec())?;
            write_saliency(&map, &image_path)?;
            let gt_path = out.join(PipelineConfig::default().gt_name(&format!("{name}.png")));
            write_mask(&mask, &gt_path)?;
            println!("image: {}", image_path.display());
            println!("mask: {}", gt_path.display());
        }
        Command::Keys => {
            for (k, doc) in config::KEYS {
                println!("{k:<18} {doc}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
