use std::path::Path;
use std::process::{Command, Output};

use tumor_saliency::imaging::{load_image, load_mask};
use tumor_saliency::phantom::PhantomSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tumor-saliency"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_spec(seed: u64, tumor: bool) -> PhantomSpec {
    let mut s = PhantomSpec::default();
    s.width = 128;
    s.height = 128;
    s.noise.seed = seed;
    if !tumor {
        s.tumor = None;
    }
    s
}

fn render(dir: &Path, name: &str, spec: &PhantomSpec) {
    let spec_path = dir.join(format!("{name}.spec"));
    std::fs::write(&spec_path, spec.to_text()).unwrap();
    let o = run(&[
        "phantom",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--name",
        name,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::remove_file(spec_path).unwrap();
}

#[test]
fn phantom_writes_image_and_gt_mask() {
    let tmp = tempfile::tempdir().unwrap();
    render(tmp.path(), "p", &small_spec(3, true));
    let img = load_image(tmp.path().join("p.png")).unwrap();
    let mask = load_mask(tmp.path().join("p_GT.png")).unwrap();
    assert_eq!((img.width(), img.height()), (128, 128));
    assert!(mask.same_shape(128, 128));
    assert!(mask.count() > 0);
}

#[test]
fn run_writes_saliency_and_scores() {
    let tmp = tempfile::tempdir().unwrap();
    render(tmp.path(), "p", &small_spec(4, true));
    let out = tmp.path().join("res");
    let o = run(&[
        "run",
        tmp.path().join("p.png").to_str().unwrap(),
        "--gt",
        tmp.path().join("p_GT.png").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("f_measure="), "{text}");
    assert!(text.contains("layers="), "{text}");
    assert!(out.join("p_saliency.png").is_file());
    assert!(out.join("p_curve.csv").is_file());
    assert!(!out.join("p_labels.png").exists());
}

#[test]
fn emit_debug_writes_cue_images() {
    let tmp = tempfile::tempdir().unwrap();
    render(tmp.path(), "p", &small_spec(5, true));
    let out = tmp.path().join("res");
    let o = run(&[
        "--emit-debug",
        "run",
        tmp.path().join("p.png").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "write_trace=true",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for suffix in ["labels", "layers", "w", "d", "t"] {
        assert!(out.join(format!("p_{suffix}.png")).is_file(), "{suffix}");
    }
    let trace = std::fs::read_to_string(out.join("p_trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn run_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    render(tmp.path(), "p", &small_spec(6, true));
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("res{k}"));
        let o = run(&[
            "run",
            tmp.path().join("p.png").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outputs.push(std::fs::read(out.join("p_saliency.png")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn batch_lists_images_in_name_order_and_skips_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    render(&data, "b", &small_spec(7, true));
    render(&data, "a", &small_spec(8, false));
    std::fs::remove_file(data.join("a_GT.png")).unwrap();
    let out = tmp.path().join("res");
    let o = run(&["batch", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let a = text.find("a.png:").expect("a listed");
    let b = text.find("b.png:").expect("b listed");
    assert!(a < b);
    assert!(!text.contains("b_GT.png:"));
    assert!(text[a..b].contains("no ground truth"));
    assert!(text.contains("mean: precision="));

    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    let rows: Vec<&str> = scores.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("a.png"));
    assert!(rows[1].starts_with("b.png"));
    assert!(out.join("summary.csv").is_file());
    assert!(out.join("curve.csv").is_file());
}

#[test]
fn batch_honours_gt_pattern() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    render(&data, "c", &small_spec(9, true));
    std::fs::rename(data.join("c_GT.png"), data.join("c_mask.png")).unwrap();
    let out = tmp.path().join("res");
    let o = run(&[
        "batch",
        data.to_str().unwrap(),
        "--gt-pattern",
        "{stem}_mask.{ext}",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("c.png: precision="), "{text}");
    assert!(!text.contains("c_mask.png:"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    render(tmp.path(), "p", &small_spec(10, true));
    let img = tmp.path().join("p.png");
    let o = run(&["run", img.to_str().unwrap(), "--set", "sigma1_sq"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["run", img.to_str().unwrap(), "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["run", img.to_str().unwrap(), "--set", "gt_pattern=x.png"]);
    assert_eq!(o.status.code(), Some(1));
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(run(&["batch", empty.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn io_and_format_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.png");
    let o = run(&["run", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let junk = tmp.path().join("junk.png");
    std::fs::write(&junk, b"not an image").unwrap();
    assert_eq!(run(&["run", junk.to_str().unwrap()]).status.code(), Some(2));

    let tiny = tmp.path().join("tiny.png");
    image::GrayImage::new(4, 4).save(&tiny).unwrap();
    assert_eq!(run(&["run", tiny.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn mismatched_ground_truth_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    render(tmp.path(), "p", &small_spec(11, true));
    let gt = tmp.path().join("other_GT.png");
    image::GrayImage::new(64, 64).save(&gt).unwrap();
    let o = run(&[
        "run",
        tmp.path().join("p.png").to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--out",
        tmp.path().join("res").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn keys_lists_every_config_key() {
    let o = run(&["keys"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (k, _) in tumor_saliency::config::KEYS {
        assert!(text.lines().any(|l| l.starts_with(k)), "{k}");
    }
}

#[test]
fn config_file_is_applied() {
    let tmp = tempfile::tempdir().unwrap();
    render(tmp.path(), "p", &small_spec(12, true));
    let out = tmp.path().join("from_config");
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, format!("# test\noutput_dir = {}\nwrite_trace = true\n", out.display())).unwrap();
    let o = run(&["run", tmp.path().join("p.png").to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("p_saliency.png").is_file());
    assert!(out.join("p_trace.csv").is_file());
}
