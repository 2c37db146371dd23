//! Scores for saliency maps against binary ground truth.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ScalarMap};

pub const THETA_SQ: f64 = 0.3;
pub const CURVE_POINTS: usize = 256;

/// Pixels at or above `min(2 * mean, 1 - 1e-12)`; an all-zero map gives an
/// empty mask.
pub fn binarize_adaptive(map: &ScalarMap) -> BinaryMask {
    let mean = map.mean();
    if map.data.iter().all(|&v| v == 0.0) {
        return BinaryMask::empty(map.width, map.height);
    }
    let threshold = (2.0 * mean).min(1.0 - 1e-12);
    let data = map.data.iter().map(|&v| v >= threshold).collect();
    BinaryMask::new(map.width, map.height, data).expect("shape taken from the map")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

fn check_shape(width: usize, height: usize, gt: &BinaryMask) -> Result<()> {
    if gt.same_shape(width, height) {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "ground truth is {}x{}, map is {width}x{height}",
            gt.width(),
            gt.height()
        )))
    }
}

fn ratios(hit: usize, selected: usize, truth: usize) -> PrecisionRecall {
    let precision = if selected == 0 {
        if truth == 0 { 1.0 } else { 0.0 }
    } else {
        hit as f64 / selected as f64
    };
    let recall = if truth == 0 {
        if selected == 0 { 1.0 } else { 0.0 }
    } else {
        hit as f64 / truth as f64
    };
    PrecisionRecall { precision, recall }
}

pub fn precision_recall(sm: &BinaryMask, gt: &BinaryMask) -> Result<PrecisionRecall> {
    check_shape(sm.width(), sm.height(), gt)?;
    let hit = sm.data().iter().zip(gt.data()).filter(|(a, b)| **a && **b).count();
    Ok(ratios(hit, sm.count(), gt.count()))
}

pub fn f_measure(precision: f64, recall: f64, theta_sq: f64) -> f64 {
    let den = theta_sq * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + theta_sq) * precision * recall / den
    }
}

/// Mean absolute per-pixel difference.
pub fn mae(map: &ScalarMap, gt: &BinaryMask) -> Result<f64> {
    check_shape(map.width, map.height, gt)?;
    let sum: f64 = map
        .data
        .iter()
        .zip(gt.data())
        .map(|(&s, &g)| (s - f64::from(u8::from(g))).abs())
        .sum();
    Ok(sum / map.data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Indexed by threshold `0..=255`.
    pub points: Vec<PrecisionRecall>,
}

/// Precision/recall of `S * 255 >= t` for `t = 0..=255`.
pub fn pr_curve(map: &ScalarMap, gt: &BinaryMask) -> Result<PrCurve> {
    check_shape(map.width, map.height, gt)?;
    // Histogram by the largest threshold each pixel passes.
    let mut all = [0usize; CURVE_POINTS];
    let mut fg = [0usize; CURVE_POINTS];
    for (&s, &g) in map.data.iter().zip(gt.data()) {
        let scaled = s * 255.0;
        let top = if scaled >= 255.0 { 255 } else { scaled.floor().max(0.0) as usize };
        // `floor` can disagree with `>=` right at integers from rounding.
        let top = if (top as f64) > scaled { top - 1 } else { top };
        all[top] += 1;
        if g {
            fg[top] += 1;
        }
    }
    let truth = gt.count();
    let mut points = vec![PrecisionRecall { precision: 0.0, recall: 0.0 }; CURVE_POINTS];
    let (mut sel, mut hit) = (0, 0);
    for t in (0..CURVE_POINTS).rev() {
        sel += all[t];
        hit += fg[t];
        points[t] = ratios(hit, sel, truth);
    }
    Ok(PrCurve { points })
}

/// Pointwise mean of several curves.
pub fn mean_curve(curves: &[PrCurve]) -> Option<PrCurve> {
    if curves.is_empty() {
        return None;
    }
    let k = curves.len() as f64;
    let points = (0..CURVE_POINTS)
        .map(|t| PrecisionRecall {
            precision: curves.iter().map(|c| c.points[t].precision).sum::<f64>() / k,
            recall: curves.iter().map(|c| c.points[t].recall).sum::<f64>() / k,
        })
        .collect();
    Some(PrCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub mae: f64,
}

/// Adaptive-threshold precision, recall, F and MAE.
pub fn score(map: &ScalarMap, gt: &BinaryMask) -> Result<ScoreReport> {
    let pr = precision_recall(&binarize_adaptive(map), gt)?;
    Ok(ScoreReport {
        precision: pr.precision,
        recall: pr.recall,
        f_measure: f_measure(pr.precision, pr.recall, THETA_SQ),
        mae: mae(map, gt)?,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(curve: &PrCurve, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("threshold,precision,recall\n");
    for (t, p) in curve.points.iter().enumerate() {
        out.push_str(&format!("{t},{:.6},{:.6}\n", p.precision, p.recall));
    }
    write_text(path.as_ref(), &out)
}

/// One row per image: `file,precision,recall,f_measure,mae,mean_saliency`.
/// Images without ground truth leave the score columns empty.
pub fn write_scores_csv(
    rows: &[(String, Option<ScoreReport>, f64)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::from("file,precision,recall,f_measure,mae,mean_saliency\n");
    for (name, rep, mean) in rows {
        match rep {
            Some(r) => out.push_str(&format!(
                "{name},{:.6},{:.6},{:.6},{:.6},{mean:.6}\n",
                r.precision, r.recall, r.f_measure, r.mae
            )),
            None => out.push_str(&format!("{name},,,,,{mean:.6}\n")),
        }
    }
    write_text(path.as_ref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, data: Vec<f64>) -> ScalarMap {
        ScalarMap::new(w, h, data).unwrap()
    }

    fn mask(w: usize, h: usize, data: Vec<bool>) -> BinaryMask {
        BinaryMask::new(w, h, data).unwrap()
    }

    /// Pixel-by-pixel counts for one threshold.
    fn brute_pr(s: &[f64], g: &[bool], t: usize) -> (f64, f64) {
        let sel: Vec<bool> = s.iter().map(|&v| v * 255.0 >= t as f64).collect();
        let mut hit = 0;
        let mut nsel = 0;
        let mut ngt = 0;
        for i in 0..s.len() {
            if sel[i] {
                nsel += 1;
            }
            if g[i] {
                ngt += 1;
            }
            if sel[i] && g[i] {
                hit += 1;
            }
        }
        let p = match (nsel, ngt) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            _ => hit as f64 / nsel as f64,
        };
        let r = match (ngt, nsel) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            _ => hit as f64 / ngt as f64,
        };
        (p, r)
    }

    #[test]
    fn adaptive_threshold_examples() {
        assert_eq!(binarize_adaptive(&map(2, 2, vec![0.0; 4])).count(), 0);
        let mut v = vec![0.1; 90];
        v.extend(vec![0.9; 10]);
        let m = binarize_adaptive(&map(10, 10, v.clone()));
        assert_eq!(m.count(), 10);
        assert!(m.data().iter().zip(&v).all(|(&b, &x)| b == (x == 0.9)));
        assert_eq!(binarize_adaptive(&map(3, 3, vec![0.4; 9])).count(), 0);
    }

    #[test]
    fn precision_recall_examples() {
        let gt = mask(4, 1, vec![true, true, false, false]);
        assert_eq!(
            precision_recall(&gt, &gt).unwrap(),
            PrecisionRecall { precision: 1.0, recall: 1.0 }
        );
        let sm = mask(4, 1, vec![true, true, true, true]);
        assert_eq!(
            precision_recall(&sm, &gt).unwrap(),
            PrecisionRecall { precision: 0.5, recall: 1.0 }
        );
        let disjoint = mask(4, 1, vec![false, false, true, true]);
        assert_eq!(
            precision_recall(&disjoint, &gt).unwrap(),
            PrecisionRecall { precision: 0.0, recall: 0.0 }
        );
        let empty = BinaryMask::empty(4, 1);
        assert_eq!(
            precision_recall(&empty, &empty).unwrap(),
            PrecisionRecall { precision: 1.0, recall: 1.0 }
        );
        assert_eq!(precision_recall(&empty, &gt).unwrap().precision, 0.0);
        assert_eq!(precision_recall(&sm, &empty).unwrap().recall, 0.0);
        assert!(matches!(
            precision_recall(&BinaryMask::empty(2, 2), &gt),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn f_measure_examples() {
        assert_eq!(f_measure(1.0, 1.0, THETA_SQ), 1.0);
        assert!((f_measure(0.8, 0.4, THETA_SQ) - 0.65).abs() < 1e-12);
        assert_eq!(f_measure(0.0, 0.0, THETA_SQ), 0.0);
    }

    #[test]
    fn mae_examples() {
        let gt = mask(2, 2, vec![true, true, false, false]);
        let exact = map(2, 2, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(mae(&exact, &gt).unwrap(), 0.0);
        let full = mask(2, 2, vec![true; 4]);
        assert_eq!(mae(&map(2, 2, vec![0.0; 4]), &full).unwrap(), 1.0);
        assert_eq!(mae(&map(2, 2, vec![0.5; 4]), &gt).unwrap(), 0.5);
    }

    #[test]
    fn curve_examples() {
        let gt = mask(2, 2, vec![true, false, false, true]);
        let s = map(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let c = pr_curve(&s, &gt).unwrap();
        assert_eq!(c.points.len(), CURVE_POINTS);
        assert_eq!(c.points[0].recall, 1.0);
        for t in 1..CURVE_POINTS {
            assert_eq!(c.points[t], PrecisionRecall { precision: 1.0, recall: 1.0 });
        }
    }

    #[test]
    fn curve_at_exact_levels() {
        // Values landing exactly on k/255 pass threshold k.
        let data: Vec<f64> = (0..16).map(|k| (k * 17) as f64 / 255.0).collect();
        let gt = mask(4, 4, (0..16).map(|k| k % 3 == 0).collect());
        let s = map(4, 4, data.clone());
        let c = pr_curve(&s, &gt).unwrap();
        for t in 0..CURVE_POINTS {
            let (p, r) = brute_pr(&data, gt.data(), t);
            assert_eq!((c.points[t].precision, c.points[t].recall), (p, r), "t = {t}");
        }
    }

    #[test]
    fn mean_curve_of_equals() {
        let gt = mask(2, 2, vec![true, false, false, false]);
        let c = pr_curve(&map(2, 2, vec![0.9, 0.2, 0.1, 0.0]), &gt).unwrap();
        assert_eq!(mean_curve(&[c.clone(), c.clone(), c.clone()]).unwrap(), c);
        assert!(mean_curve(&[]).is_none());
    }

    fn saliency_and_gt() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (
            prop::collection::vec(
                prop_oneof![0.0..=1.0f64, (0u32..=255).prop_map(|k| f64::from(k) / 255.0)],
                64,
            ),
            prop::collection::vec(any::<bool>(), 64),
        )
    }

    proptest! {
        #[test]
        fn metrics_match_pixel_counting((s, g) in saliency_and_gt()) {
            let sm = map(8, 8, s.clone());
            let gt = mask(8, 8, g.clone());
            let curve = pr_curve(&sm, &gt).unwrap();
            let mut prev_recall = f64::INFINITY;
            for t in 0..CURVE_POINTS {
                let (p, r) = brute_pr(&s, &g, t);
                prop_assert_eq!(curve.points[t].precision, p);
                prop_assert_eq!(curve.points[t].recall, r);
                prop_assert!(r <= prev_recall);
                prev_recall = r;
            }
            let mean = s.iter().sum::<f64>() / 64.0;
            let th = (2.0 * mean).min(1.0 - 1e-12);
            let bin: Vec<bool> = s.iter().map(|&v| mean > 0.0 && v >= th).collect();
            let got = binarize_adaptive(&sm);
            prop_assert_eq!(got.data(), &bin[..]);
            let m: f64 = s.iter().zip(&g).map(|(&v, &b)| (v - if b { 1.0 } else { 0.0 }).abs()).sum::<f64>() / 64.0;
            prop_assert_eq!(mae(&sm, &gt).unwrap(), m);
        }

        #[test]
        fn f_measure_identity(p in 0.0..=1.0f64, theta in 0.01..10.0f64) {
            prop_assert!((f_measure(p, p, theta) - p).abs() < 1e-12);
        }
    }
}
