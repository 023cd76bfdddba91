//! Segment-based state mAP, mean part segmentation accuracy and recall@K.

use std::fmt::Write as _;

use crate::data::{PartLabelMap, PartStateSchema, PartStateVector};
use crate::error::{Error, Result};

/// |a∩b| / |a∪b|; two empty masks give 0.
pub fn iou(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("iou", format!("mask sizes {} and {}", a.len(), b.len())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub image: usize,
    pub score: f64,
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub image: usize,
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    /// (recall, precision) at each distinct score, highest first.
    pub points: Vec<(f64, f64)>,
    pub average_precision: f64,
}

/// Greedy matching in descending score order (ties keep input order); a
/// detection is a hit when its best unmatched ground truth in the same image
/// has IoU strictly above `iou_threshold`. The curve has one point per
/// distinct score and AP integrates its all-points interpolated precision
/// envelope.
pub fn average_precision(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    iou_threshold: f64,
) -> Result<PrCurve> {
    if detections.iter().any(|d| !d.score.is_finite()) {
        return Err(Error::NonFinite {
            op: "average_precision",
        });
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));

    let mut matched = vec![false; ground_truths.len()];
    let mut points = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        let d = &detections[i];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in ground_truths.iter().enumerate() {
            if gt.image != d.image || matched[gi] {
                continue;
            }
            let o = iou(&d.mask, &gt.mask)?;
            if best.map_or(true, |(_, b)| o > b) {
                best = Some((gi, o));
            }
        }
        if let Some((gi, o)) = best {
            if o > iou_threshold {
                matched[gi] = true;
                tp += 1;
            }
        }
        // A threshold cannot split a group of tied scores.
        if order.get(rank + 1).is_some_and(|&n| detections[n].score == d.score) {
            continue;
        }
        let recall = if ground_truths.is_empty() { 0.0 } else { tp as f64 / ground_truths.len() as f64 };
        points.push((recall, tp as f64 / (rank + 1) as f64));
    }

    let average_precision = if ground_truths.is_empty() {
        if detections.is_empty() { 1.0 } else { 0.0 }
    } else {
        let mut ap = 0.0;
        let mut envelope = 0.0f64;
        let mut upper = None;
        for &(r, p) in points.iter().rev() {
            envelope = envelope.max(p);
            if let Some((ru, pu)) = upper {
                if r < ru {
                    ap += (ru - r) * pu;
                }
            }
            upper = Some((r, envelope));
        }
        if let Some((r, p)) = upper {
            ap += r * p;
        }
        ap
    };
    Ok(PrCurve {
        points,
        average_precision,
    })
}

/// One evaluated image: a part label map plus per-bin state scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSample {
    pub labels: PartLabelMap,
    pub state_scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapReport {
    /// None for bins with no ground-truth instance.
    pub per_bin: Vec<Option<f64>>,
    pub map: f64,
}

/// For every state bin of part p, each image whose predicted p-mask is
/// nonempty and whose score for that bin is positive contributes one
/// detection; ground truths are the GT p-masks of images with the bin set.
pub fn part_state_map(
    predictions: &[ScoredSample],
    ground_truth: &[(PartLabelMap, PartStateVector)],
    schema: &PartStateSchema,
) -> Result<MapReport> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::dim(
            "part_state_map",
            format!("{} predictions for {} ground truths", predictions.len(), ground_truth.len()),
        ));
    }
    let d = schema.total_state_bins();
    for (i, (p, (gl, gs))) in predictions.iter().zip(ground_truth).enumerate() {
        if p.state_scores.len() != d || gs.len() != d {
            return Err(Error::SchemaMismatch(format!(
                "image {i}: expected {d} state bins, got {} predicted and {} ground truth",
                p.state_scores.len(),
                gs.len()
            )));
        }
        if (p.labels.height(), p.labels.width()) != (gl.height(), gl.width()) {
            return Err(Error::dim("part_state_map", format!("image {i}: label map size differs")));
        }
        let k = schema.num_parts() as u8;
        if p.labels.max_label() > k || gl.max_label() > k {
            return Err(Error::SchemaMismatch(format!("image {i}: part id above {k}")));
        }
    }

    let mut per_bin = Vec::with_capacity(d);
    for bin in 0..d {
        let part = schema.part_of_bin(bin);
        let detections: Vec<Detection> = predictions
            .iter()
            .enumerate()
            .filter(|(_, p)| p.state_scores[bin] > 0.0 && p.labels.count(part) > 0)
            .map(|(i, p)| Detection {
                image: i,
                score: p.state_scores[bin],
                mask: p.labels.mask(part),
            })
            .collect();
        let gts: Vec<GroundTruth> = ground_truth
            .iter()
            .enumerate()
            .filter(|(_, (_, s))| s.get(bin))
            .map(|(i, (l, _))| GroundTruth {
                image: i,
                mask: l.mask(part),
            })
            .collect();
        per_bin.push(if gts.is_empty() {
            None
        } else {
            Some(average_precision(&detections, &gts, 0.5)?.average_precision)
        });
    }
    let present: Vec<f64> = per_bin.iter().flatten().copied().collect();
    let map = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    Ok(MapReport { per_bin, map })
}

fn class_counts(pred: &PartLabelMap, gt: &PartLabelMap, hits: &mut [usize], totals: &mut [usize]) -> Result<()> {
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(Error::dim(
            "seg_accuracy",
            format!(
                "{}×{} prediction for {}×{} ground truth",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            ),
        ));
    }
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        let g = g as usize;
        if g == 0 {
            continue;
        }
        if g >= totals.len() {
            return Err(Error::SchemaMismatch(format!("part id {g} above {}", totals.len() - 1)));
        }
        totals[g] += 1;
        hits[g] += (p as usize == g) as usize;
    }
    Ok(())
}

fn mean_class_accuracy(hits: &[usize], totals: &[usize]) -> f64 {
    let accs: Vec<f64> = hits
        .iter()
        .zip(totals)
        .filter(|(_, &t)| t > 0)
        .map(|(&h, &t)| h as f64 / t as f64)
        .collect();
    if accs.is_empty() {
        1.0
    } else {
        accs.iter().sum::<f64>() / accs.len() as f64
    }
}

/// Mean over part classes present in `gt` of |pred=c ∧ gt=c| / |gt=c|.
/// An image without parts scores 1.
pub fn seg_accuracy(pred: &PartLabelMap, gt: &PartLabelMap) -> Result<f64> {
    let k = pred.max_label().max(gt.max_label()) as usize;
    let (mut hits, mut totals) = (vec![0; k + 1], vec![0; k + 1]);
    class_counts(pred, gt, &mut hits, &mut totals)?;
    Ok(mean_class_accuracy(&hits, &totals))
}

/// Dataset version: per-class pixel counts are pooled over all images
/// before averaging across classes.
pub fn dataset_seg_accuracy(pairs: &[(&PartLabelMap, &PartLabelMap)], num_parts: usize) -> Result<f64> {
    let (mut hits, mut totals) = (vec![0; num_parts + 1], vec![0; num_parts + 1]);
    for (pred, gt) in pairs {
        class_counts(pred, gt, &mut hits, &mut totals)?;
    }
    Ok(mean_class_accuracy(&hits, &totals))
}

/// Fraction of all ground-truth items that appear in the top `k` of their
/// image's ranked list.
pub fn recall_at_k<T: PartialEq>(ranked: &[Vec<T>], ground_truth: &[Vec<T>], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("recall@k needs k ≥ 1".into()));
    }
    if ranked.len() != ground_truth.len() {
        return Err(Error::dim(
            "recall_at_k",
            format!("{} ranked lists for {} images", ranked.len(), ground_truth.len()),
        ));
    }
    let total: usize = ground_truth.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::InvalidTarget {
            op: "recall_at_k".into(),
            detail: "no ground-truth items".into(),
        });
    }
    let found: usize = ranked
        .iter()
        .zip(ground_truth)
        .map(|(r, g)| {
            let top = &r[..k.min(r.len())];
            g.iter().filter(|x| top.contains(x)).count()
        })
        .sum();
    Ok(found as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub bins: Vec<(String, String)>,
    pub map: MapReport,
    pub seg_acc: f64,
}

impl EvalReport {
    pub fn evaluate(
        predictions: &[ScoredSample],
        ground_truth: &[(PartLabelMap, PartStateVector)],
        schema: &PartStateSchema,
    ) -> Result<Self> {
        let map = part_state_map(predictions, ground_truth, schema)?;
        let pairs: Vec<_> = predictions.iter().zip(ground_truth).map(|(p, (g, _))| (&p.labels, g)).collect();
        let seg_acc = dataset_seg_accuracy(&pairs, schema.num_parts())?;
        let bins = (0..schema.total_state_bins())
            .map(|b| {
                let (part, phrase) = schema.bin_label(b);
                (part.to_string(), phrase.to_string())
            })
            .collect();
        Ok(EvalReport { bins, map, seg_acc })
    }

    pub fn summary_line(&self) -> String {
        format!("mAP={:.4} seg_acc={:.4}", self.map.map, self.seg_acc)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for ((part, phrase), ap) in self.bins.iter().zip(&self.map.per_bin) {
            let ap = ap.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            writeln!(s, "{part:<12} {phrase:<16} {ap}").unwrap();
        }
        writeln!(s, "{}", self.summary_line()).unwrap();
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("part,state,ap\n");
        for ((part, phrase), ap) in self.bins.iter().zip(&self.map.per_bin) {
            writeln!(s, "{part},{phrase},{}", ap.map_or(String::new(), |v| v.to_string())).unwrap();
        }
        writeln!(s, "mAP,,{}", self.map.map).unwrap();
        writeln!(s, "seg_acc,,{}", self.seg_acc).unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: usize, h: usize, x0: usize, y0: usize, rw: usize, rh: usize) -> Vec<bool> {
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                (x0..x0 + rw).contains(&x) && (y0..y0 + rh).contains(&y)
            })
            .collect()
    }

    #[test]
    fn iou_cases() {
        let a = rect(8, 8, 0, 0, 4, 2);
        let b = rect(8, 8, 2, 0, 4, 2);
        assert!((iou(&a, &b).unwrap() - 4.0 / 12.0).abs() < 1e-12);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &rect(8, 8, 5, 5, 2, 2)).unwrap(), 0.0);
        assert_eq!(iou(&[false; 4], &[false; 4]).unwrap(), 0.0);
        assert!(iou(&a, &[true]).is_err());
    }

    #[test]
    fn ap_single_detection() {
        let m = rect(8, 8, 1, 1, 4, 4);
        let gt = [GroundTruth { image: 0, mask: m.clone() }];
        let hit = [Detection { image: 0, score: 0.3, mask: m }];
        assert_eq!(average_precision(&hit, &gt, 0.5).unwrap().average_precision, 1.0);

        let a = rect(10, 10, 0, 0, 2, 10);
        let b = rect(10, 10, 0, 0, 5, 10);
        assert!((iou(&a, &b).unwrap() - 0.4).abs() < 1e-12);
        let miss = [Detection { image: 0, score: 0.9, mask: a }];
        let gt = [GroundTruth { image: 0, mask: b }];
        assert_eq!(average_precision(&miss, &gt, 0.5).unwrap().average_precision, 0.0);
    }

    #[test]
    fn ap_empty_cases() {
        assert_eq!(average_precision(&[], &[], 0.5).unwrap().average_precision, 1.0);
        let d = [Detection { image: 0, score: 1.0, mask: vec![true] }];
        assert_eq!(average_precision(&d, &[], 0.5).unwrap().average_precision, 0.0);
        let g = [GroundTruth { image: 0, mask: vec![true] }];
        assert_eq!(average_precision(&[], &g, 0.5).unwrap().average_precision, 0.0);
    }

    #[test]
    fn ap_rejects_nan_scores() {
        let d = [Detection { image: 0, score: f64::NAN, mask: vec![true] }];
        assert!(average_precision(&d, &[], 0.5).is_err());
    }

    #[test]
    fn seg_accuracy_cases() {
        let gt = PartLabelMap::new(2, 2, vec![0, 1, 2, 2]).unwrap();
        assert_eq!(seg_accuracy(&gt, &gt).unwrap(), 1.0);
        let bg = PartLabelMap::new(2, 2, vec![0; 4]).unwrap();
        assert_eq!(seg_accuracy(&bg, &gt).unwrap(), 0.0);
        let half = PartLabelMap::new(2, 2, vec![0, 1, 0, 0]).unwrap();
        assert_eq!(seg_accuracy(&half, &gt).unwrap(), 0.5);
        let small = PartLabelMap::new(1, 4, vec![0; 4]).unwrap();
        assert!(seg_accuracy(&small, &gt).is_err());
    }

    #[test]
    fn recall_cases() {
        let ranked = vec![vec!["a", "b", "c"]];
        assert_eq!(recall_at_k(&ranked, &[vec!["a"]], 50).unwrap(), 1.0);
        assert_eq!(recall_at_k(&ranked, &[vec!["z"]], 50).unwrap(), 0.0);
        assert_eq!(recall_at_k(&ranked, &[vec!["a", "z"]], 50).unwrap(), 0.5);
        assert_eq!(recall_at_k(&ranked, &[vec!["c"]], 2).unwrap(), 0.0);
        assert!(recall_at_k(&ranked, &[vec!["a"]], 0).is_err());
    }
}
