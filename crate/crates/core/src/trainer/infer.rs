use rayon::prelude::*;

use super::{Mode, TrainState};
use crate::colormap::{build_colormap, one_hot, render_s};
use crate::data::{ImageTensor, PartLabelMap, PartStateSchema, Sample};
use crate::eval::{EvalReport, ScoredSample};
use crate::error::{Error, Result};
use crate::networks::{part_net_forward, state_net_forward};
use crate::tensor::{concat_channels, sigmoid, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub labels: PartLabelMap,
    /// H×W×(k+1) part probabilities of the last segmentation pass.
    pub probs: Tensor<f32>,
    /// The S image the State network saw.
    pub s_image: Tensor<f32>,
    /// Per-bin sigmoid scores.
    pub state_scores: Vec<f32>,
}

/// Per-pixel argmax; ties go to the lower part id.
pub fn argmax_labels(probs: &Tensor<f32>) -> Result<PartLabelMap> {
    let (h, w, c) = probs.hwc("argmax")?;
    let labels = probs
        .data()
        .chunks_exact(c)
        .map(|px| {
            let mut best = 0;
            for (i, &v) in px.iter().enumerate() {
                if v > px[best] {
                    best = i;
                }
            }
            best as u8
        })
        .collect();
    PartLabelMap::new(h, w, labels)
}

fn check_trained(state: &TrainState) -> Result<()> {
    if state.current_iteration == 0 {
        return Err(Error::Training("model has not completed any training iteration".into()));
    }
    Ok(())
}

fn scores(state: &TrainState, u: &Tensor<f32>) -> Result<Vec<f32>> {
    Ok(state_net_forward(&state.state, u)?
        .data()
        .iter()
        .map(|&z| sigmoid(z))
        .collect())
}

/// Staged inference: Part-3 once, Part-6 as many times as training ran,
/// then the State network on the final RGB-S image.
pub fn infer(state: &TrainState, image: &ImageTensor) -> Result<Prediction> {
    check_trained(state)?;
    let (h, w, c) = image.hwc("infer")?;
    if c != 3 {
        return Err(Error::dim("infer", format!("expected an RGB image, got {c} channels")));
    }
    let cmap = build_colormap(state.arch().num_parts)?;
    let mut probs = part_net_forward(&state.part3, image)?;

    if state.mode == Mode::Baseline1 {
        let u = concat_channels(&Tensor::zeros(&[h, w, 3]), image)?;
        return Ok(Prediction {
            labels: argmax_labels(&probs)?,
            state_scores: scores(state, &u)?,
            s_image: Tensor::zeros(&[h, w, 3]),
            probs,
        });
    }

    let mut s = render_s(&probs, &cmap)?;
    for _ in 0..state.current_iteration {
        let u = concat_channels(&s, image)?;
        probs = part_net_forward(&state.part6, &u)?;
        s = render_s(&probs, &cmap)?;
    }
    let u = concat_channels(&s, image)?;
    Ok(Prediction {
        labels: argmax_labels(&probs)?,
        state_scores: scores(state, &u)?,
        s_image: s,
        probs,
    })
}

/// State prediction from the ground-truth S image; the returned labels are
/// the ground truth itself.
pub fn infer_with_gt_segmentation(
    state: &TrainState,
    image: &ImageTensor,
    labels: &PartLabelMap,
) -> Result<Prediction> {
    check_trained(state)?;
    let k = state.arch().num_parts;
    if labels.max_label() as usize > k {
        return Err(Error::SchemaMismatch(format!(
            "label {} exceeds part count {k}",
            labels.max_label()
        )));
    }
    let cmap = build_colormap(k)?;
    let probs = one_hot::<f32>(labels.labels(), labels.height(), labels.width(), k + 1);
    let s = render_s(&probs, &cmap)?;
    let u = concat_channels(&s, image)?;
    Ok(Prediction {
        labels: labels.clone(),
        state_scores: scores(state, &u)?,
        s_image: s,
        probs,
    })
}

/// Runs inference on every sample and scores it against the ground truth.
/// With `gt_segmentation` the State network sees ground-truth S images and
/// detections use the ground-truth masks.
pub fn evaluate(
    state: &TrainState,
    samples: &[Sample],
    schema: &PartStateSchema,
    gt_segmentation: bool,
) -> Result<EvalReport> {
    let predictions = samples
        .par_iter()
        .map(|s| {
            let p = if gt_segmentation {
                infer_with_gt_segmentation(state, &s.image, &s.labels)?
            } else {
                infer(state, &s.image)?
            };
            Ok(ScoredSample {
                labels: p.labels,
                state_scores: p.state_scores.iter().map(|&v| v as f64).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gt: Vec<_> = samples.iter().map(|s| (s.labels.clone(), s.states.clone())).collect();
    EvalReport::evaluate(&predictions, &gt, schema)
}
