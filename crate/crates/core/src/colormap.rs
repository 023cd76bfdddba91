//! Part color palette and S-image rendering.
//!
//! The palette is picked greedily from a 17×17×17 grid over the RGB cube:
//! black is taken as the background color, and each new part color is the
//! grid point farthest (in Euclidean distance) from everything chosen so
//! far, ties going to the lowest grid index `r·289 + g·17 + b`.

use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Tensor, Var};

const LEVELS: usize = 17;
pub const MAX_PARTS: usize = 64;
const NORMALIZATION_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct ColorMap {
    rows: Vec<[f64; 3]>,
}

impl ColorMap {
    pub fn num_parts(&self) -> usize {
        self.rows.len()
    }

    /// Color of part `part_id` (1-based); background is black.
    pub fn color(&self, part_id: usize) -> [f64; 3] {
        if part_id == 0 {
            [0.0; 3]
        } else {
            self.rows[part_id - 1]
        }
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    /// (k+1)×3 matrix whose row 0 is the background color.
    pub fn matrix<T: Element>(&self) -> Tensor<T> {
        let mut data = vec![T::zero(); 3];
        for row in &self.rows {
            data.extend(row.iter().map(|&v| T::from_f64(v)));
        }
        Tensor::new(&[self.rows.len() + 1, 3], data).expect("consistent size")
    }
}

fn grid_point(idx: usize) -> [usize; 3] {
    [idx / (LEVELS * LEVELS), (idx / LEVELS) % LEVELS, idx % LEVELS]
}

fn dist2(a: [usize; 3], b: [usize; 3]) -> usize {
    a.iter().zip(&b).map(|(&x, &y)| x.abs_diff(y).pow(2)).sum()
}

pub fn build_colormap(k: usize) -> Result<ColorMap> {
    if !(1..=MAX_PARTS).contains(&k) {
        return Err(Error::Config(format!(
            "colormap needs 1..={MAX_PARTS} parts, got {k}"
        )));
    }
    let n = LEVELS.pow(3);
    // Squared grid distance to the nearest chosen color, seeded with black.
    let mut nearest: Vec<usize> = (0..n).map(|i| dist2(grid_point(i), [0; 3])).collect();
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = 0;
        for i in 1..n {
            if nearest[i] > nearest[best] {
                best = i;
            }
        }
        let p = grid_point(best);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = (*d).min(dist2(grid_point(i), p));
        }
        rows.push(p.map(|c| c as f64 / (LEVELS - 1) as f64));
    }
    Ok(ColorMap { rows })
}

fn check_volume<T: Element>(probs: &Tensor<T>, cmap: &ColorMap) -> Result<()> {
    let (_, _, c) = probs.hwc("render_s")?;
    if c != cmap.num_parts() + 1 {
        return Err(Error::dim(
            "render_s",
            format!("{c} channels for {} parts plus background", cmap.num_parts()),
        ));
    }
    for (i, px) in probs.data().chunks_exact(c).enumerate() {
        let sum = px.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).sum::<f64>();
        if px.iter().any(|&v| v < T::zero()) || (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::dim(
                "render_s",
                format!("pixel {i} is not a probability distribution (sum {sum})"),
            ));
        }
    }
    Ok(())
}

/// Renders an H×W×(k+1) probability volume into an H×W×3 S image: each
/// pixel is the probability-weighted mix of part colors.
pub fn render_s<T: Element>(probs: &Tensor<T>, cmap: &ColorMap) -> Result<Tensor<T>> {
    check_volume(probs, cmap)?;
    let mut g = Graph::new();
    let p = g.input(probs.clone());
    let s = g.channel_map(p, cmap.matrix())?;
    Ok(g.value(s).clone())
}

/// Differentiable [`render_s`] inside a graph. Normalization is not checked
/// here; the input is expected to come from a softmax.
pub fn render_s_graph<T: Element>(g: &mut Graph<T>, probs: Var, cmap: &ColorMap) -> Result<Var> {
    g.channel_map(probs, cmap.matrix())
}

/// One-hot volume of a label map, for rendering ground-truth S images.
pub fn one_hot<T: Element>(labels: &[u8], height: usize, width: usize, classes: usize) -> Tensor<T> {
    let mut data = vec![T::zero(); height * width * classes];
    for (i, &l) in labels.iter().enumerate() {
        data[i * classes + l as usize] = T::one();
    }
    Tensor::new(&[height, width, classes], data).expect("consistent size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_color_is_white() {
        assert_eq!(build_colormap(1).unwrap().rows(), &[[1.0, 1.0, 1.0]]);
    }

    #[test]
    fn range_checked() {
        assert!(build_colormap(0).is_err());
        assert!(build_colormap(65).is_err());
        assert!(build_colormap(64).is_ok());
    }

    #[test]
    fn one_hot_pixels_render_to_part_colors() {
        let cmap = build_colormap(3).unwrap();
        let labels = [0u8, 1, 2, 3];
        let s = render_s(&one_hot::<f64>(&labels, 2, 2, 4), &cmap).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            assert_eq!(&s.data()[i * 3..i * 3 + 3], &cmap.color(l as usize));
        }
    }

    #[test]
    fn half_mix_is_midpoint() {
        let cmap = build_colormap(2).unwrap();
        let p = Tensor::<f64>::new(&[1, 1, 3], vec![0.0, 0.5, 0.5]).unwrap();
        let s = render_s(&p, &cmap).unwrap();
        let (a, b) = (cmap.color(1), cmap.color(2));
        for c in 0..3 {
            assert!((s.data()[c] - 0.5 * (a[c] + b[c])).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_unnormalized_volumes() {
        let cmap = build_colormap(2).unwrap();
        let p = Tensor::<f64>::new(&[1, 1, 3], vec![0.2, 0.2, 0.2]).unwrap();
        assert!(render_s(&p, &cmap).is_err());
        let p = Tensor::<f64>::new(&[1, 1, 2], vec![0.5, 0.5]).unwrap();
        assert!(render_s(&p, &cmap).is_err());
    }
}
