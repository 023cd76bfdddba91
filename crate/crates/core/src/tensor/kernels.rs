//! Raw loops shared by the forward and backward passes.

use super::Element;

/// Geometry of a strided, padded 2-D window mapping between a "big" image
/// and a "small" image. For a convolution the big image is the input; for a
/// transposed convolution it is the output.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub big_h: usize,
    pub big_w: usize,
    pub small_h: usize,
    pub small_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    /// Channels of the big image.
    pub channels: usize,
}

impl Window {
    pub fn patch_len(&self) -> usize {
        self.kh * self.kw * self.channels
    }

    /// Big-image coordinate touched by small pixel `(sy, sx)` at tap `(i, j)`.
    #[inline]
    fn big_coord(&self, sy: usize, sx: usize, i: usize, j: usize) -> Option<(usize, usize)> {
        let y = (sy * self.stride + i).checked_sub(self.pad)?;
        let x = (sx * self.stride + j).checked_sub(self.pad)?;
        (y < self.big_h && x < self.big_w).then_some((y, x))
    }

    /// im2col: one row per small pixel, one column per (tap, channel).
    pub fn gather<T: Element>(&self, big: &[T]) -> Vec<T> {
        let c = self.channels;
        let plen = self.patch_len();
        let mut cols = vec![T::zero(); self.small_h * self.small_w * plen];
        for sy in 0..self.small_h {
            for sx in 0..self.small_w {
                let row = &mut cols[(sy * self.small_w + sx) * plen..][..plen];
                for i in 0..self.kh {
                    for j in 0..self.kw {
                        if let Some((y, x)) = self.big_coord(sy, sx, i, j) {
                            let src = &big[(y * self.big_w + x) * c..][..c];
                            row[(i * self.kw + j) * c..][..c].copy_from_slice(src);
                        }
                    }
                }
            }
        }
        cols
    }

    /// col2im: accumulate patch rows back into a big image.
    pub fn scatter<T: Element>(&self, cols: &[T]) -> Vec<T> {
        let c = self.channels;
        let plen = self.patch_len();
        let mut big = vec![T::zero(); self.big_h * self.big_w * c];
        for sy in 0..self.small_h {
            for sx in 0..self.small_w {
                let row = &cols[(sy * self.small_w + sx) * plen..][..plen];
                for i in 0..self.kh {
                    for j in 0..self.kw {
                        if let Some((y, x)) = self.big_coord(sy, sx, i, j) {
                            let dst = &mut big[(y * self.big_w + x) * c..][..c];
                            let src = &row[(i * self.kw + j) * c..][..c];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
        big
    }
}

/// Spatial size after a convolution, if the kernel fits.
pub(crate) fn conv_out_dim(input: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    (stride > 0 && k > 0 && padded >= k).then(|| (padded - k) / stride + 1)
}

/// Spatial size after a transposed convolution.
pub(crate) fn conv_transpose_out_dim(
    input: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Option<usize> {
    let full = (input.checked_sub(1)?) * stride + k;
    (stride > 0 && full > 2 * pad).then(|| full - 2 * pad)
}

/// Reorders a kh×kw×A×B tensor into A×(kh·kw·B).
pub(crate) fn kernel_to_transpose_layout<T: Element>(
    w: &[T],
    taps: usize,
    a: usize,
    b: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); w.len()];
    for t in 0..taps {
        for ia in 0..a {
            for ib in 0..b {
                out[ia * taps * b + t * b + ib] = w[(t * a + ia) * b + ib];
            }
        }
    }
    out
}

/// Inverse of [`kernel_to_transpose_layout`].
pub(crate) fn kernel_from_transpose_layout<T: Element>(
    wt: &[T],
    taps: usize,
    a: usize,
    b: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); wt.len()];
    for t in 0..taps {
        for ia in 0..a {
            for ib in 0..b {
                out[(t * a + ia) * b + ib] = wt[ia * taps * b + t * b + ib];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_dims() {
        assert_eq!(conv_out_dim(32, 3, 1, 1), Some(32));
        assert_eq!(conv_out_dim(5, 3, 2, 0), Some(2));
        assert_eq!(conv_out_dim(2, 3, 1, 0), None);
        assert_eq!(conv_transpose_out_dim(8, 2, 2, 0), Some(16));
        assert_eq!(conv_transpose_out_dim(2, 3, 2, 0), Some(5));
    }

    #[test]
    fn transpose_layout_roundtrip() {
        let w: Vec<f64> = (0..24).map(f64::from).collect();
        let t = kernel_to_transpose_layout(&w, 4, 2, 3);
        assert_eq!(kernel_from_transpose_layout(&t, 4, 2, 3), w);
    }
}
