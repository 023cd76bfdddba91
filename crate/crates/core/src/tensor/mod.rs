//! Dense tensors and the reverse-mode autodiff graph used by the networks.
//!
//! Images are stored height-major with channels last (H×W×C). Convolution
//! kernels are kh×kw×Cin×Cout, which makes a kernel a plain (kh·kw·Cin)×Cout
//! matrix in memory.

mod graph;
mod kernels;
mod sgd;

pub use graph::{sigmoid, Gradients, Graph, Var};
pub use sgd::{sgd_step, SgdConfig, Velocity};

use std::fmt::Debug;
use std::ops::AddAssign;

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating point element type. `f32` is used for training, `f64` for
/// gradient verification.
pub trait Element:
    Float + AddAssign + Default + Debug + Send + Sync + std::iter::Sum + 'static
{
    /// Row-major `c = alpha * op(a) * op(b) + beta * c` where `op(a)` is m×k
    /// and `op(b)` is k×n. A transposed operand is stored in its untransposed
    /// layout (k×m for `a`, n×k for `b`).
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_trans: bool,
        b: &[Self],
        b_trans: bool,
        beta: Self,
        c: &mut [Self],
    );

    fn from_f64(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("representable")
    }
}

fn strides(rows: usize, cols: usize, trans: bool) -> (isize, isize) {
    if trans {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_element {
    ($t:ty, $gemm:path) => {
        impl Element for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_trans: bool,
                b: &[Self],
                b_trans: bool,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = strides(m, k, a_trans);
                let (rsb, csb) = strides(k, n, b_trans);
                // SAFETY: the slices cover the m×k, k×n and m×n extents
                // addressed through the strides above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_element!(f32, matrixmultiply::sgemm);
impl_element!(f64, matrixmultiply::dgemm);

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Element = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::dim(
                "tensor",
                format!("shape {shape:?} needs {numel} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<T> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    /// (height, width, channels) of a rank-3 tensor.
    pub fn hwc(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::dim(
                op,
                format!("expected H×W×C tensor, got shape {:?}", self.shape),
            )),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().expect("finite")))
                .collect(),
        }
    }

    /// Channels `[start, end)` of an H×W×C tensor.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        let (h, w, c) = self.hwc("slice_channels")?;
        if start > end || end > c {
            return Err(Error::dim(
                "slice_channels",
                format!("range {start}..{end} outside {c} channels"),
            ));
        }
        let mut data = Vec::with_capacity(h * w * (end - start));
        for px in self.data.chunks_exact(c) {
            data.extend_from_slice(&px[start..end]);
        }
        Ok(Tensor {
            shape: vec![h, w, end - start],
            data,
        })
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }
}

/// Channel-wise concatenation of two H×W tensors; `a` supplies the leading
/// channels.
pub fn concat_channels<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, ca) = a.hwc("concat_channels")?;
    let (hb, wb, cb) = b.hwc("concat_channels")?;
    if (h, w) != (hb, wb) {
        return Err(Error::dim(
            "concat_channels",
            format!("spatial dims {h}×{w} and {hb}×{wb} differ"),
        ));
    }
    let mut data = Vec::with_capacity(h * w * (ca + cb));
    for (pa, pb) in a.data.chunks_exact(ca).zip(b.data.chunks_exact(cb)) {
        data.extend_from_slice(pa);
        data.extend_from_slice(pb);
    }
    Ok(Tensor {
        shape: vec![h, w, ca + cb],
        data,
    })
}
