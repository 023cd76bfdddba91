//! Compares reverse-mode gradients of the joint objective with central
//! finite differences on a tiny Part-6 + State pair in f64.
//!
//! ```bash
//! cargo run --release -p isin --example gradient_check
//! ```

use isin::colormap::build_colormap;
use isin::networks::{ArchConfig, NetKind, NetworkParams};
use isin::rng::substream;
use isin::tensor::{concat_channels, Graph, Tensor};
use isin::trainer::joint_objective;
use rand::Rng;

const STEP: f64 = 1e-5;

fn main() -> isin::Result<()> {
    let arch = ArchConfig { conv_widths: [2, 2, 2], ..ArchConfig::new(8, 6, 3, 6) };
    let cmap = build_colormap(3)?;
    let mut r = substream(0, "data", 0);
    let rgb = Tensor::new(&[8, 8, 3], (0..192).map(|_| r.gen_range(0.0..1.0)).collect())?;
    let s = Tensor::new(&[8, 8, 3], (0..192).map(|_| r.gen_range(0.0..1.0)).collect())?;
    let u = concat_channels(&s, &rgb)?;
    let labels: Vec<usize> = (0..64).map(|_| r.gen_range(0..4)).collect();
    let targets: Vec<f64> = (0..6).map(|_| r.gen_range(0..2) as f64).collect();

    let mut params: Vec<Tensor<f64>> = Vec::new();
    for (kind, stream) in [(NetKind::Part, 1), (NetKind::State, 2)] {
        let net = NetworkParams::<f64>::init(kind, &arch, &mut substream(0, "init", stream))?;
        params.extend(net.tensors.into_iter().map(|mut t| {
            if t.shape().len() == 1 {
                t.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.2..0.2));
            }
            t
        }));
    }
    let n_part = 12;

    for window in [1, 2, 3] {
        let objective = |ps: &[Tensor<f64>], grads: bool| -> isin::Result<(f64, Vec<Tensor<f64>>)> {
            let mut g = Graph::new();
            let vars: Vec<_> = ps.iter().map(|t| g.param(t.clone())).collect();
            let (uv, rv) = (g.input(u.clone()), g.input(rgb.clone()));
            let (total, _) =
                joint_objective(&mut g, &vars[..n_part], &vars[n_part..], uv, rv, &labels, &targets, 0.2, window, &cmap)?;
            let value = g.value(total).data()[0];
            if !grads {
                return Ok((value, Vec::new()));
            }
            let gr = g.backward(total)?;
            Ok((value, vars.iter().zip(ps).map(|(v, t)| gr.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape()))).collect()))
        };
        let (loss, analytic) = objective(&params, true)?;
        let mut worst = 0.0f64;
        for (i, t) in params.iter().enumerate() {
            for j in 0..t.len() {
                let mut plus = params.clone();
                plus[i].data_mut()[j] += STEP;
                let mut minus = params.clone();
                minus[i].data_mut()[j] -= STEP;
                let numeric = (objective(&plus, false)?.0 - objective(&minus, false)?.0) / (2.0 * STEP);
                let a = analytic[i].data()[j];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
            }
        }
        println!("window {window}: loss {loss:.6}, max relative gradient error {worst:.2e}");
    }
    Ok(())
}
