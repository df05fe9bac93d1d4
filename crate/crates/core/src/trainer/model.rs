use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    /// Fully connected, `tanh` hidden layers, linear output.
    Mlp {
        hidden: Vec<usize>,
    },
    /// Single-layer Elman network read out from the last hidden state.
    Elman {
        hidden: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseLoss {
    /// `(y_hat - y)^2` on a single output.
    Mse,
    /// Softmax cross-entropy over the outputs.
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Real(f64),
    Class(usize),
}

/// A model over the last `window` time steps of `dims`-dimensional series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    kind: ModelKind,
    window: usize,
    dims: usize,
    outputs: usize,
    /// All weights, flat.
    pub params: Vec<f64>,
}

fn param_count(kind: &ModelKind, input: usize, dims: usize, outputs: usize) -> usize {
    match kind {
        ModelKind::Linear => outputs * input + outputs,
        ModelKind::Mlp { hidden } => {
            let mut sizes = vec![input];
            sizes.extend(hidden);
            sizes.push(outputs);
            sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
        }
        ModelKind::Elman { hidden: h } => h * dims + h * h + h + outputs * h + outputs,
    }
}

impl Model {
    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn new(kind: ModelKind, window: usize, dims: usize, outputs: usize, rng: &mut SeededRng) -> Result<Self> {
        if window == 0 || dims == 0 || outputs == 0 {
            return Err(Error::invalid("model", "window, dims and outputs must be positive"));
        }
        match &kind {
            ModelKind::Mlp { hidden } if hidden.contains(&0) => {
                return Err(Error::invalid("hidden", "layer sizes must be positive"))
            }
            ModelKind::Elman { hidden: 0 } => return Err(Error::invalid("hidden", "must be positive")),
            _ => {}
        }
        let input = window * dims;
        let mut params = vec![0.0; param_count(&kind, input, dims, outputs)];
        let mut fill = |slice: &mut [f64], fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            for p in slice {
                *p = rng.random_range(-a..a);
            }
        };
        match &kind {
            ModelKind::Linear => fill(&mut params[..outputs * input], input),
            ModelKind::Mlp { hidden } => {
                let mut sizes = vec![input];
                sizes.extend(hidden);
                sizes.push(outputs);
                let mut off = 0;
                for w in sizes.windows(2) {
                    fill(&mut params[off..off + w[1] * w[0]], w[0]);
                    off += w[1] * w[0] + w[1];
                }
            }
            ModelKind::Elman { hidden: h } => {
                let h = *h;
                fill(&mut params[..h * dims], dims);
                fill(&mut params[h * dims..h * dims + h * h], h);
                let wo = h * dims + h * h + h;
                fill(&mut params[wo..wo + outputs * h], h);
            }
        }
        Ok(Self { kind, window, dims, outputs, params })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn input_len(&self) -> usize {
        self.window * self.dims
    }

    fn layer_sizes(&self, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![self.input_len()];
        sizes.extend(hidden);
        sizes.push(self.outputs);
        sizes
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::Shape(format!("input has {} values, model expects {}", x.len(), self.input_len())));
        }
        Ok(())
    }

    /// Raw outputs (regression value or class logits).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(match &self.kind {
            ModelKind::Linear => affine(&self.params, self.outputs, x),
            ModelKind::Mlp { hidden } => self.mlp_activations(hidden, x).pop().unwrap_or_default(),
            ModelKind::Elman { hidden } => {
                let hs = self.elman_states(*hidden, x);
                let off = hidden * self.dims + hidden * hidden + hidden;
                affine(&self.params[off..], self.outputs, &hs[self.window])
            }
        })
    }

    /// Base loss of one sample; writes `dl/dw` into `grad` (overwritten).
    pub fn loss_and_grad(&self, x: &[f64], target: Target, loss: BaseLoss, grad: &mut [f64]) -> Result<f64> {
        self.check_input(x)?;
        if grad.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "gradient buffer has {} slots, model has {} parameters",
                grad.len(),
                self.params.len()
            )));
        }
        grad.fill(0.0);
        match &self.kind {
            ModelKind::Linear => {
                let out = affine(&self.params, self.outputs, x);
                let (l, dout) = base_loss(&out, target, loss)?;
                affine_backward(grad, &dout, x);
                Ok(l)
            }
            ModelKind::Mlp { hidden } => {
                let sizes = self.layer_sizes(hidden);
                let acts = self.mlp_activations(hidden, x);
                let (l, mut delta) = base_loss(&acts[acts.len() - 1], target, loss)?;
                let offsets = layer_offsets(&sizes);
                for k in (0..sizes.len() - 1).rev() {
                    let off = offsets[k];
                    let (n_in, n_out) = (sizes[k], sizes[k + 1]);
                    affine_backward(&mut grad[off..off + n_out * n_in + n_out], &delta, &acts[k]);
                    if k > 0 {
                        let w = &self.params[off..off + n_out * n_in];
                        delta = (0..n_in)
                            .map(|i| {
                                let s: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                                s * (1.0 - acts[k][i] * acts[k][i])
                            })
                            .collect();
                    }
                }
                Ok(l)
            }
            ModelKind::Elman { hidden } => {
                let (h, d) = (*hidden, self.dims);
                let hs = self.elman_states(h, x);
                let (wx, wh, b, wo) = (0, h * d, h * d + h * h, h * d + h * h + h);
                let out = affine(&self.params[wo..], self.outputs, &hs[self.window]);
                let (l, dout) = base_loss(&out, target, loss)?;
                affine_backward(&mut grad[wo..], &dout, &hs[self.window]);
                let wo_w = &self.params[wo..wo + self.outputs * h];
                let mut dh: Vec<f64> =
                    (0..h).map(|j| (0..self.outputs).map(|o| wo_w[o * h + j] * dout[o]).sum()).collect();
                let whw = &self.params[wh..wh + h * h];
                for t in (1..=self.window).rev() {
                    let dz: Vec<f64> = (0..h).map(|j| dh[j] * (1.0 - hs[t][j] * hs[t][j])).collect();
                    let xt = &x[(t - 1) * d..t * d];
                    for j in 0..h {
                        for i in 0..d {
                            grad[wx + j * d + i] += dz[j] * xt[i];
                        }
                        for i in 0..h {
                            grad[wh + j * h + i] += dz[j] * hs[t - 1][i];
                        }
                        grad[b + j] += dz[j];
                    }
                    dh = (0..h).map(|i| (0..h).map(|j| whw[j * h + i] * dz[j]).sum()).collect();
                }
                Ok(l)
            }
        }
    }

    /// Base loss of one sample without gradients.
    pub fn loss(&self, x: &[f64], target: Target, loss: BaseLoss) -> Result<f64> {
        let out = self.forward(x)?;
        base_loss(&out, target, loss).map(|(l, _)| l)
    }

    fn mlp_activations(&self, hidden: &[usize], x: &[f64]) -> Vec<Vec<f64>> {
        let sizes = self.layer_sizes(hidden);
        let offsets = layer_offsets(&sizes);
        let last = sizes.len() - 2;
        let mut acts = vec![x.to_vec()];
        for k in 0..=last {
            let mut z = affine(&self.params[offsets[k]..], sizes[k + 1], &acts[k]);
            if k < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Hidden states `h_0 = 0, h_1, .., h_window`.
    fn elman_states(&self, h: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dims;
        let (wx, wh, b) =
            (&self.params[..h * d], &self.params[h * d..h * d + h * h], &self.params[h * d + h * h..h * d + h * h + h]);
        let mut hs = vec![vec![0.0; h]];
        for t in 0..self.window {
            let xt = &x[t * d..(t + 1) * d];
            let prev = &hs[t];
            let next: Vec<f64> = (0..h)
                .map(|j| {
                    let mut z = b[j];
                    for i in 0..d {
                        z += wx[j * d + i] * xt[i];
                    }
                    for i in 0..h {
                        z += wh[j * h + i] * prev[i];
                    }
                    z.tanh()
                })
                .collect();
            hs.push(next);
        }
        hs
    }
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = 0;
    sizes
        .windows(2)
        .map(|w| {
            let o = off;
            off += w[1] * w[0] + w[1];
            o
        })
        .collect()
}

/// `W x + b` with `W` (`n_out` x `x.len()`) followed by `b` at the start of `p`.
fn affine(p: &[f64], n_out: usize, x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    let bias = &p[n_out * n_in..n_out * n_in + n_out];
    (0..n_out)
        .map(|o| {
            let row = &p[o * n_in..(o + 1) * n_in];
            bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

fn affine_backward(g: &mut [f64], dout: &[f64], x: &[f64]) {
    let n_in = x.len();
    let n_out = dout.len();
    for o in 0..n_out {
        for i in 0..n_in {
            g[o * n_in + i] += dout[o] * x[i];
        }
        g[n_out * n_in + o] += dout[o];
    }
}

/// Softmax probabilities, shifted by the max logit.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Loss value and its gradient with respect to the raw outputs.
fn base_loss(out: &[f64], target: Target, loss: BaseLoss) -> Result<(f64, Vec<f64>)> {
    match (loss, target) {
        (BaseLoss::Mse, Target::Real(y)) => {
            if out.len() != 1 {
                return Err(Error::Shape("squared error needs exactly one output".into()));
            }
            let r = out[0] - y;
            Ok((r * r, vec![2.0 * r]))
        }
        (BaseLoss::CrossEntropy, Target::Class(c)) => {
            if c >= out.len() {
                return Err(Error::Shape(format!("class {c} out of range for {} outputs", out.len())));
            }
            let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + out.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
            let mut d = softmax(out);
            d[c] -= 1.0;
            Ok((lse - out[c], d))
        }
        _ => Err(Error::invalid("target", "squared error needs real targets, cross-entropy needs classes")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn rand_vec(n: usize, rng: &mut SeededRng) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn max_rel_err(model: &Model, x: &[f64], target: Target, loss: BaseLoss) -> f64 {
        let mut g = vec![0.0; model.params.len()];
        model.loss_and_grad(x, target, loss, &mut g).unwrap();
        let h = 1e-5;
        let mut fd = vec![0.0; g.len()];
        for (k, f) in fd.iter_mut().enumerate() {
            let mut m = model.clone();
            m.params[k] += h;
            let up = m.loss(x, target, loss).unwrap();
            m.params[k] -= 2.0 * h;
            let down = m.loss(x, target, loss).unwrap();
            *f = (up - down) / (2.0 * h);
        }
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        diff / norm
    }

    #[test]
    fn linear_mse_gradient_closed_form() {
        let mut rng = SeededRng::new(1);
        let m = Model::new(ModelKind::Linear, 3, 1, 1, &mut rng).unwrap();
        let x = [0.5, -1.0, 2.0];
        let yhat = m.forward(&x).unwrap()[0];
        let mut g = vec![0.0; 4];
        let l = m.loss_and_grad(&x, Target::Real(1.0), BaseLoss::Mse, &mut g).unwrap();
        assert!((l - (yhat - 1.0).powi(2)).abs() < 1e-15);
        for i in 0..3 {
            assert!((g[i] - 2.0 * (yhat - 1.0) * x[i]).abs() < 1e-15);
        }
        assert!((g[3] - 2.0 * (yhat - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_error_zero_gradient() {
        let mut rng = SeededRng::new(2);
        let m = Model::new(ModelKind::Mlp { hidden: vec![4] }, 3, 1, 1, &mut rng).unwrap();
        let x = [0.1, 0.2, 0.3];
        let y = m.forward(&x).unwrap()[0];
        let mut g = vec![1.0; m.params.len()];
        assert_eq!(m.loss_and_grad(&x, Target::Real(y), BaseLoss::Mse, &mut g).unwrap(), 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(3);
        let kinds = [ModelKind::Linear, ModelKind::Mlp { hidden: vec![5, 3] }, ModelKind::Elman { hidden: 4 }];
        for kind in kinds {
            for loss in [BaseLoss::Mse, BaseLoss::CrossEntropy] {
                let outputs = if loss == BaseLoss::Mse { 1 } else { 3 };
                for _ in 0..5 {
                    let m = Model::new(kind.clone(), 4, 2, outputs, &mut rng).unwrap();
                    let x = rand_vec(8, &mut rng);
                    let target = match loss {
                        BaseLoss::Mse => Target::Real(rng.random()),
                        BaseLoss::CrossEntropy => Target::Class(rng.random_range(0..3)),
                    };
                    let e = max_rel_err(&m, &x, target, loss);
                    assert!(e < 1e-6, "{kind:?} {loss:?}: {e}");
                }
            }
        }
    }

    #[test]
    fn parameter_counts() {
        let mut rng = SeededRng::new(0);
        assert_eq!(Model::new(ModelKind::Linear, 4, 2, 3, &mut rng).unwrap().params.len(), 27);
        assert_eq!(Model::new(ModelKind::Mlp { hidden: vec![5] }, 4, 1, 1, &mut rng).unwrap().params.len(), 31);
        assert_eq!(
            Model::new(ModelKind::Elman { hidden: 3 }, 4, 2, 1, &mut rng).unwrap().params.len(),
            6 + 9 + 3 + 3 + 1
        );
    }

    #[test]
    fn shape_and_target_errors() {
        let mut rng = SeededRng::new(0);
        let m = Model::new(ModelKind::Linear, 2, 1, 2, &mut rng).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape(_))));
        assert!(m.loss(&[1.0, 2.0], Target::Class(2), BaseLoss::CrossEntropy).is_err());
        assert!(m.loss(&[1.0, 2.0], Target::Real(0.0), BaseLoss::CrossEntropy).is_err());
        assert!(Model::new(ModelKind::Elman { hidden: 0 }, 2, 1, 1, &mut rng).is_err());
    }

    #[test]
    fn cross_entropy_is_stable_for_large_logits() {
        let l = base_loss(&[1000.0, -1000.0], Target::Class(1), BaseLoss::CrossEntropy).unwrap().0;
        assert!((l - 2000.0).abs() < 1e-9);
    }
}
