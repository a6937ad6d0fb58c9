//! Small dense networks with manual backprop and Adam, enough for TD3.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// in × out
    pub w: Array2<f32>,
    pub b: Array1<f32>,
}

impl Linear {
    /// Uniform fan-in initialization.
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let k = 1.0 / (fan_in as f32).sqrt();
        Self {
            w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-k..k)),
            b: Array1::from_shape_fn(fan_out, |_| rng.random_range(-k..k)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutAct {
    Identity,
    Tanh,
}

/// ReLU hidden layers, configurable output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub out_act: OutAct,
}

/// Activations kept from a forward pass for the backward pass.
pub struct Cache {
    inputs: Vec<Array2<f32>>,
    pre: Vec<Array2<f32>>,
    out: Array2<f32>,
}

pub type Grads = Vec<(Array2<f32>, Array1<f32>)>;

impl Mlp {
    pub fn new(sizes: &[usize], out_act: OutAct, rng: &mut ChaCha8Rng) -> Self {
        let layers = sizes.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect();
        Self { layers, out_act }
    }

    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        self.forward_cached(x).out
    }

    pub fn forward_cached(&self, x: &Array2<f32>) -> Cache {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.w) + &l.b;
            inputs.push(h);
            h = if i + 1 < n {
                z.mapv(|v| v.max(0.0))
            } else {
                match self.out_act {
                    OutAct::Identity => z.clone(),
                    OutAct::Tanh => z.mapv(f32::tanh),
                }
            };
            pre.push(z);
        }
        Cache { inputs, pre, out: h }
    }

    /// Gradients of the parameters and of the input given d(loss)/d(output).
    pub fn backward(&self, cache: &Cache, dout: &Array2<f32>) -> (Grads, Array2<f32>) {
        let n = self.layers.len();
        let mut grads: Grads = Vec::with_capacity(n);
        let mut dz = match self.out_act {
            OutAct::Identity => dout.clone(),
            OutAct::Tanh => dout * &cache.out.mapv(|y| 1.0 - y * y),
        };
        for i in (0..n).rev() {
            let gw = cache.inputs[i].t().dot(&dz);
            let gb = dz.sum_axis(Axis(0));
            grads.push((gw, gb));
            let dh = dz.dot(&self.layers[i].w.t());
            if i > 0 {
                let mask = cache.pre[i - 1].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                dz = dh * mask;
            } else {
                dz = dh;
            }
        }
        grads.reverse();
        (grads, dz)
    }

    pub fn output(cache: &Cache) -> &Array2<f32> {
        &cache.out
    }

    /// target ← τ·self + (1 − τ)·target
    pub fn soft_update_into(&self, target: &mut Mlp, tau: f32) {
        for (s, t) in self.layers.iter().zip(target.layers.iter_mut()) {
            t.w.zip_mut_with(&s.w, |a, b| *a = tau * b + (1.0 - tau) * *a);
            t.b.zip_mut_with(&s.b, |a, b| *a = tau * b + (1.0 - tau) * *a);
        }
    }

    /// Flat list of parameter tensors as (shape, values), weights then bias per layer.
    pub fn tensors(&self) -> Vec<(Vec<usize>, Vec<f32>)> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push((l.w.shape().to_vec(), l.w.iter().copied().collect()));
            out.push((l.b.shape().to_vec(), l.b.iter().copied().collect()));
        }
        out
    }

    /// Loads tensors written by [`Mlp::tensors`]; shapes must match.
    pub fn load_tensors(&mut self, tensors: &[(Vec<usize>, Vec<f32>)]) -> Result<(), String> {
        if tensors.len() != 2 * self.layers.len() {
            return Err(format!("expected {} tensors, got {}", 2 * self.layers.len(), tensors.len()));
        }
        for (i, l) in self.layers.iter_mut().enumerate() {
            let (ws, wv) = &tensors[2 * i];
            let (bs, bv) = &tensors[2 * i + 1];
            if ws.as_slice() != l.w.shape() || bs.as_slice() != l.b.shape() {
                return Err(format!("shape mismatch in layer {i}"));
            }
            l.w = Array2::from_shape_vec((ws[0], ws[1]), wv.clone()).map_err(|e| e.to_string())?;
            l.b = Array1::from_vec(bv.clone());
        }
        Ok(())
    }
}

/// Splits the columns of `m` at `at`.
pub fn split_cols(m: &Array2<f32>, at: usize) -> (Array2<f32>, Array2<f32>) {
    (m.slice(s![.., ..at]).to_owned(), m.slice(s![.., at..]).to_owned())
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f32,
    t: i32,
    m: Grads,
    v: Grads,
}

const BETA1: f32 = 0.9;
const BETA2: f32 = 0.999;
const EPS: f32 = 1e-8;

impl Adam {
    pub fn new(net: &Mlp, lr: f32) -> Self {
        let zeros: Grads = net
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
            .collect();
        Self {
            lr,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let lr = self.lr;
        let upd = |p: &mut f32, g: f32, m: &mut f32, v: &mut f32| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        };
        for (i, l) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            ndarray::Zip::from(&mut l.w)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|p, g, m, v| upd(p, *g, m, v));
            ndarray::Zip::from(&mut l.b)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|p, g, m, v| upd(p, *g, m, v));
        }
    }
}
