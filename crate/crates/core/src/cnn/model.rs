use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layers;
use super::Tensor;
use crate::error::{Error, Result};

/// Declarative layer list used to build a [`CnnModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// 3x3 same-padded convolution producing `out_ch` channels.
    Conv { out_ch: usize },
    Relu,
    /// 2x2 max pooling, stride 2.
    MaxPool,
    Flatten,
    Dense { outputs: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv { weight: Tensor, bias: Tensor },
    Relu,
    MaxPool,
    Flatten,
    Dense { weight: Tensor, bias: Tensor },
}

/// Shape of one sample entering or leaving a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dims {
    Map(usize, usize, usize),
    Flat(usize),
}

impl Dims {
    fn len(self) -> usize {
        match self {
            Dims::Map(h, w, c) => h * w * c,
            Dims::Flat(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    input: (usize, usize, usize),
    layers: Vec<Layer>,
    dims: Vec<Dims>,
    pub rng_seed: u64,
}

/// Activations retained by [`CnnModel::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    inputs: Vec<Tensor>,
    argmax: Vec<Vec<u32>>,
}

/// Parameter gradients in [`CnnModel::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl CnnModel {
    /// `Conv16 -> ReLU -> Pool -> Conv32 -> ReLU -> Pool -> Flatten -> Dense128 -> ReLU -> Dense5`
    /// on 32x32x3 inputs.
    pub fn default_architecture() -> Vec<LayerSpec> {
        use LayerSpec::*;
        vec![
            Conv { out_ch: 16 },
            Relu,
            MaxPool,
            Conv { out_ch: 32 },
            Relu,
            MaxPool,
            Flatten,
            Dense { outputs: 128 },
            Relu,
            Dense { outputs: 5 },
        ]
    }

    pub fn new_default(seed: u64) -> Result<Self> {
        Self::new((32, 32, 3), &Self::default_architecture(), seed)
    }

    /// Builds the network with He-normal weights (`std = sqrt(2 / fan_in)`)
    /// and zero biases, drawn from ChaCha8 seeded with `seed`.
    pub fn new(input: (usize, usize, usize), specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut he = |fan_in: usize, shape: &[usize]| {
            let std = (2.0 / fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * std
                })
                .collect();
            Tensor {
                shape: shape.to_vec(),
                data,
            }
        };
        let mut layers = Vec::with_capacity(specs.len());
        let mut dims = vec![Dims::Map(input.0, input.1, input.2)];
        for spec in specs {
            let cur = *dims.last().unwrap();
            let (layer, next) = match (*spec, cur) {
                (LayerSpec::Conv { out_ch }, Dims::Map(h, w, c)) => (
                    Layer::Conv {
                        weight: he(9 * c, &[3, 3, c, out_ch]),
                        bias: Tensor::zeros(&[out_ch]),
                    },
                    Dims::Map(h, w, out_ch),
                ),
                (LayerSpec::Relu, d) => (Layer::Relu, d),
                (LayerSpec::MaxPool, Dims::Map(h, w, c)) if h % 2 == 0 && w % 2 == 0 => {
                    (Layer::MaxPool, Dims::Map(h / 2, w / 2, c))
                }
                (LayerSpec::Flatten, d) => (Layer::Flatten, Dims::Flat(d.len())),
                (LayerSpec::Dense { outputs }, Dims::Flat(n)) => (
                    Layer::Dense {
                        weight: he(n, &[n, outputs]),
                        bias: Tensor::zeros(&[outputs]),
                    },
                    Dims::Flat(outputs),
                ),
                (spec, d) => {
                    return Err(Error::Shape(format!("layer {spec:?} cannot follow {d:?}")))
                }
            };
            layers.push(layer);
            dims.push(next);
        }
        if !matches!(dims.last(), Some(Dims::Flat(_))) {
            return Err(Error::Shape("network must end in a dense output".into()));
        }
        Ok(Self {
            input,
            layers,
            dims,
            rng_seed: seed,
        })
    }

    /// Rebuilds a model from its parameter tensors, assuming the
    /// conv-relu-pool / dense-relu / final-dense layout of
    /// [`default_architecture`](Self::default_architecture).
    pub fn from_tensors(input: (usize, usize, usize), tensors: Vec<Tensor>) -> Result<Self> {
        if !tensors.len().is_multiple_of(2) {
            return Err(Error::Format("parameter tensors must come in weight/bias pairs".into()));
        }
        let mut specs = Vec::new();
        let n_pairs = tensors.len() / 2;
        let mut flattened = false;
        for (i, pair) in tensors.chunks(2).enumerate() {
            let last = i + 1 == n_pairs;
            match pair[0].shape.len() {
                4 => {
                    if flattened {
                        return Err(Error::Format("convolution after dense layer".into()));
                    }
                    specs.extend([
                        LayerSpec::Conv {
                            out_ch: pair[0].shape[3],
                        },
                        LayerSpec::Relu,
                        LayerSpec::MaxPool,
                    ]);
                }
                2 => {
                    if !flattened {
                        specs.push(LayerSpec::Flatten);
                        flattened = true;
                    }
                    specs.push(LayerSpec::Dense {
                        outputs: pair[0].shape[1],
                    });
                    if !last {
                        specs.push(LayerSpec::Relu);
                    }
                }
                r => return Err(Error::Format(format!("unexpected weight rank {r}"))),
            }
        }
        let mut model = Self::new(input, &specs, 0)?;
        let mut slots = model.params_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Format("parameter count mismatch".into()));
        }
        for (slot, t) in slots.iter_mut().zip(tensors) {
            if slot.shape != t.shape {
                return Err(Error::Format(format!(
                    "tensor shape {:?} does not fit layer expecting {:?}",
                    t.shape, slot.shape
                )));
            }
            **slot = t;
        }
        Ok(model)
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        self.input
    }

    pub fn n_outputs(&self) -> usize {
        self.dims.last().map(|d| d.len()).unwrap_or(0)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            if let Layer::Conv { weight, bias } | Layer::Dense { weight, bias } = l {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            if let Layer::Conv { weight, bias } | Layer::Dense { weight, bias } = l {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// All weights and biases set to zero.
    pub fn zero_params(&mut self) {
        for t in self.params_mut() {
            t.data.fill(0.0);
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            tensors: self.params().iter().map(|t| Tensor::zeros(&t.shape)).collect(),
        }
    }

    /// Logits `[B x outputs]` for a batch `[B x H x W x C]`.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, ForwardCache)> {
        let (h, w, c) = self.input;
        if batch.shape.len() != 4 || batch.shape[1..] != [h, w, c] {
            return Err(Error::Shape(format!(
                "expected input [B, {h}, {w}, {c}], got {:?}",
                batch.shape
            )));
        }
        let b = batch.shape[0];
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut argmax = Vec::new();
        let mut cur = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (din, dout) = (self.dims[i], self.dims[i + 1]);
            let mut next = vec![0.0; b * dout.len()];
            let (n_in, n_out) = (din.len(), dout.len());
            match layer {
                Layer::Conv { weight, bias } => {
                    let Dims::Map(h, w, c) = din else { unreachable!() };
                    for s in 0..b {
                        layers::conv3x3_forward(
                            &cur.data[s * n_in..(s + 1) * n_in],
                            (h, w, c),
                            &weight.data,
                            &bias.data,
                            &mut next[s * n_out..(s + 1) * n_out],
                        );
                    }
                }
                Layer::Relu => {
                    for (d, &v) in next.iter_mut().zip(&cur.data) {
                        *d = v.max(0.0);
                    }
                }
                Layer::MaxPool => {
                    let Dims::Map(h, w, c) = din else { unreachable!() };
                    let mut idx = vec![0u32; b * n_out];
                    for s in 0..b {
                        layers::maxpool_forward(
                            &cur.data[s * n_in..(s + 1) * n_in],
                            (h, w, c),
                            &mut next[s * n_out..(s + 1) * n_out],
                            &mut idx[s * n_out..(s + 1) * n_out],
                        );
                    }
                    argmax.push(idx);
                }
                Layer::Flatten => next.copy_from_slice(&cur.data),
                Layer::Dense { weight, bias } => {
                    for s in 0..b {
                        layers::dense_forward(
                            &cur.data[s * n_in..(s + 1) * n_in],
                            &weight.data,
                            &bias.data,
                            &mut next[s * n_out..(s + 1) * n_out],
                        );
                    }
                }
            }
            let shape = match dout {
                Dims::Map(h, w, c) => vec![b, h, w, c],
                Dims::Flat(n) => vec![b, n],
            };
            let next = Tensor { shape, data: next };
            inputs.push(std::mem::replace(&mut cur, next));
        }
        debug_assert!(cur.all_finite(), "non-finite logits");
        Ok((
            cur,
            ForwardCache {
                batch: b,
                inputs,
                argmax,
            },
        ))
    }

    /// Exact gradients of the loss whose logit gradient is `dlogits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Tensor) -> Result<Gradients> {
        let b = cache.batch;
        let n_logits = self.n_outputs();
        if dlogits.shape != [b, n_logits] {
            return Err(Error::Shape(format!(
                "dlogits {:?} does not match batch of {b} x {n_logits}",
                dlogits.shape
            )));
        }
        let mut grads = self.zero_gradients();
        let mut slot = grads.tensors.len();
        let mut pool_slot = cache.argmax.len();
        let mut grad = dlogits.data.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (din, dout) = (self.dims[i], self.dims[i + 1]);
            let (n_in, n_out) = (din.len(), dout.len());
            let input = &cache.inputs[i].data;
            // the network input needs no gradient
            let want_input = i > 0;
            let mut gin = vec![0.0; if want_input { b * n_in } else { 0 }];
            match layer {
                Layer::Conv { weight, .. } => {
                    slot -= 2;
                    let Dims::Map(h, w, c) = din else { unreachable!() };
                    let (gw, gb) = split_pair(&mut grads.tensors, slot);
                    for s in 0..b {
                        layers::conv3x3_backward(
                            &input[s * n_in..(s + 1) * n_in],
                            (h, w, c),
                            &weight.data,
                            &grad[s * n_out..(s + 1) * n_out],
                            &mut gw.data,
                            &mut gb.data,
                            want_input.then(|| &mut gin[s * n_in..(s + 1) * n_in]),
                        );
                    }
                }
                Layer::Relu => {
                    if want_input {
                        for ((g, &x), &go) in gin.iter_mut().zip(input).zip(&grad) {
                            *g = if x > 0.0 { go } else { 0.0 };
                        }
                    }
                }
                Layer::MaxPool => {
                    pool_slot -= 1;
                    let idx = &cache.argmax[pool_slot];
                    if want_input {
                        for s in 0..b {
                            let dst = &mut gin[s * n_in..(s + 1) * n_in];
                            for o in 0..n_out {
                                dst[idx[s * n_out + o] as usize] += grad[s * n_out + o];
                            }
                        }
                    }
                }
                Layer::Flatten => {
                    if want_input {
                        gin.copy_from_slice(&grad);
                    }
                }
                Layer::Dense { weight, .. } => {
                    slot -= 2;
                    let (gw, gb) = split_pair(&mut grads.tensors, slot);
                    for s in 0..b {
                        layers::dense_backward(
                            &input[s * n_in..(s + 1) * n_in],
                            &weight.data,
                            &grad[s * n_out..(s + 1) * n_out],
                            &mut gw.data,
                            &mut gb.data,
                            want_input.then(|| &mut gin[s * n_in..(s + 1) * n_in]),
                        );
                    }
                }
            }
            grad = gin;
        }
        Ok(grads)
    }
}

fn split_pair(tensors: &mut [Tensor], at: usize) -> (&mut Tensor, &mut Tensor) {
    let (a, b) = tensors[at..].split_at_mut(1);
    (&mut a[0], &mut b[0])
}
