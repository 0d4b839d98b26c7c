use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{LayerSpec, NetConfig};
use super::ops::{self, ConvGeom};
use super::tensor::Tensor4;
use crate::datamodel::{ImageTensor, Label};
use crate::error::{Error, Result};
use crate::scalar::{bce_with_logit, open_unit, sigmoid, Scalar};

/// One named parameter tensor. Conv kernels are `[k, k, cin, cout]`,
/// fully connected weights `[fin, fout]`, biases `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Scalar> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Param<T> {
    fn zeros(name: String, dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Param {
            name,
            dims,
            data: vec![T::zero(); n],
        }
    }
}

/// Kernel and bias of one convolution, for calling [`conv2d_forward`] directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<T: Scalar> {
    pub k: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[k][k][in][out]`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvKernel<T> {
    fn check(&self) -> Result<()> {
        if self.k == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Shape {
                layer: 0,
                message: "kernel dimensions must be ≥ 1".into(),
            });
        }
        if self.weights.len() != self.k * self.k * self.in_channels * self.out_channels
            || self.bias.len() != self.out_channels
        {
            return Err(Error::Shape {
                layer: 0,
                message: "kernel or bias length does not match its dimensions".into(),
            });
        }
        Ok(())
    }
}

/// Cross-correlation with zero padding over every image of a batch.
pub fn conv2d_forward<T: Scalar>(x: &Tensor4<T>, kernel: &ConvKernel<T>, stride: usize, padding: usize) -> Result<Tensor4<T>> {
    kernel.check()?;
    let (n, h, w, c) = x.dims();
    if c != kernel.in_channels {
        return Err(Error::Shape {
            layer: 0,
            message: format!("input has {c} channels, kernel expects {}", kernel.in_channels),
        });
    }
    let spec = LayerSpec::Conv {
        out_channels: kernel.out_channels,
        kernel: kernel.k,
        stride,
        padding,
    };
    let (oh, ow, co) = spec
        .output_shape((h, w, c))
        .map_err(|message| Error::Shape { layer: 0, message })?;
    let g = ConvGeom::dense(h, w, c, kernel.k, stride, padding, co);
    let mut out = vec![T::zero(); n * oh * ow * co];
    for (i, dst) in out.chunks_exact_mut(oh * ow * co).enumerate() {
        ops::conv_forward(&g, x.sample(i), &kernel.weights, &kernel.bias, dst);
    }
    Tensor4::new((n, oh, ow, co), out)
}

/// Internal 3×3 convolutions of one dense block, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlockParams<T: Scalar> {
    pub growth_rate: usize,
    pub layers: Vec<ConvKernel<T>>,
}

/// Applies a dense block: every internal conv + ReLU sees the concatenation of
/// the block input and all earlier internal outputs.
pub fn dense_block_forward<T: Scalar>(x: &Tensor4<T>, block: &DenseBlockParams<T>) -> Result<Tensor4<T>> {
    let (n, h, w, c0) = x.dims();
    let g = block.growth_rate;
    for (l, k) in block.layers.iter().enumerate() {
        k.check()?;
        if k.k != 3 || k.in_channels != c0 + l * g || k.out_channels != g {
            return Err(Error::Shape {
                layer: l,
                message: format!(
                    "internal layer {l} must be 3x3 from {} to {g} channels, got {}x{} from {} to {}",
                    c0 + l * g,
                    k.k,
                    k.k,
                    k.in_channels,
                    k.out_channels
                ),
            });
        }
    }
    let total = c0 + block.layers.len() * g;
    let mut out = Vec::with_capacity(n * h * w * total);
    let views: Vec<(&[T], &[T])> = block.layers.iter().map(|k| (&k.weights[..], &k.bias[..])).collect();
    for i in 0..n {
        out.extend(dense_forward_sample(x.sample(i), h, w, c0, g, &views));
    }
    Tensor4::new((n, h, w, total), out)
}

fn dense_geom(h: usize, w: usize, c0: usize, g: usize, total: usize, l: usize) -> ConvGeom {
    ConvGeom {
        h,
        w,
        cin: c0 + l * g,
        in_stride: total,
        k: 3,
        stride: 1,
        pad: 1,
        cout: g,
        out_stride: total,
        out_offset: c0 + l * g,
    }
}

fn dense_forward_sample<T: Scalar>(x: &[T], h: usize, w: usize, c0: usize, g: usize, layers: &[(&[T], &[T])]) -> Vec<T> {
    let total = c0 + layers.len() * g;
    let mut feat = vec![T::zero(); h * w * total];
    for (dst, src) in feat.chunks_exact_mut(total).zip(x.chunks_exact(c0)) {
        dst[..c0].copy_from_slice(src);
    }
    for (l, (wts, bias)) in layers.iter().enumerate() {
        let geom = dense_geom(h, w, c0, g, total, l);
        ops::conv_forward(&geom, &feat.clone(), wts, bias, &mut feat);
        let off = c0 + l * g;
        for px in feat.chunks_exact_mut(total) {
            ops::relu_in_place(&mut px[off..off + g]);
        }
    }
    feat
}

#[derive(Debug, Clone)]
enum Node {
    Conv { geom: ConvGeom, w: usize, b: usize },
    Relu,
    MaxPool { h: usize, w: usize, c: usize, k: usize, s: usize },
    Dense { h: usize, w: usize, c0: usize, g: usize, params: Vec<(usize, usize)> },
    Transition { geom: ConvGeom, w: usize, b: usize },
    Gap { hw: usize, c: usize },
    Fc { w: usize, b: usize },
    Head,
}

/// A compiled network: validated layer graph plus parameter tensors.
#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    config: NetConfig,
    nodes: Vec<Node>,
    params: Vec<Param<T>>,
}

impl<T: Scalar> Network<T> {
    /// Builds with every parameter zero.
    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes()?;
        let mut params: Vec<Param<T>> = Vec::new();
        let mut add = |name: String, dims: Vec<usize>| {
            params.push(Param::zeros(name, dims));
            params.len() - 1
        };
        let mut nodes = Vec::with_capacity(config.layers.len());
        for (i, layer) in config.layers.iter().enumerate() {
            let (h, w, c) = shapes[i];
            let node = match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => Node::Conv {
                    geom: ConvGeom::dense(h, w, c, kernel, stride, padding, out_channels),
                    w: add(format!("layer{i}.conv.weight"), vec![kernel, kernel, c, out_channels]),
                    b: add(format!("layer{i}.conv.bias"), vec![out_channels]),
                },
                LayerSpec::Relu => Node::Relu,
                LayerSpec::MaxPool { k, stride } => Node::MaxPool { h, w, c, k, s: stride },
                LayerSpec::DenseBlock { layers, growth_rate } => Node::Dense {
                    h,
                    w,
                    c0: c,
                    g: growth_rate,
                    params: (0..layers)
                        .map(|l| {
                            let cin = c + l * growth_rate;
                            (
                                add(format!("layer{i}.dense{l}.weight"), vec![3, 3, cin, growth_rate]),
                                add(format!("layer{i}.dense{l}.bias"), vec![growth_rate]),
                            )
                        })
                        .collect(),
                },
                LayerSpec::Transition { .. } => {
                    let co = shapes[i + 1].2;
                    Node::Transition {
                        geom: ConvGeom::dense(h, w, c, 1, 1, 0, co),
                        w: add(format!("layer{i}.transition.weight"), vec![1, 1, c, co]),
                        b: add(format!("layer{i}.transition.bias"), vec![co]),
                    }
                }
                LayerSpec::GlobalAvgPool => Node::Gap { hw: h * w, c },
                LayerSpec::FullyConnected { out } => Node::Fc {
                    w: add(format!("layer{i}.fc.weight"), vec![h * w * c, out]),
                    b: add(format!("layer{i}.fc.bias"), vec![out]),
                },
                LayerSpec::SigmoidHead => Node::Head,
            };
            nodes.push(node);
        }
        Ok(Network {
            config: config.clone(),
            nodes,
            params,
        })
    }

    /// Builds with fan-in scaled uniform weights, `U(±√(6 / fan_in))`, drawn
    /// from `config.init_seed` in declaration order; biases start at zero.
    pub fn new(config: &NetConfig) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        for p in &mut net.params {
            if p.dims.len() == 1 {
                continue;
            }
            let fan_in: usize = p.dims[..p.dims.len() - 1].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in &mut p.data {
                *v = T::lit(rng.random_range(-bound..bound));
            }
        }
        Ok(net)
    }

    /// Rebuilds from stored parameters; names and dims must match the config.
    pub fn from_params(config: &NetConfig, params: Vec<Param<T>>) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        if params.len() != net.params.len() {
            return Err(Error::validation(format!(
                "expected {} parameter tensors, got {}",
                net.params.len(),
                params.len()
            )));
        }
        for (want, got) in net.params.iter().zip(&params) {
            if want.name != got.name || want.dims != got.dims || got.data.len() != want.data.len() {
                return Err(Error::validation(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    got.name, got.dims, want.name, want.dims
                )));
            }
            if got.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("parameter {} has non-finite values", got.name)));
            }
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    fn check_input(&self, shape: (usize, usize, usize)) -> Result<()> {
        let want = self.config.input.tuple();
        if shape != want {
            return Err(Error::Shape {
                layer: 0,
                message: format!("input shape {shape:?} does not match network input {want:?}"),
            });
        }
        Ok(())
    }

    /// Activations of one sample: index `i` is the input of node `i`, the last
    /// entry is the logit.
    fn activations(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(self.nodes.len() + 1);
        acts.push(x.to_vec());
        for node in &self.nodes {
            let a = acts.last().expect("input pushed above");
            let next = match node {
                Node::Conv { geom, w, b } => {
                    let mut out = vec![T::zero(); geom.oh() * geom.ow() * geom.cout];
                    ops::conv_forward(geom, a, &self.params[*w].data, &self.params[*b].data, &mut out);
                    out
                }
                Node::Relu => {
                    let mut out = a.clone();
                    ops::relu_in_place(&mut out);
                    out
                }
                Node::MaxPool { h, w, c, k, s } => ops::maxpool_forward(a, *h, *w, *c, *k, *s),
                Node::Dense { h, w, c0, g, params } => {
                    let views: Vec<(&[T], &[T])> = params
                        .iter()
                        .map(|&(wi, bi)| (&self.params[wi].data[..], &self.params[bi].data[..]))
                        .collect();
                    dense_forward_sample(a, *h, *w, *c0, *g, &views)
                }
                Node::Transition { geom, w, b } => {
                    let mut mid = vec![T::zero(); geom.h * geom.w * geom.cout];
                    ops::conv_forward(geom, a, &self.params[*w].data, &self.params[*b].data, &mut mid);
                    ops::avgpool2_forward(&mid, geom.h, geom.w, geom.cout)
                }
                Node::Gap { hw, c } => ops::global_avg_forward(a, *hw, *c),
                Node::Fc { w, b } => ops::fc_forward(a, &self.params[*w].data, &self.params[*b].data),
                Node::Head => a.clone(),
            };
            acts.push(next);
        }
        acts
    }

    pub(crate) fn logit(&self, x: &[T]) -> T {
        self.activations(x).last().expect("at least the input")[0]
    }

    /// Propagates `dlogit` back through one sample, accumulating into `grads`.
    fn backprop(&self, acts: &[Vec<T>], dlogit: T, grads: &mut [Vec<T>]) {
        let mut g = vec![dlogit];
        for (i, node) in self.nodes.iter().enumerate().rev() {
            let input = &acts[i];
            g = match node {
                Node::Conv { geom, w, b } => {
                    let mut gx = vec![T::zero(); input.len()];
                    let (gw, gb) = pair_mut(grads, *w, *b);
                    ops::conv_backward(geom, input, &self.params[*w].data, &g, &mut gx, gw, gb);
                    gx
                }
                Node::Relu => g
                    .iter()
                    .zip(input)
                    .map(|(&gv, &x)| if x > T::zero() { gv } else { T::zero() })
                    .collect(),
                Node::MaxPool { h, w, c, k, s } => ops::maxpool_backward(input, &g, *h, *w, *c, *k, *s),
                Node::Dense { h, w, c0, g: growth, params } => {
                    let feat = &acts[i + 1];
                    let total = c0 + params.len() * growth;
                    let mut gfeat = g;
                    for (l, &(wi, bi)) in params.iter().enumerate().rev() {
                        let geom = dense_geom(*h, *w, *c0, *growth, total, l);
                        let off = geom.out_offset;
                        let mut gz = Vec::with_capacity(h * w * growth);
                        for (fpx, gpx) in feat.chunks_exact(total).zip(gfeat.chunks_exact(total)) {
                            for j in off..off + growth {
                                gz.push(if fpx[j] > T::zero() { gpx[j] } else { T::zero() });
                            }
                        }
                        let (gw, gb) = pair_mut(grads, wi, bi);
                        ops::conv_backward(&geom, feat, &self.params[wi].data, &gz, &mut gfeat, gw, gb);
                    }
                    gfeat.chunks_exact(total).flat_map(|px| px[..*c0].iter().copied()).collect()
                }
                Node::Transition { geom, w, b } => {
                    let gmid = ops::avgpool2_backward(&g, geom.h, geom.w, geom.cout);
                    let mut gx = vec![T::zero(); input.len()];
                    let (gw, gb) = pair_mut(grads, *w, *b);
                    ops::conv_backward(geom, input, &self.params[*w].data, &gmid, &mut gx, gw, gb);
                    gx
                }
                Node::Gap { hw, .. } => ops::global_avg_backward(&g, *hw),
                Node::Fc { w, b } => {
                    let (gw, gb) = pair_mut(grads, *w, *b);
                    ops::fc_backward(input, &self.params[*w].data, &g, gw, gb)
                }
                Node::Head => g,
            };
        }
    }

    pub(crate) fn zero_grads(&self) -> Vec<Vec<T>> {
        self.params.iter().map(|p| vec![T::zero(); p.data.len()]).collect()
    }

    /// Adds the gradient of `scale · Σ BCE` over the given samples into
    /// `grads`; returns the summed loss and logits.
    pub(crate) fn accumulate<'a>(
        &self,
        samples: impl IntoIterator<Item = (&'a [T], Label)>,
        scale: T,
        grads: &mut [Vec<T>],
    ) -> (T, Vec<T>) {
        let mut loss = T::zero();
        let mut logits = Vec::new();
        for (x, label) in samples {
            let acts = self.activations(x);
            let z = acts.last().expect("logit")[0];
            let y = label.target::<T>();
            loss += bce_with_logit(z, y);
            logits.push(z);
            self.backprop(&acts, scale * (sigmoid(z) - y), grads);
        }
        (loss, logits)
    }

    /// Logit for every image of the batch.
    pub fn logits(&self, x: &Tensor4<T>) -> Result<Vec<T>> {
        self.check_input(x.sample_shape())?;
        Ok((0..x.batch()).map(|i| self.logit(x.sample(i))).collect())
    }

    /// ASD probability for every image of the batch, strictly inside (0, 1).
    pub fn forward(&self, x: &Tensor4<T>) -> Result<Vec<T>> {
        Ok(self.logits(x)?.into_iter().map(|z| open_unit(sigmoid(z))).collect())
    }

    /// Mean binary cross-entropy over the batch.
    pub fn loss(&self, x: &Tensor4<T>, labels: &[Label]) -> Result<T> {
        self.check_batch(x, labels)?;
        let total = (0..x.batch())
            .map(|i| bce_with_logit(self.logit(x.sample(i)), labels[i].target()))
            .fold(T::zero(), |a, b| a + b);
        Ok(total / T::from_count(x.batch()))
    }

    fn check_batch(&self, x: &Tensor4<T>, labels: &[Label]) -> Result<()> {
        self.check_input(x.sample_shape())?;
        if x.batch() == 0 {
            return Err(Error::validation("empty batch"));
        }
        if labels.len() != x.batch() {
            return Err(Error::validation(format!(
                "{} labels for a batch of {}",
                labels.len(),
                x.batch()
            )));
        }
        Ok(())
    }

    /// Mean loss and its exact gradient for every parameter tensor, in
    /// declaration order.
    pub fn backward(&self, x: &Tensor4<T>, labels: &[Label]) -> Result<(T, Vec<Vec<T>>)> {
        self.check_batch(x, labels)?;
        let n = T::from_count(x.batch());
        let mut grads = self.zero_grads();
        let (loss, _) = self.accumulate(
            (0..x.batch()).map(|i| (x.sample(i), labels[i])),
            T::one() / n,
            &mut grads,
        );
        Ok((loss / n, grads))
    }

    /// Probability for a single image.
    pub fn predict(&self, img: &ImageTensor<T>) -> Result<T> {
        self.check_input(img.shape())?;
        Ok(open_unit(sigmoid(self.logit(img.data()))))
    }
}

fn pair_mut<T>(v: &mut [Vec<T>], a: usize, b: usize) -> (&mut [T], &mut [T]) {
    debug_assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

/// Free-function form of [`Network::forward`].
pub fn forward<T: Scalar>(net: &Network<T>, x: &Tensor4<T>) -> Result<Vec<T>> {
    net.forward(x)
}

/// Free-function form of [`Network::backward`], gradients only.
pub fn backward<T: Scalar>(net: &Network<T>, x: &Tensor4<T>, labels: &[Label]) -> Result<Vec<Vec<T>>> {
    net.backward(x, labels).map(|(_, g)| g)
}
