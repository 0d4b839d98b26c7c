use serde::{Deserialize, Serialize};

use super::ops::ConvGeom;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        k: usize,
        stride: usize,
    },
    DenseBlock {
        layers: usize,
        growth_rate: usize,
    },
    Transition {
        compression: f64,
    },
    GlobalAvgPool,
    FullyConnected {
        out: usize,
    },
    SigmoidHead,
}

impl LayerSpec {
    /// Output `(h, w, c)` for a given input, or why the layer cannot accept it.
    pub fn output_shape(&self, (h, w, c): (usize, usize, usize)) -> std::result::Result<(usize, usize, usize), String> {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err("conv needs out_channels, kernel and stride ≥ 1".into());
                }
                match (
                    ConvGeom::out_dim(h, kernel, stride, padding),
                    ConvGeom::out_dim(w, kernel, stride, padding),
                ) {
                    (Some(oh), Some(ow)) => Ok((oh, ow, out_channels)),
                    _ => Err(format!("{kernel}x{kernel} kernel with padding {padding} does not fit {h}x{w}")),
                }
            }
            LayerSpec::Relu => Ok((h, w, c)),
            LayerSpec::MaxPool { k, stride } => {
                if k == 0 || stride == 0 {
                    return Err("max-pool needs k and stride ≥ 1".into());
                }
                if h < k || w < k {
                    return Err(format!("{k}x{k} pool does not fit {h}x{w}"));
                }
                Ok(((h - k) / stride + 1, (w - k) / stride + 1, c))
            }
            LayerSpec::DenseBlock { layers, growth_rate } => {
                if layers > 0 && growth_rate == 0 {
                    return Err("dense block growth rate must be ≥ 1".into());
                }
                Ok((h, w, c + layers * growth_rate))
            }
            LayerSpec::Transition { compression } => {
                if !(compression > 0.0 && compression <= 1.0) {
                    return Err(format!("compression {compression} outside (0, 1]"));
                }
                let out = (compression * c as f64).floor() as usize;
                if out == 0 {
                    return Err(format!("compression {compression} of {c} channels leaves none"));
                }
                if h < 2 || w < 2 {
                    return Err(format!("2x2 pooling does not fit {h}x{w}"));
                }
                Ok((h / 2, w / 2, out))
            }
            LayerSpec::GlobalAvgPool => Ok((1, 1, c)),
            LayerSpec::FullyConnected { out } => {
                if out == 0 {
                    return Err("fully connected layer needs ≥ 1 output".into());
                }
                Ok((1, 1, out))
            }
            LayerSpec::SigmoidHead => {
                if (h, w, c) != (1, 1, 1) {
                    return Err(format!("sigmoid head needs a single logit, got {h}x{w}x{c}"));
                }
                Ok((1, 1, 1))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    BinaryCrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointMetric {
    ValAccuracy,
}

/// Plateau learning-rate decay and best-weight checkpointing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallbackConfig {
    pub lr_decay_factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub checkpoint_metric: CheckpointMetric,
}

impl Default for CallbackConfig {
    fn default() -> Self {
        CallbackConfig {
            lr_decay_factor: 0.5,
            patience: 3,
            min_lr: 1e-4,
            checkpoint_metric: CheckpointMetric::ValAccuracy,
        }
    }
}

impl CallbackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(Error::validation(format!(
                "lr_decay_factor {} outside (0, 1)",
                self.lr_decay_factor
            )));
        }
        if self.patience == 0 {
            return Err(Error::validation("patience must be ≥ 1"));
        }
        if !(self.min_lr > 0.0 && self.min_lr.is_finite()) {
            return Err(Error::validation(format!("min_lr {} must be positive", self.min_lr)));
        }
        Ok(())
    }

    /// Next rate after a plateau: decayed, but never pushed below `min_lr`
    /// unless it already was.
    pub fn decayed(&self, lr: f64) -> f64 {
        (lr * self.lr_decay_factor).max(lr.min(self.min_lr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputShape {
    pub fn tuple(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
    pub init_seed: u64,
    pub batch_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub callback: CallbackConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::with_layers(
            InputShape {
                height: 32,
                width: 32,
                channels: 3,
            },
            default_layers(),
        )
    }
}

/// Conv(8, 3×3) → DenseBlock(4, 4) → Transition(0.5) → DenseBlock(4, 4)
/// → GlobalAvgPool → FC(1) → Sigmoid.
pub fn default_layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            out_channels: 8,
            kernel: 3,
            stride: 1,
            padding: 1,
        },
        LayerSpec::DenseBlock {
            layers: 4,
            growth_rate: 4,
        },
        LayerSpec::Transition { compression: 0.5 },
        LayerSpec::DenseBlock {
            layers: 4,
            growth_rate: 4,
        },
        LayerSpec::GlobalAvgPool,
        LayerSpec::FullyConnected { out: 1 },
        LayerSpec::SigmoidHead,
    ]
}

impl NetConfig {
    pub fn with_layers(input: InputShape, layers: Vec<LayerSpec>) -> Self {
        NetConfig {
            input,
            layers,
            loss: LossKind::BinaryCrossEntropy,
            init_seed: 0,
            batch_size: 32,
            epochs: 30,
            initial_lr: 0.1,
            callback: CallbackConfig::default(),
        }
    }

    /// Input shape of every layer followed by the final output shape.
    ///
    /// A `Shape` error names the index of the first layer that cannot accept
    /// its input.
    pub fn layer_shapes(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut shape = self.input.tuple();
        if shape.0 == 0 || shape.1 == 0 || shape.2 == 0 {
            return Err(Error::Shape {
                layer: 0,
                message: format!("input shape {shape:?} has a zero dimension"),
            });
        }
        let mut shapes = vec![shape];
        for (i, l) in self.layers.iter().enumerate() {
            shape = l.output_shape(shape).map_err(|message| Error::Shape { layer: i, message })?;
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Full build-time check: shapes chain, the head is `FC(1) → Sigmoid`,
    /// training settings are usable.
    pub fn validate(&self) -> Result<()> {
        self.layer_shapes()?;
        let n = self.layers.len();
        let tail_ok = n >= 2
            && self.layers[n - 2] == LayerSpec::FullyConnected { out: 1 }
            && self.layers[n - 1] == LayerSpec::SigmoidHead;
        if !tail_ok {
            return Err(Error::Shape {
                layer: n.saturating_sub(1),
                message: "network must end with FullyConnected{out: 1} then SigmoidHead".into(),
            });
        }
        if let Some(i) = self.layers[..n - 1].iter().position(|l| *l == LayerSpec::SigmoidHead) {
            return Err(Error::Shape {
                layer: i,
                message: "sigmoid head may only appear last".into(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be ≥ 1"));
        }
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::validation(format!(
                "initial_lr {} must be finite and non-negative",
                self.initial_lr
            )));
        }
        self.callback.validate()
    }
}
