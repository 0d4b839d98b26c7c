//! Image module: a from-scratch convolutional network with dense-connectivity
//! blocks, trained by plain mini-batch gradient descent under a plateau-decay,
//! best-checkpoint callback.

mod config;
mod network;
mod ops;
mod persist;
mod tensor;
mod train;

pub use config::{
    default_layers, CallbackConfig, CheckpointMetric, InputShape, LayerSpec, LossKind, NetConfig,
};
pub use network::{
    backward, conv2d_forward, dense_block_forward, forward, ConvKernel, DenseBlockParams, Network, Param,
};
pub use persist::{decode_params, encode_params, NetManifest, TensorEntry, NET_FORMAT_VERSION};
pub use tensor::Tensor4;
pub use train::{
    augment_validation, evaluate_net, history_csv, predict_image, train_net, EpochRecord, Evaluation, TrainedNet,
};
