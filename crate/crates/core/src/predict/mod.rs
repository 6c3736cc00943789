//! Gated recurrent forecasters, one per cluster.
//!
//! A partition with one cluster gives a single model over the whole matrix;
//! one cluster per flow gives purely local models.

mod fleet;
mod gru;
mod model_io;
mod train;

pub use fleet::{cluster_seed, cluster_windows, predict_flows, predict_tm, train_partitioned, ClusterModel};
pub use gru::{GruModel, Scratch, Tape, TensorSpan};
pub use model_io::{
    load_model, read_model, save_model, write_model, ModelHeader, MODEL_FORMAT_VERSION, MODEL_MAGIC,
};
pub use train::{train, Adam, GruConfig, Profile, TrainReport, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, INIT_SCHEME};
