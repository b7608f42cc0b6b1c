//! Minimal deterministic neural-network engine.
//!
//! Everything is `f64` and single threaded. Layers are free functions over
//! parameter structs: a forward call returns its output plus a cache, and the
//! matching backward call consumes that cache.

mod activation;
mod conv;
mod dense;
mod gradcheck;
mod init;
mod loss;
mod lstm;
mod optim;
mod pool;
mod tensor;

pub use activation::{relu, relu_backward, ReluCache};
pub use conv::{conv1d_backward, conv1d_forward, conv1d_output_len, Conv1dCache, Conv1dGrads, Conv1dParams};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
pub use gradcheck::{central_difference, grad_check, relative_error, GradCheckReport};
pub use init::{glorot_uniform, uniform_tensor};
pub use loss::{softmax, softmax_cross_entropy, LossOutput};
pub use lstm::{
    lstm_backward, lstm_final_state, lstm_forward, lstm_step, Gate, GateParams, LstmCache, LstmGrads, LstmParams,
    LstmStepCache,
};
pub use optim::{Optimizer, OptimizerKind};
pub use pool::{maxpool1d_backward, maxpool1d_forward, pool_output_len, PoolCache};
pub use tensor::Tensor;
