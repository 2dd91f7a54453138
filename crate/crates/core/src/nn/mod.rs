//! The numerical kernel: matrices, LSTM cell, self-attention (scaled
//! dot-product and additive), dense layers, MSE loss, Adam, and a
//! finite-difference gradient oracle. Everything is `f64`.

pub mod adam;
pub mod attention;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod matrix;

pub use adam::{adam_step, AdamState};
pub use attention::{
    additive_attention_backward, additive_attention_forward, attention_backward,
    attention_forward, softmax_rows, softmax_rows_backward, AdditiveAttentionCache,
    AdditiveAttentionParams, AttentionCache, AttentionParams,
};
pub use dense::{dense_backward, dense_forward, Activation, DenseBackward, DenseCache};
pub use gradcheck::{finite_difference_gradient, gradient_rel_error, DEFAULT_EPSILON};
pub use loss::mse_loss;
pub use lstm::{
    lstm_cell_backward, lstm_cell_forward, LstmBackward, LstmCache, LstmGrads, LstmParams,
    LstmState,
};
pub use matrix::Matrix;
