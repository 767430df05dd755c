//! The dual-channel LSTM classifier: forward pass, analytic backward pass
//! and initialization.

mod lstm;
mod matrix;
mod model;

pub use lstm::{lstm_backward, lstm_forward, Gate, LstmCache, LstmParams};
pub use matrix::Matrix;
pub use model::{loss_from_logits, Activation, Channel, Channels, Dense, ForwardCache, Gradients, ModelConfig, SsLstm};
