//! A purpose-built function-approximation stack for small actor-critic
//! agents: dense ReLU networks with reverse-mode gradients, Adam, soft
//! target updates, a tanh-squashed Gaussian policy head and a text
//! checkpoint format.

pub mod checkpoint;
pub mod error;
pub mod matrix;
pub mod net;
pub mod optim;
pub mod policy;

pub use error::{NetError, Result};
pub use matrix::Matrix;
pub use net::{mse_loss, param_count, polyak_update, DenseNet, Tape};
pub use optim::Adam;
pub use policy::{GaussianHead, GaussianPolicy, SquashedSample};
