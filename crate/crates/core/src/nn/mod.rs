//! Dense networks for the value function and the transport maps, with
//! hand-written reverse accumulation, Adam, EMA and LR scheduling.

mod embed;
mod matrix;
mod mlp;
mod optim;
mod params;
mod transport;
mod value;

pub use embed::positional_time_embedding;
pub use matrix::Matrix;
pub use mlp::{Activation, MlpSpec, MlpTape};
pub use optim::{cosine_lr, ema_update, AdamState};
pub use params::{LayerShape, ParameterStore};
pub use transport::TransportNet;
pub use value::{ValueInputGrad, ValueNet, ValueQuery, ValueTape, DEFAULT_WIDTH};
