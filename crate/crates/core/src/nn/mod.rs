//! Fully-connected networks in double precision.

mod adam;
mod dueling;
mod io;
mod mlp;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use dueling::{combine, DuelingCache, DuelingGrads, DuelingNet};
pub use io::{read_mlp, write_mlp, Tokens};
pub use mlp::{clip_global_norm, global_norm, ForwardCache, Layer, Mlp};

/// Global-norm bound applied to each network's gradient.
pub const CLIP_NORM: f64 = 10.0;
