//! Dense f64 tensors with reverse-mode differentiation.
//!
//! Just enough operations to express the positional encoders and the main
//! transformer: no views, no fusion, fixed reduction order so identical
//! seeds give bit-identical results.

mod checkpoint;
mod gradcheck;
pub mod nn;
mod tensor;

pub use checkpoint::{load_params, save_params};
pub use gradcheck::{gradcheck, GradcheckReport, KINK_MARGIN};
pub use tensor::Tensor;
