//! Spectral attention networks at desk scale.
//!
//! The pipeline: build or load a [`graph::Graph`], take the Laplacian
//! spectrum with [`spectral::eigendecompose`], turn the eigenfunctions into
//! learned positional encodings ([`lpe`]), and feed a fully-connected graph
//! transformer with dual sparse/full attention ([`san`]). The [`wl`] module
//! holds the 1-WL vs. spectra discrimination experiments and [`train`] the
//! optimization loop and ablation harness. Everything differentiable runs on
//! the tape engine in [`autodiff`].

pub mod autodiff;
pub mod error;
pub mod graph;
pub mod lpe;
pub mod san;
pub mod spectral;
pub mod train;
pub mod wl;

pub use error::{Error, Result};
