//! Unsupervised semantic segmentation by factorizing the spatial activations
//! of pre-trained vision models.
//!
//! A feature tensor of shape `rows x cols x channels` is flattened to a
//! `(rows*cols) x channels` matrix `A` and factorized as `A ≈ W H` with
//! non-negative factors. Each pixel takes the concept with the largest
//! contribution in `W`; concepts are mapped onto a shared k-means vocabulary
//! either by cosine similarity of `H` rows to the cluster centers, or by
//! pinning `H` to the centers and solving only for `W`.
//!
//! Modules:
//! - [`tensor_io`]: domain containers and the FST binary format, PGM export,
//!   ground-truth mask ingestion.
//! - [`factorization`]: NMF solvers (free and fixed-`H`).
//! - [`clustering`]: global average pooling and the k-means vocabulary.
//! - [`segmentation`]: per-tile segmentation and mask resizing.
//! - [`evaluation`]: frequency matching, F1 reporting and linear probing.

pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod factorization;
mod linalg;
pub mod segmentation;
pub mod tensor_io;

pub use error::{Error, Result};
