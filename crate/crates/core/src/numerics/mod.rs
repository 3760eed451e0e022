//! Dense linear algebra, activations, sampling and PCA.

mod activation;
mod matrix;
mod pca;
mod rng;

pub use activation::{argmax, log_sum_exp, sigmoid, softmax, softmax_in_place};
pub use matrix::{axpy, dot, matmul, Matrix, Vector};
pub use pca::{pca_2d, Pca2};
pub use rng::{sample_gaussian, Rng};
