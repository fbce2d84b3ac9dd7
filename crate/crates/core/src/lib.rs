//! Top-K generalized eigenvalue subspaces by stochastic minimization of the
//! Eckhart-Young loss, with CCA/PLS front-ends, baseline solvers, linear SSL
//! theory checks and a small MLP variant.

pub mod cca;
pub mod data;
pub mod deep;
pub mod error;
pub mod estimate;
pub mod ey;
pub mod gep;
pub mod linalg;
pub mod optim;
pub mod ssl;
pub mod synth;
pub mod train;

pub use data::{MultiviewBatch, WeightSet};
pub use error::{Error, Result};
pub use estimate::{BatchEstimate, DenseEstimate, GepEstimate};
pub use ey::{ey_evaluate, ey_gradient_update, ey_loss, ey_loss_stochastic, extract_spectrum, EyEvaluation};
pub use gep::{gep_solve, GepPair, Spectrum};
pub use linalg::Matrix;
