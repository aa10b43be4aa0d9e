//! Doubly normalised tensors (DNTs) of positive semi-definite operators.
//!
//! A DNT is an `n x n` grid of PSD operators whose rows and columns are all
//! POVMs, the operator analogue of a doubly stochastic matrix. This crate
//! builds them from coefficient POVMs, decides whether a given DNT is a
//! POVM-weighted combination of permutation tensors, tests joint
//! measurability of POVM families, and provides the classical and linear
//! algebra machinery these need, including a small dense SDP solver.

pub mod dnt;
pub mod formats;
pub mod hermat;
pub mod jointmeas;
pub mod linalg;
pub mod povm;
pub mod sdp;
pub mod stochastic;
