//! Spatial folding ensemble network for EEG emotion recognition.
//!
//! The pipeline maps each EEG frame onto a 9x9 scalp grid ([`montage`]),
//! fills unsampled cells ([`interp`]), folds the grid along its symmetry
//! axes ([`fold`]), and trains one 3D CNN per fold view ([`nn`]). The
//! member predictions are combined by majority vote ([`ensemble`]).
//! [`harness`] wires everything into experiments and ablation suites.

pub mod data;
pub mod ensemble;
pub mod fold;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod montage;
pub mod nn;
