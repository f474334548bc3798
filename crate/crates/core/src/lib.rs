//! Numerical model of a spin-orbit photonic qudit platform.
//!
//! A polarized photon is coupled into a near-field total-angular-momentum
//! qubit and coupled back out into a four-dimensional spin ⊗ orbital state.
//! The crate renders the far-field images of that state under polarization
//! analyzers, samples single-photon counts, reconstructs density matrices,
//! and evaluates the single-photon multimode Wigner function.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bessel;
pub mod channel;
pub mod error;
pub mod measurement;
pub mod modes;
pub mod optimize;
pub mod states;
pub mod tomography;
pub mod wigner;

pub use num_complex::Complex64 as C64;

pub use channel::{full_channel, in_couple, out_couple, ChannelIsometry, CircuitModel, TamState};
pub use error::{Error, Result};
pub use measurement::{CountsImage, IntensityImage, NoiseModel, TomographyDataset};
pub use modes::{GridSpec, HbKind, ModeBank, ModeField, RadialProfile};
pub use states::{Basis, DensityMatrix, JonesVector, Polarization, SpinOrbitState};
pub use tomography::{CoefficientFit, ReconstructionResult};
pub use wigner::{SinglePhotonModeState, WignerSlice};

/// OAM charges spanned by the logical basis, in the order used for coefficient vectors.
pub const OAM_ORDER: [i32; 3] = [-2, 0, 2];
