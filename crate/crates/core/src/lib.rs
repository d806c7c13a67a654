// Copyright 2026 The metadyn-close authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! Property-map collective variables for metadynamics with a floating
//! close-structure approximation of the mean-square-distance (MSD) fits.
//!
//! The expensive part of a property-map CV is the optimal superposition of the
//! current structure onto every reference structure. The close-structure scheme
//! keeps one recent conformation `y` together with its exact fits to all
//! references and composes them with a single fresh fit `x -> y` per step,
//! recomputing everything only once `D(x, y)` exceeds a threshold.
//!
//! Module map:
//!
//! - [`geometry`]: weighted structures and the Kearsley quaternion fit with
//!   analytic rotation derivatives.
//! - [`msd`]: exact and approximated distances, the original and close-structure
//!   per-step drivers.
//! - [`neighbour`]: neighbourlist of the closest references.
//! - [`colvar`]: the property-map CV and its gradient.
//! - [`metadynamics`]: Gaussian hills, optional bias grid, bias forces.
//! - [`toysim`]: overdamped Langevin bead chain exercising the whole pipeline.
//! - [`perf`]: expensive-computation cost model and Amdahl projection.
//! - [`io`]: reference-set files and run outputs.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colvar;
pub mod eigen;
mod error;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod metadynamics;
pub mod msd;
pub mod neighbour;
pub mod perf;
pub mod selfcheck;
pub mod toysim;

pub use colvar::{property_map, CvResult, ReferenceSet};
pub use error::{Error, Result};
pub use exec::Executor;
pub use geometry::{center, kearsley_fit, rotation_derivative_check, RotationFit, Structure};
pub use metadynamics::{GridSpec, Hill, HillStore};
pub use msd::{
    approx_distance, approx_distance_via, exact_distance, CloseStructureState, CostCounter,
    DistanceEngine, DistanceResult, OriginalMethod, StepOutcome,
};
pub use neighbour::NeighbourList;
pub use perf::{amdahl, AmdahlInput, CostModel};
pub use toysim::{Mode, RunOptions, RunReport, ToySystem};

/// 3-vector in nm.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 real matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
