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

//! Property-map collective variable.
//!
//! ```text
//! S(x) = sum_i q_i exp(-lambda D_i) / sum_i exp(-lambda D_i)
//! ```
//!
//! The sums run over the active set handed in (neighbourlist members or all
//! references). Evaluation subtracts `min_i D_i` before exponentiating.

use crate::geometry::center;
use crate::msd::DistanceResult;
use crate::{Error, Result, Structure, Vec3};

const WEIGHT_MATCH_TOL: f64 = 1e-12;

/// Reference structures with their properties and the CV's `lambda` (nm^-2).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    structures: Vec<Structure>,
    properties: Vec<f64>,
    lambda: f64,
}

impl ReferenceSet {
    /// Centers every structure. `properties` default to the reference index.
    pub fn new(
        structures: Vec<Structure>,
        properties: Option<Vec<f64>>,
        lambda: f64,
    ) -> Result<Self> {
        let first = structures
            .first()
            .ok_or_else(|| Error::Config("reference set is empty".into()))?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        for (i, s) in structures.iter().enumerate() {
            if s.len() != first.len() {
                return Err(Error::Config(format!(
                    "reference {i} has {} atoms, reference 0 has {}",
                    s.len(),
                    first.len()
                )));
            }
            let same = |a: &[f64], b: &[f64]| {
                a.iter()
                    .zip(b)
                    .all(|(u, v)| (u - v).abs() <= WEIGHT_MATCH_TOL)
            };
            if !same(s.disp_weights(), first.disp_weights())
                || !same(s.align_weights(), first.align_weights())
            {
                return Err(Error::Config(format!(
                    "reference {i} weights differ from reference 0"
                )));
            }
        }
        let properties = match properties {
            Some(q) => {
                if q.len() != structures.len() {
                    return Err(Error::Config(format!(
                        "{} properties for {} references",
                        q.len(),
                        structures.len()
                    )));
                }
                if q.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("reference property".into()));
                }
                q
            }
            None => (0..structures.len()).map(|i| i as f64).collect(),
        };
        Ok(Self {
            structures: structures.iter().map(center).collect(),
            properties,
            lambda,
        })
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    pub fn n_atoms(&self) -> usize {
        self.structures[0].len()
    }

    pub fn structures(&self) -> &[Structure] {
        &self.structures
    }

    pub fn structure(&self, i: usize) -> Result<&Structure> {
        self.structures.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.len(),
        })
    }

    pub fn properties(&self) -> &[f64] {
        &self.properties
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Weights shared by all references, used for the current structure.
    pub fn disp_weights(&self) -> &[f64] {
        self.structures[0].disp_weights()
    }

    pub fn align_weights(&self) -> &[f64] {
        self.structures[0].align_weights()
    }

    /// Wraps raw simulation coordinates with the reference weights.
    pub fn structure_from_coords(&self, coords: Vec<Vec3>) -> Result<Structure> {
        self.structures[0].with_coords(coords)
    }
}

/// CV value and `dS/dx_k` per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub value: f64,
    pub grad: Vec<Vec3>,
}

/// Evaluates the property map over the supplied `(reference index, distance)`
/// pairs.
pub fn property_map(
    distances: &[(usize, DistanceResult)],
    refs: &ReferenceSet,
) -> Result<CvResult> {
    let (_, first) = distances.first().ok_or(Error::EmptyActiveSet)?;
    let n_atoms = first.grad.len();
    let lambda = refs.lambda();

    let mut d_min = f64::INFINITY;
    for (i, d) in distances {
        if *i >= refs.len() {
            return Err(Error::IndexOutOfRange {
                index: *i,
                len: refs.len(),
            });
        }
        if !d.value.is_finite() {
            return Err(Error::NonFinite(format!("distance to reference {i}")));
        }
        if d.grad.len() != n_atoms {
            return Err(Error::AtomCountMismatch {
                expected: n_atoms,
                found: d.grad.len(),
            });
        }
        d_min = d_min.min(d.value);
    }

    let weights: Vec<f64> = distances
        .iter()
        .map(|(_, d)| (-lambda * (d.value - d_min)).exp())
        .collect();
    let norm: f64 = weights.iter().sum();
    let value = distances
        .iter()
        .zip(&weights)
        .map(|((i, _), w)| refs.properties()[*i] * w)
        .sum::<f64>()
        / norm;

    // dS/dD_i = -lambda p_i (q_i - S)
    let mut grad = vec![Vec3::zeros(); n_atoms];
    for ((i, d), w) in distances.iter().zip(&weights) {
        let coeff = -lambda * (w / norm) * (refs.properties()[*i] - value);
        if coeff == 0.0 {
            continue;
        }
        for (g, dg) in grad.iter_mut().zip(&d.grad) {
            *g += dg * coeff;
        }
    }
    Ok(CvResult { value, grad })
}
