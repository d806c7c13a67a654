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

//! Weighted structures and the Kearsley quaternion superposition.
//!
//! Two weight sets travel with every structure: displacement weights `w` scale
//! each atom's squared deviation in the distance, alignment weights `w'` define
//! the centre used for translation removal. Both are normalized to sum to one.
//!
//! [`kearsley_fit`] finds the proper rotation `R` minimizing
//! `sum_j w_j |x_j - R a_j|^2` as the eigenvector of the smallest eigenvalue of
//! the 4x4 Kearsley matrix, and optionally the derivative of `R` with respect to
//! every coordinate of `x` by first-order eigenvector perturbation.

use nalgebra::{Matrix4, Vector4};

use crate::eigen::jacobi_eigen;
use crate::{Error, Mat3, Result, Vec3};

/// Smallest admissible gap between the two lowest Kearsley eigenvalues when
/// rotation derivatives are requested.
pub const MIN_EIGEN_GAP: f64 = 1e-9;

/// Atom coordinates (nm) with displacement and alignment weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    coords: Vec<Vec3>,
    disp_weights: Vec<f64>,
    align_weights: Vec<f64>,
}

fn normalized(weights: &[f64], what: &str) -> Result<Vec<f64>> {
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidStructure(format!(
            "{what} weight {bad} is negative or non-finite"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidStructure(format!(
            "all {what} weights are zero"
        )));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

impl Structure {
    /// Builds a structure, normalizing both weight sets to unit sum.
    pub fn new(coords: Vec<Vec3>, disp_weights: Vec<f64>, align_weights: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if n < 2 {
            return Err(Error::InvalidStructure(format!(
                "need at least 2 atoms, got {n}"
            )));
        }
        for len in [disp_weights.len(), align_weights.len()] {
            if len != n {
                return Err(Error::AtomCountMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if coords.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("atom coordinate".into()));
        }
        Ok(Self {
            coords,
            disp_weights: normalized(&disp_weights, "displacement")?,
            align_weights: normalized(&align_weights, "alignment")?,
        })
    }

    /// Structure with uniform displacement and alignment weights.
    pub fn uniform(coords: Vec<Vec3>) -> Result<Self> {
        let n = coords.len();
        Self::new(coords, vec![1.0; n], vec![1.0; n])
    }

    /// Same weights, new coordinates.
    pub fn with_coords(&self, coords: Vec<Vec3>) -> Result<Self> {
        if coords.len() != self.len() {
            return Err(Error::AtomCountMismatch {
                expected: self.len(),
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("atom coordinate".into()));
        }
        Ok(Self {
            coords,
            disp_weights: self.disp_weights.clone(),
            align_weights: self.align_weights.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    pub fn disp_weights(&self) -> &[f64] {
        &self.disp_weights
    }

    pub fn align_weights(&self) -> &[f64] {
        &self.align_weights
    }

    /// Alignment-weighted centroid.
    pub fn centroid(&self) -> Vec3 {
        self.coords
            .iter()
            .zip(&self.align_weights)
            .fold(Vec3::zeros(), |acc, (c, w)| acc + c * *w)
    }

    pub fn is_centered(&self, tol: f64) -> bool {
        self.centroid().amax() <= tol
    }

    /// Applies `rotation` to every atom.
    pub fn rotated(&self, rotation: &Mat3) -> Self {
        Self {
            coords: self.coords.iter().map(|c| rotation * c).collect(),
            disp_weights: self.disp_weights.clone(),
            align_weights: self.align_weights.clone(),
        }
    }

    /// Shifts every atom by `t`.
    pub fn translated(&self, t: &Vec3) -> Self {
        Self {
            coords: self.coords.iter().map(|c| c + t).collect(),
            disp_weights: self.disp_weights.clone(),
            align_weights: self.align_weights.clone(),
        }
    }

    /// Weighted sum of squared deviations from `other` without any fitting.
    pub fn weighted_sq_deviation(&self, other: &Structure) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .zip(&self.disp_weights)
            .map(|((x, a), w)| w * (x - a).norm_squared())
            .sum()
    }
}

/// Removes the alignment-weighted centroid.
pub fn center(s: &Structure) -> Structure {
    let c = s.centroid();
    s.translated(&-c)
}

/// Optimal superposition of `a` onto `x`: `x_j ~ rotation * a_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationFit {
    pub rotation: Mat3,
    /// Unit quaternion `(q0, q1, q2, q3)`, largest-magnitude component positive.
    pub quaternion: Vector4<f64>,
    /// Kearsley eigenvalues, ascending. `eigenvalues[0]` is the minimal
    /// weighted residual.
    pub eigenvalues: [f64; 4],
    /// `derivatives[k][alpha]` is `dR / dx_{k alpha}`, taken with respect to the
    /// uncentered coordinates of `x` (re-centering with `x`'s alignment weights
    /// is part of the map).
    pub derivatives: Option<Vec<[Mat3; 3]>>,
}

impl RotationFit {
    /// Contracts a 3x3 coefficient matrix `c` with `dR/dx_k` for every atom:
    /// `out_k[alpha] = sum_{beta,gamma} c_{beta gamma} dR_{beta gamma}/dx_{k alpha}`.
    pub fn contract_derivatives(&self, c: &Mat3) -> Option<Vec<Vec3>> {
        self.derivatives.as_ref().map(|d| {
            d.iter()
                .map(|per_atom| {
                    Vec3::new(
                        c.component_mul(&per_atom[0]).sum(),
                        c.component_mul(&per_atom[1]).sum(),
                        c.component_mul(&per_atom[2]).sum(),
                    )
                })
                .collect()
        })
    }
}

/// `A(m, p)` such that `|x - q a q*| = |A q|` for pure quaternions, with
/// `m = x - a` and `p = x + a`.
fn kearsley_block(m: &Vec3, p: &Vec3) -> Matrix4<f64> {
    Matrix4::new(
        0.0, -m.x, -m.y, -m.z, //
        m.x, 0.0, -p.z, p.y, //
        m.y, p.z, 0.0, -p.x, //
        m.z, -p.y, p.x, 0.0,
    )
}

/// The Kearsley matrix `sum_j w_j A_j^T A_j`, written out in the coordinate
/// sums `p = x + a` and differences `m = x - a`.
fn kearsley_matrix(x: &[Vec3], a: &[Vec3], w: &[f64]) -> Matrix4<f64> {
    let mut k = Matrix4::zeros();
    for ((xj, aj), wj) in x.iter().zip(a).zip(w) {
        let m = xj - aj;
        let p = xj + aj;
        let (mx, my, mz) = (m.x, m.y, m.z);
        let (px, py, pz) = (p.x, p.y, p.z);
        k[(0, 0)] += wj * (mx * mx + my * my + mz * mz);
        k[(0, 1)] += wj * (my * pz - mz * py);
        k[(0, 2)] += wj * (mz * px - mx * pz);
        k[(0, 3)] += wj * (mx * py - my * px);
        k[(1, 1)] += wj * (mx * mx + py * py + pz * pz);
        k[(1, 2)] += wj * (mx * my - px * py);
        k[(1, 3)] += wj * (mx * mz - px * pz);
        k[(2, 2)] += wj * (my * my + px * px + pz * pz);
        k[(2, 3)] += wj * (my * mz - py * pz);
        k[(3, 3)] += wj * (mz * mz + px * px + py * py);
    }
    for i in 0..4 {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    k
}

/// Rotation matrix of the unit quaternion `q`, acting as `v -> q v q*`.
pub fn quaternion_to_matrix(q: &Vector4<f64>) -> Mat3 {
    let (q0, q1, q2, q3) = (q[0], q[1], q[2], q[3]);
    Mat3::new(
        q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3,
        2.0 * (q1 * q2 - q0 * q3),
        2.0 * (q1 * q3 + q0 * q2),
        2.0 * (q1 * q2 + q0 * q3),
        q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3,
        2.0 * (q2 * q3 - q0 * q1),
        2.0 * (q1 * q3 - q0 * q2),
        2.0 * (q2 * q3 + q0 * q1),
        q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3,
    )
}

/// Directional derivative of [`quaternion_to_matrix`] at `q` along `dq`.
fn quaternion_matrix_differential(q: &Vector4<f64>, dq: &Vector4<f64>) -> Mat3 {
    let (q0, q1, q2, q3) = (q[0], q[1], q[2], q[3]);
    let (d0, d1, d2, d3) = (dq[0], dq[1], dq[2], dq[3]);
    2.0 * Mat3::new(
        q0 * d0 + q1 * d1 - q2 * d2 - q3 * d3,
        q1 * d2 + d1 * q2 - q0 * d3 - d0 * q3,
        q1 * d3 + d1 * q3 + q0 * d2 + d0 * q2,
        q1 * d2 + d1 * q2 + q0 * d3 + d0 * q3,
        q0 * d0 - q1 * d1 + q2 * d2 - q3 * d3,
        q2 * d3 + d2 * q3 - q0 * d1 - d0 * q1,
        q1 * d3 + d1 * q3 - q0 * d2 - d0 * q2,
        q2 * d3 + d2 * q3 + q0 * d1 + d0 * q1,
        q0 * d0 - q1 * d1 - q2 * d2 + q3 * d3,
    )
}

fn fix_sign(mut q: Vector4<f64>) -> Vector4<f64> {
    let imax = q.iamax();
    if q[imax] < 0.0 {
        q = -q;
    }
    q
}

/// Fits `a` onto `x`. Both must be centered; the displacement weights of `x`
/// drive the residual and its alignment weights the derivative's centering term.
pub fn kearsley_fit(x: &Structure, a: &Structure, with_derivatives: bool) -> Result<RotationFit> {
    if x.len() != a.len() {
        return Err(Error::AtomCountMismatch {
            expected: x.len(),
            found: a.len(),
        });
    }
    let w = x.disp_weights();
    let k = kearsley_matrix(x.coords(), a.coords(), w);
    let eig = jacobi_eigen(&k);
    let q = fix_sign(eig.vector(0));
    let rotation = quaternion_to_matrix(&q);

    let derivatives = if with_derivatives {
        let gap = eig.values[1] - eig.values[0];
        if gap < MIN_EIGEN_GAP {
            return Err(Error::DegenerateFit { gap });
        }
        Some(rotation_derivatives(x, a, &q, &eig))
    } else {
        None
    };

    Ok(RotationFit {
        rotation,
        quaternion: q,
        eigenvalues: eig.values,
        derivatives,
    })
}

fn rotation_derivatives(
    x: &Structure,
    a: &Structure,
    q: &Vector4<f64>,
    eig: &crate::eigen::SymmetricEigen4,
) -> Vec<[Mat3; 3]> {
    let w = x.disp_weights();
    // dK/dx_{k alpha} = w_k (dA^T A_k + A_k^T dA), dA = A(e_alpha, e_alpha)
    let unit_blocks: [Matrix4<f64>; 3] = std::array::from_fn(|alpha| {
        let e = Vec3::ith(alpha, 1.0);
        kearsley_block(&e, &e)
    });
    let others: [(Vector4<f64>, f64); 3] =
        std::array::from_fn(|i| (eig.vector(i + 1), eig.values[0] - eig.values[i + 1]));

    let mut centered: Vec<[Mat3; 3]> = x
        .coords()
        .iter()
        .zip(a.coords())
        .zip(w)
        .map(|((xk, ak), wk)| {
            let block = kearsley_block(&(xk - ak), &(xk + ak));
            std::array::from_fn(|alpha| {
                let da = &unit_blocks[alpha];
                let dk = (da.transpose() * block + block.transpose() * da) * *wk;
                let dk_q = dk * q;
                let dq = others.iter().fold(Vector4::zeros(), |acc, (vm, gap)| {
                    acc + vm * (vm.dot(&dk_q) / gap)
                });
                quaternion_matrix_differential(q, &dq)
            })
        })
        .collect();

    // chain rule through x_c = x - sum_j w'_j x_j
    let total: [Mat3; 3] =
        std::array::from_fn(|alpha| centered.iter().fold(Mat3::zeros(), |acc, d| acc + d[alpha]));
    for (d, wp) in centered.iter_mut().zip(x.align_weights()) {
        for alpha in 0..3 {
            d[alpha] -= total[alpha] * *wp;
        }
    }
    centered
}

/// Maximum deviation between the analytic `dR/dx` of [`kearsley_fit`] and
/// central finite differences of `R` with step `h`, relative to the largest
/// analytic entry. `x` is re-centered after every perturbation; `a` is fixed.
pub fn rotation_derivative_check(x: &Structure, a: &Structure, h: f64) -> Result<f64> {
    let fit = kearsley_fit(x, a, true)?;
    let analytic = fit.derivatives.as_ref().expect("requested derivatives");
    let scale = analytic
        .iter()
        .flat_map(|d| d.iter().map(|m| m.amax()))
        .fold(0.0_f64, f64::max)
        .max(1e-12);

    let mut max_err = 0.0_f64;
    for k in 0..x.len() {
        for alpha in 0..3 {
            let mut plus = x.coords().to_vec();
            let mut minus = plus.clone();
            plus[k][alpha] += h;
            minus[k][alpha] -= h;
            let r_plus = kearsley_fit(&center(&x.with_coords(plus)?), a, false)?.rotation;
            let r_minus = kearsley_fit(&center(&x.with_coords(minus)?), a, false)?.rotation;
            let fd = (r_plus - r_minus) / (2.0 * h);
            max_err = max_err.max((fd - analytic[k][alpha]).amax() / scale);
        }
    }
    Ok(max_err)
}
