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

//! Cyclic Jacobi diagonalization of small symmetric matrices.
//!
//! Only the 4x4 Kearsley matrix goes through here, so the solver is written for
//! `Matrix4` and favours accuracy of the eigenvectors over speed: the rotation
//! derivatives are built from the full eigenbasis.

use nalgebra::{Matrix4, Vector4};

const MAX_SWEEPS: usize = 64;
const OFF_DIAGONAL_TOL: f64 = 1e-14;

/// Eigen-decomposition of a symmetric 4x4 matrix.
///
/// `values` are ascending; column `i` of `vectors` is the unit eigenvector of
/// `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen4 {
    pub values: [f64; 4],
    pub vectors: Matrix4<f64>,
}

impl SymmetricEigen4 {
    pub fn vector(&self, i: usize) -> Vector4<f64> {
        self.vectors.column(i).into_owned()
    }
}

fn off_diagonal_norm(a: &Matrix4<f64>) -> f64 {
    let mut sum = 0.0;
    for p in 0..4 {
        for q in (p + 1)..4 {
            sum += 2.0 * a[(p, q)] * a[(p, q)];
        }
    }
    sum.sqrt()
}

/// Diagonalizes `matrix` (assumed symmetric; only the upper triangle drives the
/// rotations, the lower is kept in sync).
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below `1e-14`
/// relative to the matrix norm (absolute when the norm is below one).
pub fn jacobi_eigen(matrix: &Matrix4<f64>) -> SymmetricEigen4 {
    let mut a = *matrix;
    let mut v = Matrix4::<f64>::identity();
    let scale = a.norm().max(1.0);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // A <- J^T A J with J = identity except J_pp = J_qq = c, J_pq = s, J_qp = -s
                for k in 0..4 {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..4 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let mut values = [0.0; 4];
    let mut vectors = Matrix4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a[(src, src)];
        vectors.set_column(dst, &v.column(src));
    }
    SymmetricEigen4 { values, vectors }
}
