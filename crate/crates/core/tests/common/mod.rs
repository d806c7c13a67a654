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

//! Oracles shared by the integration tests. Nothing here calls the fitting
//! code under test.

#![allow(dead_code)]

use metadyn_core::{center, Structure, Vec3};
use nalgebra::{Matrix3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_coords(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            )
        })
        .collect()
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.1..1.0)).collect()
}

/// Centered structure with random coordinates and weights.
pub fn random_structure(rng: &mut ChaCha8Rng, n: usize) -> Structure {
    let coords = random_coords(rng, n, 1.0);
    let w = random_weights(rng, n);
    let wp = random_weights(rng, n);
    center(&Structure::new(coords, w, wp).unwrap())
}

/// `s` with every coordinate jittered by up to `scale`, re-centered.
pub fn jitter(rng: &mut ChaCha8Rng, s: &Structure, scale: f64) -> Structure {
    let coords = s
        .coords()
        .iter()
        .zip(random_coords(rng, s.len(), scale))
        .map(|(c, d)| c + d)
        .collect();
    center(&s.with_coords(coords).unwrap())
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    rotation_from_quaternion(&random_unit_quaternion(rng))
}

/// Uniform on the 3-sphere via normalized Gaussians (Box-Muller by hand).
pub fn random_unit_quaternion(rng: &mut ChaCha8Rng) -> Vector4<f64> {
    loop {
        let mut g = [0.0; 4];
        for pair in g.chunks_mut(2) {
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            pair[0] = r * (std::f64::consts::TAU * u2).cos();
            pair[1] = r * (std::f64::consts::TAU * u2).sin();
        }
        let q = Vector4::from(g);
        let n = q.norm();
        if n > 1e-6 {
            return q / n;
        }
    }
}

/// Textbook unit-quaternion rotation matrix, `q = (w, x, y, z)`.
pub fn rotation_from_quaternion(q: &Vector4<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// `sum_j w_j |x_j - R a_j|^2` with `w` normalized here, on independently
/// centered copies of the inputs.
pub fn residual(x: &[Vec3], a: &[Vec3], w: &[f64], wp: &[f64], r: &Matrix3<f64>) -> f64 {
    let x = center_raw(x, wp);
    let a = center_raw(a, wp);
    let total: f64 = w.iter().sum();
    x.iter()
        .zip(&a)
        .zip(w)
        .map(|((xj, aj), wj)| wj / total * (xj - r * aj).norm_squared())
        .sum()
}

pub fn center_raw(c: &[Vec3], wp: &[f64]) -> Vec<Vec3> {
    let total: f64 = wp.iter().sum();
    let g = c
        .iter()
        .zip(wp)
        .fold(Vec3::zeros(), |acc, (cj, wj)| acc + cj * *wj)
        / total;
    c.iter().map(|cj| cj - g).collect()
}

/// Minimal residual over rotations by brute force: `samples` random unit
/// quaternions, then a shrinking coordinate pattern search from the best few.
pub fn brute_force_msd(x: &Structure, a: &Structure, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let (w, wp) = (x.disp_weights(), x.align_weights());
    let xc = center_raw(x.coords(), wp);
    let ac = center_raw(a.coords(), wp);
    let total: f64 = w.iter().sum();
    let f = |q: &Vector4<f64>| {
        let r = rotation_from_quaternion(&(q / q.norm()));
        xc.iter()
            .zip(&ac)
            .zip(w)
            .map(|((xj, aj), wj)| wj * (xj - r * aj).norm_squared())
            .sum::<f64>()
            / total
    };

    let mut best: Vec<(f64, Vector4<f64>)> = Vec::new();
    for _ in 0..samples {
        let q = random_unit_quaternion(rng);
        let v = f(&q);
        if best.len() < 8 || v < best[best.len() - 1].0 {
            best.push((v, q));
            best.sort_by(|p, q| p.0.total_cmp(&q.0));
            best.truncate(8);
        }
    }
    best.iter()
        .map(|(v0, q0)| {
            let (mut v, mut q) = (*v0, *q0);
            let mut step = 0.05;
            while step > 1e-12 {
                let mut improved = false;
                for i in 0..4 {
                    for sign in [1.0, -1.0] {
                        let mut t = q;
                        t[i] += sign * step;
                        t /= t.norm();
                        let vt = f(&t);
                        if vt < v {
                            v = vt;
                            q = t;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            v
        })
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference gradient of `f` over uncentered coordinates.
pub fn fd_gradient(coords: &[Vec3], h: f64, f: impl Fn(&[Vec3]) -> f64) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); coords.len()];
    for k in 0..coords.len() {
        for a in 0..3 {
            let mut p = coords.to_vec();
            let mut m = coords.to_vec();
            p[k][a] += h;
            m[k][a] -= h;
            out[k][a] = (f(&p) - f(&m)) / (2.0 * h);
        }
    }
    out
}

/// Largest component deviation relative to the largest analytic component.
pub fn rel_error(analytic: &[Vec3], fd: &[Vec3]) -> f64 {
    let scale = analytic
        .iter()
        .map(|g| g.amax())
        .fold(0.0, f64::max)
        .max(1e-12);
    analytic
        .iter()
        .zip(fd)
        .map(|(g, d)| (g - d).amax())
        .fold(0.0, f64::max)
        / scale
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// L1 distance between normalized histograms over the pooled range.
pub fn histogram_l1(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo).max(f64::MIN_POSITIVE);
    let hist = |v: &[f64]| {
        let mut h = vec![0.0; bins];
        for x in v {
            let k = (((x - lo) / width) * bins as f64)
                .floor()
                .clamp(0.0, (bins - 1) as f64) as usize;
            h[k] += 1.0 / v.len() as f64;
        }
        h
    };
    hist(a)
        .iter()
        .zip(hist(b))
        .map(|(p, q)| (p - q).abs())
        .sum()
}
