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

//! Numerical self-tests behind the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{
    approx_distance_via, center, kearsley_fit, property_map, rotation_derivative_check,
    CostCounter, DistanceResult, HillStore, ReferenceSet, Result, Structure, Vec3,
};

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.worst.is_finite() && self.worst <= self.tolerance
    }
}

fn random_structure(rng: &mut ChaCha8Rng, n: usize, weighted: bool) -> Structure {
    let coords = (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let mut weight = || {
        if weighted {
            rng.random_range(0.2..1.0)
        } else {
            1.0
        }
    };
    let w = (0..n).map(|_| weight()).collect();
    let wp = (0..n).map(|_| weight()).collect();
    center(&Structure::new(coords, w, wp).expect("valid random structure"))
}

fn perturbed(rng: &mut ChaCha8Rng, s: &Structure, scale: f64) -> Structure {
    let coords = s
        .coords()
        .iter()
        .map(|c| {
            c + Vec3::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            )
        })
        .collect();
    center(&s.with_coords(coords).expect("same shape"))
}

/// Worst relative deviation of `grad` from central differences of `f` taken on
/// uncentered coordinates (re-centered before each evaluation).
fn fd_error(x: &Structure, grad: &[Vec3], f: impl Fn(&Structure) -> Result<f64>) -> Result<f64> {
    let scale = grad.iter().map(|g| g.amax()).fold(0.0, f64::max).max(1e-8);
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        for a in 0..3 {
            let mut plus = x.coords().to_vec();
            let mut minus = plus.clone();
            plus[k][a] += FD_STEP;
            minus[k][a] -= FD_STEP;
            let fp = f(&center(&x.with_coords(plus)?))?;
            let fm = f(&center(&x.with_coords(minus)?))?;
            let fd = (fp - fm) / (2.0 * FD_STEP);
            worst = worst.max((fd - grad[k][a]).abs() / scale);
        }
    }
    Ok(worst)
}

fn exact_value(x: &Structure, a: &Structure) -> Result<DistanceResult> {
    crate::exact_distance(x, a, &mut CostCounter::default())
}

/// Runs every check on `instances` seeded random cases.
pub fn run_checks(seed: u64, instances: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ortho: f64 = 0.0;
    let mut drot: f64 = 0.0;
    let mut exact_grad: f64 = 0.0;
    let mut approx_grad: f64 = 0.0;
    let mut chain: f64 = 0.0;
    let mut hill: f64 = 0.0;

    for _ in 0..instances {
        let n = rng.random_range(3..=12);
        let a = random_structure(&mut rng, n, true);
        let x = a.with_coords(random_structure(&mut rng, n, false).coords().to_vec())?;
        let x = center(&x);

        let fit = kearsley_fit(&x, &a, false)?;
        let r = fit.rotation;
        ortho = ortho
            .max((r.transpose() * r - crate::Mat3::identity()).amax())
            .max((r.determinant() - 1.0).abs());
        drot = drot.max(rotation_derivative_check(&x, &a, FD_STEP)?);

        let d = exact_value(&x, &a)?;
        exact_grad = exact_grad.max(fd_error(&x, &d.grad, |p| Ok(exact_value(p, &a)?.value))?);

        let y = perturbed(&mut rng, &x, 0.05);
        let saved = kearsley_fit(&y, &a, false)?.rotation;
        let d = approx_distance_via(&x, &a, &y, &saved)?;
        approx_grad = approx_grad.max(fd_error(&x, &d.grad, |p| {
            Ok(approx_distance_via(p, &a, &y, &saved)?.value)
        })?);

        let structures: Vec<Structure> = (0..4).map(|_| perturbed(&mut rng, &a, 0.3)).collect();
        let refs = ReferenceSet::new(structures, None, 2.0)?;
        let cv = |p: &Structure| -> Result<crate::CvResult> {
            let ds = refs
                .structures()
                .iter()
                .enumerate()
                .map(|(i, s)| Ok((i, exact_value(p, s)?)))
                .collect::<Result<Vec<_>>>()?;
            property_map(&ds, &refs)
        };
        let s0 = cv(&x)?;
        chain = chain.max(fd_error(&x, &s0.grad, |p| Ok(cv(p)?.value))?);

        let mut store = HillStore::new(1, 0.7, vec![0.4], None)?;
        for step in 0..5 {
            store.deposit(&[s0.value + rng.random_range(-0.6..0.6)], step)?;
        }
        let (_, force) = store.bias_and_force(std::slice::from_ref(&s0))?;
        let minus_force: Vec<Vec3> = force.iter().map(|f| -f).collect();
        hill = hill.max(fd_error(&x, &minus_force, |p| {
            Ok(store.bias_direct(&[cv(p)?.value]).0)
        })?);
    }

    let row = |name, worst, tolerance| CheckRow {
        name,
        instances,
        worst,
        tolerance,
    };
    Ok(vec![
        row("rotation orthonormality", ortho, 1e-10),
        row("rotation derivative", drot, 1e-5),
        row("exact distance gradient", exact_grad, 1e-5),
        row("approximate distance gradient", approx_grad, 1e-5),
        row("property map chain rule", chain, 1e-5),
        row("hill force", hill, 1e-5),
    ])
}
