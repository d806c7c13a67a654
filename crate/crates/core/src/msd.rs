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

//! Exact and close-structure-approximated mean square distances.
//!
//! Exact distance to reference `a`:
//!
//! ```text
//! D(x, a)   = sum_j w_j |d_j|^2,             d_j = x_j - R_ax a_j
//! dD/dx_k   = 2 w_k d_k - w'_k sum_j 2 w_j d_j + (sum_j -2 w_j d_j a_j^T) : dR_ax/dx_k
//! ```
//!
//! The approximation replaces `R_ax` by `R_xy R_ay`, where `y` is the close
//! structure and `R_ay` was saved when `y` was assigned; only `R_xy` carries a
//! coordinate derivative. Every exact evaluation (one eigen-decomposition) is
//! charged as one expensive computation, every composed-rotation evaluation as
//! one cheap computation.

use crate::geometry::{kearsley_fit, RotationFit};
use crate::{Error, Executor, Mat3, NeighbourList, ReferenceSet, Result, Structure, Vec3};

const CENTER_TOL: f64 = 1e-10;

/// Distance value (nm^2), gradient `dD/dx_k`, and which route produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub grad: Vec<Vec3>,
    pub exact: bool,
}

/// Expensive (eigen-decomposition) and cheap (composed rotation) evaluations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CostCounter {
    pub expensive: u64,
    pub cheap: u64,
}

impl std::ops::AddAssign for CostCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.expensive += rhs.expensive;
        self.cheap += rhs.cheap;
    }
}

fn check_centered(x: &Structure) -> Result<()> {
    if x.is_centered(CENTER_TOL) {
        Ok(())
    } else {
        Err(Error::InvalidStructure(format!(
            "structure is not centered (centroid {:?})",
            x.centroid().as_slice()
        )))
    }
}

/// Distance and gradient of `x` against `targets` placed by `rotation`, with
/// `fit` supplying `d rotation / dx`.
fn distance_with_rotation(
    x: &Structure,
    targets: &[Vec3],
    fit: &RotationFit,
    exact: bool,
) -> DistanceResult {
    let w = x.disp_weights();
    let wp = x.align_weights();
    let d: Vec<Vec3> = x
        .coords()
        .iter()
        .zip(targets)
        .map(|(xj, bj)| xj - fit.rotation * bj)
        .collect();
    let value = d.iter().zip(w).map(|(dj, wj)| wj * dj.norm_squared()).sum();

    let net = d
        .iter()
        .zip(w)
        .fold(Vec3::zeros(), |acc, (dj, wj)| acc + dj * (2.0 * wj));
    let coeff = d
        .iter()
        .zip(targets)
        .zip(w)
        .fold(Mat3::zeros(), |acc, ((dj, bj), wj)| {
            acc + dj * bj.transpose() * (-2.0 * wj)
        });
    let rotation_term = fit
        .contract_derivatives(&coeff)
        .expect("fit carries derivatives");

    let grad = d
        .iter()
        .zip(w)
        .zip(wp)
        .zip(rotation_term)
        .map(|(((dk, wk), wpk), rk)| dk * (2.0 * wk) - net * *wpk + rk)
        .collect();
    DistanceResult { value, grad, exact }
}

/// Exact distance together with the fit it used. Pure: charges nothing.
pub(crate) fn exact_with_fit(
    x: &Structure,
    a: &Structure,
) -> Result<(DistanceResult, RotationFit)> {
    let fit = kearsley_fit(x, a, true)?;
    Ok((distance_with_rotation(x, a.coords(), &fit, true), fit))
}

/// Exact MSD of centered `x` against centered `a`, with gradient.
pub fn exact_distance(
    x: &Structure,
    a: &Structure,
    counter: &mut CostCounter,
) -> Result<DistanceResult> {
    check_centered(x)?;
    let (result, _) = exact_with_fit(x, a)?;
    counter.expensive += 1;
    Ok(result)
}

fn approx_with(x: &Structure, a: &Structure, saved: &Mat3, fit_xy: &RotationFit) -> DistanceResult {
    let placed: Vec<Vec3> = a.coords().iter().map(|aj| saved * aj).collect();
    distance_with_rotation(x, &placed, fit_xy, false)
}

/// Close-structure approximation against `a` through the close structure `y`,
/// with `saved` the stored rotation taking `a` onto `y`. Pure: charges nothing.
pub fn approx_distance_via(
    x: &Structure,
    a: &Structure,
    y: &Structure,
    saved: &Mat3,
) -> Result<DistanceResult> {
    check_centered(x)?;
    let fit_xy = kearsley_fit(x, y, true)?;
    Ok(approx_with(x, a, saved, &fit_xy))
}

/// Close-structure approximation of the distance to reference `a_index`.
/// Needs a state whose current `R_xy` fit belongs to `x`.
pub fn approx_distance(
    x: &Structure,
    a_index: usize,
    state: &CloseStructureState,
    refs: &ReferenceSet,
    counter: &mut CostCounter,
) -> Result<DistanceResult> {
    check_centered(x)?;
    let a = refs.structure(a_index)?;
    let saved = state
        .saved_rots
        .get(a_index)
        .ok_or(Error::IndexOutOfRange {
            index: a_index,
            len: state.saved_rots.len(),
        })?;
    let fit_xy = state.fit_xy.as_ref().ok_or(Error::StateNotReady)?;
    if a.len() != x.len() {
        return Err(Error::AtomCountMismatch {
            expected: x.len(),
            found: a.len(),
        });
    }
    counter.cheap += 1;
    Ok(approx_with(x, a, saved, fit_xy))
}

/// What one CV-evaluation step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Distances over the active set, ascending reference index.
    pub results: Vec<(usize, DistanceResult)>,
    /// Costs charged during this step.
    pub cost: CostCounter,
    pub reassigned: bool,
    pub nl_updated: bool,
    /// `D(x, y)` against the close structure held before this step.
    pub close_distance: Option<f64>,
}

fn select(all: Vec<DistanceResult>, active: &[usize]) -> Vec<(usize, DistanceResult)> {
    let mut all: Vec<Option<DistanceResult>> = all.into_iter().map(Some).collect();
    active
        .iter()
        .map(|&i| (i, all[i].take().expect("active index is unique")))
        .collect()
}

fn check_shapes(x: &Structure, refs: &ReferenceSet, nl: &NeighbourList) -> Result<()> {
    if x.len() != refs.n_atoms() {
        return Err(Error::AtomCountMismatch {
            expected: refs.n_atoms(),
            found: x.len(),
        });
    }
    if nl.n_refs() != refs.len() {
        return Err(Error::Config(format!(
            "neighbourlist built for {} references, reference set has {}",
            nl.n_refs(),
            refs.len()
        )));
    }
    Ok(())
}

/// Exact distances to every neighbourlist member each step; all `N` on
/// neighbourlist update steps.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct OriginalMethod {
    pub counter: CostCounter,
    pub step_count: u64,
}

impl OriginalMethod {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(
        &mut self,
        x: &Structure,
        refs: &ReferenceSet,
        nl: &mut NeighbourList,
        step: u64,
        exec: &Executor,
    ) -> Result<StepOutcome> {
        check_centered(x)?;
        check_shapes(x, refs, nl)?;
        let nl_updated = nl.is_update_due(step);
        let targets: Vec<usize> = if nl_updated {
            (0..refs.len()).collect()
        } else {
            nl.indices().to_vec()
        };
        let computed: Vec<DistanceResult> = exec
            .map(&targets, |&i| {
                exact_with_fit(x, &refs.structures()[i]).map(|(d, _)| d)
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let cost = CostCounter {
            expensive: targets.len() as u64,
            cheap: 0,
        };

        let results = if nl_updated {
            let values: Vec<f64> = computed.iter().map(|d| d.value).collect();
            nl.maybe_update(step, &values)?;
            select(computed, nl.indices())
        } else {
            targets.into_iter().zip(computed).collect()
        };

        self.counter += cost;
        self.step_count += 1;
        Ok(StepOutcome {
            results,
            cost,
            reassigned: false,
            nl_updated,
            close_distance: None,
        })
    }
}

/// Close structure `y`, its current fit to `x`, the saved fits of every
/// reference onto `y`, and the bookkeeping counters.
#[derive(Debug, Clone, PartialEq)]
pub struct CloseStructureState {
    pub y: Option<Structure>,
    pub fit_xy: Option<RotationFit>,
    pub saved_rots: Vec<Mat3>,
    /// Reassignment threshold on `D(x, y)` (nm^2).
    pub epsilon: f64,
    pub reassign_count: u64,
    pub step_count: u64,
    pub counter: CostCounter,
}

/// Default reassignment threshold, nm^2.
pub const DEFAULT_EPSILON: f64 = 0.01;

impl CloseStructureState {
    pub fn new(epsilon: f64, n_refs: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        Ok(Self {
            y: None,
            fit_xy: None,
            saved_rots: vec![Mat3::identity(); n_refs],
            epsilon,
            reassign_count: 0,
            step_count: 0,
            counter: CostCounter::default(),
        })
    }

    pub fn expensive_count(&self) -> u64 {
        self.counter.expensive
    }

    pub fn cheap_count(&self) -> u64 {
        self.counter.cheap
    }

    /// One CV-evaluation step: fits `x` to `y` exactly, then either reassigns
    /// `y <- x` with exact fits to all references (first step, or
    /// `D(x, y) > epsilon`) or approximates the active set.
    ///
    /// On neighbourlist update steps without reassignment, all `N` references
    /// are approximated so the list can be rebuilt from approximated distances.
    pub fn step(
        &mut self,
        x: &Structure,
        refs: &ReferenceSet,
        nl: &mut NeighbourList,
        step: u64,
        exec: &Executor,
    ) -> Result<StepOutcome> {
        check_centered(x)?;
        check_shapes(x, refs, nl)?;
        if self.saved_rots.len() != refs.len() {
            return Err(Error::Config(format!(
                "close-structure state sized for {} references, reference set has {}",
                self.saved_rots.len(),
                refs.len()
            )));
        }

        let first = self.y.is_none();
        let y = self.y.get_or_insert_with(|| x.clone());
        let fit_xy = kearsley_fit(x, y, true)?;
        let d_xy = x.weighted_sq_deviation(&y.rotated(&fit_xy.rotation));
        let mut cost = CostCounter {
            expensive: 1,
            cheap: 0,
        };

        let nl_due = nl.is_update_due(step);
        let reassigned = first || d_xy > self.epsilon;
        let results = if reassigned {
            let all: Vec<usize> = (0..refs.len()).collect();
            let fitted: Vec<(DistanceResult, RotationFit)> = exec
                .map(&all, |&i| exact_with_fit(x, &refs.structures()[i]))
                .into_iter()
                .collect::<Result<_>>()?;
            cost.expensive += refs.len() as u64;
            self.y = Some(x.clone());
            // fit_xy belongs to the previous y; the next step refits
            self.fit_xy = None;
            let mut computed = Vec::with_capacity(fitted.len());
            for (saved, (d, fit)) in self.saved_rots.iter_mut().zip(fitted) {
                *saved = fit.rotation;
                computed.push(d);
            }
            self.reassign_count += 1;
            if nl_due {
                let values: Vec<f64> = computed.iter().map(|d| d.value).collect();
                nl.maybe_update(step, &values)?;
            }
            select(computed, nl.indices())
        } else {
            self.fit_xy = Some(fit_xy);
            let targets: Vec<usize> = if nl_due {
                (0..refs.len()).collect()
            } else {
                nl.indices().to_vec()
            };
            let fit = self.fit_xy.as_ref().expect("just stored");
            let saved = &self.saved_rots;
            let computed = exec.map(&targets, |&i| {
                approx_with(x, &refs.structures()[i], &saved[i], fit)
            });
            cost.cheap += targets.len() as u64;
            if nl_due {
                let values: Vec<f64> = computed.iter().map(|d| d.value).collect();
                nl.maybe_update(step, &values)?;
                select(computed, nl.indices())
            } else {
                targets.into_iter().zip(computed).collect()
            }
        };

        self.counter += cost;
        self.step_count += 1;
        Ok(StepOutcome {
            results,
            cost,
            reassigned,
            nl_updated: nl_due,
            close_distance: if first { None } else { Some(d_xy) },
        })
    }
}

/// Either CV-evaluation scheme behind one interface.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)] // one engine per run
pub enum DistanceEngine {
    Original(OriginalMethod),
    Close(CloseStructureState),
}

impl DistanceEngine {
    pub fn step(
        &mut self,
        x: &Structure,
        refs: &ReferenceSet,
        nl: &mut NeighbourList,
        step: u64,
        exec: &Executor,
    ) -> Result<StepOutcome> {
        match self {
            Self::Original(m) => m.step(x, refs, nl, step, exec),
            Self::Close(s) => s.step(x, refs, nl, step, exec),
        }
    }

    pub fn counter(&self) -> CostCounter {
        match self {
            Self::Original(m) => m.counter,
            Self::Close(s) => s.counter,
        }
    }

    pub fn reassign_count(&self) -> u64 {
        match self {
            Self::Original(_) => 0,
            Self::Close(s) => s.reassign_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::center;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coords(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect()
    }

    fn weighted(coords: Vec<Vec3>, rng: &mut ChaCha8Rng) -> Structure {
        let n = coords.len();
        let w = (0..n).map(|_| rng.random_range(0.3..1.0)).collect();
        let wp = (0..n).map(|_| rng.random_range(0.3..1.0)).collect();
        center(&Structure::new(coords, w, wp).unwrap())
    }

    fn reference_set(rng: &mut ChaCha8Rng, n_refs: usize, n_atoms: usize) -> ReferenceSet {
        let base = weighted(random_coords(rng, n_atoms), rng);
        let structures = (0..n_refs)
            .map(|_| base.with_coords(random_coords(rng, n_atoms)).unwrap())
            .collect();
        ReferenceSet::new(structures, None, 10.0).unwrap()
    }

    #[test]
    fn identity_distance_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = weighted(random_coords(&mut rng, 6), &mut rng);
        let mut c = CostCounter::default();
        let d = exact_distance(&a, &a, &mut c).unwrap();
        assert!(d.value.abs() < 1e-10);
        assert!(d.grad.iter().all(|g| g.amax() < 1e-10));
        assert_eq!(c.expensive, 1);
    }

    #[test]
    fn rigid_motion_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = weighted(random_coords(&mut rng, 6), &mut rng);
        let q = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, 2.0, -0.5)), 1.2);
        let x = center(&a.rotated(q.matrix()).translated(&Vec3::new(3.0, -1.0, 0.4)));
        let d = exact_distance(&x, &a, &mut CostCounter::default()).unwrap();
        assert!(d.value.abs() < 1e-10);
    }

    #[test]
    fn uncentered_input_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = weighted(random_coords(&mut rng, 4), &mut rng);
        let x = a.translated(&Vec3::new(1.0, 0.0, 0.0));
        assert!(exact_distance(&x, &a, &mut CostCounter::default()).is_err());
    }

    #[test]
    fn gradients_have_no_net_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let refs = reference_set(&mut rng, 3, 7);
        let x = refs
            .structure_from_coords(random_coords(&mut rng, 7))
            .map(|s| center(&s))
            .unwrap();
        let mut state = CloseStructureState::new(1.0, 3).unwrap();
        let mut nl = NeighbourList::disabled(3);
        let exec = Executor::serial();
        state.step(&x, &refs, &mut nl, 0, &exec).unwrap();
        let moved: Vec<Vec3> = x
            .coords()
            .iter()
            .map(|c| c + Vec3::new(0.01, -0.005, 0.002) * c.x)
            .collect();
        let x2 = center(&x.with_coords(moved).unwrap());
        let out = state.step(&x2, &refs, &mut nl, 1, &exec).unwrap();
        assert!(!out.reassigned);
        for (_, d) in &out.results {
            assert!(!d.exact);
            let net = d.grad.iter().fold(Vec3::zeros(), |acc, g| acc + g);
            assert!(net.amax() < 1e-8);
        }
    }

    #[test]
    fn first_step_reassigns() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let refs = reference_set(&mut rng, 5, 6);
        let x = refs.structures()[2].clone();
        let mut state = CloseStructureState::new(0.01, 5).unwrap();
        let mut nl = NeighbourList::disabled(5);
        let out = state
            .step(&x, &refs, &mut nl, 0, &Executor::serial())
            .unwrap();
        assert!(out.reassigned);
        assert_eq!(out.cost.expensive, 1 + 5);
        assert_eq!(out.results.len(), 5);
        assert!(out.results.iter().all(|(_, d)| d.exact));
        assert_eq!(state.reassign_count, 1);
    }

    #[test]
    fn zero_displacement_is_cheap_and_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let refs = reference_set(&mut rng, 6, 6);
        let x = center(
            &refs
                .structure_from_coords(random_coords(&mut rng, 6))
                .unwrap(),
        );
        let mut state = CloseStructureState::new(0.01, 6).unwrap();
        let mut nl = NeighbourList::new(3, 1000, 6).unwrap();
        let exec = Executor::serial();
        let first = state.step(&x, &refs, &mut nl, 0, &exec).unwrap();
        let second = state.step(&x, &refs, &mut nl, 1, &exec).unwrap();
        assert!(!second.reassigned);
        assert_eq!(
            second.cost,
            CostCounter {
                expensive: 1,
                cheap: 3
            }
        );
        assert_eq!(second.close_distance, Some(0.0));
        for ((i, approx), (j, exact)) in second.results.iter().zip(&first.results) {
            assert_eq!(i, j);
            assert!((approx.value - exact.value).abs() < 1e-12);
            let mut c = CostCounter::default();
            let direct = approx_distance(&x, *i, &state, &refs, &mut c).unwrap();
            assert_eq!(direct.value, approx.value);
            assert_eq!(c.cheap, 1);
        }
    }

    #[test]
    fn approx_requires_ready_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let refs = reference_set(&mut rng, 2, 4);
        let state = CloseStructureState::new(0.01, 2).unwrap();
        let x = refs.structures()[0].clone();
        let mut c = CostCounter::default();
        assert!(matches!(
            approx_distance(&x, 0, &state, &refs, &mut c),
            Err(Error::StateNotReady)
        ));
        assert!(matches!(
            approx_distance(&x, 9, &state, &refs, &mut c),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn original_method_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let refs = reference_set(&mut rng, 10, 5);
        let x = center(
            &refs
                .structure_from_coords(random_coords(&mut rng, 5))
                .unwrap(),
        );
        let exec = Executor::serial();

        let mut m = OriginalMethod::new();
        let mut nl = NeighbourList::disabled(10);
        let out = m.step(&x, &refs, &mut nl, 0, &exec).unwrap();
        assert_eq!(out.cost.expensive, 10);
        assert_eq!(out.results.len(), 10);

        let mut m = OriginalMethod::new();
        let mut nl = NeighbourList::new(4, 3, 10).unwrap();
        let costs: Vec<u64> = (0..7)
            .map(|s| m.step(&x, &refs, &mut nl, s, &exec).unwrap().cost.expensive)
            .collect();
        assert_eq!(costs, vec![10, 4, 4, 10, 4, 4, 10]);
        assert_eq!(m.counter.expensive, 7 * 4 + 3 * 6);
    }

    #[test]
    fn single_reference_original_equals_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let refs = reference_set(&mut rng, 1, 5);
        let x = center(
            &refs
                .structure_from_coords(random_coords(&mut rng, 5))
                .unwrap(),
        );
        let mut nl = NeighbourList::disabled(1);
        let out = OriginalMethod::new()
            .step(&x, &refs, &mut nl, 0, &Executor::serial())
            .unwrap();
        let direct =
            exact_distance(&x, &refs.structures()[0], &mut CostCounter::default()).unwrap();
        assert_eq!(out.results, vec![(0, direct)]);
    }
}
