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

//! Overdamped Langevin bead chain driving the full metadynamics pipeline.
//!
//! Harmonic bonds and harmonic bond angles, no non-bonded terms. Each step:
//!
//! ```text
//! x <- x + (F_phys + F_bias) dt / (m gamma) + sqrt(2 kB T dt / (m gamma)) xi
//! ```
//!
//! Units are nm, ps, kJ/mol, g/mol, K.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::center;
use crate::metadynamics::GridSpec;
use crate::msd::{exact_with_fit, CloseStructureState, OriginalMethod, DEFAULT_EPSILON};
use crate::{
    property_map, DistanceEngine, Error, Executor, HillStore, NeighbourList, ReferenceSet, Result,
    Structure, Vec3,
};

/// Boltzmann constant, kJ/mol/K.
pub const KB: f64 = 0.008_314_462_618;
/// Property-map sharpness used by the demo setup, nm^-2.
pub const DEFAULT_LAMBDA: f64 = 100.0;
/// Steps between reference snapshots in [`ToySystem::generate_references`] demos.
pub const DEFAULT_REF_INTERVAL: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ToySystem {
    pub n_beads: usize,
    /// kJ/mol/nm^2
    pub bond_k: f64,
    /// nm
    pub bond_r0: f64,
    /// kJ/mol/rad^2
    pub angle_k: f64,
    /// rad
    pub angle_theta0: f64,
    /// g/mol
    pub mass: f64,
    /// K
    pub temperature: f64,
    /// ps^-1
    pub friction: f64,
    /// ps
    pub dt: f64,
    pub rng_seed: u64,
}

impl Default for ToySystem {
    fn default() -> Self {
        Self {
            n_beads: 8,
            bond_k: 5000.0,
            bond_r0: 1.0,
            angle_k: 20.0,
            angle_theta0: 1.911,
            mass: 12.0,
            temperature: 600.0,
            friction: 10.0,
            dt: 1e-3,
            rng_seed: 2017,
        }
    }
}

impl ToySystem {
    pub fn validate(&self) -> Result<()> {
        if self.n_beads < 3 {
            return Err(Error::Config(format!(
                "need at least 3 beads, got {}",
                self.n_beads
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be > 0".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if !(self.friction > 0.0) {
            return Err(Error::Config("friction must be > 0".into()));
        }
        if !(self.mass > 0.0) {
            return Err(Error::Config("mass must be > 0".into()));
        }
        if !(self.bond_r0 > 0.0 && self.bond_k >= 0.0 && self.angle_k >= 0.0) {
            return Err(Error::Config(
                "bond and angle parameters must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Planar zig-zag with every bond at `bond_r0` and every angle at
    /// `angle_theta0`: a zero-force configuration.
    pub fn initial_chain(&self) -> Vec<Vec3> {
        let along = self.bond_r0 * (self.angle_theta0 / 2.0).sin();
        let across = self.bond_r0 * (self.angle_theta0 / 2.0).cos();
        (0..self.n_beads)
            .map(|i| Vec3::new(i as f64 * along, (i % 2) as f64 * across, 0.0))
            .collect()
    }

    /// Potential energy and forces `-dU/dx`.
    pub fn energy_and_forces(&self, coords: &[Vec3]) -> (f64, Vec<Vec3>) {
        let mut energy = 0.0;
        let mut forces = vec![Vec3::zeros(); coords.len()];
        for i in 0..coords.len().saturating_sub(1) {
            let b = coords[i + 1] - coords[i];
            let r = b.norm();
            let stretch = r - self.bond_r0;
            energy += 0.5 * self.bond_k * stretch * stretch;
            let f = b * (self.bond_k * stretch / r);
            forces[i] += f;
            forces[i + 1] -= f;
        }
        for i in 1..coords.len().saturating_sub(1) {
            let u = coords[i - 1] - coords[i];
            let v = coords[i + 1] - coords[i];
            let (lu, lv) = (u.norm(), v.norm());
            let cos = (u.dot(&v) / (lu * lv)).clamp(-1.0, 1.0);
            let theta = cos.acos();
            let bend = theta - self.angle_theta0;
            energy += 0.5 * self.angle_k * bend * bend;
            let sin = (1.0 - cos * cos).sqrt().max(1e-12);
            // dtheta/du = -(v_hat - cos u_hat) / (|u| sin)
            let dtheta_du = -(v / lv - u / lu * cos) / (lu * sin);
            let dtheta_dv = -(u / lu - v / lv * cos) / (lv * sin);
            let scale = -self.angle_k * bend;
            forces[i - 1] += dtheta_du * scale;
            forces[i + 1] += dtheta_dv * scale;
            forces[i] -= (dtheta_du + dtheta_dv) * scale;
        }
        (energy, forces)
    }

    fn mobility(&self) -> f64 {
        1.0 / (self.mass * self.friction)
    }

    /// One Euler-Maruyama step with the given extra force.
    fn integrate(&self, coords: &mut [Vec3], extra: &[Vec3], rng: &mut ChaCha8Rng) {
        let (_, forces) = self.energy_and_forces(coords);
        let drift = self.mobility() * self.dt;
        let noise = (2.0 * KB * self.temperature * self.mobility() * self.dt).sqrt();
        for (k, x) in coords.iter_mut().enumerate() {
            let f = forces[k] + extra.get(k).copied().unwrap_or_else(Vec3::zeros);
            *x += f * drift;
            if noise > 0.0 {
                let xi = Vec3::new(
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                );
                *x += xi * noise;
            }
        }
    }

    /// Unbiased run of `n_steps` from [`Self::initial_chain`] with `seed`,
    /// returning the final coordinates.
    pub fn relax(&self, n_steps: u64, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coords = self.initial_chain();
        for _ in 0..n_steps {
            self.integrate(&mut coords, &[], &mut rng);
        }
        coords
    }

    /// Reference set from an unbiased run seeded with `seed`: one snapshot every
    /// `interval` steps after an initial `interval`, uniform weights, properties
    /// equal to the snapshot index.
    pub fn generate_references(
        &self,
        n_refs: usize,
        interval: u64,
        lambda: f64,
        seed: u64,
    ) -> Result<ReferenceSet> {
        self.validate()?;
        if n_refs == 0 || interval == 0 {
            return Err(Error::Config(
                "need at least one reference and a positive interval".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coords = self.initial_chain();
        let mut structures = Vec::with_capacity(n_refs);
        for _ in 0..n_refs {
            for _ in 0..interval {
                self.integrate(&mut coords, &[], &mut rng);
            }
            structures.push(Structure::uniform(coords.clone())?);
        }
        ReferenceSet::new(structures, None, lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Original,
    Close,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Original => "original",
            Self::Close => "close",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Self::Original),
            "close" => Ok(Self::Close),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlConfig {
    pub enabled: bool,
    pub size: usize,
    pub stride: u64,
}

impl NlConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            size: 0,
            stride: 1,
        }
    }

    fn build(&self, n_refs: usize) -> Result<NeighbourList> {
        if self.enabled {
            NeighbourList::new(self.size, self.stride, n_refs)
        } else {
            Ok(NeighbourList::disabled(n_refs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtdConfig {
    /// Hill deposition stride in steps.
    pub stride: u64,
    pub sigma: f64,
    pub height: f64,
    pub grid: Option<GridSpec>,
}

impl Default for MtdConfig {
    fn default() -> Self {
        Self {
            stride: 50,
            sigma: 0.5,
            height: 0.5,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub mode: Mode,
    pub epsilon: f64,
    pub nl: NlConfig,
    pub mtd: MtdConfig,
    pub n_steps: u64,
    /// Keep every n-th frame; `0` keeps none.
    pub trajectory_stride: u64,
    /// Recompute exact distances next to every approximated one (not charged).
    pub audit: bool,
    /// Starting coordinates; defaults to [`ToySystem::initial_chain`].
    pub initial_coords: Option<Vec<Vec3>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Close,
            epsilon: DEFAULT_EPSILON,
            nl: NlConfig::disabled(),
            mtd: MtdConfig::default(),
            n_steps: 5000,
            trajectory_stride: 0,
            audit: false,
            initial_coords: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvSample {
    pub step: u64,
    pub cv: f64,
    pub bias: f64,
}

/// Per-step record of what the CV evaluation charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEvent {
    pub expensive: u64,
    pub cheap: u64,
    pub reassigned: bool,
    pub nl_updated: bool,
}

/// An approximated distance next to its exact recomputation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSample {
    pub step: u64,
    pub reference: usize,
    pub approx: f64,
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub step: u64,
    pub coords: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub steps: u64,
    pub mode: Mode,
    pub n_refs: usize,
    /// Effective `M` (`N` without a neighbourlist).
    pub nl_size: usize,
    /// Effective `L` (`1` without a neighbourlist).
    pub nl_stride: u64,
    pub nl_enabled: bool,
    pub expensive_count: u64,
    pub cheap_count: u64,
    pub reassign_count: u64,
    pub nl_updates: u64,
    pub cv_series: Vec<CvSample>,
    pub events: Vec<StepEvent>,
    pub audit: Vec<AuditSample>,
    pub trajectory: Vec<Frame>,
    pub hills: HillStore,
    pub final_coords: Vec<Vec3>,
    /// Seconds for the whole loop.
    pub wall_time: f64,
    /// Seconds inside distance evaluation.
    pub msd_time: f64,
}

impl RunReport {
    /// Mean steps between reassignments, close mode only.
    pub fn measured_k(&self) -> Option<f64> {
        (self.mode == Mode::Close && self.reassign_count > 0)
            .then(|| self.steps as f64 / self.reassign_count as f64)
    }

    /// Everything except timings.
    pub fn same_outputs(&self, other: &RunReport) -> bool {
        self.steps == other.steps
            && self.mode == other.mode
            && self.expensive_count == other.expensive_count
            && self.cheap_count == other.cheap_count
            && self.reassign_count == other.reassign_count
            && self.nl_updates == other.nl_updates
            && self.cv_series == other.cv_series
            && self.events == other.events
            && self.audit == other.audit
            && self.trajectory == other.trajectory
            && self.hills == other.hills
            && self.final_coords == other.final_coords
    }
}

/// Runs `options.n_steps` of biased overdamped Langevin dynamics evaluating the
/// property-map CV with the selected distance scheme.
pub fn run(
    system: &ToySystem,
    refs: &ReferenceSet,
    options: &RunOptions,
    exec: &Executor,
) -> Result<RunReport> {
    system.validate()?;
    if refs.n_atoms() != system.n_beads {
        return Err(Error::AtomCountMismatch {
            expected: system.n_beads,
            found: refs.n_atoms(),
        });
    }
    let mut nl = options.nl.build(refs.len())?;
    let mut engine = match options.mode {
        Mode::Original => DistanceEngine::Original(OriginalMethod::new()),
        Mode::Close => {
            DistanceEngine::Close(CloseStructureState::new(options.epsilon, refs.len())?)
        }
    };
    let mut store = HillStore::new(
        options.mtd.stride,
        options.mtd.height,
        vec![options.mtd.sigma],
        options.mtd.grid.clone(),
    )?;
    let mut coords = match &options.initial_coords {
        Some(c) if c.len() != system.n_beads => {
            return Err(Error::AtomCountMismatch {
                expected: system.n_beads,
                found: c.len(),
            })
        }
        Some(c) => c.clone(),
        None => system.initial_chain(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(system.rng_seed);

    let steps = options.n_steps;
    let mut cv_series = Vec::with_capacity(steps as usize);
    let mut events = Vec::with_capacity(steps as usize);
    let mut audit = Vec::new();
    let mut trajectory = Vec::new();
    let started = Instant::now();
    let mut msd_time = 0.0;

    for step in 0..steps {
        if options.trajectory_stride > 0 && step % options.trajectory_stride == 0 {
            trajectory.push(Frame {
                step,
                coords: coords.clone(),
            });
        }
        let x = center(&refs.structure_from_coords(coords.clone())?);

        let t0 = Instant::now();
        let outcome = engine.step(&x, refs, &mut nl, step, exec)?;
        msd_time += t0.elapsed().as_secs_f64();

        if options.audit {
            for (i, d) in outcome.results.iter().filter(|(_, d)| !d.exact) {
                let (exact, _) = exact_with_fit(&x, &refs.structures()[*i])?;
                audit.push(AuditSample {
                    step,
                    reference: *i,
                    approx: d.value,
                    exact: exact.value,
                });
            }
        }

        let cv = property_map(&outcome.results, refs)?;
        let (bias, bias_forces) = store.bias_and_force(std::slice::from_ref(&cv))?;
        cv_series.push(CvSample {
            step,
            cv: cv.value,
            bias,
        });
        events.push(StepEvent {
            expensive: outcome.cost.expensive,
            cheap: outcome.cost.cheap,
            reassigned: outcome.reassigned,
            nl_updated: outcome.nl_updated,
        });
        if store.is_deposit_step(step) {
            store.deposit(&[cv.value], step)?;
        }
        system.integrate(&mut coords, &bias_forces, &mut rng);
        if coords.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite(format!("coordinates at step {step}")));
        }
    }

    let counter = engine.counter();
    Ok(RunReport {
        steps,
        mode: options.mode,
        n_refs: refs.len(),
        nl_size: nl.size(),
        nl_stride: nl.stride(),
        nl_enabled: nl.is_enabled(),
        expensive_count: counter.expensive,
        cheap_count: counter.cheap,
        reassign_count: engine.reassign_count(),
        nl_updates: nl.update_count(),
        cv_series,
        events,
        audit,
        trajectory,
        hills: store,
        final_coords: coords,
        wall_time: started.elapsed().as_secs_f64(),
        msd_time,
    })
}
