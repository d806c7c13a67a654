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

mod common;

use common::*;
use metadyn_core::io::{parse_references, write_references};
use metadyn_core::perf::measured_vs_model;
use metadyn_core::toysim::{run, MtdConfig, NlConfig, DEFAULT_LAMBDA};
use metadyn_core::{CostModel, Executor, Mode, ReferenceSet, RunOptions, ToySystem};

fn setup() -> (ToySystem, ReferenceSet) {
    let system = ToySystem::default();
    let refs = system
        .generate_references(16, 500, DEFAULT_LAMBDA, 3)
        .unwrap();
    (system, refs)
}

fn short(steps: u64) -> RunOptions {
    RunOptions {
        n_steps: steps,
        ..RunOptions::default()
    }
}

#[test]
fn repeated_and_threaded_runs_match() {
    let (system, refs) = setup();
    let options = RunOptions {
        nl: NlConfig {
            enabled: true,
            size: 5,
            stride: 20,
        },
        audit: true,
        trajectory_stride: 100,
        ..short(800)
    };
    let a = run(&system, &refs, &options, &Executor::serial()).unwrap();
    let b = run(&system, &refs, &options, &Executor::serial()).unwrap();
    let c = run(
        &system,
        &refs,
        &options,
        &Executor::with_threads(4).unwrap(),
    )
    .unwrap();
    assert!(a.same_outputs(&b));
    assert!(a.same_outputs(&c));
}

#[test]
fn cold_chain_at_equilibrium_stays_put() {
    let system = ToySystem {
        temperature: 0.0,
        ..ToySystem::default()
    };
    let refs = ToySystem::default()
        .generate_references(4, 200, DEFAULT_LAMBDA, 1)
        .unwrap();
    let options = RunOptions {
        mtd: MtdConfig {
            height: 0.0,
            ..MtdConfig::default()
        },
        ..short(1000)
    };
    let report = run(&system, &refs, &options, &Executor::serial()).unwrap();
    let start = system.initial_chain();
    let moved = report
        .final_coords
        .iter()
        .zip(&start)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    assert!(moved < 1e-12, "moved {moved}");
}

#[test]
fn cold_dynamics_only_loses_energy() {
    // overdamped and noise-free: plain gradient flow on the potential
    let system = ToySystem {
        temperature: 0.0,
        ..ToySystem::default()
    };
    let mut r = rng(5);
    let start: Vec<_> = system
        .initial_chain()
        .iter()
        .zip(random_coords(&mut r, system.n_beads, 0.05))
        .map(|(c, d)| c + d)
        .collect();
    let refs = ToySystem::default()
        .generate_references(4, 200, DEFAULT_LAMBDA, 1)
        .unwrap();
    let initial = system.energy_and_forces(&start).0;
    let mut energy = initial;
    let mut coords = start;
    for _ in 0..20 {
        let options = RunOptions {
            mtd: MtdConfig {
                height: 0.0,
                ..MtdConfig::default()
            },
            initial_coords: Some(coords.clone()),
            ..short(50)
        };
        coords = run(&system, &refs, &options, &Executor::serial())
            .unwrap()
            .final_coords;
        let e = system.energy_and_forces(&coords).0;
        assert!(e <= energy + 1e-12, "{e} > {energy}");
        energy = e;
    }
    assert!(energy < 0.5 * initial, "{energy} vs {initial}");
}

#[test]
fn zero_threshold_is_always_exact() {
    let (system, refs) = setup();
    let options = RunOptions {
        epsilon: 0.0,
        audit: true,
        ..short(300)
    };
    let close = run(&system, &refs, &options, &Executor::serial()).unwrap();
    let n = refs.len() as u64;
    assert_eq!(close.reassign_count, close.steps);
    assert_eq!(close.expensive_count, close.steps * (1 + n));
    assert_eq!(close.cheap_count, 0);
    assert!(close.audit.is_empty());

    let original = run(
        &system,
        &refs,
        &RunOptions {
            mode: Mode::Original,
            ..short(300)
        },
        &Executor::serial(),
    )
    .unwrap();
    assert_eq!(close.cv_series, original.cv_series);
    assert_eq!(original.expensive_count, original.steps * n);
}

#[test]
fn approximation_tracks_exact_over_a_trajectory() {
    let (system, refs) = setup();
    let options = RunOptions {
        audit: true,
        ..short(1000)
    };
    let report = run(&system, &refs, &options, &Executor::serial()).unwrap();
    let approx: Vec<f64> = report.audit.iter().map(|s| s.approx).collect();
    let exact: Vec<f64> = report.audit.iter().map(|s| s.exact).collect();
    assert!(approx.len() > 1000);
    assert!(pearson(&approx, &exact) >= 0.99);
    assert!(report.reassign_count >= 2);
}

#[test]
fn counters_match_cost_model() {
    let (system, refs) = setup();
    let n = refs.len() as u64;
    let nl = NlConfig {
        enabled: true,
        size: 6,
        stride: 30,
    };
    for (mode, nl) in [
        (Mode::Close, NlConfig::disabled()),
        (Mode::Close, nl.clone()),
        (Mode::Original, NlConfig::disabled()),
        (Mode::Original, nl),
    ] {
        let options = RunOptions {
            mode,
            nl: nl.clone(),
            ..short(900)
        };
        let r = run(&system, &refs, &options, &Executor::serial()).unwrap();
        let model = match mode {
            Mode::Close => CostModel::new(
                n,
                r.nl_size as u64,
                r.nl_stride as f64,
                r.measured_k().unwrap(),
            ),
            Mode::Original if nl.enabled => {
                CostModel::new(n, nl.size as u64, nl.stride as f64, 1.0)
            }
            Mode::Original => CostModel::without_neighbourlist(n, 1.0),
        }
        .unwrap();
        let d = measured_vs_model(&r, &model).unwrap();
        assert_eq!(d.abs_diff, 0.0, "{mode} {nl:?}: {d:?}");
        if mode == Mode::Original && nl.enabled {
            assert_eq!(r.nl_updates, 900 / 30);
        }
    }
}

#[test]
fn reference_file_round_trip() {
    let (_, refs) = setup();
    let mut buf = Vec::new();
    write_references(&refs, &mut buf).unwrap();
    let back = parse_references(std::str::from_utf8(&buf).unwrap(), refs.lambda()).unwrap();
    assert_eq!(back.properties(), refs.properties());
    for (a, b) in refs.structures().iter().zip(back.structures()) {
        for (p, q) in a.coords().iter().zip(b.coords()) {
            assert!((p - q).amax() <= 1e-15);
        }
        for (p, q) in a.disp_weights().iter().zip(b.disp_weights()) {
            assert!((p - q).abs() <= 1e-15);
        }
        for (p, q) in a.align_weights().iter().zip(b.align_weights()) {
            assert!((p - q).abs() <= 1e-15);
        }
    }
}

#[test]
fn run_rejects_inconsistent_setups() {
    let (system, refs) = setup();
    let too_big = RunOptions {
        nl: NlConfig {
            enabled: true,
            size: 17,
            stride: 5,
        },
        ..short(10)
    };
    assert!(run(&system, &refs, &too_big, &Executor::serial()).is_err());
    let other = ToySystem {
        n_beads: 9,
        ..system
    };
    assert!(run(&other, &refs, &short(10), &Executor::serial()).is_err());
}
