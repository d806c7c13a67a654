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

//! The `run` subcommand: load references, simulate, write outputs.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};
use metadyn_core::io::{parse_references, write_cv_series, write_references, write_trajectory};
use metadyn_core::perf::measured_vs_model;
use metadyn_core::toysim::{run, MtdConfig};
use metadyn_core::{
    amdahl, AmdahlInput, CostModel, Executor, GridSpec, Mode, ReferenceSet, RunOptions, RunReport,
};

use crate::config::RunConfig;

/// Sixteen references of the default eight-bead chain.
pub const DEMO_REFS: &str = include_str!("../data/demo_refs.txt");

pub fn load_refs(cfg: &RunConfig) -> Result<ReferenceSet> {
    match &cfg.refs {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            parse_references(&text, cfg.lambda).with_context(|| format!("in {}", path.display()))
        }
        None => Ok(parse_references(DEMO_REFS, cfg.lambda).context("bundled demo references")?),
    }
}

fn grid_spec(cfg: &RunConfig, refs: &ReferenceSet) -> Result<Option<GridSpec>> {
    if !cfg.mtd.grid {
        return Ok(None);
    }
    let q = refs.properties();
    let lo = cfg
        .mtd
        .grid_min
        .unwrap_or(q.iter().copied().fold(f64::INFINITY, f64::min) - 1.0);
    let hi = cfg
        .mtd
        .grid_max
        .unwrap_or(q.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0);
    Ok(Some(GridSpec::new(
        vec![lo],
        vec![hi],
        vec![cfg.mtd.grid_bins],
    )?))
}

pub fn options(cfg: &RunConfig, refs: &ReferenceSet) -> Result<RunOptions> {
    Ok(RunOptions {
        mode: cfg.mode,
        epsilon: cfg.epsilon,
        nl: cfg.nl.clone(),
        mtd: MtdConfig {
            stride: cfg.mtd.tau_g,
            sigma: cfg.mtd.sigma,
            height: cfg.mtd.height,
            grid: grid_spec(cfg, refs)?,
        },
        n_steps: cfg.steps,
        trajectory_stride: cfg.traj_stride,
        audit: false,
        initial_coords: None,
    })
}

/// Deterministic counter and speed-up summary.
pub fn report_text(cfg: &RunConfig, report: &RunReport) -> Result<String> {
    let n = report.n_refs as u64;
    let (m, l) = if report.nl_enabled {
        (report.nl_size as u64, report.nl_stride as f64)
    } else {
        (0, 1.0)
    };
    let mut out = String::new();
    writeln!(out, "mode = {}", report.mode)?;
    writeln!(out, "steps = {}", report.steps)?;
    writeln!(out, "n_refs = {n}")?;
    if report.nl_enabled {
        writeln!(
            out,
            "neighbourlist = {} every {}",
            report.nl_size, report.nl_stride
        )?;
    } else {
        writeln!(out, "neighbourlist = off")?;
    }
    if report.mode == Mode::Close {
        writeln!(out, "epsilon = {}", cfg.epsilon)?;
    }
    writeln!(out, "expensive_count = {}", report.expensive_count)?;
    writeln!(out, "cheap_count = {}", report.cheap_count)?;
    writeln!(out, "reassign_count = {}", report.reassign_count)?;
    writeln!(out, "nl_updates = {}", report.nl_updates)?;
    if report.steps > 0 {
        writeln!(
            out,
            "expensive_per_step = {}",
            report.expensive_count as f64 / report.steps as f64
        )?;
    }
    let k = report.measured_k();
    match k {
        Some(k) => writeln!(out, "measured_K = {k}")?,
        None => writeln!(out, "measured_K = none")?,
    }
    let model = CostModel::new(n, m, l, k.unwrap_or(f64::INFINITY).min(f64::MAX))?;
    writeln!(out, "original_cost = {}", model.original_cost())?;
    if let Some(_k) = k {
        writeln!(out, "close_cost = {}", model.close_cost())?;
        writeln!(out, "msd_speedup = {}", model.msd_speedup())?;
        let s = amdahl(AmdahlInput {
            p: cfg.amdahl_p,
            s: model.msd_speedup(),
        })?;
        writeln!(out, "amdahl_p = {}", cfg.amdahl_p)?;
        writeln!(out, "amdahl_speedup = {s}")?;
    } else {
        writeln!(out, "close_cost = none")?;
        writeln!(out, "msd_speedup = none")?;
    }
    if report.steps > 0 && (report.mode == Mode::Original || k.is_some()) {
        let d = measured_vs_model(report, &model)?;
        writeln!(out, "counter_model_residual = {}", d.abs_diff)?;
    }
    Ok(out)
}

fn create(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>> {
    let path = cfg.out_dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

pub fn run_command(cfg: &RunConfig) -> Result<()> {
    let refs = load_refs(cfg)?;
    let options = options(cfg, &refs)?;
    let exec = Executor::from_env()?;
    let report = run(&cfg.system, &refs, &options, &exec)?;

    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    let mut f = create(cfg, "cv.csv")?;
    write_cv_series(&report.cv_series, &mut f)?;
    f.flush()?;
    let mut f = create(cfg, "HILLS")?;
    report.hills.write_hills(&mut f)?;
    f.flush()?;
    if cfg.traj_stride > 0 {
        let mut f = create(cfg, "trajectory.txt")?;
        write_trajectory(&report.trajectory, &mut f)?;
        f.flush()?;
    }
    if cfg.refs.is_none() {
        let mut f = create(cfg, "refs.txt")?;
        write_references(&refs, &mut f)?;
        f.flush()?;
    }
    let text = report_text(cfg, &report)?;
    std::fs::write(cfg.out_dir.join("report.txt"), &text)?;

    print!("{text}");
    println!("wall_time_s = {:.3}", report.wall_time);
    println!("msd_time_s = {:.3}", report.msd_time);
    println!("threads = {}", exec.threads());
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}
