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

//! Cost model for expensive distance computations and the Amdahl projection.
//!
//! Average expensive computations per step:
//!
//! ```text
//! original: M + (N - M) / L      (M = 0, L = 1 without a neighbourlist)
//! close:    1 + N / K            (K = mean steps between reassignments)
//! ```

use crate::toysim::{Mode, RunReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Reference structures.
    pub n: u64,
    /// Neighbourlist size; `0` for no neighbourlist.
    pub m: u64,
    /// Neighbourlist stride; `1` for no neighbourlist.
    pub l: f64,
    /// Mean steps between close-structure reassignments.
    pub k: f64,
}

impl CostModel {
    pub fn new(n: u64, m: u64, l: f64, k: f64) -> Result<Self> {
        let model = Self { n, m, l, k };
        model.validate()?;
        Ok(model)
    }

    /// Model without a neighbourlist.
    pub fn without_neighbourlist(n: u64, k: f64) -> Result<Self> {
        Self::new(n, 0, 1.0, k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("cost model needs N >= 1".into()));
        }
        if self.m > self.n {
            return Err(Error::Config(format!(
                "M = {} exceeds N = {}",
                self.m, self.n
            )));
        }
        if !(self.l.is_finite() && self.l >= 1.0) {
            return Err(Error::Config(format!("L must be >= 1, got {}", self.l)));
        }
        if !(self.k > 0.0) {
            return Err(Error::Config(format!("K must be > 0, got {}", self.k)));
        }
        Ok(())
    }

    pub fn original_cost(&self) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        m + (n - m) / self.l
    }

    pub fn close_cost(&self) -> f64 {
        1.0 + self.n as f64 / self.k
    }

    pub fn msd_speedup(&self) -> f64 {
        self.original_cost() / self.close_cost()
    }

    /// Strict: equal costs do not count as acceleration.
    pub fn accelerates(&self) -> bool {
        self.original_cost() > self.close_cost()
    }
}

/// Fraction `p` of the run spent in the accelerated part and that part's
/// speed-up `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmdahlInput {
    pub p: f64,
    pub s: f64,
}

/// Whole-run speed-up `1 / ((1 - p) + p / s)`.
pub fn amdahl(input: AmdahlInput) -> Result<f64> {
    let AmdahlInput { p, s } = input;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("p must be in [0, 1], got {p}")));
    }
    if !(s > 0.0) {
        return Err(Error::Config(format!("s must be > 0, got {s}")));
    }
    Ok(1.0 / ((1.0 - p) + p / s))
}

/// Counter-derived average against the model for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    /// `expensive_count / steps`.
    pub measured: f64,
    /// The model formula evaluated with the run's actual event counts
    /// (reassignments or neighbourlist updates).
    pub predicted: f64,
    /// The model's asymptotic per-step cost for `mode`.
    pub model_cost: f64,
    pub abs_diff: f64,
}

/// Compares a run's counters with the cost model. The close-mode model must
/// carry the run's measured `K`; the original-mode model must carry the run's
/// neighbourlist `M` and `L`.
pub fn measured_vs_model(report: &RunReport, model: &CostModel) -> Result<Discrepancy> {
    model.validate()?;
    if report.steps == 0 {
        return Err(Error::ModelMismatch("run has no steps".into()));
    }
    if model.n != report.n_refs as u64 {
        return Err(Error::ModelMismatch(format!(
            "model N = {} but run used {} references",
            model.n, report.n_refs
        )));
    }
    let steps = report.steps as f64;
    let n = report.n_refs as f64;
    let measured = report.expensive_count as f64 / steps;
    let (predicted, model_cost) = match report.mode {
        Mode::Close => {
            let k = report
                .measured_k()
                .ok_or_else(|| Error::ModelMismatch("close run without reassignments".into()))?;
            if (model.k - k).abs() > 1e-12 * k {
                return Err(Error::ModelMismatch(format!(
                    "model K = {} but run measured K = {k}",
                    model.k
                )));
            }
            (
                1.0 + n * report.reassign_count as f64 / steps,
                model.close_cost(),
            )
        }
        Mode::Original => {
            let (m, l) = (report.nl_size as u64, report.nl_stride as f64);
            // no neighbourlist may be written as M = N or M = 0, L = 1
            let matches = (model.m == m && model.l == l)
                || (report.nl_size == report.n_refs && model.m == 0 && model.l == 1.0);
            if !matches {
                return Err(Error::ModelMismatch(format!(
                    "model M = {}, L = {} but run used M = {m}, L = {l}",
                    model.m, model.l
                )));
            }
            let m = m as f64;
            (
                m + (n - m) * report.nl_updates as f64 / steps,
                model.original_cost(),
            )
        }
    };
    Ok(Discrepancy {
        measured,
        predicted,
        model_cost,
        abs_diff: (measured - predicted).abs(),
    })
}
