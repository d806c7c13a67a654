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

//! Neighbourlist of the `M` closest reference structures, refreshed every `L`
//! steps.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NeighbourList {
    indices: Vec<usize>,
    size: usize,
    stride: u64,
    n_refs: usize,
    last_update_step: Option<u64>,
    update_count: u64,
    enabled: bool,
}

impl NeighbourList {
    /// Enabled list of `size` members out of `n_refs`, refreshed every `stride`
    /// steps. Until the first update all references are active.
    pub fn new(size: usize, stride: u64, n_refs: usize) -> Result<Self> {
        if size == 0 || size > n_refs {
            return Err(Error::Config(format!(
                "neighbourlist size {size} must be in 1..={n_refs}"
            )));
        }
        if stride == 0 {
            return Err(Error::Config("neighbourlist stride must be >= 1".into()));
        }
        Ok(Self {
            indices: (0..n_refs).collect(),
            size,
            stride,
            n_refs,
            last_update_step: None,
            update_count: 0,
            enabled: true,
        })
    }

    /// No neighbourlist: every reference is active on every step.
    pub fn disabled(n_refs: usize) -> Self {
        Self {
            indices: (0..n_refs).collect(),
            size: n_refs,
            stride: 1,
            n_refs,
            last_update_step: None,
            update_count: 0,
            enabled: false,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// Active references, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `M`; equals `N` when disabled.
    pub fn size(&self) -> usize {
        self.size
    }

    /// `L`; `1` when disabled.
    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn n_refs(&self) -> usize {
        self.n_refs
    }

    pub fn last_update_step(&self) -> Option<u64> {
        self.last_update_step
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Whether `step` needs distances to all references for a refresh.
    pub fn is_update_due(&self, step: u64) -> bool {
        self.enabled
            && match self.last_update_step {
                None => true,
                Some(last) => step.saturating_sub(last) >= self.stride,
            }
    }

    /// Replaces the members by the `M` smallest of `distances_all` (ties go to
    /// the lower index) and records `step` as the update step.
    pub fn maybe_update(&mut self, step: u64, distances_all: &[f64]) -> Result<()> {
        if distances_all.len() != self.n_refs {
            return Err(Error::Config(format!(
                "neighbourlist update needs {} distances, got {}",
                self.n_refs,
                distances_all.len()
            )));
        }
        if let Some(bad) = distances_all.iter().find(|d| !d.is_finite()) {
            return Err(Error::NonFinite(format!("distance {bad}")));
        }
        if !self.enabled {
            return Ok(());
        }
        let mut order: Vec<usize> = (0..self.n_refs).collect();
        order.sort_by(|&i, &j| {
            distances_all[i]
                .total_cmp(&distances_all[j])
                .then(i.cmp(&j))
        });
        order.truncate(self.size);
        order.sort_unstable();
        self.indices = order;
        self.last_update_step = Some(step);
        self.update_count += 1;
        Ok(())
    }
}
