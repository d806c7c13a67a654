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

//! Plain-text formats: reference sets, CV series and trajectories.
//!
//! Reference set layout:
//!
//! ```text
//! # metadyn-close refset v1
//! STRUCTURE 0 q=1.5
//! x y z w wprime
//! ...
//!
//! STRUCTURE 1
//! ...
//! ```
//!
//! `q=` is optional and defaults to the structure's position in the file.
//! Reals are written in shortest round-trip form.

use std::io::Write;
use std::path::Path;

use crate::toysim::{CvSample, Frame};
use crate::{Error, ReferenceSet, Result, Structure, Vec3};

pub const REFSET_HEADER: &str = "# metadyn-close refset v1";

pub fn write_references<W: Write>(refs: &ReferenceSet, mut out: W) -> Result<()> {
    writeln!(out, "{REFSET_HEADER}")?;
    for (i, (s, q)) in refs.structures().iter().zip(refs.properties()).enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "STRUCTURE {i} q={q}")?;
        for ((c, w), wp) in s
            .coords()
            .iter()
            .zip(s.disp_weights())
            .zip(s.align_weights())
        {
            writeln!(out, "{} {} {} {} {}", c.x, c.y, c.z, w, wp)?;
        }
    }
    Ok(())
}

struct Block {
    id: String,
    line: usize,
    q: Option<f64>,
    coords: Vec<Vec3>,
    w: Vec<f64>,
    wp: Vec<f64>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_real(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {token:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {token:?}")));
    }
    Ok(v)
}

/// Parses a reference set; structures are centered and weights normalized.
pub fn parse_references(text: &str, lambda: f64) -> Result<ReferenceSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, REFSET_HEADER)) => {}
        Some((n, other)) => {
            return Err(parse_err(
                n,
                format!("expected {REFSET_HEADER:?}, found {other:?}"),
            ))
        }
        None => return Err(parse_err(1, "empty file")),
    }

    let mut blocks: Vec<Block> = Vec::new();
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0] == "STRUCTURE" {
            let id = tokens
                .get(1)
                .ok_or_else(|| parse_err(n, "STRUCTURE needs an id"))?
                .to_string();
            let q = match tokens.get(2) {
                None => None,
                Some(t) => Some(parse_real(
                    t.strip_prefix("q=")
                        .ok_or_else(|| parse_err(n, format!("expected q=<real>, found {t:?}")))?,
                    n,
                )?),
            };
            if tokens.len() > 3 {
                return Err(parse_err(n, "trailing tokens after STRUCTURE header"));
            }
            blocks.push(Block {
                id,
                line: n,
                q,
                coords: Vec::new(),
                w: Vec::new(),
                wp: Vec::new(),
            });
            continue;
        }
        let block = blocks
            .last_mut()
            .ok_or_else(|| parse_err(n, "atom line before any STRUCTURE header"))?;
        if tokens.len() != 5 {
            return Err(parse_err(
                n,
                format!("expected 'x y z w wprime', found {} fields", tokens.len()),
            ));
        }
        let v = tokens
            .iter()
            .map(|t| parse_real(t, n))
            .collect::<Result<Vec<_>>>()?;
        block.coords.push(Vec3::new(v[0], v[1], v[2]));
        block.w.push(v[3]);
        block.wp.push(v[4]);
    }

    let first = blocks
        .first()
        .ok_or_else(|| parse_err(1, "no structures"))?;
    let n_atoms = first.coords.len();
    let mut properties = Vec::with_capacity(blocks.len());
    let mut structures = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.into_iter().enumerate() {
        if b.coords.len() != n_atoms {
            return Err(parse_err(
                b.line,
                format!(
                    "structure {} has {} atoms, expected {}",
                    b.id,
                    b.coords.len(),
                    n_atoms
                ),
            ));
        }
        properties.push(b.q.unwrap_or(i as f64));
        let s = Structure::new(b.coords, b.w, b.wp)
            .map_err(|e| parse_err(b.line, format!("structure {}: {e}", b.id)))?;
        structures.push(s);
    }
    ReferenceSet::new(structures, Some(properties), lambda)
}

pub fn load_references(path: &Path, lambda: f64) -> Result<ReferenceSet> {
    parse_references(&std::fs::read_to_string(path)?, lambda)
}

/// `step,cv_value,bias` with a header row.
pub fn write_cv_series<W: Write>(series: &[CvSample], mut out: W) -> Result<()> {
    writeln!(out, "step,cv_value,bias")?;
    for s in series {
        writeln!(out, "{},{:e},{:e}", s.step, s.cv, s.bias)?;
    }
    Ok(())
}

/// One block per frame: the step on its own line, then `x y z` per bead.
pub fn write_trajectory<W: Write>(frames: &[Frame], mut out: W) -> Result<()> {
    for f in frames {
        writeln!(out, "{}", f.step)?;
        for c in &f.coords {
            writeln!(out, "{:e} {:e} {:e}", c.x, c.y, c.z)?;
        }
    }
    Ok(())
}
