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

//! Gaussian-hill bias potential.
//!
//! ```text
//! V(S) = sum_hills h * prod_i exp(-(S_i - s_i)^2 / (2 sigma_i^2))
//! F_k  = -sum_i dV/dS_i * dS_i/dx_k
//! ```
//!
//! With a grid configured, every deposition is also accumulated onto the grid
//! nodes (values and first derivatives, hills truncated at
//! [`TRUNCATION_SIGMAS`]) and queries are answered by cubic Hermite
//! interpolation instead of summing all hills.

use std::io::Write;

use crate::colvar::CvResult;
use crate::{Error, Result, Vec3};

/// Hills are added to grid nodes within this many widths of their centre.
pub const TRUNCATION_SIGMAS: f64 = 8.0;

/// Largest number of CVs a store accepts.
pub const MAX_CVS: usize = 3;

/// Default grid resolution per CV.
pub const DEFAULT_BINS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Hill {
    pub centers: Vec<f64>,
    pub height: f64,
    pub widths: Vec<f64>,
    pub step: u64,
}

impl Hill {
    pub fn new(centers: Vec<f64>, height: f64, widths: Vec<f64>, step: u64) -> Result<Self> {
        if centers.len() != widths.len() {
            return Err(Error::Config(format!(
                "hill has {} centers but {} widths",
                centers.len(),
                widths.len()
            )));
        }
        if !(height.is_finite() && height >= 0.0) {
            return Err(Error::Config(format!(
                "hill height must be >= 0, got {height}"
            )));
        }
        if widths.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("hill widths must be positive".into()));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("hill center".into()));
        }
        Ok(Self {
            centers,
            height,
            widths,
            step,
        })
    }

    pub fn value(&self, s: &[f64]) -> f64 {
        let exponent: f64 = s
            .iter()
            .zip(&self.centers)
            .zip(&self.widths)
            .map(|((x, c), w)| (x - c).powi(2) / (2.0 * w * w))
            .sum();
        self.height * (-exponent).exp()
    }

    /// Value and `dV/ds`.
    pub fn value_and_gradient(&self, s: &[f64]) -> (f64, Vec<f64>) {
        let v = self.value(s);
        let g = s
            .iter()
            .zip(&self.centers)
            .zip(&self.widths)
            .map(|((x, c), w)| -v * (x - c) / (w * w))
            .collect();
        (v, g)
    }
}

/// Uniform grid per CV: `bins[d]` intervals between `min[d]` and `max[d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub bins: Vec<usize>,
}

impl GridSpec {
    pub fn new(min: Vec<f64>, max: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        let d = min.len();
        if max.len() != d || bins.len() != d {
            return Err(Error::Config("grid min/max/bins lengths differ".into()));
        }
        for i in 0..d {
            if !(min[i].is_finite() && max[i].is_finite() && max[i] > min[i]) {
                return Err(Error::Config(format!(
                    "grid bounds for CV {i} must be finite with min < max"
                )));
            }
            if bins[i] == 0 {
                return Err(Error::Config(format!(
                    "grid for CV {i} needs at least one bin"
                )));
            }
        }
        Ok(Self { min, max, bins })
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    pub fn spacing(&self, d: usize) -> f64 {
        (self.max[d] - self.min[d]) / self.bins[d] as f64
    }

    pub fn node_coord(&self, d: usize, i: usize) -> f64 {
        self.min[d] + i as f64 * self.spacing(d)
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        for (d, &v) in s.iter().enumerate() {
            if !(v >= self.min[d] && v <= self.max[d]) {
                return Err(Error::OutOfGrid {
                    dim: d,
                    value: v,
                    min: self.min[d],
                    max: self.max[d],
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BiasGrid {
    spec: GridSpec,
    shape: Vec<usize>,
    values: Vec<f64>,
    /// `dims` derivatives per node.
    derivs: Vec<f64>,
}

fn hermite(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    ]
}

fn hermite_dt(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        6.0 * t2 - 6.0 * t,
        3.0 * t2 - 4.0 * t + 1.0,
        -6.0 * t2 + 6.0 * t,
        3.0 * t2 - 2.0 * t,
    ]
}

impl BiasGrid {
    fn new(spec: GridSpec) -> Self {
        let shape: Vec<usize> = spec.bins.iter().map(|b| b + 1).collect();
        let n: usize = shape.iter().product();
        let dims = spec.dims();
        Self {
            spec,
            shape,
            values: vec![0.0; n],
            derivs: vec![0.0; n * dims],
        }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (i, n)| acc * n + i)
    }

    fn node_point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| self.spec.node_coord(d, i))
            .collect()
    }

    fn add_hill(&mut self, hill: &Hill) {
        let dims = self.spec.dims();
        let mut lo = vec![0usize; dims];
        let mut hi = vec![0usize; dims];
        for d in 0..dims {
            let reach = TRUNCATION_SIGMAS * hill.widths[d];
            let h = self.spec.spacing(d);
            let first = ((hill.centers[d] - reach - self.spec.min[d]) / h)
                .ceil()
                .max(0.0);
            let last = ((hill.centers[d] + reach - self.spec.min[d]) / h)
                .floor()
                .min(self.spec.bins[d] as f64);
            if last < first {
                return;
            }
            lo[d] = first as usize;
            hi[d] = last as usize;
        }
        let mut idx = lo.clone();
        loop {
            let point = self.node_point(&idx);
            let (v, g) = hill.value_and_gradient(&point);
            let at = self.flat(&idx);
            self.values[at] += v;
            for (d, gd) in g.iter().enumerate() {
                self.derivs[at * dims + d] += gd;
            }
            // odometer over the box lo..=hi
            let mut d = dims;
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                if idx[d] < hi[d] {
                    idx[d] += 1;
                    break;
                }
                idx[d] = lo[d];
            }
        }
    }

    /// Per-dimension cubic Hermite interpolation from node values and first
    /// derivatives; mixed derivatives are not stored.
    fn interpolate(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.spec.check(s)?;
        let dims = self.spec.dims();
        let mut cell = vec![0usize; dims];
        // basis[d] = [h00, h10 * dx, h01, h11 * dx], dbasis[d] = d/ds of the same
        let mut basis = vec![[0.0; 4]; dims];
        let mut dbasis = vec![[0.0; 4]; dims];
        for d in 0..dims {
            let h = self.spec.spacing(d);
            let u = (s[d] - self.spec.min[d]) / h;
            let i = (u.floor().max(0.0) as usize).min(self.spec.bins[d] - 1);
            let t = u - i as f64;
            cell[d] = i;
            let b = hermite(t);
            let db = hermite_dt(t);
            basis[d] = [b[0], b[1] * h, b[2], b[3] * h];
            dbasis[d] = [db[0] / h, db[1], db[2] / h, db[3]];
        }

        let mut value = 0.0;
        let mut grad = vec![0.0; dims];
        let mut corner = vec![0usize; dims];
        for mask in 0..(1usize << dims) {
            for (d, c) in corner.iter_mut().enumerate() {
                *c = cell[d] + ((mask >> d) & 1);
            }
            let at = self.flat(&corner);
            // term `None` carries the node value, `Some(e)` the e-th derivative
            for term in std::iter::once(None).chain((0..dims).map(Some)) {
                let coeff = match term {
                    None => self.values[at],
                    Some(e) => self.derivs[at * dims + e],
                };
                if coeff == 0.0 {
                    continue;
                }
                let slot = |d: usize| {
                    let upper = (mask >> d) & 1 == 1;
                    let deriv = term == Some(d);
                    match (deriv, upper) {
                        (false, false) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (true, true) => 3,
                    }
                };
                let factors: Vec<f64> = (0..dims).map(|d| basis[d][slot(d)]).collect();
                value += coeff * factors.iter().product::<f64>();
                for (k, g) in grad.iter_mut().enumerate() {
                    let mut p = coeff * dbasis[k][slot(k)];
                    for (d, f) in factors.iter().enumerate() {
                        if d != k {
                            p *= f;
                        }
                    }
                    *g += p;
                }
            }
        }
        Ok((value, grad))
    }
}

/// Deposited hills plus the optional bias grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HillStore {
    hills: Vec<Hill>,
    stride: u64,
    height: f64,
    widths: Vec<f64>,
    grid: Option<BiasGrid>,
}

impl HillStore {
    /// Store for `widths.len()` CVs depositing hills of `height` every
    /// `stride` steps.
    pub fn new(stride: u64, height: f64, widths: Vec<f64>, grid: Option<GridSpec>) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("hill stride must be >= 1".into()));
        }
        if widths.is_empty() || widths.len() > MAX_CVS {
            return Err(Error::Config(format!(
                "metadynamics supports 1..={MAX_CVS} CVs, got {}",
                widths.len()
            )));
        }
        // validates height and widths
        Hill::new(vec![0.0; widths.len()], height, widths.clone(), 0)?;
        if let Some(g) = &grid {
            if g.dims() != widths.len() {
                return Err(Error::Config(format!(
                    "grid has {} dimensions for {} CVs",
                    g.dims(),
                    widths.len()
                )));
            }
        }
        Ok(Self {
            hills: Vec::new(),
            stride,
            height,
            widths,
            grid: grid.map(BiasGrid::new),
        })
    }

    pub fn dims(&self) -> usize {
        self.widths.len()
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn hills(&self) -> &[Hill] {
        &self.hills
    }

    pub fn grid_spec(&self) -> Option<&GridSpec> {
        self.grid.as_ref().map(|g| &g.spec)
    }

    /// Whether a hill is due at `step`.
    pub fn is_deposit_step(&self, step: u64) -> bool {
        step > 0 && step.is_multiple_of(self.stride)
    }

    /// Appends a hill at `cv_values`. `step` must be a multiple of the stride
    /// and not earlier than the last deposition.
    pub fn deposit(&mut self, cv_values: &[f64], step: u64) -> Result<()> {
        if cv_values.len() != self.dims() {
            return Err(Error::Config(format!(
                "{} CV values for a {}-dimensional bias",
                cv_values.len(),
                self.dims()
            )));
        }
        if !step.is_multiple_of(self.stride) {
            return Err(Error::Config(format!(
                "step {step} is not a multiple of the hill stride {}",
                self.stride
            )));
        }
        if let Some(last) = self.hills.last() {
            if step < last.step {
                return Err(Error::Config(format!(
                    "hill at step {step} after one at step {}",
                    last.step
                )));
            }
        }
        if let Some(grid) = &self.grid {
            grid.spec.check(cv_values)?;
        }
        let hill = Hill::new(cv_values.to_vec(), self.height, self.widths.clone(), step)?;
        if let Some(grid) = &mut self.grid {
            grid.add_hill(&hill);
        }
        self.hills.push(hill);
        Ok(())
    }

    /// Exact sum over all hills: `V` and `dV/dS`.
    pub fn bias_direct(&self, s: &[f64]) -> (f64, Vec<f64>) {
        let mut v = 0.0;
        let mut g = vec![0.0; self.dims()];
        for hill in &self.hills {
            let (hv, hg) = hill.value_and_gradient(s);
            v += hv;
            for (a, b) in g.iter_mut().zip(hg) {
                *a += b;
            }
        }
        (v, g)
    }

    /// `V` and `dV/dS`, interpolated from the grid when one is configured.
    pub fn bias(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        if s.len() != self.dims() {
            return Err(Error::Config(format!(
                "{} CV values for a {}-dimensional bias",
                s.len(),
                self.dims()
            )));
        }
        match &self.grid {
            Some(grid) => grid.interpolate(s),
            None => Ok(self.bias_direct(s)),
        }
    }

    /// Bias energy and the per-atom bias force `-dV/dx`.
    pub fn bias_and_force(&self, cvs: &[CvResult]) -> Result<(f64, Vec<Vec3>)> {
        let s: Vec<f64> = cvs.iter().map(|c| c.value).collect();
        let (v, dv) = self.bias(&s)?;
        let n_atoms = cvs.first().map_or(0, |c| c.grad.len());
        let mut forces = vec![Vec3::zeros(); n_atoms];
        for (cv, dvi) in cvs.iter().zip(dv) {
            if cv.grad.len() != n_atoms {
                return Err(Error::AtomCountMismatch {
                    expected: n_atoms,
                    found: cv.grad.len(),
                });
            }
            if dvi == 0.0 {
                continue;
            }
            for (f, g) in forces.iter_mut().zip(&cv.grad) {
                *f -= g * dvi;
            }
        }
        Ok((v, forces))
    }

    /// Every grid node with its stored value, or `None` without a grid.
    pub fn grid_nodes(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        let grid = self.grid.as_ref()?;
        let dims = grid.spec.dims();
        let mut out = Vec::with_capacity(grid.values.len());
        let mut idx = vec![0usize; dims];
        for &value in &grid.values {
            out.push((grid.node_point(&idx), value));
            for d in (0..dims).rev() {
                idx[d] += 1;
                if idx[d] < grid.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Some(out)
    }

    /// A-priori error bounds `(value, derivative)` for the 1-D grid
    /// interpolant: Hermite remainder from the hills' fourth derivative plus
    /// the truncated tails. `None` without a grid or for more than one CV.
    pub fn interpolation_tolerance(&self) -> Option<(f64, f64)> {
        let grid = self.grid.as_ref()?;
        if self.dims() != 1 {
            return None;
        }
        let h = grid.spec.spacing(0);
        let sigma = self.widths[0];
        let total = self.height * self.hills.len() as f64;
        // max |d^4/ds^4 exp(-s^2 / 2 sigma^2)| = 3 / sigma^4
        let fourth = 3.0 * total / sigma.powi(4);
        let tail = total * (-0.5 * TRUNCATION_SIGMAS * TRUNCATION_SIGMAS).exp();
        let tail_slope = tail * TRUNCATION_SIGMAS / sigma;
        Some((
            h.powi(4) / 384.0 * fourth + tail,
            3f64.sqrt() / 216.0 * h.powi(3) * fourth + tail_slope,
        ))
    }

    /// One line per hill: `step s_1..s_d sigma_1..sigma_d height`.
    pub fn write_hills<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for hill in &self.hills {
            write!(out, "{}", hill.step)?;
            for v in hill
                .centers
                .iter()
                .chain(&hill.widths)
                .chain(std::iter::once(&hill.height))
            {
                write!(out, " {v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_1d(grid: bool) -> HillStore {
        let spec = grid.then(|| GridSpec::new(vec![-5.0], vec![5.0], vec![500]).unwrap());
        HillStore::new(1, 0.5, vec![0.3], spec).unwrap()
    }

    #[test]
    fn peak_and_one_sigma() {
        let mut store = store_1d(false);
        store.deposit(&[0.0], 0).unwrap();
        assert_eq!(store.bias(&[0.0]).unwrap().0, 0.5);
        let (v, _) = store.bias(&[0.3]).unwrap();
        assert!((v - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn empty_store_has_no_force() {
        let store = store_1d(true);
        let cv = CvResult {
            value: 0.4,
            grad: vec![Vec3::new(1.0, 2.0, 3.0); 4],
        };
        let (v, f) = store.bias_and_force(&[cv]).unwrap();
        assert_eq!(v, 0.0);
        assert!(f.iter().all(|x| *x == Vec3::zeros()));
    }

    #[test]
    fn peak_is_stationary() {
        let mut store = store_1d(false);
        store.deposit(&[1.25], 0).unwrap();
        let cv = CvResult {
            value: 1.25,
            grad: vec![Vec3::new(1.0, -2.0, 0.5); 3],
        };
        let (v, f) = store.bias_and_force(&[cv]).unwrap();
        assert_eq!(v, 0.5);
        assert!(f.iter().all(|x| x.amax() == 0.0));
    }

    #[test]
    fn grid_is_exact_at_nodes_and_close_between() {
        let mut direct = store_1d(false);
        let mut gridded = store_1d(true);
        for (i, c) in [-1.0, 0.37, 0.4, 2.2].iter().enumerate() {
            direct.deposit(&[*c], i as u64).unwrap();
            gridded.deposit(&[*c], i as u64).unwrap();
        }
        for (p, v) in gridded.grid_nodes().unwrap() {
            assert!((v - direct.bias_direct(&p).0).abs() < 1e-12);
        }
        let (tol_v, tol_g) = gridded.interpolation_tolerance().unwrap();
        for k in 0..997 {
            let s = -4.99 + k as f64 * 0.01;
            let (gv, gg) = gridded.bias(&[s]).unwrap();
            let (dv, dg) = direct.bias_direct(&[s]);
            assert!((gv - dv).abs() <= tol_v, "s = {s}");
            assert!((gg[0] - dg[0]).abs() <= tol_g, "s = {s}");
        }
    }

    #[test]
    fn out_of_grid_is_an_error() {
        let mut store = store_1d(true);
        assert!(matches!(
            store.deposit(&[6.0], 0),
            Err(Error::OutOfGrid { .. })
        ));
        assert!(matches!(store.bias(&[-5.5]), Err(Error::OutOfGrid { .. })));
        assert!(store.bias(&[5.0]).is_ok());
    }

    #[test]
    fn deposition_rules() {
        let mut store = HillStore::new(10, 0.5, vec![0.3], None).unwrap();
        assert!(store.deposit(&[0.0], 5).is_err());
        store.deposit(&[0.0], 20).unwrap();
        assert!(store.deposit(&[0.0], 10).is_err());
        assert!(store.deposit(&[0.0, 1.0], 30).is_err());
        assert!(!store.is_deposit_step(0));
        assert!(store.is_deposit_step(30));
        assert!(HillStore::new(0, 0.5, vec![0.3], None).is_err());
        assert!(HillStore::new(1, -0.5, vec![0.3], None).is_err());
        assert!(HillStore::new(1, 0.5, vec![0.0], None).is_err());
        assert!(HillStore::new(1, 0.5, vec![0.1; 4], None).is_err());
    }

    #[test]
    fn two_cv_hill_factorizes() {
        let hill = Hill::new(vec![0.5, -1.0], 0.8, vec![0.2, 0.7], 0).unwrap();
        let g1 = |s: f64| (-(s - 0.5f64).powi(2) / (2.0 * 0.04)).exp();
        let g2 = |s: f64| (-(s + 1.0f64).powi(2) / (2.0 * 0.49)).exp();
        for (a, b) in [
            (0.5, -1.0),
            (0.7, -1.0),
            (0.5, 0.0),
            (0.1, -2.3),
            (1.0, 0.4),
        ] {
            let expected = 0.8 * g1(a) * g2(b);
            assert!((hill.value(&[a, b]) - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn two_cv_grid_matches_at_nodes() {
        let spec = GridSpec::new(vec![-2.0, -1.0], vec![2.0, 3.0], vec![40, 50]).unwrap();
        let mut direct = HillStore::new(1, 0.5, vec![0.4, 0.6], None).unwrap();
        let mut gridded = HillStore::new(1, 0.5, vec![0.4, 0.6], Some(spec)).unwrap();
        for (i, s) in [[0.0, 0.0], [0.3, 1.1], [-1.2, 2.5]].iter().enumerate() {
            direct.deposit(s, i as u64).unwrap();
            gridded.deposit(s, i as u64).unwrap();
        }
        for (p, v) in gridded.grid_nodes().unwrap() {
            assert!((v - direct.bias_direct(&p).0).abs() < 1e-12);
            let (iv, ig) = gridded.bias(&p).unwrap();
            let (dv, dg) = direct.bias_direct(&p);
            assert!((iv - dv).abs() < 1e-12);
            assert!((ig[0] - dg[0]).abs() < 1e-10 && (ig[1] - dg[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn hills_file_format() {
        let mut store = HillStore::new(50, 0.5, vec![0.25], None).unwrap();
        store.deposit(&[1.0 / 3.0], 50).unwrap();
        let mut buf = Vec::new();
        store.write_hills(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line,
            "50 3.3333333333333331e-1 2.5000000000000000e-1 5.0000000000000000e-1\n"
        );
        let parsed: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }
}
