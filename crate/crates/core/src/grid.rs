//! Vector-valued maps sampled on a regular grid over a box, with a flat
//! little-endian binary layout.
//!
//! Layout (every field an `f64`, little-endian):
//! `version, n, m, nu, shape[0..n], lo[0], hi[0], ..., lo[n-1], hi[n-1]`,
//! followed by the node values in row-major order (last axis fastest),
//! `nu` values per node. A NaN value marks a node outside the domain.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::kernel::{Vector, MAX_DIM};

pub const GRID_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMap {
    pub n: usize,
    /// Target plane dimension recorded alongside the map.
    pub m: usize,
    /// Number of values per node.
    pub nu: usize,
    pub shape: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> GeomError {
    GeomError::InvalidInput(msg.into())
}

impl GridMap {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_DIM {
            return Err(invalid(format!("grid dimension {} outside 1..={MAX_DIM}", self.n)));
        }
        if self.nu == 0 || self.nu > MAX_DIM {
            return Err(invalid(format!("value dimension {} outside 1..={MAX_DIM}", self.nu)));
        }
        if self.m > self.n {
            return Err(invalid(format!("m = {} exceeds n = {}", self.m, self.n)));
        }
        if self.shape.len() != self.n || self.lo.len() != self.n || self.hi.len() != self.n {
            return Err(invalid("shape and bounds must have n entries"));
        }
        if self.shape.iter().any(|&s| s < 2) {
            return Err(invalid("every grid axis needs at least two nodes"));
        }
        for i in 0..self.n {
            if !(self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] < self.hi[i]) {
                return Err(invalid(format!("axis {i} has invalid bounds")));
            }
        }
        if self.values.len() != self.node_count() * self.nu {
            return Err(invalid(format!(
                "expected {} values, found {}",
                self.node_count() * self.nu,
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Evaluates `f` at every node; `None` marks a node outside the domain.
    pub fn sample<F>(n: usize, m: usize, nu: usize, shape: &[usize], lo: &[f64], hi: &[f64], f: F) -> Result<Self>
    where
        F: Fn(&Vector) -> Option<Vec<f64>>,
    {
        let mut g = GridMap {
            n,
            m,
            nu,
            shape: shape.to_vec(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            values: Vec::new(),
        };
        g.values = vec![0.0; shape.iter().product::<usize>() * nu];
        g.validate()?;
        for k in 0..g.node_count() {
            let x = g.node(k);
            match f(&x) {
                Some(v) if v.len() == nu => g.values[k * nu..(k + 1) * nu].copy_from_slice(&v),
                Some(v) => {
                    return Err(invalid(format!("map returned {} values, expected {nu}", v.len())))
                }
                None => g.values[k * nu..(k + 1) * nu].fill(f64::NAN),
            }
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.shape[axis] - 1) as f64
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for axis in (0..self.n).rev() {
            idx[axis] = k % self.shape[axis];
            k /= self.shape[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn node(&self, k: usize) -> Vector {
        let idx = self.multi_index(k);
        let mut x = Vector::zeros(self.n);
        for axis in 0..self.n {
            x[axis] = self.lo[axis] + self.spacing(axis) * idx[axis] as f64;
        }
        x
    }

    /// Values at node `k`, `None` outside the domain.
    pub fn value(&self, k: usize) -> Option<&[f64]> {
        let v = &self.values[k * self.nu..(k + 1) * self.nu];
        v.iter().all(|x| x.is_finite()).then_some(v)
    }

    /// Multilinear interpolation; `None` outside the box or when a corner
    /// of the enclosing cell is outside the domain.
    pub fn interpolate(&self, x: &Vector) -> Option<Vec<f64>> {
        let mut base = vec![0usize; self.n];
        let mut frac = vec![0.0; self.n];
        for axis in 0..self.n {
            let t = (x[axis] - self.lo[axis]) / self.spacing(axis);
            let last = (self.shape[axis] - 1) as f64;
            if !(t >= 0.0 && t <= last) {
                return None;
            }
            let i = (t.floor() as usize).min(self.shape[axis] - 2);
            base[axis] = i;
            frac[axis] = t - i as f64;
        }
        let mut out = vec![0.0; self.nu];
        let mut idx = vec![0usize; self.n];
        for corner in 0..(1usize << self.n) {
            let mut w = 1.0;
            for axis in 0..self.n {
                let bit = (corner >> axis) & 1;
                idx[axis] = base[axis] + bit;
                w *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.value(self.flat_index(&idx))?;
            for (o, vi) in out.iter_mut().zip(v) {
                *o += w * vi;
            }
        }
        Some(out)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let mut header = vec![GRID_FORMAT_VERSION as f64, self.n as f64, self.m as f64, self.nu as f64];
        header.extend(self.shape.iter().map(|&s| s as f64));
        for i in 0..self.n {
            header.push(self.lo[i]);
            header.push(self.hi[i]);
        }
        let mut buf = Vec::with_capacity(8 * (header.len() + self.values.len()));
        for x in header.iter().chain(&self.values) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)
            .map_err(|e| GeomError::InvalidInput(format!("writing grid: {e}")))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| invalid(format!("reading grid: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(invalid("grid file length is not a multiple of 8 bytes"));
        }
        let words: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let as_count = |x: f64, what: &str| -> Result<usize> {
            if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < 1e12 {
                Ok(x as usize)
            } else {
                Err(invalid(format!("header field {what} = {x} is not a count")))
            }
        };
        if words.len() < 4 {
            return Err(invalid("grid header is truncated"));
        }
        let version = as_count(words[0], "version")?;
        if version != GRID_FORMAT_VERSION as usize {
            return Err(invalid(format!("unsupported grid format version {version}")));
        }
        let n = as_count(words[1], "n")?;
        let m = as_count(words[2], "m")?;
        let nu = as_count(words[3], "nu")?;
        if n == 0 || n > MAX_DIM {
            return Err(invalid(format!("grid dimension {n} outside 1..={MAX_DIM}")));
        }
        let head = 4 + 3 * n;
        if words.len() < head {
            return Err(invalid("grid header is truncated"));
        }
        let shape = (0..n)
            .map(|i| as_count(words[4 + i], "shape"))
            .collect::<Result<Vec<_>>>()?;
        let lo = (0..n).map(|i| words[4 + n + 2 * i]).collect();
        let hi = (0..n).map(|i| words[5 + n + 2 * i]).collect();
        let g = GridMap {
            n,
            m,
            nu,
            shape,
            lo,
            hi,
            values: words[head..].to_vec(),
        };
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coordinate_grid() -> GridMap {
        GridMap::sample(2, 1, 1, &[5, 3], &[0.0, 0.0], &[1.0, 1.0], |x| Some(vec![x[0]])).unwrap()
    }

    #[test]
    fn indexing_is_row_major() {
        let g = coordinate_grid();
        assert_eq!(g.node_count(), 15);
        assert_eq!(g.multi_index(4), vec![1, 1]);
        assert_eq!(g.flat_index(&[1, 1]), 4);
        assert_eq!(g.node(4).to_vec(), vec![0.25, 0.5]);
        assert_eq!(g.value(4), Some(&[0.25][..]));
    }

    #[test]
    fn binary_round_trip() {
        let mut g = coordinate_grid();
        g.values[3] = f64::NAN;
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (4 + 6 + 15));
        let back = GridMap::read_from(&buf[..]).unwrap();
        assert_eq!(back.shape, g.shape);
        assert!(back.value(3).is_none());
        assert_eq!(back.values[4], g.values[4]);
    }

    #[test]
    fn malformed_files_rejected() {
        let g = coordinate_grid();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert!(GridMap::read_from(&buf[..buf.len() - 8]).is_err());
        assert!(GridMap::read_from(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[..8].copy_from_slice(&7.0f64.to_le_bytes());
        assert!(GridMap::read_from(&bad[..]).is_err());
        assert!(GridMap::read_from(&[][..]).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_affine_maps() {
        let g = GridMap::sample(2, 1, 1, &[4, 4], &[0.0, 0.0], &[1.0, 1.0], |x| {
            Some(vec![2.0 * x[0] - x[1] + 0.5])
        })
        .unwrap();
        let x = Vector::new(&[0.37, 0.81]).unwrap();
        let v = g.interpolate(&x).unwrap();
        assert!((v[0] - (2.0 * 0.37 - 0.81 + 0.5)).abs() < 1e-12);
        assert!(g.interpolate(&Vector::new(&[1.2, 0.0]).unwrap()).is_none());
    }
}
