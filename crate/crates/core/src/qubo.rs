//! Sparse QUBO models in canonical coefficient form.
//!
//! A [`QuboModel`] stores `constant + sum_v l_v x_v + sum_{u<v} q_uv x_u x_v`
//! with ordered keys, so iteration and text dumps are deterministic. Exact
//! zero coefficients are never kept.

use std::collections::BTreeMap;
use std::io::Write;

use crate::anneal::Annealable;
use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel<T> {
    n_vars: usize,
    constant: T,
    linear: BTreeMap<usize, T>,
    quadratic: BTreeMap<(usize, usize), T>,
}

impl<T: Scalar> QuboModel<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            constant: T::zero(),
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn linear(&self) -> &BTreeMap<usize, T> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), T> {
        &self.quadratic
    }

    pub fn add_constant(&mut self, c: T) {
        self.constant += c;
    }

    pub fn add_linear(&mut self, v: usize, c: T) {
        assert!(v < self.n_vars, "variable {v} out of range");
        accumulate(&mut self.linear, v, c);
    }

    /// Adds `c * x_u * x_v`. With `u == v` the term folds into the linear part.
    pub fn add_quadratic(&mut self, u: usize, v: usize, c: T) {
        assert!(u < self.n_vars && v < self.n_vars, "variable out of range");
        match u.cmp(&v) {
            std::cmp::Ordering::Equal => accumulate(&mut self.linear, u, c),
            std::cmp::Ordering::Less => accumulate(&mut self.quadratic, (u, v), c),
            std::cmp::Ordering::Greater => accumulate(&mut self.quadratic, (v, u), c),
        }
    }

    /// `self += scale * other`, coefficient-wise.
    pub fn add_scaled(&mut self, other: &QuboModel<T>, scale: T) {
        assert_eq!(self.n_vars, other.n_vars, "variable count mismatch");
        if scale == T::zero() {
            return;
        }
        self.constant += scale * other.constant;
        for (&v, &c) in &other.linear {
            accumulate(&mut self.linear, v, scale * c);
        }
        for (&k, &c) in &other.quadratic {
            accumulate(&mut self.quadratic, k, scale * c);
        }
    }

    pub fn energy(&self, bits: &[bool]) -> Result<T> {
        if bits.len() != self.n_vars {
            return Err(Error::LengthMismatch {
                expected: self.n_vars,
                found: bits.len(),
            });
        }
        Ok(self.energy_unchecked(bits))
    }

    fn energy_unchecked(&self, bits: &[bool]) -> T {
        let mut e = self.constant;
        for (&v, &c) in &self.linear {
            if bits[v] {
                e += c;
            }
        }
        for (&(u, v), &c) in &self.quadratic {
            if bits[u] && bits[v] {
                e += c;
            }
        }
        e
    }

    /// Mean absolute value over stored linear and quadratic coefficients.
    pub fn mean_abs_coefficient(&self) -> T {
        let count = self.linear.len() + self.quadratic.len();
        if count == 0 {
            return T::zero();
        }
        let total: T = self
            .linear
            .values()
            .chain(self.quadratic.values())
            .map(|c| c.abs())
            .sum();
        total / from_usize(count)
    }

    /// Writes `n_vars <n>` and `constant <c>` header lines followed by one
    /// `v v coeff` line per linear term and one `u v coeff` line per
    /// quadratic term (u < v).
    pub fn write_dump<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "n_vars {}", self.n_vars)?;
        writeln!(sink, "constant {}", self.constant)?;
        for (&v, &c) in &self.linear {
            writeln!(sink, "{v} {v} {c}")?;
        }
        for (&(u, v), &c) in &self.quadratic {
            writeln!(sink, "{u} {v} {c}")?;
        }
        Ok(())
    }

    /// Flattens into a CSR adjacency suitable for local-field updates.
    pub fn compile(&self) -> CompiledQubo<T> {
        let n = self.n_vars;
        let mut linear = vec![T::zero(); n];
        for (&v, &c) in &self.linear {
            linear[v] = c;
        }
        let mut degree = vec![0usize; n];
        for &(u, v) in self.quadratic.keys() {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![(0u32, T::zero()); offsets[n]];
        for (&(u, v), &c) in &self.quadratic {
            neighbors[fill[u]] = (v as u32, c);
            fill[u] += 1;
            neighbors[fill[v]] = (u as u32, c);
            fill[v] += 1;
        }
        let abs_sum = self.constant.abs()
            + self
                .linear
                .values()
                .chain(self.quadratic.values())
                .map(|c| c.abs())
                .sum::<T>();
        CompiledQubo {
            source: self.clone(),
            linear,
            offsets,
            neighbors,
            mean_abs: self.mean_abs_coefficient(),
            abs_sum,
        }
    }
}

fn accumulate<K: Ord, T: Scalar>(map: &mut BTreeMap<K, T>, key: K, c: T) {
    if c == T::zero() {
        return;
    }
    let entry = map.entry(key);
    match entry {
        std::collections::btree_map::Entry::Vacant(slot) => {
            slot.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut slot) => {
            let sum = *slot.get() + c;
            if sum == T::zero() {
                slot.remove();
            } else {
                *slot.get_mut() = sum;
            }
        }
    }
}

/// A [`QuboModel`] with dense linear terms and a symmetric adjacency list.
#[derive(Debug, Clone)]
pub struct CompiledQubo<T> {
    source: QuboModel<T>,
    linear: Vec<T>,
    offsets: Vec<usize>,
    neighbors: Vec<(u32, T)>,
    mean_abs: T,
    abs_sum: T,
}

impl<T: Scalar> CompiledQubo<T> {
    pub fn model(&self) -> &QuboModel<T> {
        &self.source
    }

    #[inline]
    fn row(&self, v: usize) -> &[(u32, T)] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }
}

impl<T: Scalar> Annealable<T> for CompiledQubo<T> {
    /// Local fields `h_v = l_v + sum_u q_uv x_u`.
    type Cache = Vec<T>;

    fn n_vars(&self) -> usize {
        self.source.n_vars
    }

    fn energy(&self, bits: &[bool]) -> T {
        self.source.energy_unchecked(bits)
    }

    fn coefficient_scale(&self) -> T {
        self.mean_abs
    }

    fn abs_coefficient_sum(&self) -> T {
        self.abs_sum
    }

    fn init_cache(&self, bits: &[bool]) -> Vec<T> {
        (0..self.n_vars())
            .map(|v| {
                let mut h = self.linear[v];
                for &(u, c) in self.row(v) {
                    if bits[u as usize] {
                        h += c;
                    }
                }
                h
            })
            .collect()
    }

    #[inline]
    fn flip_delta(&self, fields: &Vec<T>, bits: &[bool], v: usize) -> T {
        if bits[v] {
            -fields[v]
        } else {
            fields[v]
        }
    }

    #[inline]
    fn apply_flip(&self, fields: &mut Vec<T>, bits: &[bool], v: usize) {
        let step = if bits[v] { -T::one() } else { T::one() };
        for &(u, c) in self.row(v) {
            fields[u as usize] += step * c;
        }
    }
}
