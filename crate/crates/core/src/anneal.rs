//! Minimizers for binary quadratic models: single-flip Metropolis simulated
//! annealing and Gray-code exhaustive enumeration.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qubo::QuboModel;
use crate::scalar::{lit, Scalar};

/// Largest model [`solve_exhaustive`] will enumerate.
pub const EXHAUSTIVE_CAP: usize = 27;

/// A model that supports incremental single-bit-flip energy updates.
///
/// `Cache` is whatever auxiliary state makes `flip_delta` cheap (local fields,
/// form values, ...). `apply_flip` receives the bits *before* the flip.
pub trait Annealable<T: Scalar>: Sync {
    type Cache: Clone + Send;

    fn n_vars(&self) -> usize;
    fn energy(&self, bits: &[bool]) -> T;
    /// Mean absolute coefficient, used for the automatic final inverse temperature.
    fn coefficient_scale(&self) -> T;
    /// Upper bound on `|energy|`, used for floating-point tie tolerances.
    fn abs_coefficient_sum(&self) -> T;
    fn init_cache(&self, bits: &[bool]) -> Self::Cache;
    fn flip_delta(&self, cache: &Self::Cache, bits: &[bool], v: usize) -> T;
    fn apply_flip(&self, cache: &mut Self::Cache, bits: &[bool], v: usize);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaFinal<T> {
    /// `5 / mean |coefficient|` of the model being solved.
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaSchedule<T> {
    pub sweeps: usize,
    pub beta_initial: T,
    pub beta_final: BetaFinal<T>,
    pub restarts: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SaSchedule<T> {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            beta_initial: lit(0.01),
            beta_final: BetaFinal::Auto,
            restarts: 4,
            seed: 0,
        }
    }
}

impl<T: Scalar> SaSchedule<T> {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidParameter("sweeps must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if !(self.beta_initial > T::zero()) {
            return Err(Error::InvalidParameter("beta_initial must be positive".into()));
        }
        if let BetaFinal::Fixed(b) = self.beta_final {
            if !(b >= self.beta_initial) {
                return Err(Error::InvalidParameter("beta_final must be >= beta_initial".into()));
            }
        }
        Ok(())
    }

    /// Final inverse temperature for a model with the given coefficient scale.
    pub fn resolve_beta_final(&self, coefficient_scale: T) -> T {
        match self.beta_final {
            BetaFinal::Fixed(b) => b,
            BetaFinal::Auto => {
                if coefficient_scale > T::zero() {
                    (lit::<T>(5.0) / coefficient_scale).max(self.beta_initial)
                } else {
                    self.beta_initial
                }
            }
        }
    }

    /// Geometric interpolation from `beta_initial` to `beta_final`, one value per sweep.
    pub fn betas(&self, beta_final: T) -> Vec<T> {
        if self.sweeps == 1 {
            return vec![beta_final];
        }
        let ratio = beta_final / self.beta_initial;
        let last = lit::<T>((self.sweeps - 1) as f64);
        (0..self.sweeps)
            .map(|s| self.beta_initial * ratio.powf(lit::<T>(s as f64) / last))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub best_bits: Vec<bool>,
    pub best_energy: T,
    pub per_restart_energies: Vec<T>,
    pub per_restart_bits: Vec<Vec<bool>>,
}

impl<T: Scalar> SolveResult<T> {
    /// Restart indices ordered by energy, ties by index.
    pub fn restarts_by_energy(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.per_restart_energies.len()).collect();
        idx.sort_by(|&a, &b| {
            self.per_restart_energies[a]
                .partial_cmp(&self.per_restart_energies[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Simulated annealing on a [`QuboModel`].
pub fn solve_sa<T: Scalar>(model: &QuboModel<T>, sched: &SaSchedule<T>) -> SolveResult<T> {
    anneal(&model.compile(), sched)
}

/// Simulated annealing on any [`Annealable`] model.
///
/// Each restart runs an independent chain from a uniformly random start,
/// visiting variables in a fresh random order each sweep. The best state seen
/// at the end of any sweep is kept. Restarts may run concurrently; the result
/// does not depend on scheduling.
pub fn anneal<T: Scalar, M: Annealable<T>>(model: &M, sched: &SaSchedule<T>) -> SolveResult<T> {
    let beta_final = sched.resolve_beta_final(model.coefficient_scale());
    let betas = sched.betas(beta_final);
    let chains: Vec<(Vec<bool>, T)> = (0..sched.restarts.max(1))
        .into_par_iter()
        .map(|r| run_chain(model, &betas, sched.seed, r as u64))
        .collect();

    let per_restart_energies: Vec<T> = chains.iter().map(|c| c.1).collect();
    let per_restart_bits: Vec<Vec<bool>> = chains.into_iter().map(|c| c.0).collect();
    let mut best = 0;
    for (r, &e) in per_restart_energies.iter().enumerate() {
        if e < per_restart_energies[best] {
            best = r;
        }
    }
    SolveResult {
        best_bits: per_restart_bits[best].clone(),
        best_energy: per_restart_energies[best],
        per_restart_energies,
        per_restart_bits,
    }
}

fn run_chain<T: Scalar, M: Annealable<T>>(
    model: &M,
    betas: &[T],
    seed: u64,
    stream: u64,
) -> (Vec<bool>, T) {
    let n = model.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let mut bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut cache = model.init_cache(&bits);
    let mut energy = model.energy(&bits);
    let mut best_bits = bits.clone();
    let mut best_energy = energy;
    let mut order: Vec<usize> = (0..n).collect();
    let cutoff = lit::<T>(40.0);

    for &beta in betas {
        order.shuffle(&mut rng);
        for &v in &order {
            let delta = model.flip_delta(&cache, &bits, v);
            let accept = if delta <= T::zero() {
                true
            } else {
                let x = beta * delta;
                x < cutoff && lit::<T>(rng.random::<f64>()) < (-x).exp()
            };
            if accept {
                model.apply_flip(&mut cache, &bits, v);
                bits[v] = !bits[v];
                energy += delta;
            }
        }
        if energy < best_energy {
            best_energy = energy;
            best_bits.clone_from(&bits);
        }
    }

    if cfg!(debug_assertions) {
        let fresh = model.energy(&bits);
        let tol = lit::<T>(1e-6) * (T::one() + model.abs_coefficient_sum());
        debug_assert!(
            (fresh - energy).abs() <= tol,
            "incremental energy drifted: {energy} vs {fresh}"
        );
    }
    let exact = model.energy(&best_bits);
    (best_bits, exact)
}

/// Exact minimum of a [`QuboModel`] by enumeration (at most [`EXHAUSTIVE_CAP`] variables).
pub fn solve_exhaustive<T: Scalar>(model: &QuboModel<T>) -> Result<SolveResult<T>> {
    if model.n_vars() > EXHAUSTIVE_CAP {
        return Err(Error::TooManyVariables {
            n_vars: model.n_vars(),
            cap: EXHAUSTIVE_CAP,
        });
    }
    enumerate(&model.compile())
}

/// Gray-code enumeration of every assignment of an [`Annealable`] model.
///
/// Ties (within floating-point tolerance) go to the lowest integer encoding,
/// with variable 0 as the least significant bit.
pub fn enumerate<T: Scalar, M: Annealable<T>>(model: &M) -> Result<SolveResult<T>> {
    let n = model.n_vars();
    if n > EXHAUSTIVE_CAP {
        return Err(Error::TooManyVariables { n_vars: n, cap: EXHAUSTIVE_CAP });
    }
    const RESYNC: u64 = 1 << 16;
    let tol = T::epsilon() * lit::<T>(4096.0) * (T::one() + model.abs_coefficient_sum());

    let mut bits = vec![false; n];
    let mut cache = model.init_cache(&bits);
    let mut energy = model.energy(&bits);
    let mut code: u64 = 0;
    let mut best_code: u64 = 0;
    let mut best_energy = energy;

    let total: u64 = 1 << n;
    for step in 1..total {
        let v = step.trailing_zeros() as usize;
        energy += model.flip_delta(&cache, &bits, v);
        model.apply_flip(&mut cache, &bits, v);
        bits[v] = !bits[v];
        code ^= 1 << v;
        if step % RESYNC == 0 {
            cache = model.init_cache(&bits);
            energy = model.energy(&bits);
        }
        if energy < best_energy - tol {
            best_energy = energy;
            best_code = code;
        } else if energy <= best_energy + tol && code < best_code {
            best_energy = best_energy.min(energy);
            best_code = code;
        }
    }

    let best_bits: Vec<bool> = (0..n).map(|v| best_code >> v & 1 == 1).collect();
    let exact = model.energy(&best_bits);
    Ok(SolveResult {
        best_bits: best_bits.clone(),
        best_energy: exact,
        per_restart_energies: vec![exact],
        per_restart_bits: vec![best_bits],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_linear(n: usize, c: f64) -> QuboModel<f64> {
        let mut q = QuboModel::new(n);
        for v in 0..n {
            q.add_linear(v, c);
        }
        q
    }

    fn small_schedule() -> SaSchedule<f64> {
        SaSchedule {
            sweeps: 200,
            restarts: 2,
            ..SaSchedule::default()
        }
    }

    #[test]
    fn positive_linear_terms_give_all_zeros() {
        let r = solve_sa(&uniform_linear(30, 1.0), &small_schedule());
        assert!(r.best_bits.iter().all(|&b| !b));
        assert_eq!(r.best_energy, 0.0);
    }

    #[test]
    fn negative_linear_terms_give_all_ones() {
        let r = solve_sa(&uniform_linear(30, -1.0), &small_schedule());
        assert!(r.best_bits.iter().all(|&b| b));
        assert_eq!(r.best_energy, -30.0);
    }

    #[test]
    fn best_energy_is_min_of_restarts() {
        let mut q = uniform_linear(10, -1.0);
        for v in 0..9 {
            q.add_quadratic(v, v + 1, 1.5);
        }
        let r = solve_sa(&q, &small_schedule());
        let min = r.per_restart_energies.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_energy, min);
        assert_eq!(r.best_energy, q.energy(&r.best_bits).unwrap());
    }

    #[test]
    fn sa_is_deterministic() {
        let mut q = uniform_linear(12, -0.5);
        for v in 0..11 {
            q.add_quadratic(v, v + 1, 0.75);
        }
        let s = small_schedule().with_seed(99);
        assert_eq!(solve_sa(&q, &s), solve_sa(&q, &s));
    }

    #[test]
    fn exhaustive_on_empty_model_is_constant() {
        let mut q = QuboModel::<f64>::new(0);
        q.add_constant(4.0);
        let r = solve_exhaustive(&q).unwrap();
        assert_eq!(r.best_energy, 4.0);
        assert!(r.best_bits.is_empty());
    }

    #[test]
    fn exhaustive_tie_prefers_variable_zero() {
        let mut q = QuboModel::<f64>::new(2);
        q.add_linear(0, -1.0);
        q.add_linear(1, -1.0);
        q.add_quadratic(0, 1, 5.0);
        let r = solve_exhaustive(&q).unwrap();
        assert_eq!(r.best_bits, vec![true, false]);
        assert_eq!(r.best_energy, -1.0);
    }

    #[test]
    fn exhaustive_refuses_large_models() {
        let q = QuboModel::<f64>::new(EXHAUSTIVE_CAP + 1);
        assert!(matches!(solve_exhaustive(&q), Err(Error::TooManyVariables { .. })));
    }

    #[test]
    fn geometric_betas() {
        let s = SaSchedule::<f64> {
            sweeps: 3,
            beta_initial: 0.1,
            beta_final: BetaFinal::Fixed(10.0),
            ..SaSchedule::default()
        };
        let b = s.betas(10.0);
        assert!((b[0] - 0.1).abs() < 1e-12);
        assert!((b[1] - 1.0).abs() < 1e-12);
        assert!((b[2] - 10.0).abs() < 1e-12);
    }
}
