//! Simulated annealing over valid tour assignments of the routing objective.
//!
//! Single-bit flips on the `N^3` move variables must cross states that break
//! the one-hot structure, and those barriers grow with the hard weights. At
//! `N >= 14` a single-flip chain with a practical sweep budget almost never
//! lands on a decodable assignment. This annealer keeps the assignment on
//! valid tours: every proposal (swap, segment reversal, relocation, or a new
//! final arrival for open tours) is the group of bit flips that turns one tour
//! assignment into another, and its energy change is read from the same
//! incremental model the single-flip chain uses.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::anneal::{Annealable, SaSchedule, SolveResult};
use crate::route::var;
use crate::scalar::{from_usize, lit, Scalar};

/// Proposals drawn to estimate the typical energy change of a move.
const PROBE_MOVES: usize = 64;
/// Sweeps between full recomputations of the incremental state.
const RESYNC_SWEEPS: usize = 256;

#[derive(Debug, Clone, Copy)]
enum Proposal {
    Swap(usize, usize),
    Reverse(usize, usize),
    /// Remove the city at the first position and reinsert it at the second.
    Relocate(usize, usize),
    Tail(usize),
}

struct Chain<'a, T: Scalar, M: Annealable<T>> {
    model: &'a M,
    n: usize,
    close_tour: bool,
    order: Vec<usize>,
    tail: usize,
    bits: Vec<bool>,
    cache: M::Cache,
    energy: T,
    flips: Vec<usize>,
    old_moves: Vec<(usize, usize)>,
}

impl<'a, T: Scalar, M: Annealable<T>> Chain<'a, T, M> {
    fn new(model: &'a M, n: usize, start: usize, close_tour: bool, rng: &mut ChaCha8Rng) -> Self {
        let mut rest: Vec<usize> = (0..n).filter(|&c| c != start).collect();
        rest.shuffle(rng);
        let mut order = vec![start];
        order.extend(rest);
        let last = order[n - 1];
        let tail = if close_tour || n < 2 {
            start
        } else {
            let j = rng.random_range(0..n - 1);
            if j >= last {
                j + 1
            } else {
                j
            }
        };
        let bits = tour_bits(&order, tail, n);
        let cache = model.init_cache(&bits);
        let energy = model.energy(&bits);
        Self {
            model,
            n,
            close_tour,
            order,
            tail,
            bits,
            cache,
            energy,
            flips: Vec::new(),
            old_moves: Vec::new(),
        }
    }

    fn resync(&mut self) {
        self.cache = self.model.init_cache(&self.bits);
        self.energy = self.model.energy(&self.bits);
    }

    fn move_at(&self, t: usize) -> (usize, usize) {
        let to = if t + 1 < self.n { self.order[t + 1] } else { self.tail };
        (self.order[t], to)
    }

    fn can_propose(&self) -> bool {
        self.n >= 3 || (!self.close_tour && self.n >= 2)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Proposal {
        let n = self.n;
        let kinds = if self.close_tour { 3 } else { 4 };
        let kind = if n >= 3 { rng.random_range(0..kinds) } else { 3 };
        if kind == 3 {
            let last = self.order[n - 1];
            let j = rng.random_range(0..n - 1);
            return Proposal::Tail(if j >= last { j + 1 } else { j });
        }
        let p = rng.random_range(1..n);
        let mut q = rng.random_range(1..n - 1);
        if q >= p {
            q += 1;
        }
        match kind {
            0 => Proposal::Swap(p.min(q), p.max(q)),
            1 => Proposal::Reverse(p.min(q), p.max(q)),
            _ => Proposal::Relocate(p, q),
        }
    }

    // Moves `lo..=hi` are the only ones a proposal can change.
    fn span(&self, p: Proposal) -> (usize, usize) {
        match p {
            Proposal::Swap(a, b) | Proposal::Reverse(a, b) => (a - 1, b),
            Proposal::Relocate(a, b) => (a.min(b) - 1, a.max(b)),
            Proposal::Tail(_) => (self.n - 1, self.n - 1),
        }
    }

    fn permute(&mut self, p: Proposal, undo: bool) {
        match p {
            Proposal::Swap(a, b) => self.order.swap(a, b),
            Proposal::Reverse(a, b) => self.order[a..=b].reverse(),
            Proposal::Relocate(a, b) => {
                let (from, to) = if undo { (b, a) } else { (a, b) };
                let c = self.order.remove(from);
                self.order.insert(to, c);
            }
            Proposal::Tail(j) => self.tail = j,
        }
    }

    /// Applies `p` and returns the energy change.
    fn apply(&mut self, p: Proposal) -> T {
        let (lo, hi) = self.span(p);
        self.old_moves.clear();
        for t in lo..=hi {
            self.old_moves.push(self.move_at(t));
        }
        self.permute(p, false);
        self.flips.clear();
        for t in lo..=hi {
            let old = self.old_moves[t - lo];
            let new = self.move_at(t);
            if old != new {
                self.flips.push(var(old.0, old.1, t, self.n));
                self.flips.push(var(new.0, new.1, t, self.n));
            }
        }
        let mut delta = T::zero();
        for &v in &self.flips {
            delta += self.model.flip_delta(&self.cache, &self.bits, v);
            self.model.apply_flip(&mut self.cache, &self.bits, v);
            self.bits[v] = !self.bits[v];
        }
        self.energy += delta;
        delta
    }

    fn revert(&mut self, p: Proposal, delta: T) {
        for &v in self.flips.iter().rev() {
            self.model.apply_flip(&mut self.cache, &self.bits, v);
            self.bits[v] = !self.bits[v];
        }
        match p {
            Proposal::Tail(_) => self.tail = self.old_moves[0].1,
            _ => self.permute(p, true),
        }
        self.energy -= delta;
    }
}

fn tour_bits(order: &[usize], tail: usize, n: usize) -> Vec<bool> {
    let mut bits = vec![false; n * n * n];
    for t in 0..n {
        let to = if t + 1 < n { order[t + 1] } else { tail };
        bits[var(order[t], to, t, n)] = true;
    }
    bits
}

/// Mean `|energy change|` of random proposals from a random tour, or zero when
/// no proposal exists.
pub fn typical_move_delta<T: Scalar, M: Annealable<T>>(
    model: &M,
    n: usize,
    start: usize,
    close_tour: bool,
    seed: u64,
) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut chain = Chain::new(model, n, start, close_tour, &mut rng);
    if !chain.can_propose() {
        return T::zero();
    }
    let mut total = T::zero();
    for _ in 0..PROBE_MOVES {
        let p = chain.draw(&mut rng);
        let d = chain.apply(p);
        total += d.abs();
        chain.revert(p, d);
    }
    total / from_usize(PROBE_MOVES)
}

/// Anneals the `N^3`-variable routing objective `model` over valid tours that
/// start at `start` (and return to it when `close_tour`).
///
/// A sweep is `N` proposals. With [`BetaFinal::Auto`](crate::BetaFinal) the
/// final inverse temperature is `5 / (typical_move_delta / 100)`, so a move
/// worth one percent of a typical change is accepted with probability `e^-5`
/// at the end of the schedule. Every returned assignment decodes.
pub fn anneal_tours<T: Scalar, M: Annealable<T>>(
    model: &M,
    n: usize,
    start: usize,
    close_tour: bool,
    sched: &SaSchedule<T>,
) -> SolveResult<T> {
    assert_eq!(model.n_vars(), n * n * n, "model is not an {n}-location routing objective");
    assert!(start < n, "start out of range");
    let scale = typical_move_delta(model, n, start, close_tour, sched.seed) * lit(0.01);
    let betas = sched.betas(sched.resolve_beta_final(scale));
    let chains: Vec<(Vec<bool>, T)> = (0..sched.restarts.max(1))
        .into_par_iter()
        .map(|r| run_tour_chain(model, n, start, close_tour, &betas, sched.seed, r as u64))
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

fn run_tour_chain<T: Scalar, M: Annealable<T>>(
    model: &M,
    n: usize,
    start: usize,
    close_tour: bool,
    betas: &[T],
    seed: u64,
    stream: u64,
) -> (Vec<bool>, T) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut chain = Chain::new(model, n, start, close_tour, &mut rng);
    let mut best_order = chain.order.clone();
    let mut best_tail = chain.tail;
    let mut best_energy = chain.energy;
    let cutoff = lit::<T>(40.0);

    if chain.can_propose() {
        for (sweep, &beta) in betas.iter().enumerate() {
            if sweep > 0 && sweep % RESYNC_SWEEPS == 0 {
                chain.resync();
            }
            for _ in 0..n {
                let p = chain.draw(&mut rng);
                let delta = chain.apply(p);
                let accept = delta <= T::zero() || {
                    let x = beta * delta;
                    x < cutoff && lit::<T>(rng.random::<f64>()) < (-x).exp()
                };
                if !accept {
                    chain.revert(p, delta);
                } else if chain.energy < best_energy {
                    best_energy = chain.energy;
                    best_order.clone_from(&chain.order);
                    best_tail = chain.tail;
                }
            }
        }
    }

    if cfg!(debug_assertions) {
        let fresh = model.energy(&chain.bits);
        let tol = lit::<T>(1e-6) * (T::one() + model.abs_coefficient_sum());
        debug_assert!(
            (fresh - chain.energy).abs() <= tol,
            "incremental energy drifted: {} vs {fresh}",
            chain.energy
        );
    }
    let bits = tour_bits(&best_order, best_tail, n);
    let exact = model.energy(&bits);
    (bits, exact)
}
