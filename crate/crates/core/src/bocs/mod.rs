//! Bayesian optimization of station configurations with a quadratic surrogate.
//!
//! Each iteration fits `y ~ alpha . featurize(s)` to every `(s, y)` pair seen
//! so far, draws one posterior sample of `alpha` (Thompson sampling), picks
//! the configuration minimizing that sample and evaluates it with the router.

pub mod acquire;
pub mod features;
pub mod linalg;
pub mod prior;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use acquire::{acquire, Acquisition, EXHAUSTIVE_ACQUISITION_MAX};
pub use features::{featurize, n_features, pair_index, SurrogateModel};
pub use prior::{fit_posterior_sample, posterior_mean, Prior};

use crate::anneal::SaSchedule;
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_config, EvalParams, Evaluation, StationConfig};
use crate::instance::ProblemInstance;
use crate::route::PenaltyWeights;
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub s: StationConfig,
    pub y: T,
}

/// Append-only `(s, y)` pairs sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    m: usize,
    records: Vec<Sample<T>>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(m: usize) -> Self {
        Self { m, records: Vec::new() }
    }

    pub fn push(&mut self, s: StationConfig, y: T) -> Result<()> {
        if s.len() != self.m {
            return Err(Error::LengthMismatch {
                expected: self.m,
                found: s.len(),
            });
        }
        self.records.push(Sample { s, y });
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample<T>> {
        self.records.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BocsParams<T> {
    pub n_search: usize,
    pub n_init: usize,
    pub prior: Prior<T>,
    pub acquisition: Acquisition,
    /// Schedule for annealing-based acquisition; its seed is replaced per iteration.
    pub acquisition_schedule: SaSchedule<T>,
    /// Added per installed station when minimizing the surrogate.
    pub station_cost: T,
    /// Penalty, routing options and route solver used for every evaluation.
    pub eval: EvalParams<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for BocsParams<T> {
    fn default() -> Self {
        Self {
            n_search: 300,
            n_init: 10,
            prior: Prior::default(),
            acquisition: Acquisition::default(),
            acquisition_schedule: SaSchedule {
                sweeps: 1000,
                beta_initial: lit(0.1),
                ..SaSchedule::default()
            },
            station_cost: T::zero(),
            eval: EvalParams::default(),
            seed: 0,
        }
    }
}

impl<T: Scalar> BocsParams<T> {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_search == 0 {
            return Err(Error::InvalidParameter("n_search must be >= 1".into()));
        }
        if self.n_init == 0 {
            return Err(Error::InvalidParameter("n_init must be >= 1".into()));
        }
        if !(self.eval.y_penalty >= T::zero()) {
            return Err(Error::InvalidParameter("y_penalty must be non-negative".into()));
        }
        if !self.station_cost.is_finite() {
            return Err(Error::InvalidParameter("station_cost must be finite".into()));
        }
        self.prior.validate()?;
        self.acquisition_schedule.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Search,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRecord<T> {
    /// 1-based position in the run, initial samples first.
    pub iteration: usize,
    pub phase: Phase,
    pub s: StationConfig,
    pub a: T,
    pub b: T,
    pub y: T,
    pub best_so_far: T,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHistory<T> {
    pub records: Vec<SearchRecord<T>>,
    /// Full evaluation (tour and battery trace) of the first record attaining
    /// the final best-so-far value.
    pub best: Evaluation<T>,
    pub best_config: StationConfig,
}

impl<T: Scalar> SearchHistory<T> {
    pub fn final_best(&self) -> T {
        self.records.last().map(|r| r.best_so_far).unwrap_or_else(T::infinity)
    }

    pub fn best_record(&self) -> Option<&SearchRecord<T>> {
        self.records
            .iter()
            .fold(None, |acc: Option<&SearchRecord<T>>, r| match acc {
                Some(b) if b.y <= r.y => Some(b),
                _ => Some(r),
            })
    }

    /// Lowest `y` among feasible records.
    pub fn best_feasible_y(&self) -> Option<T> {
        self.records
            .iter()
            .filter(|r| r.feasible)
            .map(|r| r.y)
            .fold(None, |acc, y| Some(acc.map_or(y, |a: T| a.min(y))))
    }
}

/// How search iterations propose configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Bocs,
    /// Uniform random configurations; the baseline for the surrogate.
    Random,
}

const STREAM_INIT: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_FIT: u64 = 3;
const STREAM_ACQUIRE: u64 = 4;
const STREAM_RANDOM: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for `(stream, index)` under a run seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

fn random_config(rng: &mut ChaCha8Rng, m: usize) -> StationConfig {
    StationConfig::new((0..m).map(|_| rng.random::<bool>()).collect())
}

/// Runs `n_init` random evaluations followed by `n_search` proposals.
///
/// For a fixed seed both strategies share the initial configurations and the
/// routing seeds, so their histories are directly comparable.
pub fn run_search<T: Scalar>(
    inst: &ProblemInstance<T>,
    params: &BocsParams<T>,
    weights: &PenaltyWeights<T>,
    sched: &SaSchedule<T>,
    strategy: Strategy,
) -> Result<SearchHistory<T>> {
    params.validate()?;
    weights.validate()?;
    sched.validate()?;
    let m = inst.m();
    let seed = params.seed;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT, 0));
    let mut random_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_RANDOM, 0));

    let mut data = SampleSet::new(m);
    let mut records: Vec<SearchRecord<T>> = Vec::with_capacity(params.n_init + params.n_search);
    let mut best: Option<(Evaluation<T>, StationConfig)> = None;

    for k in 0..params.n_init + params.n_search {
        let phase = if k < params.n_init { Phase::Init } else { Phase::Search };
        let s = match (phase, strategy) {
            (Phase::Init, _) => random_config(&mut init_rng, m),
            (Phase::Search, Strategy::Random) => random_config(&mut random_rng, m),
            (Phase::Search, Strategy::Bocs) => {
                let model = fit_posterior_sample(&data, &params.prior, derive_seed(seed, STREAM_FIT, k as u64))?;
                let acq = params
                    .acquisition_schedule
                    .with_seed(derive_seed(seed, STREAM_ACQUIRE, k as u64));
                acquire(&model, params.acquisition, params.station_cost, &acq)
            }
        };
        let route_sched = sched.with_seed(derive_seed(seed, STREAM_EVAL, k as u64));
        let eval = evaluate_config(inst, &s, weights, &route_sched, &params.eval)?;
        data.push(s.clone(), eval.y)?;

        let improved = best.as_ref().is_none_or(|(b, _)| eval.y < b.y);
        let best_so_far = if improved { eval.y } else { records.last().map_or(eval.y, |r| r.best_so_far) };
        records.push(SearchRecord {
            iteration: k + 1,
            phase,
            s: s.clone(),
            a: eval.a,
            b: eval.b,
            y: eval.y,
            best_so_far,
            feasible: eval.feasible,
        });
        if improved {
            best = Some((eval, s));
        }
    }

    let (best, best_config) = best.expect("at least one evaluation");
    Ok(SearchHistory {
        records,
        best,
        best_config,
    })
}

pub fn run_bocs<T: Scalar>(
    inst: &ProblemInstance<T>,
    params: &BocsParams<T>,
    weights: &PenaltyWeights<T>,
    sched: &SaSchedule<T>,
) -> Result<SearchHistory<T>> {
    run_search(inst, params, weights, sched, Strategy::Bocs)
}

pub fn run_random_search<T: Scalar>(
    inst: &ProblemInstance<T>,
    params: &BocsParams<T>,
    weights: &PenaltyWeights<T>,
    sched: &SaSchedule<T>,
) -> Result<SearchHistory<T>> {
    run_search(inst, params, weights, sched, Strategy::Random)
}
