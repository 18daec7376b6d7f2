//! Minimization of a sampled surrogate over station configurations.

use super::features::SurrogateModel;
use crate::anneal::{solve_exhaustive, solve_sa, SaSchedule};
use crate::evaluator::StationConfig;
use crate::scalar::Scalar;

/// Largest `M` minimized by enumeration under [`Acquisition::Exhaustive`].
pub const EXHAUSTIVE_ACQUISITION_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Acquisition {
    /// Enumerate all `2^M` configurations (annealing above
    /// [`EXHAUSTIVE_ACQUISITION_MAX`]).
    #[default]
    Exhaustive,
    Sa,
}

/// Configuration minimizing `model` plus `station_cost` per installed
/// station. Enumeration breaks ties toward the lowest integer code.
pub fn acquire<T: Scalar>(
    model: &SurrogateModel<T>,
    method: Acquisition,
    station_cost: T,
    sched: &SaSchedule<T>,
) -> StationConfig {
    let q = model.to_qubo(station_cost);
    let bits = match method {
        Acquisition::Exhaustive if model.m() <= EXHAUSTIVE_ACQUISITION_MAX => {
            solve_exhaustive(&q).expect("below the enumeration cap").best_bits
        }
        _ => solve_sa(&q, sched).best_bits,
    };
    StationConfig::new(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bocs::features::n_features;

    fn model(m: usize, f: impl Fn(usize) -> f64) -> SurrogateModel<f64> {
        SurrogateModel::new(m, (0..n_features(m)).map(f).collect()).unwrap()
    }

    #[test]
    fn positive_linear_terms_install_nothing() {
        let m = model(6, |k| if (1..7).contains(&k) { 1.0 + k as f64 } else { 0.0 });
        for method in [Acquisition::Exhaustive, Acquisition::Sa] {
            let s = acquire(&m, method, 0.0, &SaSchedule::default());
            assert_eq!(s, StationConfig::empty(6));
        }
    }

    #[test]
    fn intercept_only_ties_to_all_zeros() {
        let m = model(5, |k| if k == 0 { 3.0 } else { 0.0 });
        assert_eq!(acquire(&m, Acquisition::Exhaustive, 0.0, &SaSchedule::default()), StationConfig::empty(5));
    }

    #[test]
    fn station_cost_discourages_stations() {
        let m = model(4, |k| if (1..5).contains(&k) { -1.0 } else { 0.0 });
        let sched = SaSchedule::default();
        assert_eq!(acquire(&m, Acquisition::Exhaustive, 0.0, &sched), StationConfig::full(4));
        assert_eq!(acquire(&m, Acquisition::Exhaustive, 1.5, &sched), StationConfig::empty(4));
    }
}
