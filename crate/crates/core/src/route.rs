//! Routing objective over the move variables `x[i][j][t]` ("leave `i` for `j`
//! at step `t`") for a fixed station configuration.
//!
//! The objective is the travel cost plus squared-penalty groups for
//! visit-once, chain continuity and the fixed start, plus a soft battery term
//! `sum_t (Q_t - Q_standard)^2` that pulls the aggregate battery level
//! towards its reference. Two representations are produced:
//!
//! * [`PenaltyModel`]s (`*_penalty_model`) keep the squares factored and are
//!   what the annealer runs on.
//! * [`QuboModel`]s (`build_*_qubo`) hold explicit coefficients. The battery
//!   coefficients come from a closed-form accumulation that is independent of
//!   the factored route, so the two cross-check each other.

use crate::error::{Error, Result};
use crate::evaluator::StationConfig;
use crate::instance::ProblemInstance;
use crate::penalty::{PenaltyModel, PenaltyModelBuilder};
use crate::qubo::QuboModel;
use crate::scalar::{from_usize, lit, Scalar};

/// Variable index of `x[i][j][t]` (0-based step) for `n` locations: `i*n^2 + j*n + t`.
pub fn flatten(i: usize, j: usize, t: usize, n: usize) -> Result<usize> {
    if i >= n || j >= n || t >= n {
        return Err(Error::IndexOutOfRange { i, j, t, n });
    }
    Ok(var(i, j, t, n))
}

pub fn unflatten(v: usize, n: usize) -> Result<(usize, usize, usize)> {
    if v >= n * n * n {
        return Err(Error::IndexOutOfRange {
            i: v / (n * n).max(1),
            j: 0,
            t: 0,
            n,
        });
    }
    Ok((v / (n * n), (v / n) % n, v % n))
}

#[inline]
pub(crate) fn var(i: usize, j: usize, t: usize, n: usize) -> usize {
    (i * n + j) * n + t
}

/// Where a station's charge is applied along a move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChargePoint {
    /// Charge when leaving a station, before the move's consumption.
    #[default]
    Departure,
    /// Charge on arriving at a station, after the move's consumption.
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteOptions {
    /// Require the final move to return to the start.
    pub close_tour: bool,
    pub charge_point: ChargePoint,
}

impl Default for RouteOptions {
    fn default() -> Self {
        Self {
            close_tour: true,
            charge_point: ChargePoint::Departure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights<T> {
    /// Visit-once.
    pub lambda1: T,
    /// Continuity.
    pub lambda2: T,
    /// Fixed start (and closure).
    pub lambda3: T,
    /// Soft battery term.
    pub lambda4: T,
}

impl<T: Scalar> PenaltyWeights<T> {
    /// `lambda1..3 = 2 N max|C|` (with `max|C|` floored at 1) and
    /// `lambda4 = 0.5 / (N q_max^2)`.
    pub fn defaults_for(inst: &ProblemInstance<T>) -> Self {
        let n: T = from_usize(inst.n());
        let two = lit::<T>(2.0);
        let hard = two * n * inst.max_abs_cost().max(T::one());
        let q_max = inst.battery().q_max.max(T::one());
        Self {
            lambda1: hard,
            lambda2: hard,
            lambda3: hard,
            lambda4: lit::<T>(0.5) / (n * q_max * q_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let hard = [self.lambda1, self.lambda2, self.lambda3];
        if hard.iter().any(|l| !(*l > T::zero()) || !l.is_finite()) {
            return Err(Error::InvalidParameter("lambda1..3 must be positive".into()));
        }
        if !(self.lambda4 >= T::zero()) || !self.lambda4.is_finite() {
            return Err(Error::InvalidParameter("lambda4 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-move net battery drain `d_ij = C_ij - q_charge * sigma`, where `sigma`
/// is the station flag of the departure (or arrival) location.
pub fn drain_matrix<T: Scalar>(
    inst: &ProblemInstance<T>,
    stations: &StationConfig,
    charge_point: ChargePoint,
) -> Result<Vec<T>> {
    let mask = stations.location_mask(inst)?;
    let n = inst.n();
    let q = inst.battery().q_charge;
    let mut d = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let host = match charge_point {
                ChargePoint::Departure => mask[i],
                ChargePoint::Arrival => mask[j],
            };
            d.push(if host { inst.cost(i, j) - q } else { inst.cost(i, j) });
        }
    }
    Ok(d)
}

/// Travel cost plus the visit-once, continuity and start penalties, in factored form.
pub fn tsp_penalty_model<T: Scalar>(
    inst: &ProblemInstance<T>,
    w: &PenaltyWeights<T>,
    opts: &RouteOptions,
) -> PenaltyModel<T> {
    let n = inst.n();
    let k = inst.start();
    let mut b = PenaltyModelBuilder::new(n * n * n);
    let self_move = lit::<T>(10.0) * w.lambda1;

    for i in 0..n {
        for j in 0..n {
            for t in 0..n {
                let mut c = inst.cost(i, j);
                if i == j {
                    c += self_move;
                }
                b.add_linear(var(i, j, t, n), c);
            }
        }
    }

    // Each location departs exactly once.
    for i in 0..n {
        let terms = (0..n).flat_map(|j| (0..n).map(move |t| (var(i, j, t, n), T::one())));
        b.add_square(w.lambda1, -T::one(), terms);
    }

    // Arrivals at j on step t equal departures from j on step t+1.
    for t in 0..n - 1 {
        for j in 0..n {
            let arrive = (0..n).map(|i| (var(i, j, t, n), T::one()));
            let depart = (0..n).map(|kk| (var(j, kk, t + 1, n), -T::one()));
            b.add_square(w.lambda2, T::zero(), arrive.chain(depart));
        }
    }

    // Only the start location may depart on the first step.
    for i in (0..n).filter(|&i| i != k) {
        b.add_square(w.lambda3, T::zero(), (0..n).map(|j| (var(i, j, 0, n), T::one())));
    }

    if opts.close_tour {
        for i in 0..n {
            for j in (0..n).filter(|&j| j != k) {
                b.add_linear(var(i, j, n - 1, n), w.lambda3);
            }
        }
    }

    b.build()
}

/// Unweighted soft battery term `sum_{t=1}^{N} (Q_t - Q_standard)^2` in factored form.
pub fn battery_penalty_model<T: Scalar>(
    inst: &ProblemInstance<T>,
    stations: &StationConfig,
    opts: &RouteOptions,
) -> Result<PenaltyModel<T>> {
    let n = inst.n();
    let d = drain_matrix(inst, stations, opts.charge_point)?;
    let battery = inst.battery();
    let e0 = battery.q_init - battery.q_standard;
    let mut b = PenaltyModelBuilder::new(n * n * n);
    // Level at 1-based step t has absorbed moves 0..t-2 (0-based).
    for t in 1..=n {
        let terms = (0..t.saturating_sub(1)).flat_map(|step| {
            let d = &d;
            (0..n).flat_map(move |i| (0..n).map(move |j| (var(i, j, step, n), -d[i * n + j])))
        });
        b.add_square(T::one(), e0, terms);
    }
    Ok(b.build())
}

/// `H_TSP + lambda4 * H_Battery` in factored form.
pub fn total_penalty_model<T: Scalar>(
    inst: &ProblemInstance<T>,
    stations: &StationConfig,
    w: &PenaltyWeights<T>,
    opts: &RouteOptions,
) -> Result<PenaltyModel<T>> {
    let tsp = tsp_penalty_model(inst, w, opts);
    let battery = battery_penalty_model(inst, stations, opts)?;
    let mut b = PenaltyModelBuilder::new(tsp.n_vars());
    b.append_scaled(&tsp, T::one());
    b.append_scaled(&battery, w.lambda4);
    Ok(b.build())
}

pub fn build_tsp_qubo<T: Scalar>(
    inst: &ProblemInstance<T>,
    w: &PenaltyWeights<T>,
    opts: &RouteOptions,
) -> QuboModel<T> {
    tsp_penalty_model(inst, w, opts).to_qubo()
}

/// Explicit coefficients of `sum_{t=1}^{N} (Q_t - Q_standard)^2`.
///
/// With `e0 = Q_init - Q_standard` and 0-based steps, a move variable on step
/// `a` enters the `N - a - 1` levels that follow it, so
///
/// * constant: `N e0^2`
/// * linear `(i,j,a)`: `(N - a - 1) (d_ij^2 - 2 e0 d_ij)`
/// * pair `(i,j,a)`,`(i',j',b)`: `2 (N - max(a,b) - 1) d_ij d_i'j'`
pub fn build_battery_qubo<T: Scalar>(
    inst: &ProblemInstance<T>,
    stations: &StationConfig,
    opts: &RouteOptions,
) -> Result<QuboModel<T>> {
    let n = inst.n();
    let d = drain_matrix(inst, stations, opts.charge_point)?;
    let battery = inst.battery();
    let e0 = battery.q_init - battery.q_standard;
    let two = lit::<T>(2.0);
    let mut q = QuboModel::new(n * n * n);
    q.add_constant(from_usize::<T>(n) * e0 * e0);

    // Only steps 0..n-2 influence any level.
    let live: Vec<(usize, T)> = (0..n.saturating_sub(1))
        .flat_map(|a| (0..n * n).map(move |ij| (a, ij)))
        .filter(|&(_, ij)| d[ij] != T::zero())
        .map(|(a, ij)| (ij * n + a, d[ij]))
        .collect();

    for (idx, &(u, du)) in live.iter().enumerate() {
        let a = u % n;
        let count: T = from_usize(n - a - 1);
        q.add_linear(u, count * (du * du - two * e0 * du));
        for &(v, dv) in &live[idx + 1..] {
            let b = v % n;
            let shared: T = from_usize(n - a.max(b) - 1);
            q.add_quadratic(u, v, two * shared * du * dv);
        }
    }
    Ok(q)
}

pub fn build_total_qubo<T: Scalar>(
    inst: &ProblemInstance<T>,
    stations: &StationConfig,
    w: &PenaltyWeights<T>,
    opts: &RouteOptions,
) -> Result<QuboModel<T>> {
    let mut q = build_tsp_qubo(inst, w, opts);
    let battery = build_battery_qubo(inst, stations, opts)?;
    q.add_scaled(&battery, w.lambda4);
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{BatteryParams, Location};

    fn instance(n: usize, costs: &[f64], candidates: Vec<usize>) -> ProblemInstance<f64> {
        let locations = (0..n)
            .map(|id| Location {
                id,
                x: id as f64,
                y: 0.0,
                elevation: 0.0,
            })
            .collect();
        ProblemInstance::new(locations, costs.to_vec(), candidates, 0, BatteryParams::reference())
            .unwrap()
    }

    #[test]
    fn flatten_layout() {
        assert_eq!(flatten(0, 0, 0, 20).unwrap(), 0);
        assert_eq!(flatten(1, 2, 3, 20).unwrap(), 443);
        assert!(flatten(4, 0, 0, 4).is_err());
        for v in 0..64 {
            let (i, j, t) = unflatten(v, 4).unwrap();
            assert_eq!(flatten(i, j, t, 4).unwrap(), v);
        }
        assert!(unflatten(64, 4).is_err());
    }

    #[test]
    fn all_zero_assignment_pays_visit_once_per_location() {
        let inst = instance(3, &[0.0, 1.0, 2.0, 1.5, 0.0, -0.5, 0.7, 0.2, 0.0], vec![1]);
        let w = PenaltyWeights::defaults_for(&inst);
        let q = build_tsp_qubo(&inst, &w, &RouteOptions::default());
        let zero = vec![false; 27];
        assert!((q.energy(&zero).unwrap() - 3.0 * w.lambda1).abs() < 1e-9);
    }

    #[test]
    fn zero_drain_battery_model_is_constant() {
        let inst = instance(3, &[0.0; 9], vec![]);
        let s = StationConfig::new(vec![]);
        let q = build_battery_qubo(&inst, &s, &RouteOptions::default()).unwrap();
        assert!(q.linear().is_empty() && q.quadratic().is_empty());
        let e0 = 3.0 - 3.0;
        assert_eq!(q.constant(), 3.0 * e0 * e0);

        let shifted = inst
            .with_battery(BatteryParams {
                q_init: 5.0,
                ..BatteryParams::reference()
            })
            .unwrap();
        let q = build_battery_qubo(&shifted, &s, &RouteOptions::default()).unwrap();
        assert_eq!(q.constant(), 3.0 * 4.0);
    }

    // N=2 with a single nonzero cost C_01 = c and no stations. Only step 0
    // reaches a level (Q_2), so expanding (e0 - c x_010)^2 by hand gives
    // constant 2 e0^2, linear c^2 - 2 e0 c on x_010 and nothing else.
    #[test]
    fn two_location_battery_expansion_by_hand() {
        let c = 1.25;
        let inst = instance(2, &[0.0, c, 0.0, 0.0], vec![])
            .with_battery(BatteryParams {
                q_init: 4.0,
                ..BatteryParams::reference()
            })
            .unwrap();
        let e0 = 1.0;
        let q = build_battery_qubo(&inst, &StationConfig::new(vec![]), &RouteOptions::default())
            .unwrap();
        assert_eq!(q.constant(), 2.0 * e0 * e0);
        assert_eq!(q.linear().len(), 1);
        assert_eq!(q.linear()[&var(0, 1, 0, 2)], c * c - 2.0 * e0 * c);
        assert!(q.quadratic().is_empty());
    }

    #[test]
    fn lambda4_zero_gives_tsp_model() {
        let inst = instance(3, &[0.0, 1.0, 2.0, 1.5, 0.0, -0.5, 0.7, 0.2, 0.0], vec![0, 2]);
        let mut w = PenaltyWeights::defaults_for(&inst);
        w.lambda4 = 0.0;
        let s = StationConfig::new(vec![true, false]);
        let opts = RouteOptions::default();
        assert_eq!(
            build_total_qubo(&inst, &s, &w, &opts).unwrap(),
            build_tsp_qubo(&inst, &w, &opts)
        );
    }

    #[test]
    fn default_weights() {
        let inst = instance(3, &[0.0, 1.0, -2.0, 1.5, 0.0, -0.5, 0.7, 0.2, 0.0], vec![]);
        let w = PenaltyWeights::defaults_for(&inst);
        assert_eq!(w.lambda1, 12.0);
        assert_eq!(w.lambda4, 0.5 / (3.0 * 36.0));
        w.validate().unwrap();
    }
}
