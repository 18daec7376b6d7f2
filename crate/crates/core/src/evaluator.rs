//! Tour decoding, split-event battery simulation and the evaluation value
//! `y = a + b` of a station configuration.
//!
//! `a` is the travel cost of the tour found by annealing the routing objective
//! and `b` adds `y_penalty` for every checked step on which the battery leaves
//! `[0, q_max]`. Charging and consumption are checked as separate events, so a
//! charge that overshoots `q_max` is caught even when the following move
//! brings the level back in range.

use std::fmt;

use crate::anneal::{anneal, SaSchedule};
use crate::tour_anneal::anneal_tours;
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::route::{total_penalty_model, var, ChargePoint, PenaltyWeights, RouteOptions};
use crate::scalar::{from_usize, lit, Scalar};

/// One bit per candidate location, in `ProblemInstance::candidates` order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StationConfig {
    bits: Vec<bool>,
}

impl StationConfig {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn empty(m: usize) -> Self {
        Self::new(vec![false; m])
    }

    pub fn full(m: usize) -> Self {
        Self::new(vec![true; m])
    }

    /// Bit `i` of `code` is candidate `i`.
    pub fn from_code(code: u64, m: usize) -> Self {
        Self::new((0..m).map(|i| code >> i & 1 == 1).collect())
    }

    pub fn code(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Station flag per location.
    pub fn location_mask<T: Scalar>(&self, inst: &ProblemInstance<T>) -> Result<Vec<bool>> {
        if self.bits.len() != inst.m() {
            return Err(Error::LengthMismatch {
                expected: inst.m(),
                found: self.bits.len(),
            });
        }
        let mut mask = vec![false; inst.n()];
        for (&loc, &on) in inst.candidates().iter().zip(&self.bits) {
            mask[loc] = on;
        }
        Ok(mask)
    }

    pub fn station_locations<T: Scalar>(&self, inst: &ProblemInstance<T>) -> Vec<usize> {
        inst.candidates()
            .iter()
            .zip(&self.bits)
            .filter(|(_, &b)| b)
            .map(|(&loc, _)| loc)
            .collect()
    }

    pub fn parse_bitstring(text: &str) -> Result<Self> {
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!(
                    "station bitstring may only contain 0/1, found {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for StationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    /// Visiting order, starting at the start location.
    pub order: Vec<usize>,
    /// Whether the last move returns to the start.
    pub closed: bool,
}

impl Tour {
    pub fn moves(&self) -> Vec<(usize, usize)> {
        let mut moves: Vec<(usize, usize)> = self.order.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed {
            if let (Some(&last), Some(&first)) = (self.order.last(), self.order.first()) {
                moves.push((last, first));
            }
        }
        moves
    }
}

impl fmt::Display for Tour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.order.iter().map(usize::to_string).collect();
        write!(f, "{}", ids.join(" -> "))?;
        if self.closed {
            if let Some(first) = self.order.first() {
                write!(f, " -> {first}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintFamily {
    /// Not exactly one move per step, or a location departing other than once.
    Multiplicity,
    Continuity,
    Start,
    Closure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    Length { expected: usize, found: usize },
    Violated(Vec<ConstraintFamily>),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Length { expected, found } => {
                write!(f, "assignment has {found} bits, expected {expected}")
            }
            DecodeError::Violated(families) => write!(f, "violated constraints: {families:?}"),
        }
    }
}

impl std::error::Error for DecodeError {}

pub fn decode_tour<T: Scalar>(
    bits: &[bool],
    inst: &ProblemInstance<T>,
    close_tour: bool,
) -> std::result::Result<Tour, DecodeError> {
    let n = inst.n();
    if bits.len() != n * n * n {
        return Err(DecodeError::Length {
            expected: n * n * n,
            found: bits.len(),
        });
    }
    let k = inst.start();
    let mut per_step: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut departures = vec![0usize; n];
    for (v, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        let (i, j, t) = (v / (n * n), (v / n) % n, v % n);
        per_step[t].push((i, j));
        departures[i] += 1;
    }

    let mut failed = Vec::new();
    if per_step.iter().any(|m| m.len() != 1) || departures.iter().any(|&c| c != 1) {
        failed.push(ConstraintFamily::Multiplicity);
    }
    for t in 0..n - 1 {
        if let ([(_, j)], [(i_next, _)]) = (&per_step[t][..], &per_step[t + 1][..]) {
            if j != i_next {
                failed.push(ConstraintFamily::Continuity);
                break;
            }
        } else if per_step[t].len() != per_step[t + 1].len() {
            failed.push(ConstraintFamily::Continuity);
            break;
        }
    }
    if per_step[0].iter().any(|&(i, _)| i != k) {
        failed.push(ConstraintFamily::Start);
    }
    if close_tour && per_step[n - 1].iter().any(|&(_, j)| j != k) {
        failed.push(ConstraintFamily::Closure);
    }

    if !failed.is_empty() {
        failed.sort();
        failed.dedup();
        return Err(DecodeError::Violated(failed));
    }
    Ok(Tour {
        order: per_step.iter().map(|m| m[0].0).collect(),
        closed: close_tour,
    })
}

/// Move-variable assignment of a tour. An open tour's final step is encoded
/// as a return to the start, which the open objective accepts.
pub fn encode_tour(tour: &Tour, n: usize) -> Vec<bool> {
    let mut bits = vec![false; n * n * n];
    let closed = Tour {
        order: tour.order.clone(),
        closed: true,
    };
    for (t, (i, j)) in closed.moves().into_iter().enumerate() {
        bits[var(i, j, t, n)] = true;
    }
    bits
}

pub fn travel_cost<T: Scalar>(tour: &Tour, inst: &ProblemInstance<T>) -> T {
    tour.moves().into_iter().map(|(i, j)| inst.cost(i, j)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryStep<T> {
    pub from: usize,
    pub to: usize,
    /// Level when the step begins.
    pub level_start: T,
    pub level_before_charge: T,
    pub level_after_charge: T,
    pub level_after_move: T,
    pub charge_overflow: bool,
    pub move_underflow: bool,
    pub move_overflow: bool,
}

impl<T: Scalar> BatteryStep<T> {
    pub fn violated(&self) -> bool {
        self.charge_overflow || self.move_underflow || self.move_overflow
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryTrace<T> {
    pub steps: Vec<BatteryStep<T>>,
    pub charge_point: ChargePoint,
    /// Number of locations; steps past `n - 1` land beyond the last checked level.
    pub n_locations: usize,
}

impl<T: Scalar> BatteryTrace<T> {
    /// Level carried into the next step.
    pub fn level_end(&self, step: usize) -> T {
        let s = &self.steps[step];
        match self.charge_point {
            ChargePoint::Departure => s.level_after_move,
            ChargePoint::Arrival => s.level_after_charge,
        }
    }
}

/// Replays the tour starting at `q_init`, checking charge and consumption as
/// separate events. Levels are never clamped.
pub fn simulate_battery<T: Scalar>(
    tour: &Tour,
    stations: &StationConfig,
    inst: &ProblemInstance<T>,
    charge_point: ChargePoint,
) -> Result<BatteryTrace<T>> {
    let mask = stations.location_mask(inst)?;
    let battery = inst.battery();
    let (q_max, q_charge) = (battery.q_max, battery.q_charge);
    let mut level = battery.q_init;
    let mut steps = Vec::with_capacity(tour.order.len());

    for (from, to) in tour.moves() {
        let cost = inst.cost(from, to);
        let step = match charge_point {
            ChargePoint::Departure => {
                let after_charge = if mask[from] { level + q_charge } else { level };
                let after_move = after_charge - cost;
                BatteryStep {
                    from,
                    to,
                    level_start: level,
                    level_before_charge: level,
                    level_after_charge: after_charge,
                    level_after_move: after_move,
                    charge_overflow: after_charge > q_max,
                    move_underflow: after_move < T::zero(),
                    move_overflow: after_move > q_max,
                }
            }
            ChargePoint::Arrival => {
                let after_move = level - cost;
                let after_charge = if mask[to] { after_move + q_charge } else { after_move };
                BatteryStep {
                    from,
                    to,
                    level_start: level,
                    level_before_charge: after_move,
                    level_after_charge: after_charge,
                    level_after_move: after_move,
                    charge_overflow: after_charge > q_max,
                    move_underflow: after_move < T::zero(),
                    move_overflow: after_move > q_max,
                }
            }
        };
        level = match charge_point {
            ChargePoint::Departure => step.level_after_move,
            ChargePoint::Arrival => step.level_after_charge,
        };
        steps.push(step);
    }
    Ok(BatteryTrace {
        steps,
        charge_point,
        n_locations: inst.n(),
    })
}

/// `y_penalty` per checked step with any violation. Without `check_final` the
/// checked steps are those producing levels 2..N; the closing move of a
/// closed tour is then left unchecked.
pub fn constraint_penalty<T: Scalar>(trace: &BatteryTrace<T>, y_penalty: T, check_final: bool) -> T {
    let checked = if check_final {
        trace.steps.len()
    } else {
        trace.steps.len().min(trace.n_locations.saturating_sub(1))
    };
    let violating = trace.steps[..checked].iter().filter(|s| s.violated()).count();
    y_penalty * from_usize(violating)
}

/// How `evaluate_config` minimizes the routing objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RouteSolver {
    /// Annealing restricted to valid tour assignments ([`anneal_tours`]).
    #[default]
    Tour,
    /// Single-bit-flip annealing over all `N^3` variables ([`anneal`]).
    BitFlip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams<T> {
    pub y_penalty: T,
    pub check_final: bool,
    pub route: RouteOptions,
    pub solver: RouteSolver,
}

impl<T: Scalar> Default for EvalParams<T> {
    fn default() -> Self {
        Self {
            y_penalty: lit(10.0),
            check_final: false,
            route: RouteOptions::default(),
            solver: RouteSolver::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    /// `None` when no restart produced a decodable tour.
    pub tour: Option<Tour>,
    pub a: T,
    pub b: T,
    pub y: T,
    pub feasible: bool,
    /// Routing-objective energy of the decoded assignment.
    pub soft_energy: Option<T>,
    pub trace: Option<BatteryTrace<T>>,
}

impl<T: Scalar> Evaluation<T> {
    /// Stand-in for a failed route solve: `a = 0`, `b = N * y_penalty`.
    pub fn sentinel(n: usize, y_penalty: T) -> Self {
        let b = from_usize::<T>(n) * y_penalty;
        Self {
            tour: None,
            a: T::zero(),
            b,
            y: b,
            feasible: false,
            soft_energy: None,
            trace: None,
        }
    }
}

/// Scores a fixed tour under a station configuration.
pub fn evaluate_tour<T: Scalar>(
    inst: &ProblemInstance<T>,
    stations: &StationConfig,
    tour: Tour,
    params: &EvalParams<T>,
) -> Result<Evaluation<T>> {
    let a = travel_cost(&tour, inst);
    let trace = simulate_battery(&tour, stations, inst, params.route.charge_point)?;
    let b = constraint_penalty(&trace, params.y_penalty, params.check_final);
    Ok(Evaluation {
        tour: Some(tour),
        a,
        b,
        y: a + b,
        feasible: b == T::zero(),
        soft_energy: None,
        trace: Some(trace),
    })
}

/// Routes with simulated annealing under `stations`, then scores the route.
///
/// Restarts are tried best-energy first until one decodes; if none does the
/// sentinel evaluation is returned. Only the bit-flip solver can fail to decode.
pub fn evaluate_config<T: Scalar>(
    inst: &ProblemInstance<T>,
    stations: &StationConfig,
    weights: &PenaltyWeights<T>,
    sched: &SaSchedule<T>,
    params: &EvalParams<T>,
) -> Result<Evaluation<T>> {
    let model = total_penalty_model(inst, stations, weights, &params.route)?;
    let result = match params.solver {
        RouteSolver::Tour => anneal_tours(&model, inst.n(), inst.start(), params.route.close_tour, sched),
        RouteSolver::BitFlip => anneal(&model, sched),
    };
    for r in result.restarts_by_energy() {
        if let Ok(tour) = decode_tour(&result.per_restart_bits[r], inst, params.route.close_tour) {
            let mut eval = evaluate_tour(inst, stations, tour, params)?;
            eval.soft_energy = Some(result.per_restart_energies[r]);
            return Ok(eval);
        }
    }
    Ok(Evaluation::sentinel(inst.n(), params.y_penalty))
}
