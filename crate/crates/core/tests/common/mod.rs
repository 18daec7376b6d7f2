//! Independent oracles shared by the integration and acceptance tests. None of
//! these call into the solver code they check.
#![allow(dead_code)]

use evbocs::{BatteryParams, ChargePoint, GenParams, Instance, QuboModel, StationConfig, Tour};

pub fn instance(n: usize, m: usize, seed: u64) -> Instance {
    evbocs::generate_instance(
        &GenParams {
            n,
            m,
            start: 0,
            seed,
            ..GenParams::default()
        },
        BatteryParams::reference(),
    )
    .unwrap()
}

/// All orderings of `items` (Heap's algorithm).
pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a = items.to_vec();
    let mut out = Vec::new();
    heap(a.len(), &mut a, &mut out);
    out
}

/// Every closed tour of `inst` starting at its start location.
pub fn all_tours(inst: &Instance) -> Vec<Tour> {
    let k = inst.start();
    let rest: Vec<usize> = (0..inst.n()).filter(|&c| c != k).collect();
    permutations(&rest)
        .into_iter()
        .map(|p| {
            let mut order = vec![k];
            order.extend(p);
            Tour { order, closed: true }
        })
        .collect()
}

pub fn moves(order: &[usize], closed: bool) -> Vec<(usize, usize)> {
    let mut mv: Vec<(usize, usize)> = (1..order.len()).map(|t| (order[t - 1], order[t])).collect();
    if closed {
        mv.push((order[order.len() - 1], order[0]));
    }
    mv
}

pub fn station_mask(inst: &Instance, s: &StationConfig) -> Vec<bool> {
    let mut mask = vec![false; inst.n()];
    for (c, &b) in inst.candidates().iter().zip(s.bits()) {
        mask[*c] = b;
    }
    mask
}

/// Direct summation of the tour's move costs.
pub fn tour_cost(inst: &Instance, order: &[usize], closed: bool) -> f64 {
    moves(order, closed).iter().map(|&(i, j)| inst.cost(i, j)).sum()
}

/// Aggregate levels `Q_1..Q_N` with the station charge added at departure.
pub fn aggregate_levels(inst: &Instance, s: &StationConfig, order: &[usize]) -> Vec<f64> {
    let n = inst.n();
    let b = inst.battery();
    let mask = station_mask(inst, s);
    let mv = moves(order, true);
    let mut q = vec![b.q_init];
    for &(i, j) in mv.iter().take(n - 1) {
        let charge = if mask[i] { b.q_charge } else { 0.0 };
        q.push(q.last().unwrap() - inst.cost(i, j) + charge);
    }
    q
}

/// `sum_t (Q_t - Q_standard)^2` over aggregate levels.
pub fn battery_term(inst: &Instance, s: &StationConfig, order: &[usize]) -> f64 {
    let qs = inst.battery().q_standard;
    aggregate_levels(inst, s, order).iter().map(|q| (q - qs) * (q - qs)).sum()
}

/// Battery term for an arbitrary assignment, straight from its definition.
pub fn battery_term_of_bits(inst: &Instance, s: &StationConfig, bits: &[bool]) -> f64 {
    let n = inst.n();
    let b = inst.battery();
    let mask = station_mask(inst, s);
    let mut total = 0.0;
    for t in 0..n {
        let mut q = b.q_init;
        for tp in 0..t {
            for i in 0..n {
                for j in 0..n {
                    if bits[i * n * n + j * n + tp] {
                        q -= inst.cost(i, j) - if mask[i] { b.q_charge } else { 0.0 };
                    }
                }
            }
        }
        total += (q - b.q_standard) * (q - b.q_standard);
    }
    total
}

/// Split-event replay: per move, charge then consume, each checked against
/// `[0, q_max]`; one penalty per violating checked step.
pub fn split_event_penalty(
    inst: &Instance,
    s: &StationConfig,
    order: &[usize],
    charge_point: ChargePoint,
    y_penalty: f64,
    check_final: bool,
) -> f64 {
    let b = inst.battery();
    let mask = station_mask(inst, s);
    let mv = moves(order, true);
    let checked = if check_final { mv.len() } else { mv.len().min(inst.n() - 1) };
    let mut level = b.q_init;
    let mut penalty = 0.0;
    for (t, &(i, j)) in mv.iter().enumerate() {
        let mut bad = false;
        match charge_point {
            ChargePoint::Departure => {
                // The departure level is checked whether or not a charge happens;
                // an unclamped surplus carried in from the previous move counts again.
                if mask[i] {
                    level += b.q_charge;
                }
                bad |= level > b.q_max;
                level -= inst.cost(i, j);
                bad |= level < 0.0 || level > b.q_max;
            }
            ChargePoint::Arrival => {
                level -= inst.cost(i, j);
                bad |= level < 0.0 || level > b.q_max;
                if mask[j] {
                    level += b.q_charge;
                    bad |= level > b.q_max;
                }
            }
        }
        if bad && t < checked {
            penalty += y_penalty;
        }
    }
    penalty
}

/// Minimum over every closed tour of `(cost + lambda4 * battery, order)`.
pub fn soft_optimum(inst: &Instance, s: &StationConfig, lambda4: f64) -> (f64, Vec<usize>) {
    all_tours(inst)
        .into_iter()
        .map(|t| (tour_cost(inst, &t.order, true) + lambda4 * battery_term(inst, s, &t.order), t.order))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap()
}

/// Brute-force QUBO minimum, ties to the lowest integer code.
pub fn naive_minimum(q: &QuboModel<f64>) -> (f64, u64) {
    let n = q.n_vars();
    let mut best = (f64::INFINITY, 0);
    for code in 0..1u64 << n {
        let bits: Vec<bool> = (0..n).map(|v| code >> v & 1 == 1).collect();
        let mut e = q.constant();
        for (&v, &c) in q.linear() {
            if bits[v] {
                e += c;
            }
        }
        for (&(u, v), &c) in q.quadratic() {
            if bits[u] && bits[v] {
                e += c;
            }
        }
        if e < best.0 - 1e-9 {
            best = (e, code);
        }
    }
    best
}

pub fn random_qubo(n: usize, rng: &mut impl rand::Rng) -> QuboModel<f64> {
    let mut q = QuboModel::new(n);
    q.add_constant(rng.random_range(-1.0..1.0));
    for v in 0..n {
        q.add_linear(v, rng.random_range(-1.0..1.0));
        for u in v + 1..n {
            if rng.random::<f64>() < 0.5 {
                q.add_quadratic(v, u, rng.random_range(-1.0..1.0));
            }
        }
    }
    q
}
