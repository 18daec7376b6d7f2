mod common;

use common::*;
use evbocs::route::{battery_penalty_model, tsp_penalty_model};
use evbocs::{
    build_battery_qubo, build_total_qubo, build_tsp_qubo, decode_tour, encode_tour, simulate_battery,
    total_penalty_model, travel_cost, ChargePoint, PenaltyWeights, RouteOptions, StationConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_config(m: usize, rng: &mut impl Rng) -> StationConfig {
    StationConfig::new((0..m).map(|_| rng.random::<bool>()).collect())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn tsp_energy_is_travel_cost_on_every_tour() {
    let opts = RouteOptions::default();
    for (n, seed) in [(3, 1), (4, 2), (5, 3)] {
        let inst = instance(n, n - 1, seed);
        let w = PenaltyWeights::defaults_for(&inst);
        let q = build_tsp_qubo(&inst, &w, &opts);
        for tour in all_tours(&inst) {
            let e = q.energy(&encode_tour(&tour, n)).unwrap();
            assert!(rel_close(e, tour_cost(&inst, &tour.order, true), 1e-9));
            assert!(rel_close(e, travel_cost(&tour, &inst), 1e-9));
        }
    }
}

#[test]
fn battery_energy_matches_aggregate_levels_on_every_tour() {
    let opts = RouteOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, seed) in [(3, 4), (4, 5), (5, 6)] {
        let inst = instance(n, n, seed);
        for _ in 0..4 {
            let s = random_config(n, &mut rng);
            let q = build_battery_qubo(&inst, &s, &opts).unwrap();
            for tour in all_tours(&inst) {
                let e = q.energy(&encode_tour(&tour, n)).unwrap();
                assert!(rel_close(e, battery_term(&inst, &s, &tour.order), 1e-9));
            }
        }
    }
}

#[test]
fn battery_qubo_matches_definition_on_arbitrary_assignments() {
    let opts = RouteOptions::default();
    let inst = instance(4, 3, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let s = random_config(3, &mut rng);
        let bits: Vec<bool> = (0..64).map(|_| rng.random::<f64>() < 0.2).collect();
        let expected = battery_term_of_bits(&inst, &s, &bits);
        let explicit = build_battery_qubo(&inst, &s, &opts).unwrap().energy(&bits).unwrap();
        let factored = battery_penalty_model(&inst, &s, &opts).unwrap().energy(&bits);
        assert!(rel_close(explicit, expected, 1e-9), "{explicit} vs {expected}");
        assert!(rel_close(factored, expected, 1e-9), "{factored} vs {expected}");
    }
}

#[test]
fn factored_and_explicit_totals_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for close_tour in [true, false] {
        for charge_point in [ChargePoint::Departure, ChargePoint::Arrival] {
            let opts = RouteOptions { close_tour, charge_point };
            let inst = instance(5, 4, 9);
            let w = PenaltyWeights::defaults_for(&inst);
            let s = random_config(4, &mut rng);
            let model = total_penalty_model(&inst, &s, &w, &opts).unwrap();
            let qubo = build_total_qubo(&inst, &s, &w, &opts).unwrap();
            for _ in 0..50 {
                let bits: Vec<bool> = (0..125).map(|_| rng.random::<f64>() < 0.1).collect();
                let (a, b) = (model.energy(&bits), qubo.energy(&bits).unwrap());
                assert!(rel_close(a, b, 1e-9), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn decode_inverts_encode_on_every_tour() {
    let inst = instance(4, 3, 1);
    for tour in all_tours(&inst) {
        let decoded = decode_tour(&encode_tour(&tour, 4), &inst, true).unwrap();
        assert_eq!(decoded, tour);
    }
}

#[test]
fn decode_accepts_exactly_when_tsp_penalties_vanish() {
    let inst = instance(4, 3, 2);
    let w = PenaltyWeights::defaults_for(&inst);
    let tsp = tsp_penalty_model(&inst, &w, &RouteOptions::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tours = all_tours(&inst);
    let (mut accepted, mut rejected) = (0, 0);
    for _ in 0..400 {
        let mut bits = encode_tour(&tours[rng.random_range(0..tours.len())], 4);
        for _ in 0..rng.random_range(0..3) {
            let v = rng.random_range(0..64);
            bits[v] = !bits[v];
        }
        let cost: f64 = (0..64)
            .filter(|&v| bits[v])
            .map(|v| inst.cost(v / 16, (v / 4) % 4))
            .sum();
        let penalty = tsp.energy(&bits) - cost;
        let ok = decode_tour(&bits, &inst, true).is_ok();
        assert_eq!(ok, penalty.abs() < 1e-9, "penalty {penalty}");
        if ok {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    assert!(accepted > 0 && rejected > 0);
}

fn tour_strategy() -> impl Strategy<Value = (u64, Vec<usize>, Vec<bool>)> {
    (any::<u64>(), Just((1..6).collect::<Vec<usize>>()).prop_shuffle(), proptest::collection::vec(any::<bool>(), 6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn levels_telescope((seed, rest, s) in tour_strategy()) {
        let inst = instance(6, 6, seed % 1000);
        let s = StationConfig::new(s);
        let mut order = vec![0];
        order.extend(rest);
        let tour = evbocs::Tour { order: order.clone(), closed: true };
        let trace = simulate_battery(&tour, &s, &inst, ChargePoint::Departure).unwrap();
        let levels = aggregate_levels(&inst, &s, &order);
        for t in 0..5 {
            prop_assert!((trace.level_end(t) - levels[t + 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn split_events_flag_every_aggregate_violation((seed, rest, s) in tour_strategy(), arrival in any::<bool>()) {
        let inst = instance(6, 6, seed % 1000);
        let s = StationConfig::new(s);
        let mut order = vec![0];
        order.extend(rest);
        let tour = evbocs::Tour { order, closed: true };
        let cp = if arrival { ChargePoint::Arrival } else { ChargePoint::Departure };
        let trace = simulate_battery(&tour, &s, &inst, cp).unwrap();
        let q_max = inst.battery().q_max;
        for t in 0..trace.steps.len() {
            let end = trace.level_end(t);
            if end < 0.0 || end > q_max {
                prop_assert!(trace.steps[t].violated());
            }
        }
    }

    #[test]
    fn zero_penalty_iff_checked_levels_in_range((seed, rest, s) in tour_strategy(), arrival in any::<bool>()) {
        let inst = instance(6, 6, seed % 1000);
        let s = StationConfig::new(s);
        let mut order = vec![0];
        order.extend(rest);
        let tour = evbocs::Tour { order: order.clone(), closed: true };
        let cp = if arrival { ChargePoint::Arrival } else { ChargePoint::Departure };
        let trace = simulate_battery(&tour, &s, &inst, cp).unwrap();
        let b = evbocs::constraint_penalty(&trace, 10.0, false);
        let oracle = split_event_penalty(&inst, &s, &order, cp, 10.0, false);
        prop_assert_eq!(b, oracle);
        let q_max = inst.battery().q_max;
        let in_range = trace.steps[..5].iter().all(|st| {
            [st.level_after_charge, st.level_after_move].iter().all(|&l| (0.0..=q_max).contains(&l))
        });
        prop_assert_eq!(b == 0.0, in_range);
    }
}
