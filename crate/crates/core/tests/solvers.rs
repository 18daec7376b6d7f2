mod common;

use common::*;
use evbocs::{solve_exhaustive, solve_sa, SaSchedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn exhaustive_matches_naive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let q = random_qubo(12, &mut rng);
        let (e, code) = naive_minimum(&q);
        let r = solve_exhaustive(&q).unwrap();
        let found: u64 = r.best_bits.iter().enumerate().map(|(v, &b)| (b as u64) << v).sum();
        assert!((r.best_energy - e).abs() < 1e-9);
        assert_eq!(found, code);
    }
}

#[test]
fn annealing_reaches_the_exact_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut hits = 0;
    for k in 0..100 {
        let q = random_qubo(20, &mut rng);
        let exact = solve_exhaustive(&q).unwrap().best_energy;
        let sched = SaSchedule {
            sweeps: 500,
            restarts: 10,
            seed: k,
            ..SaSchedule::default()
        };
        let sa = solve_sa(&q, &sched);
        assert!(sa.best_energy >= exact - 1e-9);
        if sa.best_energy <= exact + 1e-9 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn annealing_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = random_qubo(16, &mut rng);
    let sched = SaSchedule {
        sweeps: 100,
        seed: 42,
        ..SaSchedule::default()
    };
    assert_eq!(solve_sa(&q, &sched), solve_sa(&q, &sched));
}
