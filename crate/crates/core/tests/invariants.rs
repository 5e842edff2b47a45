use ocrs::generate::{random_instance_seeded, random_multi_instance, uniform_kunit, RandomShape};
use ocrs::instance::validate;
use ocrs::io::{
    instance_from_json, instance_to_json, multi_instance_from_json, multi_instance_to_json,
};
use ocrs::knapsack::default_gamma;
use ocrs::oracle::{
    dp_value, monte_carlo, prophet_value, route, up_value, BestFitPolicy, DpPolicy,
    MagicianKnapsack,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(seed: u64) -> ocrs::instance::SingleResourceInstance {
    random_instance_seeded(
        seed,
        &RandomShape {
            horizon: 6,
            refinement: 2,
            max_scenarios: 2,
            min_budget: 0.5,
        },
    )
    .unwrap()
}

#[test]
fn sandwich_on_small_instances() {
    for seed in 0..10 {
        let inst = small(seed);
        let bf = BestFitPolicy::constant(&inst, default_gamma()).unwrap();
        let sim = monte_carlo(&bf, &inst, 20_000, seed).unwrap();
        let dp = dp_value(&inst).unwrap().value();
        let prophet = prophet_value(&inst, 0, seed).unwrap();
        let up = up_value(&inst).unwrap();
        assert!(prophet.exact);
        assert!(
            sim.mean <= dp + 3.0 * sim.se + 1e-12,
            "seed {}: sim {} dp {}",
            seed,
            sim.mean,
            dp
        );
        assert!(
            dp <= prophet.mean + 1e-9,
            "seed {}: dp {} prophet {}",
            seed,
            dp,
            prophet.mean
        );
        assert!(
            prophet.mean <= up + 1e-9,
            "seed {}: prophet {} up {}",
            seed,
            prophet.mean,
            up
        );
        assert!(sim.mean >= default_gamma() * up - 3.0 * sim.se);
    }
}

#[test]
fn dp_policy_simulates_to_dp_value() {
    let inst = small(3);
    let table = dp_value(&inst).unwrap();
    let v = table.value();
    let sim = monte_carlo(&DpPolicy { table }, &inst, 50_000, 1).unwrap();
    assert!(
        (sim.mean - v).abs() <= 4.0 * sim.se + 1e-12,
        "{} vs {}",
        sim.mean,
        v
    );
}

#[test]
fn seeded_runs_are_bit_identical() {
    let inst = uniform_kunit(2, 20).unwrap();
    let m = MagicianKnapsack::for_instance(&inst, None).unwrap();
    let a = monte_carlo(&m, &inst, 5000, 11).unwrap();
    let b = monte_carlo(&m, &inst, 5000, 11).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let c = monte_carlo(&m, &inst, 5000, 12).unwrap();
    assert_ne!(a.mean.to_bits(), c.mean.to_bits());
}

#[test]
fn magician_rate_matches_theta() {
    let inst = uniform_kunit(2, 50).unwrap();
    let m = MagicianKnapsack::for_instance(&inst, None).unwrap();
    let th = m.policy.theta;
    let sim = monte_carlo(&m, &inst, 100_000, 5).unwrap();
    let up = up_value(&inst).unwrap();
    assert!(sim.mean / up >= th - 3.0 * sim.se / up);
    assert_eq!(sim.capacity_violations, 0);
}

#[test]
fn multi_json_round_trip_and_routing() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mi = random_multi_instance(&mut rng, 3, 5, 2).unwrap();
    let back = multi_instance_from_json(&multi_instance_to_json(&mi)).unwrap();
    assert_eq!(multi_instance_to_json(&back), multi_instance_to_json(&mi));
    let r = route(&back).unwrap();
    let total: f64 = r.subs.iter().map(|s| up_value(s).unwrap()).sum();
    assert!((total - r.up).abs() <= 1e-8);
    for s in &r.subs {
        assert!(validate(s).ok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let inst = small(seed);
        let text = instance_to_json(&inst);
        prop_assert_eq!(instance_to_json(&instance_from_json(&text).unwrap()), text);
    }

    #[test]
    fn dp_between_best_fit_and_up(seed in any::<u64>()) {
        let inst = small(seed);
        let dp = dp_value(&inst).unwrap().value();
        let up = up_value(&inst).unwrap();
        let run = ocrs::knapsack::run_policy(&inst, default_gamma()).unwrap();
        prop_assert!(run.feasible);
        prop_assert!(run.expected_reward <= dp + 1e-9);
        prop_assert!(dp <= up + 1e-9);
        prop_assert!(run.expected_reward >= default_gamma() * up - 1e-9);
    }
}
