use proptest::prelude::*;

use evodyn::harness::{preset, resolve};
use evodyn::{BandPolicy, Mode, MutationScheme, RunConfig, ShiftSchedule, Simulator};

fn scheme_strategy() -> impl Strategy<Value = MutationScheme> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(|p| MutationScheme::fixed(p).unwrap()),
        (0.01f64..0.2, 0.2f64..=1.0).prop_map(|(lo, hi)| MutationScheme::banded(lo, hi, BandPolicy::Cycle).unwrap()),
        (0.01f64..0.2, 0.2f64..=1.0)
            .prop_map(|(lo, hi)| MutationScheme::banded(lo, hi, BandPolicy::LogUniform).unwrap()),
        prop::collection::vec(0.0f64..=1.0, 1..4).prop_map(|m| MutationScheme::oracle_greedy(m).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn run_records_are_consistent(
        n in 1usize..24,
        lambda in 1usize..6,
        sigma in 1e-4f64..=0.5,
        scheme in scheme_strategy(),
        cap in 1u64..300,
        epsilon in 0.0f64..0.6,
        seed in any::<u64>(),
        genome in any::<bool>(),
    ) {
        let mode = if genome { Mode::Genome } else { Mode::Count };
        let config = RunConfig::new(n, lambda, scheme, ShiftSchedule::fixed(sigma).unwrap(), cap, seed)
            .with_epsilon(epsilon)
            .with_mode(mode)
            .with_traces(true);
        let sim = Simulator::new(config).unwrap();
        let rec = sim.run_replication(3);
        prop_assert_eq!(rec.evaluations, rec.generations * (1 + lambda as u64));
        prop_assert!(rec.generations >= 1 && rec.generations <= cap);
        if let Some(h) = rec.hit_generation {
            prop_assert_eq!(h + 1, rec.generations);
            prop_assert_eq!(rec.final_matching, n);
            let e = rec.eps_hit_generation.expect("optimum satisfies every ratio");
            prop_assert!(e <= h);
        } else {
            prop_assert_eq!(rec.generations, cap);
        }
        let trace = rec.matching_trace.as_ref().unwrap();
        prop_assert_eq!(trace.len() as u64, rec.generations);
        prop_assert_eq!(*trace.iter().max().unwrap(), rec.best_matching);
        let ratios = rec.best_ratio_trace.as_ref().unwrap();
        prop_assert!(ratios.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(rec.clone(), sim.run_replication(3));
    }

    #[test]
    fn resolution_is_pure(pick in 0usize..4) {
        let name = ["droste-easy", "one-one-hard", "one-lambda-easy", "one-lambda-hard"][pick];
        let spec = preset(name).unwrap();
        let a = resolve(&spec).unwrap();
        let b = resolve(&spec).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.describe(), y.describe());
            prop_assert_eq!(x.config.seed, y.config.seed);
        }
    }
}
