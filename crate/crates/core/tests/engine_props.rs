mod common;

use common::{delay_invariant_violation, pair, ring, EventBudget};
use lcm_core::engine::{Disorientation, MaxDelay, RandomFair};
use lcm_core::trace::default_window;
use lcm_core::{
    fairness_windows, monitor_gcncl, monitor_mlcv, registry, run_with, validate_schedule,
    RunConfig, SchedulerClass, Trace,
};
use proptest::prelude::*;

fn class() -> impl Strategy<Value = SchedulerClass> {
    proptest::sample::select(SchedulerClass::ALL.to_vec())
}

fn fuzz(class: SchedulerClass, seed: u64, n: usize, disorientation: Disorientation) -> Trace {
    let (sc, algo) = if n == 2 {
        (pair(), "half_move")
    } else {
        (ring(n, seed), "color_cycler")
    };
    let mut adv = EventBudget {
        inner: RandomFair::new(seed, disorientation),
        budget: 300,
    };
    run_with(
        &sc,
        &registry(algo).unwrap(),
        class,
        &mut adv,
        &RunConfig::new(300, seed),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn runs_are_valid_in_every_enclosing_class(class in class(), seed in any::<u64>(), n in 2usize..6) {
        let t = fuzz(class, seed, n, Disorientation::Variable);
        for outer in SchedulerClass::ALL.into_iter().filter(|c| class.is_within(*c)) {
            let v = validate_schedule(&t, outer);
            prop_assert!(v.is_empty(), "{class} run invalid under {outer}: {:?}", v.first());
        }
    }

    #[test]
    fn looks_see_only_earlier_commits(class in class(), seed in any::<u64>(), n in 2usize..6) {
        let t = fuzz(class, seed, n, Disorientation::Fixed);
        prop_assert_eq!(delay_invariant_violation(&t), None);
    }

    #[test]
    fn random_fair_is_fair(class in class(), seed in any::<u64>(), n in 2usize..6) {
        let t = fuzz(class, seed, n, Disorientation::Aligned);
        let report = fairness_windows(&t, default_window(n));
        prop_assert!(report.is_fair(), "{:?}", report.unfair.first());
    }

    #[test]
    fn persisted_traces_replay_identically(seed in any::<u64>()) {
        let t = fuzz(SchedulerClass::Asynch, seed, 2, Disorientation::Variable);
        let back = Trace::deserialize(&t.serialize()).unwrap();
        prop_assert_eq!(back.events(), t.events());
        prop_assert_eq!(back.current(), t.current());
        prop_assert_eq!(
            monitor_mlcv(&back, 1e-9, false).unwrap().to_string(),
            monitor_mlcv(&t, 1e-9, false).unwrap().to_string()
        );
    }
}

#[test]
fn stretched_moves_are_seen_mid_flight_and_stay_consistent() {
    let algo = registry("gcncl_quarter").unwrap();
    for seed in 0..20 {
        let mut adv = MaxDelay::new(seed, 4);
        let t = run_with(
            &pair(),
            &algo,
            SchedulerClass::LcAtomic,
            &mut adv,
            &RunConfig::new(60, seed),
        )
        .unwrap();
        assert!(validate_schedule(&t, SchedulerClass::LcAtomic).is_empty());
        assert!(!validate_schedule(&t, SchedulerClass::CmAtomic).is_empty());
        assert_eq!(delay_invariant_violation(&t), None);
        assert!(monitor_gcncl(&t).unwrap().is_satisfied(), "seed {seed}");
    }
}

#[test]
fn trace_file_round_trip() {
    let t = fuzz(SchedulerClass::LcAtomic, 11, 4, Disorientation::Variable);
    let dir = std::env::temp_dir().join(format!("lcm-core-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.jsonl");
    t.write_jsonl(std::fs::File::create(&path).unwrap())
        .unwrap();
    let back =
        Trace::read_jsonl(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.serialize(), t.serialize());
    std::fs::remove_dir_all(dir).unwrap();
}
